//! Scenario files, terrain and CSV output, run metrics and backend comparison
//! for the `sparse-mpm-core` solver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod metrics;
pub mod output;
pub mod run;
pub mod sampling;
pub mod terrain;

pub use config::{load_config, write_config, ScenarioConfig};
pub use error::{Error, Result};
pub use metrics::{
    compare, read_metrics, sliding_box_oracle, sparsity_ratio, write_metrics, write_report, Comparison, RunMetrics,
};
pub use output::{read_particles, write_particles, ParticleRow};
pub use run::{run_scenario, RunOptions, RunOutcome, Scenario};
pub use sampling::sample_box;
pub use terrain::load_heightfield;
