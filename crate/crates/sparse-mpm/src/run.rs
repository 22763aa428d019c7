//! Scenario assembly and the simulation driver.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sparse_mpm_core::math::Vec3;
use sparse_mpm_core::{Backend, Boundary, MaterialModel, Particle, ParticleSet, SimConfig, Solver};

use crate::config::{BoundarySection, ScenarioConfig};
use crate::error::{Error, Result};
use crate::metrics::{write_metrics, RunMetrics};
use crate::output::write_particles;
use crate::sampling::sample_box;
use crate::terrain::load_heightfield;

/// Slack when deciding that the clock has reached a frame or the end time.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub backend: Backend,
    pub threads: usize,
    pub deterministic: bool,
    /// Frames and metrics go here; nothing is written when `None`.
    pub out: Option<PathBuf>,
    /// Stop after this many steps even if the end time is not reached.
    pub max_steps: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Dense,
            threads: 1,
            deterministic: false,
            out: None,
            max_steps: None,
        }
    }
}

/// Everything needed to construct a [`Solver`].
#[derive(Debug, Clone)]
pub struct Scenario {
    pub sim: SimConfig,
    pub materials: Vec<MaterialModel>,
    pub boundaries: Vec<Boundary>,
    pub particles: ParticleSet,
    pub end_time: f64,
    pub frames_per_second: f64,
    pub config_hash: String,
}

impl Scenario {
    /// Resolves materials, samples bodies and loads terrain files relative to `base_dir`.
    pub fn build(config: &ScenarioConfig, base_dir: &Path) -> Result<Self> {
        config.validate()?;
        let s = &config.simulation;
        let materials = config
            .materials
            .iter()
            .map(|m| m.model().map_err(Error::Config))
            .collect::<Result<Vec<_>>>()?;

        let mut particles = Vec::new();
        for body in &config.bodies {
            let idx = config.material_index(&body.material).expect("validated");
            let rho = materials[idx].density;
            let (points, volume) = sample_box(body.min_m, body.max_m, s.particles_per_cell, s.h_m)?;
            let v = Vec3::from(body.velocity_m_s);
            particles.extend(
                points
                    .into_iter()
                    .map(|x| Particle::new(x, rho * volume, volume, idx as u16).with_velocity(v)),
            );
        }

        let boundaries = config
            .boundaries
            .iter()
            .map(|b| match b {
                BoundarySection::HalfSpace {
                    point_m,
                    normal,
                    friction,
                } => Ok(Boundary::half_space(Vec3::from(*point_m), Vec3::from(*normal), *friction)?),
                BoundarySection::Heightfield { path, friction } => Ok(Boundary::Heightfield {
                    field: load_heightfield(base_dir.join(path))?,
                    friction: *friction,
                }),
            })
            .collect::<Result<Vec<_>>>()?;

        let mut sim = SimConfig::new(s.h_m, Vec3::from(s.domain_min_m), Vec3::from(s.domain_max_m));
        sim.gravity = Vec3::from(config.effective_gravity());
        sim.dt = s.dt_s;
        sim.cfl = s.cfl;
        sim.block_size = s.block_size;
        sim.hash_capacity = s.hash_capacity;

        Ok(Self {
            sim,
            materials,
            boundaries,
            particles: ParticleSet::new(particles),
            end_time: s.end_time_s,
            frames_per_second: config.output.frames_per_second,
            config_hash: config.config_hash(),
        })
    }

    pub fn solver(&self, options: &RunOptions) -> Result<Solver> {
        let mut sim = self.sim.clone();
        sim.backend = options.backend;
        sim.threads = options.threads;
        sim.deterministic = options.deterministic;
        Ok(Solver::new(
            sim,
            self.materials.clone(),
            self.boundaries.clone(),
            self.particles.clone(),
        )?)
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub metrics: RunMetrics,
    pub solver: Solver,
    pub frames_written: usize,
}

/// Runs the scenario to its end time (or `max_steps`), writing a frame at
/// every multiple of `1 / frames_per_second` and `metrics.csv` at the end.
pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<RunOutcome> {
    let mut solver = scenario.solver(options)?;
    let mut metrics = RunMetrics::new(
        options.backend,
        solver.threads(),
        options.deterministic,
        scenario.config_hash.clone(),
        solver.n_dense(),
    );
    if let Some(dir) = &options.out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let frame_interval = 1.0 / scenario.frames_per_second;
    let mut frame = 0usize;
    let mut frames_written = 0usize;

    let mut emit = |solver: &Solver, frame: usize, metrics: &mut RunMetrics| -> Result<()> {
        if let Some(dir) = &options.out {
            let start = Instant::now();
            write_particles(frame, solver.particles(), dir)?;
            metrics.io_time += start.elapsed().as_secs_f64();
            frames_written += 1;
        }
        Ok(())
    };

    emit(&solver, frame, &mut metrics)?;
    frame += 1;
    let mut next_frame = frame as f64 * frame_interval;
    loop {
        let now = solver.time();
        if now >= scenario.end_time - TIME_EPS {
            break;
        }
        if options.max_steps.is_some_and(|m| solver.steps() >= m) {
            break;
        }
        let limit = next_frame.min(scenario.end_time) - now;
        let report = solver.step_limited(limit)?;
        metrics.record(&report);
        if solver.time() >= next_frame - TIME_EPS {
            emit(&solver, frame, &mut metrics)?;
            frame += 1;
            next_frame = frame as f64 * frame_interval;
        }
    }
    if let Some(dir) = &options.out {
        write_metrics(&metrics, dir.join("metrics.csv"))?;
    }
    Ok(RunOutcome {
        metrics,
        solver,
        frames_written,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::output::read_particles;

    const DROP: &str = r#"
schema_version = 1
name = "drop"

[simulation]
h_m = 0.1
domain_min_m = [0.0, 0.0, 0.0]
domain_max_m = [1.0, 1.0, 1.0]
end_time_s = 0.05

[output]
frames_per_second = 100

[[materials]]
name = "jelly"
kind = "elastic"
density_kg_m3 = 1000.0
youngs_modulus_pa = 1e4
poisson_ratio = 0.3

[[bodies]]
material = "jelly"
min_m = [0.4, 0.4, 0.3]
max_m = [0.6, 0.6, 0.5]
velocity_m_s = [0.5, 0.0, 0.0]

[[boundaries]]
kind = "half_space"
point_m = [0.0, 0.0, 0.2]
normal = [0.0, 0.0, 1.0]
friction = 0.5
"#;

    fn scenario() -> Scenario {
        let c = ScenarioConfig::from_toml_str(DROP, Path::new("drop.toml")).unwrap();
        Scenario::build(&c, Path::new(".")).unwrap()
    }

    #[test]
    fn frames_follow_the_cadence() {
        let dir = tempfile::tempdir().unwrap();
        let s = scenario();
        assert_eq!(s.particles.len(), 64);
        let opts = RunOptions {
            out: Some(dir.path().to_path_buf()),
            ..RunOptions::default()
        };
        let out = run_scenario(&s, &opts).unwrap();
        assert_eq!(out.frames_written, 6);
        assert!((out.solver.time() - 0.05).abs() < 1e-9);
        for f in 0..6 {
            assert!(dir.path().join(format!("frame_{f:06}.csv")).exists());
        }
        assert!(!dir.path().join("frame_000006.csv").exists());
        assert!(dir.path().join("metrics.csv").exists());
        let last = read_particles(dir.path().join("frame_000005.csv")).unwrap();
        assert_eq!(last.len(), 64);
        assert_eq!(last[7].x, out.solver.particles().particles[7].x.x);
    }

    #[test]
    fn backends_write_identical_frames() {
        let s = scenario();
        let mut finals = Vec::new();
        for backend in Backend::ALL {
            let dir = tempfile::tempdir().unwrap();
            let opts = RunOptions {
                backend,
                deterministic: true,
                out: Some(dir.path().to_path_buf()),
                ..RunOptions::default()
            };
            run_scenario(&s, &opts).unwrap();
            finals.push(fs::read(dir.path().join("frame_000005.csv")).unwrap());
        }
        assert_eq!(finals[0], finals[1]);
        assert_eq!(finals[0], finals[2]);
    }

    #[test]
    fn max_steps_stops_early() {
        let opts = RunOptions {
            max_steps: Some(3),
            backend: Backend::Hash,
            ..RunOptions::default()
        };
        let out = run_scenario(&scenario(), &opts).unwrap();
        assert_eq!(out.metrics.steps.len(), 3);
        assert_eq!(out.frames_written, 0);
    }
}
