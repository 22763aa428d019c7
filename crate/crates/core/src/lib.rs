//! Explicit APIC material point method over dense or block-sparse background grids.
//!
//! The sparse grids only store blocks of `B³` nodes that lie inside the
//! interpolation support of at least one particle. Two interchangeable
//! constructions build the same compact block map:
//!
//! * [`sparse_scan`]: block activity mask followed by a three-phase parallel
//!   exclusive scan;
//! * [`sparse_hash`]: concurrent insertion of packed block keys into an
//!   open-addressing table that hands out compact indices as it goes.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. Parallel execution and phase timing need `std`.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod boundary;
pub mod error;
pub mod fields;
pub mod grid_index;
pub mod kernel;
pub mod layout;
pub mod material;
pub mod math;
pub mod parallel;
pub mod particles;
pub mod solver;
pub mod sparse_hash;
pub mod sparse_scan;

pub use boundary::{apply_friction_boundary, Boundary, Heightfield};
pub use error::{Error, Result};
pub use fields::NodalFields;
pub use grid_index::{
    block_of, local_decode, local_offset, mix64, pack_key, unpack_key, ActiveIndexMap, BlockCoord,
    NodeTuple, PackedKey, DEFAULT_BIAS, DEFAULT_BITS,
};
pub use kernel::{bspline_weights, KernelWeights};
pub use layout::{Backend, DenseLayout, GridLayout};
pub use material::{update_stress, MaterialKind, MaterialModel};
pub use parallel::Executor;
pub use particles::{Particle, ParticleSet};
pub use solver::{g2p, grid_forces, grid_update, p2g, update_stresses, PhaseTimes, SimConfig, Solver, StepReport};
pub use sparse_hash::{build_hash_sparse_grid, BlockHashTable};
pub use sparse_scan::{build_scan_sparse_grid, parallel_exclusive_scan, BlockMask};

/// Number of grid nodes per axis in the quadratic B-spline support.
pub const SUPPORT: usize = 3;
/// Nodes in one particle's support.
pub const STENCIL: usize = SUPPORT * SUPPORT * SUPPORT;
/// Default block edge length in nodes.
pub const DEFAULT_BLOCK_SIZE: i32 = 4;
