//! Nodal field storage indexed by compact node index.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::math::Vec3;

/// Bytes stored per allocated node: mass, momentum, force and velocity.
pub const BYTES_PER_NODE: usize = 8 + 3 * 8 + 3 * 8 + 3 * 8;

/// `f64` with an atomic add built on compare-and-swap.
#[derive(Default)]
#[repr(transparent)]
pub struct AtomicF64(AtomicU64);

impl AtomicF64 {
    pub fn new(v: f64) -> Self {
        Self(AtomicU64::new(v.to_bits()))
    }

    #[inline]
    pub fn load(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    #[inline]
    pub fn store(&self, v: f64) {
        self.0.store(v.to_bits(), Ordering::Relaxed)
    }

    /// Non-atomic read-modify-write; only valid without concurrent writers.
    #[inline]
    pub fn add_exclusive(&self, v: f64) {
        self.store(self.load() + v)
    }

    #[inline]
    pub fn fetch_add(&self, v: f64) -> f64 {
        let mut cur = self.0.load(Ordering::Relaxed);
        loop {
            let new = (f64::from_bits(cur) + v).to_bits();
            match self
                .0
                .compare_exchange_weak(cur, new, Ordering::Relaxed, Ordering::Relaxed)
            {
                Ok(prev) => return f64::from_bits(prev),
                Err(actual) => cur = actual,
            }
        }
    }
}

impl core::fmt::Debug for AtomicF64 {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        self.load().fmt(f)
    }
}

/// Scatter targets of one node.
#[derive(Debug, Default)]
pub struct NodeAccumulator {
    pub mass: AtomicF64,
    pub momentum: [AtomicF64; 3],
    pub force: [AtomicF64; 3],
}

impl NodeAccumulator {
    #[inline]
    pub fn momentum(&self) -> Vec3 {
        Vec3::new(self.momentum[0].load(), self.momentum[1].load(), self.momentum[2].load())
    }

    #[inline]
    pub fn force(&self) -> Vec3 {
        Vec3::new(self.force[0].load(), self.force[1].load(), self.force[2].load())
    }
}

#[derive(Debug, Default)]
pub struct NodalFields {
    pub(crate) accum: Vec<NodeAccumulator>,
    /// Post-update nodal velocity (m/s).
    pub(crate) velocity: Vec<Vec3>,
}

impl NodalFields {
    pub fn new() -> Self {
        Self::default()
    }

    /// Resizes to `n` nodes and zeroes every field. Capacity is reused.
    pub fn reset(&mut self, n: usize) {
        self.accum.clear();
        self.accum.resize_with(n, NodeAccumulator::default);
        self.velocity.clear();
        self.velocity.resize(n, Vec3::zeros());
    }

    pub fn len(&self) -> usize {
        self.accum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accum.is_empty()
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.accum[i].mass.load()
    }

    pub fn momentum(&self, i: usize) -> Vec3 {
        self.accum[i].momentum()
    }

    pub fn force(&self, i: usize) -> Vec3 {
        self.accum[i].force()
    }

    pub fn velocity(&self, i: usize) -> Vec3 {
        self.velocity[i]
    }

    pub fn velocities(&self) -> &[Vec3] {
        &self.velocity
    }

    pub fn velocities_mut(&mut self) -> &mut [Vec3] {
        &mut self.velocity
    }

    /// Bytes held by `n` allocated nodes.
    pub fn bytes_for(n: usize) -> usize {
        n * BYTES_PER_NODE
    }

    /// Total nodal mass and momentum, summed in node order.
    pub fn totals(&self) -> (f64, Vec3) {
        self.accum.iter().fold((0.0, Vec3::zeros()), |(m, p), a| {
            (m + a.mass.load(), p + a.momentum())
        })
    }
}
