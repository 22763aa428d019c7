use alloc::vec::Vec;

use crate::math::{Mat3, Vec3};

/// Lagrangian state of one material point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    /// Position (m).
    pub x: Vec3,
    /// Velocity (m/s).
    pub v: Vec3,
    /// Mass (kg).
    pub mass: f64,
    /// Reference volume (m³).
    pub volume0: f64,
    /// Deformation gradient.
    pub f: Mat3,
    /// APIC affine velocity matrix (1/s).
    pub c: Mat3,
    /// Cauchy stress (Pa) from the last constitutive update.
    pub stress: Mat3,
    /// Index into the solver's material table.
    pub material: u16,
}

impl Particle {
    pub fn new(x: Vec3, mass: f64, volume0: f64, material: u16) -> Self {
        Self {
            x,
            v: Vec3::zeros(),
            mass,
            volume0,
            f: Mat3::identity(),
            c: Mat3::zeros(),
            stress: Mat3::zeros(),
            material,
        }
    }

    pub fn with_velocity(mut self, v: Vec3) -> Self {
        self.v = v;
        self
    }

    /// Current volume `det(F)·V0`.
    pub fn volume(&self) -> f64 {
        self.f.determinant() * self.volume0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
}

impl ParticleSet {
    pub fn new(particles: Vec<Particle>) -> Self {
        Self { particles }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Particle> {
        self.particles.iter()
    }

    pub fn total_mass(&self) -> f64 {
        self.particles.iter().map(|p| p.mass).sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.particles.iter().map(|p| p.mass * p.v).sum()
    }

    pub fn max_speed(&self) -> f64 {
        self.particles
            .iter()
            .map(|p| p.v.norm())
            .fold(0.0, f64::max)
    }

    pub fn positions(&self) -> impl Iterator<Item = &Vec3> {
        self.particles.iter().map(|p| &p.x)
    }
}

impl From<Vec<Particle>> for ParticleSet {
    fn from(particles: Vec<Particle>) -> Self {
        Self::new(particles)
    }
}
