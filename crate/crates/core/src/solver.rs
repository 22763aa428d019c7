//! Explicit APIC time stepping: particle-to-grid, grid update, grid-to-particle.

use alloc::vec::Vec;

use crate::boundary::Boundary;
use crate::error::{Error, Result};
use crate::fields::{AtomicF64, NodalFields};
use crate::kernel::{bspline_weights, support_base};
use crate::layout::{Backend, DenseLayout, GridLayout};
use crate::material::{update_stress, MaterialModel};
use crate::math::{Mat3, Vec3};
use crate::parallel::Executor;
use crate::particles::{Particle, ParticleSet};
use crate::sparse_hash::build_hash_sparse_grid;
use crate::sparse_scan::build_scan_sparse_grid;
use crate::{DEFAULT_BLOCK_SIZE, SUPPORT};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Grid spacing (m).
    pub h: f64,
    /// m/s²
    pub gravity: Vec3,
    /// Lower corner of the declared simulation box (m).
    pub domain_min: Vec3,
    /// Upper corner of the declared simulation box (m).
    pub domain_max: Vec3,
    /// Fixed step (s). The CFL limit still applies when it is smaller.
    pub dt: Option<f64>,
    pub cfl: f64,
    pub block_size: i32,
    pub backend: Backend,
    pub threads: usize,
    /// Serial particle-to-grid scatter, making results independent of the
    /// thread count and identical across backends.
    pub deterministic: bool,
    /// Starting slot count of the hash backend; must be a power of two.
    pub hash_capacity: usize,
}

impl SimConfig {
    pub fn new(h: f64, domain_min: Vec3, domain_max: Vec3) -> Self {
        Self {
            h,
            gravity: Vec3::new(0.0, 0.0, -9.81),
            domain_min,
            domain_max,
            dt: None,
            cfl: 0.4,
            block_size: DEFAULT_BLOCK_SIZE,
            backend: Backend::Dense,
            threads: 1,
            deterministic: false,
            hash_capacity: 1024,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Config("grid spacing h must be positive"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Config("CFL number must lie in (0, 1]"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config("time step must be positive"));
            }
        }
        if !(2..=16).contains(&self.block_size) {
            return Err(Error::Config("block size must lie in [2, 16]"));
        }
        if self.threads == 0 {
            return Err(Error::Config("thread count must be at least 1"));
        }
        if !self.hash_capacity.is_power_of_two() {
            return Err(Error::Config("hash capacity must be a power of two"));
        }
        if (0..3).any(|a| !self.gravity[a].is_finite()) {
            return Err(Error::Config("gravity must be finite"));
        }
        DenseLayout::from_domain(&self.domain_min, &self.domain_max, self.h).map(|_| ())
    }
}

/// Wall time of each phase of one step (s). Zero without the `std` feature.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimes {
    pub map_build: f64,
    pub alloc: f64,
    pub p2g: f64,
    pub grid_update: f64,
    pub g2p: f64,
    pub stress: f64,
}

impl PhaseTimes {
    pub fn total(&self) -> f64 {
        self.map_build + self.alloc + self.p2g + self.grid_update + self.g2p + self.stress
    }

    pub fn accumulate(&mut self, other: &PhaseTimes) {
        self.map_build += other.map_build;
        self.alloc += other.alloc;
        self.p2g += other.p2g;
        self.grid_update += other.grid_update;
        self.g2p += other.g2p;
        self.stress += other.stress;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// 1-based step number.
    pub step: u64,
    /// Simulated time at the end of the step (s).
    pub time: f64,
    pub dt: f64,
    /// Nodes that received mass.
    pub n_active: usize,
    /// Nodes allocated for the step.
    pub allocated: usize,
    /// Active blocks; zero for the dense backend.
    pub n_blocks_active: usize,
    /// Nodal mass and momentum right after the scatter.
    pub grid_mass: f64,
    pub grid_momentum: Vec3,
    /// Particle mass and momentum at the start of the step.
    pub particle_mass: f64,
    pub particle_momentum: Vec3,
    pub phases: PhaseTimes,
}

struct Stopwatch {
    #[cfg(feature = "std")]
    last: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(feature = "std")]
            last: std::time::Instant::now(),
        }
    }

    fn lap(&mut self) -> f64 {
        #[cfg(feature = "std")]
        {
            let now = std::time::Instant::now();
            let dt = now.duration_since(self.last).as_secs_f64();
            self.last = now;
            dt
        }
        #[cfg(not(feature = "std"))]
        {
            0.0
        }
    }
}

#[derive(Clone, Copy)]
struct ScatterTerms<'a> {
    momentum: bool,
    forces: Option<&'a Vec3>,
}

#[inline]
fn scatter_particle(
    p: &Particle,
    layout: &GridLayout,
    fields: &NodalFields,
    h: f64,
    terms: ScatterTerms<'_>,
    add: impl Fn(&AtomicF64, f64),
) -> Result<()> {
    let w = bspline_weights(&p.x, h);
    let stencil = layout.stencil_indices(w.base)?;
    let affine = p.c;
    let stress_volume = p.stress * p.volume();
    for a in 0..SUPPORT {
        for b in 0..SUPPORT {
            for c in 0..SUPPORT {
                let node = &fields.accum[stencil[(a * 3 + b) * 3 + c]];
                let wm = w.weight(a, b, c) * p.mass;
                if terms.momentum {
                    add(&node.mass, wm);
                    let mv = wm * (p.v + affine * w.offset(a, b, c));
                    for d in 0..3 {
                        add(&node.momentum[d], mv[d]);
                    }
                }
                if let Some(g) = terms.forces {
                    let f = -(stress_volume * w.gradient(a, b, c)) + wm * g;
                    for d in 0..3 {
                        add(&node.force[d], f[d]);
                    }
                }
            }
        }
    }
    Ok(())
}

fn scatter(
    particles: &[Particle],
    layout: &GridLayout,
    fields: &NodalFields,
    h: f64,
    terms: ScatterTerms<'_>,
    exec: &Executor,
) -> Result<()> {
    if layout.node_count() != fields.len() {
        return Err(Error::Config("nodal fields do not match the grid layout"));
    }
    if exec.is_parallel() {
        exec.try_for_each(particles, |_, p| {
            scatter_particle(p, layout, fields, h, terms, |a, v| {
                a.fetch_add(v);
            })
        })
    } else {
        particles
            .iter()
            .try_for_each(|p| scatter_particle(p, layout, fields, h, terms, |a, v| a.add_exclusive(v)))
    }
}

/// Scatters mass and APIC momentum `Σ N m_p (v_p + C_p (x_n − x_p))` onto zeroed fields.
pub fn p2g(particles: &ParticleSet, layout: &GridLayout, fields: &NodalFields, h: f64, exec: &Executor) -> Result<()> {
    let terms = ScatterTerms {
        momentum: true,
        forces: None,
    };
    scatter(&particles.particles, layout, fields, h, terms, exec)
}

/// Accumulates `f_n = −Σ ∇N σ_p V_p + Σ N m_p g`.
pub fn grid_forces(
    particles: &ParticleSet,
    layout: &GridLayout,
    fields: &NodalFields,
    h: f64,
    gravity: &Vec3,
    exec: &Executor,
) -> Result<()> {
    let terms = ScatterTerms {
        momentum: false,
        forces: Some(gravity),
    };
    scatter(&particles.particles, layout, fields, h, terms, exec)
}

/// Normalizes momentum, integrates forces over `dt` and applies the
/// boundaries. Nodes lighter than `mass_floor` get zero velocity.
/// Returns the number of nodes with positive mass.
pub fn grid_update(
    fields: &mut NodalFields,
    layout: &GridLayout,
    h: f64,
    dt: f64,
    mass_floor: f64,
    boundaries: &[Boundary],
    exec: &Executor,
) -> usize {
    let NodalFields { accum, velocity } = fields;
    let accum = &*accum;
    exec.for_each_mut(velocity, |i, v| {
        let node = &accum[i];
        let m = node.mass.load();
        if !(m > 0.0) || m < mass_floor {
            *v = Vec3::zeros();
            return;
        }
        let mut vn = node.momentum() / m;
        vn += node.force() * (dt / m);
        if !boundaries.is_empty() {
            let n = layout.node_at(i);
            let x = Vec3::new(f64::from(n.i) * h, f64::from(n.j) * h, f64::from(n.k) * h);
            for b in boundaries {
                vn = b.project(&x, vn);
            }
        }
        *v = vn;
    });
    exec.count(accum.len(), |i| u64::from(accum[i].mass.load() > 0.0)) as usize
}

/// Gathers nodal velocities back to particles and advances `v`, `C`, `x`, `F`.
pub fn g2p(
    particles: &mut ParticleSet,
    layout: &GridLayout,
    fields: &NodalFields,
    h: f64,
    dt: f64,
    exec: &Executor,
) -> Result<()> {
    let inv_d = 4.0 / (h * h);
    let velocity = fields.velocities();
    exec.try_for_each_mut(&mut particles.particles, |idx, p| {
        let w = bspline_weights(&p.x, h);
        let stencil = layout.stencil_indices(w.base)?;
        let mut v = Vec3::zeros();
        let mut b_mat = Mat3::zeros();
        let mut grad_v = Mat3::zeros();
        for a in 0..SUPPORT {
            for b in 0..SUPPORT {
                for c in 0..SUPPORT {
                    let vn = velocity[stencil[(a * 3 + b) * 3 + c]];
                    let wt = w.weight(a, b, c);
                    v += wt * vn;
                    b_mat += (wt * vn) * w.offset(a, b, c).transpose();
                    grad_v += vn * w.gradient(a, b, c).transpose();
                }
            }
        }
        p.v = v;
        p.c = b_mat * inv_d;
        p.f = (Mat3::identity() + dt * grad_v) * p.f;
        p.x += dt * v;
        if !(p.x.iter().all(|c| c.is_finite()) && p.f.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite(idx));
        }
        Ok(())
    })
}

/// Recomputes every particle's stress, applying plastic corrections to `F`.
pub fn update_stresses(particles: &mut ParticleSet, materials: &[MaterialModel], exec: &Executor) -> Result<()> {
    exec.try_for_each_mut(&mut particles.particles, |idx, p| {
        let material = materials
            .get(usize::from(p.material))
            .ok_or(Error::Config("particle refers to an unknown material"))?;
        let (sigma, corrected) = update_stress(&p.f, material).map_err(|e| match e {
            Error::InvertedParticle { det, .. } => Error::InvertedParticle { index: idx, det },
            other => other,
        })?;
        if let Some(f) = corrected {
            p.f = f;
        }
        p.stress = sigma;
        Ok(())
    })
}

/// Simulation state plus the machinery to advance it.
#[derive(Debug)]
pub struct Solver {
    config: SimConfig,
    materials: Vec<MaterialModel>,
    boundaries: Vec<Boundary>,
    particles: ParticleSet,
    exec: Executor,
    serial: Executor,
    dense: DenseLayout,
    fields: NodalFields,
    layout: Option<GridLayout>,
    time: f64,
    steps: u64,
    hash_capacity: usize,
    mass_floor: f64,
    wave_speed: f64,
}

impl Solver {
    pub fn new(
        config: SimConfig,
        materials: Vec<MaterialModel>,
        boundaries: Vec<Boundary>,
        particles: ParticleSet,
    ) -> Result<Self> {
        config.validate()?;
        let exec = Executor::new(config.threads)?;
        Self::with_executor(config, materials, boundaries, particles, exec)
    }

    pub fn with_executor(
        config: SimConfig,
        materials: Vec<MaterialModel>,
        boundaries: Vec<Boundary>,
        mut particles: ParticleSet,
        exec: Executor,
    ) -> Result<Self> {
        config.validate()?;
        for m in &materials {
            m.validate()?;
        }
        if particles.is_empty() {
            return Err(Error::NoParticles);
        }
        let mut wave_speed: f64 = 0.0;
        let mut max_mass: f64 = 0.0;
        for p in particles.iter() {
            let m = materials
                .get(usize::from(p.material))
                .ok_or(Error::Config("particle refers to an unknown material"))?;
            if !(p.mass > 0.0 && p.volume0 > 0.0) {
                return Err(Error::Config("particle mass and volume must be positive"));
            }
            wave_speed = wave_speed.max(m.wave_speed());
            max_mass = max_mass.max(p.mass);
        }
        let dense = DenseLayout::from_domain(&config.domain_min, &config.domain_max, config.h)?;
        update_stresses(&mut particles, &materials, &exec)?;
        let hash_capacity = config.hash_capacity;
        let solver = Self {
            config,
            materials,
            boundaries,
            particles,
            exec,
            serial: Executor::serial(),
            dense,
            fields: NodalFields::new(),
            layout: None,
            time: 0.0,
            steps: 0,
            hash_capacity,
            mass_floor: 1e-12 * max_mass,
            wave_speed,
        };
        solver.check_domain()?;
        Ok(solver)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn materials(&self) -> &[MaterialModel] {
        &self.materials
    }

    pub fn boundaries(&self) -> &[Boundary] {
        &self.boundaries
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.particles
    }

    pub fn particles_mut(&mut self) -> &mut ParticleSet {
        &mut self.particles
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn threads(&self) -> usize {
        self.exec.threads()
    }

    pub fn dense_layout(&self) -> &DenseLayout {
        &self.dense
    }

    /// Node count of the full declared box.
    pub fn n_dense(&self) -> usize {
        self.dense.node_count()
    }

    /// Layout used by the most recent step.
    pub fn layout(&self) -> Option<&GridLayout> {
        self.layout.as_ref()
    }

    /// Nodal fields of the most recent step.
    pub fn fields(&self) -> &NodalFields {
        &self.fields
    }

    /// `CFL·h / (c + |v|max)`.
    pub fn stable_dt(&self) -> f64 {
        self.config.cfl * self.config.h / (self.wave_speed + self.particles.max_speed())
    }

    fn check_domain(&self) -> Result<()> {
        let h = self.config.h;
        let dense = &self.dense;
        self.exec.try_for_each(&self.particles.particles, |idx, p| {
            if !p.x.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFinite(idx));
            }
            let base = support_base(&p.x, h);
            if dense.contains_support(base) {
                Ok(())
            } else {
                Err(Error::OutsideDomain(base))
            }
        })
    }

    fn build_layout(&mut self) -> Result<GridLayout> {
        let c = &self.config;
        Ok(match c.backend {
            Backend::Dense => GridLayout::Dense(self.dense),
            Backend::Scan => GridLayout::Sparse(build_scan_sparse_grid(
                &self.particles,
                c.h,
                c.block_size,
                self.exec.threads(),
                &self.exec,
            )?),
            Backend::Hash => {
                let map = build_hash_sparse_grid(&self.particles, c.h, c.block_size, self.hash_capacity, &self.exec)?;
                if let Some(cap) = map.hash_capacity() {
                    self.hash_capacity = cap;
                }
                GridLayout::Sparse(map)
            }
        })
    }

    pub fn step(&mut self) -> Result<StepReport> {
        self.step_limited(f64::INFINITY)
    }

    /// Advances one step of at most `max_dt` seconds.
    pub fn step_limited(&mut self, max_dt: f64) -> Result<StepReport> {
        if !(max_dt > 0.0) {
            return Err(Error::Config("step limit must be positive"));
        }
        let dt = self.stable_dt().min(self.config.dt.unwrap_or(f64::INFINITY)).min(max_dt);
        let h = self.config.h;
        let mut phases = PhaseTimes::default();
        let mut clock = Stopwatch::start();

        self.check_domain()?;
        let layout = self.build_layout()?;
        phases.map_build = clock.lap();

        self.fields.reset(layout.node_count());
        phases.alloc = clock.lap();

        let particle_mass = self.particles.total_mass();
        let particle_momentum = self.particles.total_momentum();
        let scatter_exec = if self.config.deterministic { &self.serial } else { &self.exec };
        let terms = ScatterTerms {
            momentum: true,
            forces: Some(&self.config.gravity),
        };
        scatter(&self.particles.particles, &layout, &self.fields, h, terms, scatter_exec)?;
        phases.p2g = clock.lap();

        let (grid_mass, grid_momentum) = self.fields.totals();
        let n_active = grid_update(
            &mut self.fields,
            &layout,
            h,
            dt,
            self.mass_floor,
            &self.boundaries,
            &self.exec,
        );
        phases.grid_update = clock.lap();

        g2p(&mut self.particles, &layout, &self.fields, h, dt, &self.exec)?;
        phases.g2p = clock.lap();

        update_stresses(&mut self.particles, &self.materials, &self.exec)?;
        phases.stress = clock.lap();

        self.time += dt;
        self.steps += 1;
        let report = StepReport {
            step: self.steps,
            time: self.time,
            dt,
            n_active,
            allocated: layout.node_count(),
            n_blocks_active: layout.sparse_map().map_or(0, |m| m.n_blocks_active()),
            grid_mass,
            grid_momentum,
            particle_mass,
            particle_momentum,
            phases,
        };
        self.layout = Some(layout);
        Ok(report)
    }
}
