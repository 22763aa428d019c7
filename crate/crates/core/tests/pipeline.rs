use sparse_mpm_core::math::Vec3;
use sparse_mpm_core::{
    Backend, Boundary, Heightfield, MaterialModel, Particle, ParticleSet, SimConfig, Solver,
};

fn block(lo: Vec3, n: [usize; 3], dx: f64, rho: f64) -> ParticleSet {
    let v0 = dx * dx * dx;
    let mut out = Vec::new();
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let x = lo + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * dx;
                out.push(Particle::new(x, rho * v0, v0, 0));
            }
        }
    }
    ParticleSet::new(out)
}

fn ramp(theta_deg: f64) -> Heightfield {
    let t = theta_deg.to_radians().tan();
    let (nx, ny, cs) = (31, 7, 0.1);
    let z = (0..ny)
        .flat_map(|_| (0..nx).map(move |i| (3.0 - i as f64 * cs) * t))
        .collect();
    Heightfield::new([0.0, 0.0], cs, nx, ny, z).unwrap()
}

fn centroid(ps: &ParticleSet) -> Vec3 {
    ps.iter().map(|p| p.x).sum::<Vec3>() / ps.len() as f64
}

/// A stiff block resting on a heightfield ramp: slides when the slope beats
/// the friction angle, stays put otherwise.
fn ramp_travel(theta_deg: f64, mu: f64) -> f64 {
    let h = 0.05;
    let (sin, cos) = theta_deg.to_radians().sin_cos();
    let t = sin / cos;
    let mut config = SimConfig::new(h, Vec3::new(0.0, 0.0, 0.0), Vec3::new(3.0, 0.6, 3.0 * t + 0.5));
    config.backend = Backend::Hash;
    let downhill = Vec3::new(cos, 0.0, -sin);
    let normal = Vec3::new(sin, 0.0, cos);
    let origin = Vec3::new(1.8, 0.2, (3.0 - 1.8) * t);
    let dx = h / 2.0;
    let v0 = dx * dx * dx;
    let mut particles = Vec::new();
    for i in 0..8 {
        for j in 0..4 {
            for k in 0..4 {
                let x = origin
                    + downhill * ((i as f64 + 0.5) * dx)
                    + Vec3::y() * ((j as f64 + 0.5) * dx)
                    + normal * ((k as f64 + 0.5) * dx);
                particles.push(Particle::new(x, 1000.0 * v0, v0, 0));
            }
        }
    }
    let terrain = Boundary::Heightfield {
        field: ramp(theta_deg),
        friction: mu,
    };
    let material = MaterialModel::elastic(1000.0, 2e6, 0.3);
    let mut s = Solver::new(config, vec![material], vec![terrain], ParticleSet::new(particles)).unwrap();
    let start = centroid(s.particles());
    while s.time() < 0.3 {
        s.step().unwrap();
    }
    (centroid(s.particles()) - start).x
}

#[test]
fn heightfield_ramp_friction_decides_sliding() {
    let slides = ramp_travel(35.0, 0.3);
    let sticks = ramp_travel(10.0, 0.5);
    assert!(slides > 0.05, "{slides}");
    assert!(sticks.abs() < 5e-3, "{sticks}");
}

#[test]
fn plastic_column_conserves_mass_on_every_backend() {
    let h = 0.05;
    let ps = block(Vec3::new(0.0, 0.0, 0.0), [6, 4, 12], h / 2.0, 1500.0);
    let walls = vec![
        Boundary::half_space(Vec3::zeros(), Vec3::z(), 0.4).unwrap(),
        Boundary::half_space(Vec3::zeros(), Vec3::x(), 0.0).unwrap(),
        Boundary::half_space(Vec3::zeros(), Vec3::y(), 0.0).unwrap(),
        Boundary::half_space(Vec3::new(0.0, 0.1, 0.0), -Vec3::y(), 0.0).unwrap(),
    ];
    let mut finals = Vec::new();
    for backend in Backend::ALL {
        let mut config = SimConfig::new(h, Vec3::zeros(), Vec3::new(1.0, 0.1, 0.4));
        config.backend = backend;
        config.deterministic = true;
        let sand = MaterialModel::drucker_prager(1500.0, 2e5, 0.3, 30.0);
        let mut s = Solver::new(config, vec![sand], walls.clone(), ps.clone()).unwrap();
        for _ in 0..150 {
            let r = s.step().unwrap();
            assert!((r.grid_mass - r.particle_mass).abs() <= 1e-12 * r.particle_mass);
        }
        assert!(s.particles().iter().all(|p| p.f.determinant() > 0.0));
        finals.push(s.particles().clone());
    }
    assert_eq!(finals[0], finals[1]);
    assert_eq!(finals[0], finals[2]);
}
