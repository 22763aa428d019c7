//! Constitutive models: Hencky (logarithmic strain) elasticity and a
//! Drucker–Prager return mapping carried out in principal Hencky strain space.

use crate::error::{Error, Result};
use crate::math::{exp, ln, sin, cos, sqrt, to_radians, Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaterialKind {
    Elastic,
    /// Non-associative (zero dilatancy) Drucker–Prager fitted to the Mohr–Coulomb compression cone.
    DruckerPrager { friction_deg: f64, cohesion: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialModel {
    /// kg/m³
    pub density: f64,
    /// Pa
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub kind: MaterialKind,
}

impl MaterialModel {
    pub fn elastic(density: f64, youngs_modulus: f64, poisson_ratio: f64) -> Self {
        Self {
            density,
            youngs_modulus,
            poisson_ratio,
            kind: MaterialKind::Elastic,
        }
    }

    pub fn drucker_prager(density: f64, youngs_modulus: f64, poisson_ratio: f64, friction_deg: f64) -> Self {
        Self {
            density,
            youngs_modulus,
            poisson_ratio,
            kind: MaterialKind::DruckerPrager {
                friction_deg,
                cohesion: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0) {
            return Err(Error::Config("density must be positive"));
        }
        if !(self.youngs_modulus > 0.0) {
            return Err(Error::Config("Young's modulus must be positive"));
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return Err(Error::Config("Poisson ratio must lie in [0, 0.5)"));
        }
        if let MaterialKind::DruckerPrager { friction_deg, cohesion } = self.kind {
            if !(friction_deg > 0.0 && friction_deg < 90.0) {
                return Err(Error::Config("friction angle must lie in (0, 90) degrees"));
            }
            if !(cohesion >= 0.0) {
                return Err(Error::Config("cohesion must be non-negative"));
            }
        }
        Ok(())
    }

    /// Lamé parameters `(λ, μ)`.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        let mu = e / (2.0 * (1.0 + nu));
        let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        (lambda, mu)
    }

    /// `sqrt(E/ρ)`, the wave speed used for the time-step limit.
    pub fn wave_speed(&self) -> f64 {
        sqrt(self.youngs_modulus / self.density)
    }
}

/// Hencky strain energy density `μ|ε|² + λ/2 (tr ε)²` at deformation gradient `f`.
pub fn hencky_energy(f: &Mat3, material: &MaterialModel) -> f64 {
    let (lambda, mu) = material.lame();
    let c = f.transpose() * f;
    let eig = c.symmetric_eigen();
    let eps = eig.eigenvalues.map(|l| 0.5 * ln(l));
    let tr = eps.sum();
    mu * eps.norm_squared() + 0.5 * lambda * tr * tr
}

/// Projects principal Hencky strains onto the Drucker–Prager cone.
/// Returns `None` when the trial state is admissible.
fn drucker_prager_return(eps: &Vec3, lambda: f64, mu: f64, friction_deg: f64, cohesion: f64) -> Option<Vec3> {
    let s = sin(to_radians(friction_deg));
    let alpha = sqrt(2.0 / 3.0) * 2.0 * s / (3.0 - s);
    let k = sqrt(2.0 / 3.0) * 6.0 * cohesion * cos(to_radians(friction_deg)) / (3.0 - s);
    let bulk3 = 3.0 * lambda + 2.0 * mu;

    let tr = eps.sum();
    let dev = eps - Vec3::repeat(tr / 3.0);
    let dev_norm = dev.norm();

    // Beyond the apex: no admissible deviatoric state remains.
    let apex_tr = k / (alpha * bulk3);
    if tr >= apex_tr {
        return Some(Vec3::repeat(apex_tr / 3.0));
    }
    let dgamma = dev_norm + alpha * bulk3 / (2.0 * mu) * tr - k / (2.0 * mu);
    if dgamma <= 0.0 {
        return None;
    }
    Some(eps - dgamma / dev_norm * dev)
}

/// Cauchy stress for `f`, plus the plastically corrected `f` when the model yields.
pub fn update_stress(f: &Mat3, material: &MaterialModel) -> Result<(Mat3, Option<Mat3>)> {
    let det = f.determinant();
    if !(det > 0.0) {
        return Err(Error::InvertedParticle { index: usize::MAX, det });
    }
    let (lambda, mu) = material.lame();
    // Left Cauchy–Green tensor shares eigenvectors with the Kirchhoff stress.
    let b = f * f.transpose();
    let eig = b.symmetric_eigen();
    let eps = eig.eigenvalues.map(|l| 0.5 * ln(l));

    let (eps_new, corrected) = match material.kind {
        MaterialKind::Elastic => (eps, None),
        MaterialKind::DruckerPrager { friction_deg, cohesion } => {
            match drucker_prager_return(&eps, lambda, mu, friction_deg, cohesion) {
                None => (eps, None),
                Some(projected) => {
                    // F' = V exp(ε' − ε) Vᵀ F scales the left stretch only.
                    let scale = (projected - eps).map(exp);
                    let v = &eig.eigenvectors;
                    let fp = v * Mat3::from_diagonal(&scale) * v.transpose() * f;
                    (projected, Some(fp))
                }
            }
        }
    };

    let tr = eps_new.sum();
    let tau = eps_new.map(|e| 2.0 * mu * e + lambda * tr);
    let j = exp(tr);
    let v = &eig.eigenvectors;
    let sigma = v * Mat3::from_diagonal(&(tau / j)) * v.transpose();
    Ok((sigma, corrected))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rubber() -> MaterialModel {
        MaterialModel::elastic(1000.0, 1.0e6, 0.3)
    }

    #[test]
    fn identity_is_stress_free() {
        let (s, fp) = update_stress(&Mat3::identity(), &rubber()).unwrap();
        assert_eq!(s, Mat3::zeros());
        assert!(fp.is_none());
    }

    #[test]
    fn small_uniaxial_stretch_matches_linear_elasticity() {
        let m = rubber();
        let eps = 1e-6;
        let f = Mat3::from_diagonal(&Vec3::new(1.0 + eps, 1.0, 1.0));
        let (s, _) = update_stress(&f, &m).unwrap();
        let (e, nu) = (m.youngs_modulus, m.poisson_ratio);
        let want = e * eps * (1.0 - nu) / ((1.0 + nu) * (1.0 - 2.0 * nu));
        assert!((s[(0, 0)] - want).abs() < 0.01 * want);
    }

    #[test]
    fn stress_matches_energy_derivative() {
        let m = rubber();
        let f = Mat3::new(1.05, 0.02, -0.01, 0.03, 0.97, 0.04, -0.02, 0.01, 1.02);
        let delta = 1e-6;
        let mut p = Mat3::zeros();
        for r in 0..3 {
            for c in 0..3 {
                let mut fp = f;
                let mut fm = f;
                fp[(r, c)] += delta;
                fm[(r, c)] -= delta;
                p[(r, c)] = (hencky_energy(&fp, &m) - hencky_energy(&fm, &m)) / (2.0 * delta);
            }
        }
        // Kirchhoff stress τ = P Fᵀ = J σ.
        let tau_fd = p * f.transpose();
        let (sigma, _) = update_stress(&f, &m).unwrap();
        let tau = sigma * f.determinant();
        assert!((tau - tau_fd).norm() <= 1e-5 * tau.norm(), "{tau} vs {tau_fd}");
    }

    #[test]
    fn hydrostatic_compression_stays_elastic() {
        let m = MaterialModel::drucker_prager(1500.0, 1e6, 0.3, 30.0);
        let f = Mat3::identity() * 0.99;
        let (s, fp) = update_stress(&f, &m).unwrap();
        assert!(fp.is_none());
        assert!(s[(0, 0)] < 0.0 && (s[(0, 0)] - s[(1, 1)]).abs() < 1e-9 * s[(0, 0)].abs());
    }

    #[test]
    fn tension_returns_to_apex() {
        let m = MaterialModel::drucker_prager(1500.0, 1e6, 0.3, 30.0);
        let f = Mat3::from_diagonal(&Vec3::new(1.02, 1.01, 1.0));
        let (s, fp) = update_stress(&f, &m).unwrap();
        assert!(s.norm() < 1e-6);
        let fp = fp.unwrap();
        assert!((fp * fp.transpose() - Mat3::identity()).norm() < 1e-12);
    }

    #[test]
    fn shear_is_projected_onto_the_cone() {
        let m = MaterialModel::drucker_prager(1500.0, 1e6, 0.3, 30.0);
        let f = Mat3::new(0.99, 0.2, 0.0, 0.0, 0.99, 0.0, 0.0, 0.0, 0.99);
        let (s, fp) = update_stress(&f, &m).unwrap();
        let fp = fp.expect("large shear yields");
        let (s2, again) = update_stress(&fp, &m).unwrap();
        assert!((s - s2).norm() < 1e-6 * s.norm());
        // The projected state sits on the yield surface: one more return is a no-op.
        assert!(again.is_none_or(|g| (g - fp).norm() < 1e-9));
        // Volume is preserved by the zero-dilatancy return.
        assert!((fp.determinant() - f.determinant()).abs() < 1e-12);
    }

    #[test]
    fn inverted_gradient_is_rejected() {
        let f = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0));
        assert!(matches!(update_stress(&f, &rubber()), Err(Error::InvertedParticle { .. })));
    }

    #[test]
    fn validation() {
        assert!(rubber().validate().is_ok());
        assert!(MaterialModel::elastic(1000.0, -1.0, 0.3).validate().is_err());
        assert!(MaterialModel::elastic(1000.0, 1.0, 0.5).validate().is_err());
        assert!(MaterialModel::drucker_prager(1000.0, 1.0, 0.3, 90.0).validate().is_err());
    }
}
