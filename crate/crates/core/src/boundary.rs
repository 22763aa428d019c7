//! Frictional obstacles applied to nodal velocities after the momentum update.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{floor, sqrt, Vec3};

/// Coulomb projection of a nodal velocity against a surface with unit `normal`.
///
/// Separating velocities pass unchanged. Otherwise the normal component is
/// removed and the tangential part shrinks by `μ·|v·n|`, stopping at zero.
pub fn apply_friction_boundary(v: Vec3, normal: &Vec3, mu: f64) -> Vec3 {
    let vn = v.dot(normal);
    if vn >= 0.0 {
        return v;
    }
    let vt = v - vn * normal;
    let vt_norm = vt.norm();
    if vt_norm <= mu * -vn || vt_norm == 0.0 {
        return Vec3::zeros();
    }
    vt * (1.0 + mu * vn / vt_norm)
}

/// Regularly sampled elevation `z(x, y)` with bilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Heightfield {
    /// `(x, y)` of sample `(0, 0)` (m).
    pub origin: [f64; 2],
    /// Sample spacing (m).
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    /// Elevations, x fastest: `z[j * nx + i]` sits at `origin + (i, j) · cell_size`.
    pub elevation: Vec<f64>,
}

impl Heightfield {
    pub fn new(origin: [f64; 2], cell_size: f64, nx: usize, ny: usize, elevation: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::Config("heightfield needs at least 2x2 samples"));
        }
        if elevation.len() != nx * ny {
            return Err(Error::Config("heightfield sample count does not match its dimensions"));
        }
        if !(cell_size > 0.0) {
            return Err(Error::Config("heightfield cell size must be positive"));
        }
        if elevation.iter().any(|z| !z.is_finite()) {
            return Err(Error::Config("heightfield elevations must be finite"));
        }
        Ok(Self {
            origin,
            cell_size,
            nx,
            ny,
            elevation,
        })
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.elevation[j * self.nx + i]
    }

    /// Cell index and fractional position along one axis, clamped to the samples.
    fn locate(&self, coord: f64, origin: f64, n: usize) -> (usize, f64) {
        let u = ((coord - origin) / self.cell_size).clamp(0.0, (n - 1) as f64);
        let i = (floor(u) as usize).min(n - 2);
        (i, u - i as f64)
    }

    /// Elevation and its gradient `(∂z/∂x, ∂z/∂y)` at `(x, y)`.
    pub fn sample(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        let (i, tx) = self.locate(x, self.origin[0], self.nx);
        let (j, ty) = self.locate(y, self.origin[1], self.ny);
        let z00 = self.at(i, j);
        let z10 = self.at(i + 1, j);
        let z01 = self.at(i, j + 1);
        let z11 = self.at(i + 1, j + 1);
        let z0 = z00 + (z10 - z00) * tx;
        let z1 = z01 + (z11 - z01) * tx;
        let z = z0 + (z1 - z0) * ty;
        let dzdx = ((z10 - z00) * (1.0 - ty) + (z11 - z01) * ty) / self.cell_size;
        let dzdy = (z1 - z0) / self.cell_size;
        (z, [dzdx, dzdy])
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.sample(x, y).0
    }

    /// Upward unit normal of the interpolated surface.
    pub fn normal(&self, x: f64, y: f64) -> Vec3 {
        let (_, [gx, gy]) = self.sample(x, y);
        let n = Vec3::new(-gx, -gy, 1.0);
        n / sqrt(n.norm_squared())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    /// Solid below the plane through `point` with outward unit `normal`.
    HalfSpace { point: Vec3, normal: Vec3, friction: f64 },
    /// Solid below a terrain surface.
    Heightfield { field: Heightfield, friction: f64 },
}

impl Boundary {
    pub fn half_space(point: Vec3, normal: Vec3, friction: f64) -> Result<Self> {
        let len = normal.norm();
        if !(len > 0.0) {
            return Err(Error::Config("boundary normal must be non-zero"));
        }
        if !(friction >= 0.0) {
            return Err(Error::Config("friction coefficient must be non-negative"));
        }
        Ok(Self::HalfSpace {
            point,
            normal: normal / len,
            friction,
        })
    }

    pub fn friction(&self) -> f64 {
        match self {
            Self::HalfSpace { friction, .. } | Self::Heightfield { friction, .. } => *friction,
        }
    }

    /// Outward normal when `x` lies on or inside the solid.
    #[inline]
    pub fn contact(&self, x: &Vec3) -> Option<Vec3> {
        match self {
            Self::HalfSpace { point, normal, .. } => ((x - point).dot(normal) <= 0.0).then_some(*normal),
            Self::Heightfield { field, .. } => {
                let (z, [gx, gy]) = field.sample(x.x, x.y);
                if x.z > z {
                    return None;
                }
                let n = Vec3::new(-gx, -gy, 1.0);
                Some(n / sqrt(n.norm_squared()))
            }
        }
    }

    /// Applies the friction projection if `x` is in contact.
    #[inline]
    pub fn project(&self, x: &Vec3, v: Vec3) -> Vec3 {
        match self.contact(x) {
            Some(n) => apply_friction_boundary(v, &n, self.friction()),
            None => v,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{cos, sin, tan, to_radians};

    #[test]
    fn friction_projection_examples() {
        let n = Vec3::z();
        let sep = Vec3::new(0.3, -0.2, 0.5);
        assert_eq!(apply_friction_boundary(sep, &n, 0.5), sep);
        assert_eq!(apply_friction_boundary(Vec3::new(0.0, 0.0, -2.0), &n, 0.5), Vec3::zeros());
        let v = apply_friction_boundary(Vec3::new(1.0, 0.0, -1.0), &n, 0.5);
        assert!((v - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        // Stick: tangential speed below μ|v·n|.
        assert_eq!(apply_friction_boundary(Vec3::new(0.1, 0.0, -1.0), &n, 0.268), Vec3::zeros());
        assert_eq!(apply_friction_boundary(Vec3::new(1.0, 2.0, -1.0), &n, 0.0), Vec3::new(1.0, 2.0, 0.0));
    }

    #[test]
    fn flat_and_ramp_normals() {
        let flat = Heightfield::new([0.0, 0.0], 1.0, 3, 3, alloc::vec![0.0; 9]).unwrap();
        assert_eq!(flat.normal(0.7, 1.3), Vec3::z());

        let theta = to_radians(25.0);
        let (nx, ny) = (5, 4);
        let z = (0..ny).flat_map(|_| (0..nx).map(move |i| i as f64 * 0.5 * tan(theta))).collect();
        let ramp = Heightfield::new([0.0, 0.0], 0.5, nx, ny, z).unwrap();
        let n = ramp.normal(1.1, 0.6);
        assert!((n - Vec3::new(-sin(theta), 0.0, cos(theta))).norm() < 1e-12);
    }

    #[test]
    fn bilinear_center_and_continuity() {
        let f = Heightfield::new([0.0, 0.0], 2.0, 2, 2, alloc::vec![1.0, 3.0, 5.0, 11.0]).unwrap();
        assert!((f.height(1.0, 1.0) - 5.0).abs() < 1e-12);

        let z: Vec<f64> = (0..16).map(|k| ((k * 37) % 11) as f64 * 0.3).collect();
        let g = Heightfield::new([-1.0, 2.0], 0.5, 4, 4, z).unwrap();
        for e in [0.5, 1.0] {
            let x = -1.0 + e;
            for y in [2.1, 2.7, 3.3] {
                let l = g.height(x - 1e-13, y);
                let r = g.height(x + 1e-13, y);
                assert!((l - r).abs() < 1e-11);
                let a = g.height(y - 3.0, 2.0 + e - 1e-13);
                let b = g.height(y - 3.0, 2.0 + e + 1e-13);
                assert!((a - b).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn heightfield_validation() {
        assert!(Heightfield::new([0.0, 0.0], 1.0, 1, 3, alloc::vec![0.0; 3]).is_err());
        assert!(Heightfield::new([0.0, 0.0], 1.0, 2, 2, alloc::vec![0.0; 3]).is_err());
        assert!(Heightfield::new([0.0, 0.0], 1.0, 2, 2, alloc::vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn half_space_contact() {
        let b = Boundary::half_space(Vec3::zeros(), Vec3::new(0.0, 0.0, 2.0), 0.3).unwrap();
        assert!(b.contact(&Vec3::new(5.0, 1.0, 0.0)).is_some());
        assert!(b.contact(&Vec3::new(5.0, 1.0, -0.1)).is_some());
        assert!(b.contact(&Vec3::new(5.0, 1.0, 0.1)).is_none());
        let v = b.project(&Vec3::new(0.0, 0.0, -0.1), Vec3::new(0.0, 0.0, -1.0));
        assert_eq!(v, Vec3::zeros());
    }
}
