//! Quadratic B-spline interpolation weights.

use crate::grid_index::NodeTuple;
use crate::math::{floor, Mat3, Vec3};
use crate::SUPPORT;

/// Tensor-product weights of one particle over its 3×3×3 support.
#[derive(Debug, Clone, Copy)]
pub struct KernelWeights {
    /// Lowest node of the support.
    pub base: NodeTuple,
    /// Per-axis weights for the three support nodes.
    pub w: [[f64; SUPPORT]; 3],
    /// Per-axis weight derivatives with respect to position (1/m).
    pub dw: [[f64; SUPPORT]; 3],
    /// Particle position relative to `base`, in cell units.
    pub frac: [f64; 3],
    pub h: f64,
}

/// Lowest support node for a particle at `x`: `floor(x/h - 1/2)` per axis.
#[inline]
pub fn support_base(x: &Vec3, h: f64) -> NodeTuple {
    let f = |c: f64| floor(c / h - 0.5) as i32;
    NodeTuple::new(f(x.x), f(x.y), f(x.z))
}

/// Quadratic B-spline weights and gradients at `x` for grid spacing `h`.
pub fn bspline_weights(x: &Vec3, h: f64) -> KernelWeights {
    let base = support_base(x, h);
    let inv_h = 1.0 / h;
    let b = base.to_array();
    let mut w = [[0.0; SUPPORT]; 3];
    let mut dw = [[0.0; SUPPORT]; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        // fx in [0.5, 1.5): distance from the base node in cells.
        let fx = x[a] * inv_h - f64::from(b[a]);
        frac[a] = fx;
        let d0 = 1.5 - fx;
        let d1 = fx - 1.0;
        let d2 = fx - 0.5;
        w[a] = [0.5 * d0 * d0, 0.75 - d1 * d1, 0.5 * d2 * d2];
        dw[a] = [-d0 * inv_h, -2.0 * d1 * inv_h, d2 * inv_h];
    }
    KernelWeights {
        base,
        w,
        dw,
        frac,
        h,
    }
}

impl KernelWeights {
    #[inline]
    pub fn weight(&self, a: usize, b: usize, c: usize) -> f64 {
        self.w[0][a] * self.w[1][b] * self.w[2][c]
    }

    #[inline]
    pub fn gradient(&self, a: usize, b: usize, c: usize) -> Vec3 {
        Vec3::new(
            self.dw[0][a] * self.w[1][b] * self.w[2][c],
            self.w[0][a] * self.dw[1][b] * self.w[2][c],
            self.w[0][a] * self.w[1][b] * self.dw[2][c],
        )
    }

    /// `x_n − x_p` for support node `(a, b, c)`.
    #[inline]
    pub fn offset(&self, a: usize, b: usize, c: usize) -> Vec3 {
        Vec3::new(
            (a as f64 - self.frac[0]) * self.h,
            (b as f64 - self.frac[1]) * self.h,
            (c as f64 - self.frac[2]) * self.h,
        )
    }

    pub fn node(&self, a: usize, b: usize, c: usize) -> NodeTuple {
        self.base.offset(a as i32, b as i32, c as i32)
    }

    /// APIC inertia-like tensor `D_p = Σ N (x_n − x_p) ⊗ (x_n − x_p)`.
    pub fn apic_inertia(&self) -> Mat3 {
        let mut d = Mat3::zeros();
        for a in 0..SUPPORT {
            for b in 0..SUPPORT {
                for c in 0..SUPPORT {
                    let r = self.offset(a, b, c);
                    d += self.weight(a, b, c) * r * r.transpose();
                }
            }
        }
        d
    }
}
