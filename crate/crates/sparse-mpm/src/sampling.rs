//! Regular particle lattices.

use sparse_mpm_core::math::Vec3;

use crate::error::{Error, Result};

/// Lattice positions filling `[min, max]` with `ppc` particles per cell per
/// axis, plus the volume each particle represents, `(h/ppc)³`.
///
/// Each axis holds as many lattice spacings as fit in the region; points sit
/// at spacing midpoints, so all of them lie strictly inside.
pub fn sample_box(min: [f64; 3], max: [f64; 3], ppc: usize, h: f64) -> Result<(Vec<Vec3>, f64)> {
    if ppc == 0 || !(h > 0.0) {
        return Err(Error::Config("particles per cell and h must be positive".into()));
    }
    let dx = h / ppc as f64;
    let mut counts = [0usize; 3];
    for a in 0..3 {
        let len = max[a] - min[a];
        if !(len > 0.0) {
            return Err(Error::Config("sampling region is empty".into()));
        }
        counts[a] = (len / dx + 1e-9).floor() as usize;
        if counts[a] == 0 {
            return Err(Error::Config(format!(
                "sampling region is thinner than one particle spacing ({dx} m) along axis {a}"
            )));
        }
    }
    let mut out = Vec::with_capacity(counts.iter().product());
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            for k in 0..counts[2] {
                let at = |a: usize, n: usize| min[a] + (n as f64 + 0.5) * dx;
                out.push(Vec3::new(at(0, i), at(1, j), at(2, k)));
            }
        }
    }
    Ok((out, dx * dx * dx))
}
