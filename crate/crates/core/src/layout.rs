//! Grid layouts: the full dense box, or a compact block-sparse map.

use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::grid_index::{ActiveIndexMap, NodeTuple};
use crate::math::{floor, Vec3};
use crate::{STENCIL, SUPPORT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Backend {
    #[default]
    Dense,
    Scan,
    Hash,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Dense, Backend::Scan, Backend::Hash];

    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Dense => "dense",
            Backend::Scan => "scan",
            Backend::Hash => "hash",
        }
    }

    pub fn is_sparse(self) -> bool {
        self != Backend::Dense
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Backend::Dense),
            "scan" => Ok(Backend::Scan),
            "hash" => Ok(Backend::Hash),
            _ => Err(Error::Config("backend must be one of dense, scan, hash")),
        }
    }
}

/// Every node of the declared simulation box, padded by one node on each side
/// so that any particle inside the box has its whole support allocated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseLayout {
    pub min: NodeTuple,
    pub extent: [i32; 3],
}

impl DenseLayout {
    pub fn new(min: NodeTuple, extent: [i32; 3]) -> Result<Self> {
        if extent.iter().any(|&e| e <= 0) {
            return Err(Error::Config("dense grid extent must be positive"));
        }
        Ok(Self { min, extent })
    }

    /// Layout covering the box `[lo, hi]` at spacing `h`.
    pub fn from_domain(lo: &Vec3, hi: &Vec3, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Config("grid spacing h must be positive"));
        }
        if (0..3).any(|a| !(hi[a] > lo[a])) {
            return Err(Error::Config("domain max must exceed domain min on every axis"));
        }
        let first = |c: f64| floor(c / h) as i64 - 1;
        let last = |c: f64| -floor(-c / h) as i64 + 1;
        let mut min = [0i32; 3];
        let mut extent = [0i32; 3];
        for a in 0..3 {
            let (f, l) = (first(lo[a]), last(hi[a]));
            let e = l - f + 1;
            if f < i64::from(i32::MIN) || e > i64::from(i32::MAX) {
                return Err(Error::Config("domain too large for the grid index range"));
            }
            min[a] = f as i32;
            extent[a] = e as i32;
        }
        Self::new(NodeTuple::new(min[0], min[1], min[2]), extent)
    }

    pub fn node_count(&self) -> usize {
        self.extent.iter().map(|&e| e as usize).product()
    }

    #[inline]
    pub fn contains(&self, n: NodeTuple) -> bool {
        let d = [n.i - self.min.i, n.j - self.min.j, n.k - self.min.k];
        (0..3).all(|a| d[a] >= 0 && d[a] < self.extent[a])
    }

    /// Whether the 3×3×3 support starting at `base` is inside the box.
    #[inline]
    pub fn contains_support(&self, base: NodeTuple) -> bool {
        let s = SUPPORT as i32 - 1;
        self.contains(base) && self.contains(base.offset(s, s, s))
    }

    #[inline]
    pub fn index(&self, n: NodeTuple) -> Option<usize> {
        if !self.contains(n) {
            return None;
        }
        let [_, ey, ez] = self.extent.map(|e| e as usize);
        let d = [
            (n.i - self.min.i) as usize,
            (n.j - self.min.j) as usize,
            (n.k - self.min.k) as usize,
        ];
        Some((d[0] * ey + d[1]) * ez + d[2])
    }

    pub fn node_at(&self, index: usize) -> NodeTuple {
        let [_, ey, ez] = self.extent.map(|e| e as usize);
        let k = index % ez;
        let j = (index / ez) % ey;
        let i = index / (ey * ez);
        self.min.offset(i as i32, j as i32, k as i32)
    }

    pub fn stencil_indices(&self, base: NodeTuple) -> Result<[usize; STENCIL]> {
        let b0 = self.index(base).filter(|_| self.contains_support(base));
        let b0 = b0.ok_or(Error::OutsideDomain(base))?;
        let ez = self.extent[2] as usize;
        let eyz = self.extent[1] as usize * ez;
        let mut out = [0usize; STENCIL];
        for a in 0..SUPPORT {
            for b in 0..SUPPORT {
                for c in 0..SUPPORT {
                    out[(a * 3 + b) * 3 + c] = b0 + a * eyz + b * ez + c;
                }
            }
        }
        Ok(out)
    }
}

/// Node storage layout for one step.
#[derive(Debug)]
pub enum GridLayout {
    Dense(DenseLayout),
    Sparse(ActiveIndexMap),
}

impl GridLayout {
    pub fn node_count(&self) -> usize {
        match self {
            GridLayout::Dense(d) => d.node_count(),
            GridLayout::Sparse(m) => m.node_count(),
        }
    }

    pub fn node_index(&self, n: NodeTuple) -> Result<usize> {
        match self {
            GridLayout::Dense(d) => d.index(n).ok_or(Error::OutsideDomain(n)),
            GridLayout::Sparse(m) => m.node_index(n),
        }
    }

    pub fn node_at(&self, index: usize) -> NodeTuple {
        match self {
            GridLayout::Dense(d) => d.node_at(index),
            GridLayout::Sparse(m) => m.node_at(index),
        }
    }

    #[inline]
    pub fn stencil_indices(&self, base: NodeTuple) -> Result<[usize; STENCIL]> {
        match self {
            GridLayout::Dense(d) => d.stencil_indices(base),
            GridLayout::Sparse(m) => m.stencil_indices(base),
        }
    }

    pub fn sparse_map(&self) -> Option<&ActiveIndexMap> {
        match self {
            GridLayout::Dense(_) => None,
            GridLayout::Sparse(m) => Some(m),
        }
    }
}
