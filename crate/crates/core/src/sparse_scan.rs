//! Scan-based construction: mark candidate blocks touched by particle
//! supports, exclusive-scan the mask, and read compact block indices off the
//! scan.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicU8, Ordering};

use crate::error::{Error, Result};
use crate::grid_index::{block_of, for_each_support_block, ActiveIndexMap, BlockCoord, FlatBlockIndex, MISS};
use crate::kernel::support_base;
use crate::parallel::Executor;
use crate::particles::ParticleSet;

/// Inclusive axis-aligned box of blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockBox {
    pub min: BlockCoord,
    pub max: BlockCoord,
}

impl BlockBox {
    pub fn extent(&self) -> [i32; 3] {
        [
            self.max.bi - self.min.bi + 1,
            self.max.bj - self.min.bj + 1,
            self.max.bk - self.min.bk + 1,
        ]
    }

    pub fn len(&self) -> usize {
        self.extent().iter().map(|&e| e as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, b: BlockCoord) -> bool {
        (self.min.bi..=self.max.bi).contains(&b.bi)
            && (self.min.bj..=self.max.bj).contains(&b.bj)
            && (self.min.bk..=self.max.bk).contains(&b.bk)
    }
}

/// Smallest block box containing every support node of every massive particle.
pub fn candidate_domain(particles: &ParticleSet, h: f64, block_size: i32) -> Result<BlockBox> {
    let last = (crate::SUPPORT - 1) as i32;
    let mut bounds: Option<([i32; 3], [i32; 3])> = None;
    for (index, p) in particles.iter().enumerate() {
        if p.mass <= 0.0 {
            continue;
        }
        if !(p.x.x.is_finite() && p.x.y.is_finite() && p.x.z.is_finite()) {
            return Err(Error::NonFinite(index));
        }
        let base = support_base(&p.x, h);
        let lo = block_of(base, block_size).to_array();
        let hi = block_of(base.offset(last, last, last), block_size).to_array();
        bounds = Some(match bounds {
            None => (lo, hi),
            Some((a, b)) => (
                core::array::from_fn(|k| a[k].min(lo[k])),
                core::array::from_fn(|k| b[k].max(hi[k])),
            ),
        });
    }
    let (lo, hi) = bounds.ok_or(Error::NoParticles)?;
    Ok(BlockBox {
        min: BlockCoord::new(lo[0], lo[1], lo[2]),
        max: BlockCoord::new(hi[0], hi[1], hi[2]),
    })
}

/// Activity flags over a candidate block box, flattened row-major (bi slow, bk fast).
#[derive(Debug)]
pub struct BlockMask {
    pub domain: BlockBox,
    flags: Vec<AtomicU8>,
}

impl BlockMask {
    pub fn new(domain: BlockBox) -> Self {
        let flags = (0..domain.len()).map(|_| AtomicU8::new(0)).collect();
        Self { domain, flags }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn flat_index(&self, b: BlockCoord) -> Option<usize> {
        if !self.domain.contains(b) {
            return None;
        }
        let [_, ey, ez] = self.domain.extent();
        let d = [
            (b.bi - self.domain.min.bi) as usize,
            (b.bj - self.domain.min.bj) as usize,
            (b.bk - self.domain.min.bk) as usize,
        ];
        Some((d[0] * ey as usize + d[1]) * ez as usize + d[2])
    }

    pub fn decode(&self, q: usize) -> BlockCoord {
        let [_, ey, ez] = self.domain.extent();
        let (ey, ez) = (ey as usize, ez as usize);
        BlockCoord::new(
            self.domain.min.bi + (q / (ey * ez)) as i32,
            self.domain.min.bj + ((q / ez) % ey) as i32,
            self.domain.min.bk + (q % ez) as i32,
        )
    }

    /// Marks a block. All writers store the same value, so relaxed stores suffice.
    #[inline]
    pub fn set(&self, q: usize) {
        self.flags[q].store(1, Ordering::Relaxed);
    }

    #[inline]
    pub fn get(&self, q: usize) -> u8 {
        self.flags[q].load(Ordering::Relaxed)
    }

    pub fn to_vec(&self) -> Vec<u8> {
        (0..self.len()).map(|q| self.get(q)).collect()
    }
}

/// Sets `χ_b = 1` for every block touched by a massive particle's support.
pub fn mark_active_blocks(
    particles: &ParticleSet,
    h: f64,
    block_size: i32,
    mask: &BlockMask,
    exec: &Executor,
) -> Result<()> {
    exec.try_for_each(&particles.particles, |_, p| {
        if p.mass <= 0.0 {
            return Ok(());
        }
        let base = support_base(&p.x, h);
        let mut outside = None;
        for_each_support_block(base, block_size, |b| match mask.flat_index(b) {
            Some(q) => mask.set(q),
            None => outside = Some(b),
        });
        match outside {
            Some(b) => Err(Error::InactiveBlock(base, b)),
            None => Ok(()),
        }
    })
}

/// Read access for the scan so it runs over plain or atomic masks.
pub trait ScanInput: Sync {
    fn len(&self) -> usize;
    fn value(&self, q: usize) -> u32;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ScanInput for [u8] {
    fn len(&self) -> usize {
        <[u8]>::len(self)
    }

    fn value(&self, q: usize) -> u32 {
        u32::from(self[q])
    }
}

impl ScanInput for BlockMask {
    fn len(&self) -> usize {
        BlockMask::len(self)
    }

    fn value(&self, q: usize) -> u32 {
        u32::from(self.get(q))
    }
}

/// Per-segment bookkeeping of the three-phase scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanWorkspace {
    /// `[start, end)` of each segment; segments tile `[0, n)` in order.
    pub segments: Vec<(usize, usize)>,
    /// Per-segment sums `T_t`.
    pub local_sums: Vec<u32>,
    /// Exclusive prefix of the local sums, `O_t`.
    pub offsets: Vec<u32>,
    /// Exclusive scan `s_q`.
    pub scanned: Vec<u32>,
    pub total: u32,
}

fn segment_bounds(n: usize, segments: usize) -> Vec<(usize, usize)> {
    (0..segments)
        .map(|t| (n * t / segments, n * (t + 1) / segments))
        .collect()
}

/// Exclusive prefix sum of `mask` in three phases: local scan per segment,
/// exclusive scan of segment sums, add-back. The output does not depend on
/// `n_segments`.
pub fn parallel_exclusive_scan<M: ScanInput + ?Sized>(
    mask: &M,
    n_segments: usize,
    exec: &Executor,
) -> ScanWorkspace {
    let n = mask.len();
    let segments = segment_bounds(n, n_segments.max(1));
    let mut scanned = alloc::vec![0u32; n];

    // Phase 1: independent local scans.
    let mut parts: Vec<(&mut [u32], usize, u32)> = Vec::with_capacity(segments.len());
    {
        let mut rest: &mut [u32] = &mut scanned;
        for &(start, end) in &segments {
            let (head, tail) = rest.split_at_mut(end - start);
            parts.push((head, start, 0));
            rest = tail;
        }
    }
    exec.for_each_task_mut(&mut parts, |_, (chunk, start, sum)| {
        let mut r = 0u32;
        for (i, s) in chunk.iter_mut().enumerate() {
            *s = r;
            r += mask.value(*start + i);
        }
        *sum = r;
    });
    let local_sums: Vec<u32> = parts.iter().map(|p| p.2).collect();

    // Phase 2: segment offsets.
    let mut offsets = Vec::with_capacity(local_sums.len());
    let mut total = 0u32;
    for &t in &local_sums {
        offsets.push(total);
        total += t;
    }

    // Phase 3: add offsets back.
    exec.for_each_task_mut(&mut parts, |t, (chunk, _, _)| {
        let o = offsets[t];
        if o != 0 {
            chunk.iter_mut().for_each(|s| *s += o);
        }
    });
    drop(parts);

    ScanWorkspace {
        segments,
        local_sums,
        offsets,
        scanned,
        total,
    }
}

/// Reads `Φ` off the scan: `Φ(b) = s_q` for active blocks, `MISS` otherwise.
pub fn build_block_map(mask: &BlockMask, scan: &ScanWorkspace, block_size: i32, exec: &Executor) -> ActiveIndexMap {
    let mut phi = alloc::vec![MISS; mask.len()];
    let mut active = alloc::vec![BlockCoord::default(); scan.total as usize];

    // Each segment owns a contiguous run of both arrays, so writes are disjoint.
    let mut parts: Vec<(usize, &mut [u32], &mut [BlockCoord])> = Vec::with_capacity(scan.segments.len());
    {
        let mut phi_rest: &mut [u32] = &mut phi;
        let mut act_rest: &mut [BlockCoord] = &mut active;
        for (t, &(start, end)) in scan.segments.iter().enumerate() {
            let (p, pt) = phi_rest.split_at_mut(end - start);
            let (a, at) = act_rest.split_at_mut(scan.local_sums[t] as usize);
            parts.push((start, p, a));
            phi_rest = pt;
            act_rest = at;
        }
    }
    exec.for_each_task_mut(&mut parts, |t, (start, phi, active)| {
        let base = scan.offsets[t];
        for (i, slot) in phi.iter_mut().enumerate() {
            let q = *start + i;
            if mask.get(q) == 1 {
                let s = scan.scanned[q];
                *slot = s;
                active[(s - base) as usize] = mask.decode(q);
            }
        }
    });
    drop(parts);

    ActiveIndexMap::from_flat(
        block_size,
        active,
        FlatBlockIndex {
            min: mask.domain.min,
            extent: mask.domain.extent(),
            phi,
        },
    )
}

/// Candidate box, marking, scan, and map construction in sequence.
pub fn build_scan_sparse_grid(
    particles: &ParticleSet,
    h: f64,
    block_size: i32,
    n_segments: usize,
    exec: &Executor,
) -> Result<ActiveIndexMap> {
    let domain = candidate_domain(particles, h, block_size)?;
    let mask = BlockMask::new(domain);
    mark_active_blocks(particles, h, block_size, &mask, exec)?;
    let scan = parallel_exclusive_scan(&mask, n_segments, exec);
    Ok(build_block_map(&mask, &scan, block_size, exec))
}
