//! Integer grid identity, block decomposition, key packing and the compact
//! node map `φ(n) = Φ(b(n))·B³ + ℓ(n)` shared by both sparse constructions.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sparse_hash::BlockHashTable;
use crate::STENCIL;

/// Bits per packed component.
pub const DEFAULT_BITS: u32 = 21;
/// Bias added to every component before packing; admits `[-2^20, 2^20 - 1]`.
pub const DEFAULT_BIAS: i64 = 1 << 20;

/// Sentinel for an inactive block in flat block maps.
pub const MISS: u32 = u32::MAX;

/// Integer lattice coordinates of a grid node. Physical position is `(i·h, j·h, k·h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodeTuple {
    pub i: i32,
    pub j: i32,
    pub k: i32,
}

impl NodeTuple {
    pub const fn new(i: i32, j: i32, k: i32) -> Self {
        Self { i, j, k }
    }

    pub const fn to_array(self) -> [i32; 3] {
        [self.i, self.j, self.k]
    }

    pub fn offset(self, di: i32, dj: i32, dk: i32) -> Self {
        Self::new(self.i + di, self.j + dj, self.k + dk)
    }
}

/// Coordinates of a `B×B×B` block of nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BlockCoord {
    pub bi: i32,
    pub bj: i32,
    pub bk: i32,
}

impl BlockCoord {
    pub const fn new(bi: i32, bj: i32, bk: i32) -> Self {
        Self { bi, bj, bk }
    }

    pub const fn to_array(self) -> [i32; 3] {
        [self.bi, self.bj, self.bk]
    }

    /// First node of the block.
    pub fn origin(self, block_size: i32) -> NodeTuple {
        NodeTuple::new(
            self.bi * block_size,
            self.bj * block_size,
            self.bk * block_size,
        )
    }
}

/// 64-bit packed form of three biased components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PackedKey(pub u64);

/// Anything with three signed integer components that can be packed.
pub trait Packable: Copy {
    fn components(self) -> [i32; 3];
}

impl Packable for NodeTuple {
    fn components(self) -> [i32; 3] {
        self.to_array()
    }
}

impl Packable for BlockCoord {
    fn components(self) -> [i32; 3] {
        self.to_array()
    }
}

/// Packs `((c0+b) << 2m) | ((c1+b) << m) | (c2+b)`.
pub fn pack_key<T: Packable>(t: T, bits: u32, bias: i64) -> Result<PackedKey> {
    debug_assert!(bits >= 1 && 3 * bits <= 64);
    let limit = 1i64 << bits;
    let mut key = 0u64;
    for c in t.components() {
        let shifted = i64::from(c) + bias;
        if !(0..limit).contains(&shifted) {
            return Err(Error::KeyRange {
                what: "grid tuple",
                value: i64::from(c),
                bits,
            });
        }
        key = (key << bits) | shifted as u64;
    }
    Ok(PackedKey(key))
}

/// Inverse of [`pack_key`] for keys produced with the same `(bits, bias)`.
pub fn unpack_key(key: PackedKey, bits: u32, bias: i64) -> NodeTuple {
    let mask = (1u64 << bits) - 1;
    let field = |shift: u32| ((key.0 >> shift) & mask) as i64 - bias;
    NodeTuple::new(
        field(2 * bits) as i32,
        field(bits) as i32,
        field(0) as i32,
    )
}

// Stafford's "Mix13" finalizer, as used by SplitMix64.
const MIX_SHIFT: [u32; 3] = [30, 27, 31];
const MIX_MUL: [u64; 2] = [0xbf58_476d_1ce4_e5b9, 0x94d0_49bb_1331_11eb];

/// Bijective 64-bit avalanche mixer applied to packed keys before slot selection.
#[inline]
pub fn mix64(key: PackedKey) -> u64 {
    let mut z = key.0;
    z = (z ^ (z >> MIX_SHIFT[0])).wrapping_mul(MIX_MUL[0]);
    z = (z ^ (z >> MIX_SHIFT[1])).wrapping_mul(MIX_MUL[1]);
    z ^ (z >> MIX_SHIFT[2])
}

#[inline]
fn floor_div(a: i32, b: i32) -> i32 {
    a.div_euclid(b)
}

/// Block containing `n`, using floor division toward −∞.
#[inline]
pub fn block_of(n: NodeTuple, block_size: i32) -> BlockCoord {
    BlockCoord::new(
        floor_div(n.i, block_size),
        floor_div(n.j, block_size),
        floor_div(n.k, block_size),
    )
}

/// Calls `f` once for every distinct block touched by the 3×3×3 support
/// starting at `base` (between one and eight blocks).
#[inline]
pub fn for_each_support_block(base: NodeTuple, block_size: i32, mut f: impl FnMut(BlockCoord)) {
    let lo = block_of(base, block_size);
    let last = (crate::SUPPORT - 1) as i32;
    let hi = block_of(base.offset(last, last, last), block_size);
    for bi in lo.bi..=hi.bi {
        for bj in lo.bj..=hi.bj {
            for bk in lo.bk..=hi.bk {
                f(BlockCoord::new(bi, bj, bk));
            }
        }
    }
}

/// Row-major (i slow, k fast) offset of `n` inside its block, in `[0, B³)`.
#[inline]
pub fn local_offset(n: NodeTuple, block_size: i32) -> usize {
    let b = block_size;
    let li = n.i.rem_euclid(b) as usize;
    let lj = n.j.rem_euclid(b) as usize;
    let lk = n.k.rem_euclid(b) as usize;
    let b = b as usize;
    (li * b + lj) * b + lk
}

/// Local `(li, lj, lk)` for a local offset.
#[inline]
pub fn local_decode(offset: usize, block_size: i32) -> NodeTuple {
    let b = block_size as usize;
    NodeTuple::new(
        (offset / (b * b)) as i32,
        ((offset / b) % b) as i32,
        (offset % b) as i32,
    )
}

/// Block lookup over an axis-aligned box of candidate blocks, flattened row-major.
#[derive(Debug, Clone)]
pub struct FlatBlockIndex {
    pub min: BlockCoord,
    pub extent: [i32; 3],
    pub phi: Vec<u32>,
}

impl FlatBlockIndex {
    #[inline]
    pub fn flat(&self, b: BlockCoord) -> Option<usize> {
        let d = [
            b.bi - self.min.bi,
            b.bj - self.min.bj,
            b.bk - self.min.bk,
        ];
        if (0..3).any(|a| d[a] < 0 || d[a] >= self.extent[a]) {
            return None;
        }
        let [_, ey, ez] = self.extent;
        Some(((d[0] as usize * ey as usize) + d[1] as usize) * ez as usize + d[2] as usize)
    }

    #[inline]
    fn get(&self, b: BlockCoord) -> Option<u32> {
        self.flat(b)
            .map(|q| self.phi[q])
            .filter(|&v| v != MISS)
    }
}

#[derive(Debug)]
enum BlockLookup {
    Flat(FlatBlockIndex),
    Hashed(BlockHashTable),
}

/// Compact block map `Φ` plus the active block list. Immutable once built.
#[derive(Debug)]
pub struct ActiveIndexMap {
    block_size: i32,
    active_blocks: Vec<BlockCoord>,
    lookup: BlockLookup,
}

impl ActiveIndexMap {
    pub(crate) fn from_flat(
        block_size: i32,
        active_blocks: Vec<BlockCoord>,
        index: FlatBlockIndex,
    ) -> Self {
        Self {
            block_size,
            active_blocks,
            lookup: BlockLookup::Flat(index),
        }
    }

    pub(crate) fn from_hashed(
        block_size: i32,
        active_blocks: Vec<BlockCoord>,
        table: BlockHashTable,
    ) -> Self {
        Self {
            block_size,
            active_blocks,
            lookup: BlockLookup::Hashed(table),
        }
    }

    /// Builds a map from an explicit active list; `Φ(list[c]) = c`.
    pub fn from_active_list(block_size: i32, active_blocks: Vec<BlockCoord>) -> Self {
        if active_blocks.is_empty() {
            return Self::from_flat(
                block_size,
                active_blocks,
                FlatBlockIndex {
                    min: BlockCoord::default(),
                    extent: [0; 3],
                    phi: Vec::new(),
                },
            );
        }
        let mut lo = active_blocks[0].to_array();
        let mut hi = lo;
        for b in &active_blocks {
            for (a, c) in b.to_array().into_iter().enumerate() {
                lo[a] = lo[a].min(c);
                hi[a] = hi[a].max(c);
            }
        }
        let extent = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
        let mut index = FlatBlockIndex {
            min: BlockCoord::new(lo[0], lo[1], lo[2]),
            extent,
            phi: alloc::vec![MISS; extent.iter().map(|&e| e as usize).product()],
        };
        for (c, b) in active_blocks.iter().enumerate() {
            let q = index.flat(*b).expect("block inside its own bounds");
            index.phi[q] = c as u32;
        }
        Self::from_flat(block_size, active_blocks, index)
    }

    pub fn block_size(&self) -> i32 {
        self.block_size
    }

    pub fn nodes_per_block(&self) -> usize {
        let b = self.block_size as usize;
        b * b * b
    }

    pub fn n_blocks_active(&self) -> usize {
        self.active_blocks.len()
    }

    /// Allocated node count, `n_blocks_active · B³`.
    pub fn node_count(&self) -> usize {
        self.n_blocks_active() * self.nodes_per_block()
    }

    pub fn active_blocks(&self) -> &[BlockCoord] {
        &self.active_blocks
    }

    /// Slot count of the backing hash table, if the map is hash based.
    pub fn hash_capacity(&self) -> Option<usize> {
        match &self.lookup {
            BlockLookup::Flat(_) => None,
            BlockLookup::Hashed(table) => Some(table.capacity()),
        }
    }

    /// `Φ(b)`, or `None` for inactive blocks.
    #[inline]
    pub fn block_index(&self, b: BlockCoord) -> Option<usize> {
        let v = match &self.lookup {
            BlockLookup::Flat(flat) => flat.get(b),
            BlockLookup::Hashed(table) => {
                let key = pack_key(b, DEFAULT_BITS, DEFAULT_BIAS).ok()?;
                table.lookup(key)
            }
        };
        v.map(|v| v as usize)
    }

    /// `φ(n) = Φ(b(n))·B³ + ℓ(n)`.
    pub fn node_index(&self, n: NodeTuple) -> Result<usize> {
        let b = block_of(n, self.block_size);
        let phi = self
            .block_index(b)
            .ok_or(Error::InactiveBlock(n, b))?;
        Ok(phi * self.nodes_per_block() + local_offset(n, self.block_size))
    }

    /// Inverse of [`node_index`](Self::node_index) over the allocated range.
    pub fn node_at(&self, index: usize) -> NodeTuple {
        let per = self.nodes_per_block();
        let origin = self.active_blocks[index / per].origin(self.block_size);
        let l = local_decode(index % per, self.block_size);
        origin.offset(l.i, l.j, l.k)
    }

    /// Compact indices of the 3×3×3 support starting at `base`, in (a, b, c)
    /// row-major order. Each distinct block is looked up once.
    pub fn stencil_indices(&self, base: NodeTuple) -> Result<[usize; STENCIL]> {
        let bs = self.block_size;
        let per = self.nodes_per_block();
        let first = block_of(base, bs);
        let axis = |c0: i32, b0: i32| -> [(usize, usize); 3] {
            core::array::from_fn(|o| {
                let c = c0 + o as i32;
                let blk = floor_div(c, bs);
                ((blk - b0) as usize, c.rem_euclid(bs) as usize)
            })
        };
        let ai = axis(base.i, first.bi);
        let aj = axis(base.j, first.bj);
        let ak = axis(base.k, first.bk);
        let mut cache = [[[usize::MAX; 2]; 2]; 2];
        let mut out = [0usize; STENCIL];
        let ub = bs as usize;
        for (a, &(bi, li)) in ai.iter().enumerate() {
            for (b, &(bj, lj)) in aj.iter().enumerate() {
                for (c, &(bk, lk)) in ak.iter().enumerate() {
                    let slot = &mut cache[bi][bj][bk];
                    if *slot == usize::MAX {
                        let blk = BlockCoord::new(
                            first.bi + bi as i32,
                            first.bj + bj as i32,
                            first.bk + bk as i32,
                        );
                        let phi = self.block_index(blk).ok_or_else(|| {
                            Error::InactiveBlock(base.offset(a as i32, b as i32, c as i32), blk)
                        })?;
                        *slot = phi * per;
                    }
                    out[(a * 3 + b) * 3 + c] = *slot + (li * ub + lj) * ub + lk;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LO: i32 = -(1 << 20);
    const HI: i32 = (1 << 20) - 1;

    #[test]
    fn pack_examples() {
        let k = pack_key(NodeTuple::new(LO, LO, LO), DEFAULT_BITS, DEFAULT_BIAS).unwrap();
        assert_eq!(k.0, 0);
        let k = pack_key(NodeTuple::new(0, 0, 0), DEFAULT_BITS, DEFAULT_BIAS).unwrap();
        assert_eq!(k.0, (1u64 << 62) + (1u64 << 41) + (1u64 << 20));
        assert_eq!(
            unpack_key(PackedKey(0), DEFAULT_BITS, DEFAULT_BIAS),
            NodeTuple::new(LO, LO, LO)
        );
        assert_eq!(
            unpack_key(k, DEFAULT_BITS, DEFAULT_BIAS),
            NodeTuple::new(0, 0, 0)
        );
    }

    #[test]
    fn pack_rejects_out_of_range() {
        for bad in [HI + 1, LO - 1] {
            let err = pack_key(NodeTuple::new(0, bad, 0), DEFAULT_BITS, DEFAULT_BIAS).unwrap_err();
            assert!(matches!(err, Error::KeyRange { .. }));
        }
    }

    #[test]
    fn round_trip_corners_and_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut tuples: Vec<NodeTuple> = (0..8)
            .map(|c| {
                let pick = |bit: i32| if c & bit != 0 { HI } else { LO };
                NodeTuple::new(pick(1), pick(2), pick(4))
            })
            .collect();
        tuples.extend(
            (0..100_000)
                .map(|_| NodeTuple::new(rng.gen_range(LO..=HI), rng.gen_range(LO..=HI), rng.gen_range(LO..=HI))),
        );
        let mut keys = BTreeSet::new();
        for t in &tuples {
            let k = pack_key(*t, DEFAULT_BITS, DEFAULT_BIAS).unwrap();
            assert_eq!(unpack_key(k, DEFAULT_BITS, DEFAULT_BIAS), *t);
            keys.insert(k);
        }
        let distinct: BTreeSet<_> = tuples.iter().collect();
        assert_eq!(keys.len(), distinct.len());
    }

    proptest! {
        #[test]
        fn round_trip_small_widths(bits in 1u32..=21, a in any::<u32>(), b in any::<u32>(), c in any::<u32>()) {
            let bias = 1i64 << (bits - 1);
            let span = 1u32 << bits;
            let t = NodeTuple::new(
                (a % span) as i32 - bias as i32,
                (b % span) as i32 - bias as i32,
                (c % span) as i32 - bias as i32,
            );
            let k = pack_key(t, bits, bias).unwrap();
            prop_assert!(k.0 < 1u64 << (3 * bits));
            prop_assert_eq!(unpack_key(k, bits, bias), t);
        }

        #[test]
        fn block_and_local_reassemble(i in -10_000i32..10_000, j in -10_000i32..10_000, k in -10_000i32..10_000, bs in 1i32..9) {
            let n = NodeTuple::new(i, j, k);
            let b = block_of(n, bs);
            let l = local_offset(n, bs);
            prop_assert!(l < (bs * bs * bs) as usize);
            let d = local_decode(l, bs);
            let o = b.origin(bs);
            prop_assert_eq!(o.offset(d.i, d.j, d.k), n);
        }
    }

    #[test]
    fn mix64_properties() {
        let mut seen = BTreeSet::new();
        for k in 0..1_000_000u64 {
            assert!(seen.insert(mix64(PackedKey(k))));
        }
        let diff = (mix64(PackedKey(0)) ^ mix64(PackedKey(1))).count_ones();
        assert!(diff >= 20, "only {diff} bits differ");
        assert_eq!(mix64(PackedKey(12345)), mix64(PackedKey(12345)));
    }

    #[test]
    fn block_of_examples() {
        assert_eq!(block_of(NodeTuple::new(5, 0, -1), 4), BlockCoord::new(1, 0, -1));
        assert_eq!(block_of(NodeTuple::new(-4, -5, 7), 4), BlockCoord::new(-1, -2, 1));
        for bs in 1..8 {
            assert_eq!(block_of(NodeTuple::default(), bs), BlockCoord::default());
        }
    }

    #[test]
    fn local_offset_examples() {
        assert_eq!(local_offset(NodeTuple::default(), 4), 0);
        assert_eq!(local_offset(NodeTuple::new(5, 0, -1), 4), 19);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let n = NodeTuple::new(rng.gen_range(-500..500), rng.gen_range(-500..500), rng.gen_range(-500..500));
            assert!(local_offset(n, 4) < 64);
        }
    }

    #[test]
    fn node_index_formula() {
        let blocks = alloc::vec![
            BlockCoord::new(0, 0, 0),
            BlockCoord::new(5, 5, 5),
            BlockCoord::new(-2, 0, 1),
            BlockCoord::new(1, 0, -1),
        ];
        let map = ActiveIndexMap::from_active_list(4, blocks);
        assert_eq!(map.node_index(NodeTuple::new(0, 0, 0)).unwrap(), 0);
        // Φ = 3 for block (1,0,-1), ℓ(5,0,-1) = 19.
        assert_eq!(map.node_index(NodeTuple::new(5, 0, -1)).unwrap(), 3 * 64 + 19);
        let err = map.node_index(NodeTuple::new(100, 0, 0)).unwrap_err();
        assert!(matches!(err, Error::InactiveBlock(..)));
    }

    #[test]
    fn node_index_enumerates_contiguous_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut set = BTreeSet::new();
        while set.len() < 40 {
            set.insert(BlockCoord::new(rng.gen_range(-6..6), rng.gen_range(-6..6), rng.gen_range(-6..6)));
        }
        let map = ActiveIndexMap::from_active_list(4, set.iter().copied().collect());
        let mut seen = alloc::vec![false; map.node_count()];
        for b in map.active_blocks() {
            let o = b.origin(4);
            for l in 0..64 {
                let d = local_decode(l, 4);
                let n = o.offset(d.i, d.j, d.k);
                let idx = map.node_index(n).unwrap();
                assert!(!seen[idx]);
                seen[idx] = true;
                assert_eq!(map.node_at(idx), n);
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn stencil_matches_node_index() {
        let blocks: Vec<_> = (-1..2)
            .flat_map(|a| (-1..2).flat_map(move |b| (-1..2).map(move |c| BlockCoord::new(a, b, c))))
            .collect();
        let map = ActiveIndexMap::from_active_list(4, blocks);
        for base in [NodeTuple::new(-4, -4, -4), NodeTuple::new(2, 3, -1), NodeTuple::new(5, 1, 0)] {
            let idx = map.stencil_indices(base).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        let n = base.offset(a, b, c);
                        assert_eq!(idx[((a * 3 + b) * 3 + c) as usize], map.node_index(n).unwrap());
                    }
                }
            }
        }
    }
}
