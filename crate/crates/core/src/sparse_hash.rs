//! Hash-based construction: every particle inserts the packed keys of its
//! support blocks into a shared open-addressing table. The thread whose
//! compare-and-swap claims an empty slot takes the next compact block index.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::grid_index::{
    for_each_support_block, mix64, pack_key, unpack_key, ActiveIndexMap, BlockCoord, PackedKey,
    DEFAULT_BIAS, DEFAULT_BITS,
};
use crate::kernel::support_base;
use crate::parallel::Executor;
use crate::particles::ParticleSet;

/// Marks an unused key slot. Packed keys occupy at most 63 bits.
pub const EMPTY: u64 = u64::MAX;
const UNSET: u32 = u32::MAX;
const OVERFLOWED: u32 = u32::MAX - 1;

/// Highest fill ratio `active / capacity` before the table reports overflow.
pub const MAX_LOAD: f64 = 0.5;

/// `mix64(key) & (H − 1)`.
#[inline]
pub fn initial_slot(key: PackedKey, capacity: usize) -> usize {
    debug_assert!(capacity.is_power_of_two());
    (mix64(key) as usize) & (capacity - 1)
}

#[inline]
fn backoff(spins: &mut u32) {
    *spins += 1;
    #[cfg(feature = "std")]
    if *spins > 64 {
        std::thread::yield_now();
        return;
    }
    core::hint::spin_loop();
}

/// The table ran out of room; rebuild with a larger capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overflow;

pub struct BlockHashTable {
    keys: Vec<AtomicU64>,
    values: Vec<AtomicU32>,
    active_keys: Vec<AtomicU64>,
    counter: AtomicU32,
    overflow: AtomicBool,
    n_probe: usize,
}

impl core::fmt::Debug for BlockHashTable {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("BlockHashTable")
            .field("capacity", &self.capacity())
            .field("len", &self.len())
            .field("overflowed", &self.overflowed())
            .finish()
    }
}

impl BlockHashTable {
    pub fn new(capacity: usize) -> Result<Self> {
        if !capacity.is_power_of_two() {
            return Err(Error::Capacity(capacity));
        }
        let max_blocks = (capacity as f64 * MAX_LOAD) as usize;
        Ok(Self {
            keys: (0..capacity).map(|_| AtomicU64::new(EMPTY)).collect(),
            values: (0..capacity).map(|_| AtomicU32::new(UNSET)).collect(),
            active_keys: (0..max_blocks).map(|_| AtomicU64::new(EMPTY)).collect(),
            counter: AtomicU32::new(0),
            overflow: AtomicBool::new(false),
            n_probe: capacity,
        })
    }

    pub fn capacity(&self) -> usize {
        self.keys.len()
    }

    /// Number of compact indices handed out (may exceed the block capacity after overflow).
    pub fn len(&self) -> usize {
        self.counter.load(Ordering::Acquire) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overflowed(&self) -> bool {
        self.overflow.load(Ordering::Acquire)
    }

    fn set_overflow(&self) -> Overflow {
        self.overflow.store(true, Ordering::Release);
        Overflow
    }

    /// Inserts `key`, returning its compact index and whether this call created it.
    ///
    /// Safe to call concurrently. Exactly one caller per key sees `true`;
    /// the others wait for the winner to publish the index.
    pub fn insert(&self, key: PackedKey) -> core::result::Result<(u32, bool), Overflow> {
        debug_assert_ne!(key.0, EMPTY);
        let mask = self.capacity() - 1;
        let mut s = initial_slot(key, self.capacity());
        for _ in 0..self.n_probe {
            match self.keys[s].compare_exchange(EMPTY, key.0, Ordering::AcqRel, Ordering::Acquire) {
                Ok(_) => {
                    let index = self.counter.fetch_add(1, Ordering::AcqRel);
                    if (index as usize) < self.active_keys.len() {
                        self.active_keys[index as usize].store(key.0, Ordering::Relaxed);
                        self.values[s].store(index, Ordering::Release);
                        return Ok((index, true));
                    }
                    self.values[s].store(OVERFLOWED, Ordering::Release);
                    return Err(self.set_overflow());
                }
                Err(existing) if existing == key.0 => {
                    let mut spins = 0u32;
                    let index = loop {
                        match self.values[s].load(Ordering::Acquire) {
                            UNSET => backoff(&mut spins),
                            v => break v,
                        }
                    };
                    if index == OVERFLOWED {
                        return Err(Overflow);
                    }
                    return Ok((index, false));
                }
                Err(_) => s = (s + 1) & mask,
            }
        }
        Err(self.set_overflow())
    }

    /// Index stored for `key`. Only meaningful once insertion has finished.
    pub fn lookup(&self, key: PackedKey) -> Option<u32> {
        let mask = self.capacity() - 1;
        let mut s = initial_slot(key, self.capacity());
        for _ in 0..self.n_probe {
            let k = self.keys[s].load(Ordering::Acquire);
            if k == key.0 {
                return match self.values[s].load(Ordering::Acquire) {
                    UNSET | OVERFLOWED => None,
                    v => Some(v),
                };
            }
            if k == EMPTY {
                return None;
            }
            s = (s + 1) & mask;
        }
        None
    }

    /// Number of slots holding a key.
    pub fn occupied(&self) -> usize {
        self.keys
            .iter()
            .filter(|k| k.load(Ordering::Relaxed) != EMPTY)
            .count()
    }

    /// Keys in compact-index order.
    pub fn active_keys(&self) -> Vec<PackedKey> {
        let n = self.len().min(self.active_keys.len());
        self.active_keys[..n]
            .iter()
            .map(|k| PackedKey(k.load(Ordering::Acquire)))
            .collect()
    }
}

/// Inserts every support block of every massive particle into a table of
/// `capacity` slots. Returns `Ok(None)` when the table overflowed.
fn try_build(
    particles: &ParticleSet,
    h: f64,
    block_size: i32,
    capacity: usize,
    exec: &Executor,
) -> Result<Option<BlockHashTable>> {
    let table = BlockHashTable::new(capacity)?;
    let result = exec.try_for_each(&particles.particles, |_, p| {
        if p.mass <= 0.0 {
            return Ok(());
        }
        let base = support_base(&p.x, h);
        let mut status = Ok(());
        for_each_support_block(base, block_size, |b| {
            if status.is_err() {
                return;
            }
            status = match pack_key(b, DEFAULT_BITS, DEFAULT_BIAS) {
                Ok(key) => table.insert(key).map(|_| ()).map_err(|_| None),
                Err(e) => Err(Some(e)),
            };
        });
        status
    });
    match result {
        Ok(()) if !table.overflowed() => Ok(Some(table)),
        Ok(()) | Err(None) => Ok(None),
        Err(Some(e)) => Err(e),
    }
}

/// Builds the table, doubling the capacity and starting over after each overflow.
pub fn build_hash_table(
    particles: &ParticleSet,
    h: f64,
    block_size: i32,
    initial_capacity: usize,
    exec: &Executor,
) -> Result<BlockHashTable> {
    if !initial_capacity.is_power_of_two() {
        return Err(Error::Capacity(initial_capacity));
    }
    if !particles.iter().any(|p| p.mass > 0.0) {
        return Err(Error::NoParticles);
    }
    let mut capacity = initial_capacity;
    loop {
        if let Some(table) = try_build(particles, h, block_size, capacity, exec)? {
            return Ok(table);
        }
        capacity = capacity
            .checked_mul(2)
            .ok_or(Error::Capacity(usize::MAX))?;
    }
}

/// Hash-based compact block map; `Φ` is answered by table lookup.
pub fn build_hash_sparse_grid(
    particles: &ParticleSet,
    h: f64,
    block_size: i32,
    initial_capacity: usize,
    exec: &Executor,
) -> Result<ActiveIndexMap> {
    let table = build_hash_table(particles, h, block_size, initial_capacity, exec)?;
    let active = table
        .active_keys()
        .into_iter()
        .map(|k| {
            let t = unpack_key(k, DEFAULT_BITS, DEFAULT_BIAS);
            BlockCoord::new(t.i, t.j, t.k)
        })
        .collect();
    Ok(ActiveIndexMap::from_hashed(block_size, active, table))
}
