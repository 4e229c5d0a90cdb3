//! Bounded sliding window of resident blocks.
//!
//! Blocks are loaded on demand, updated in memory and written back when they
//! fall out of the window or on [`CacheWindow::flush`]. Eviction is strictly
//! oldest-inserted first. A held [`BlockHandle`] pins its block; a pair unit
//! needs at most two pins.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::metrics::Metrics;
use crate::model::{ComplexAmp, AMP_BYTES};
use crate::store::{BlockBuffer, BlockStore};

pub const MAX_PINS: usize = 2;

/// Amplitudes that fit in `m` bytes.
pub fn cache_capacity_states(m: u64) -> u64 {
    m / AMP_BYTES
}

/// Whole blocks that fit in `m` bytes.
pub fn cache_capacity_blocks(m: u64, block_bytes: u64) -> u64 {
    m / block_bytes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheConfig {
    pub capacity_bytes: u64,
    pub block_amps: usize,
}

impl CacheConfig {
    pub fn new(capacity_bytes: u64, block_amps: usize) -> Result<Self> {
        let required_bytes = MAX_PINS as u64 * block_amps as u64 * AMP_BYTES;
        if capacity_bytes < required_bytes {
            return Err(Error::CapacityTooSmall {
                capacity_bytes,
                required_bytes,
            });
        }
        Ok(Self {
            capacity_bytes,
            block_amps,
        })
    }

    /// Large enough to keep every block of `store` resident at once.
    pub fn unbounded(store: &BlockStore) -> Self {
        let blocks = store.n_blocks().max(MAX_PINS) as u64;
        Self {
            capacity_bytes: blocks * store.block_bytes(),
            block_amps: store.block_amps(),
        }
    }

    pub fn block_bytes(&self) -> u64 {
        self.block_amps as u64 * AMP_BYTES
    }

    pub fn capacity_states(&self) -> u64 {
        cache_capacity_states(self.capacity_bytes)
    }

    pub fn capacity_blocks(&self) -> usize {
        cache_capacity_blocks(self.capacity_bytes, self.block_bytes()) as usize
    }
}

/// Proof that a block is resident and pinned. Give it back with
/// [`CacheWindow::release`].
#[derive(Debug, PartialEq, Eq)]
pub struct BlockHandle(usize);

impl BlockHandle {
    pub fn block_id(&self) -> usize {
        self.0
    }
}

#[derive(Debug)]
struct Slot {
    buf: BlockBuffer,
    pinned: bool,
}

#[derive(Debug)]
pub struct CacheWindow {
    config: CacheConfig,
    slots: HashMap<usize, Slot>,
    order: VecDeque<usize>,
    spare: Vec<Vec<ComplexAmp>>,
    pins: usize,
    evictions: u64,
    metrics: Metrics,
}

impl CacheWindow {
    pub fn new(config: CacheConfig) -> Self {
        Self {
            config,
            slots: HashMap::new(),
            order: VecDeque::new(),
            spare: Vec::new(),
            pins: 0,
            evictions: 0,
            metrics: Metrics::default(),
        }
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    pub fn resident_blocks(&self) -> usize {
        self.slots.len()
    }

    pub fn resident_bytes(&self) -> u64 {
        self.slots.len() as u64 * self.config.block_bytes()
    }

    pub fn is_resident(&self, b: usize) -> bool {
        self.slots.contains_key(&b)
    }

    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    /// Hits, misses, block I/O and peak residency accumulated so far.
    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn take_metrics(&mut self) -> Metrics {
        std::mem::take(&mut self.metrics)
    }

    /// Makes block `b` resident and pins it.
    pub fn acquire(&mut self, store: &BlockStore, b: usize) -> Result<BlockHandle> {
        if store.block_amps() != self.config.block_amps {
            return Err(Error::BufferLength {
                expected: self.config.block_amps,
                got: store.block_amps(),
            });
        }
        if let Some(slot) = self.slots.get_mut(&b) {
            if !slot.pinned {
                if self.pins == MAX_PINS {
                    return Err(Error::TooManyPins(b));
                }
                slot.pinned = true;
                self.pins += 1;
            }
            self.metrics.cache_hits += 1;
            return Ok(BlockHandle(b));
        }
        if self.pins == MAX_PINS {
            return Err(Error::TooManyPins(b));
        }
        if b >= store.n_blocks() {
            return Err(Error::BlockOutOfRange {
                block: b,
                n_blocks: store.n_blocks(),
            });
        }
        while self.slots.len() >= self.config.capacity_blocks() {
            self.evict_oldest(store)?;
        }
        let mut buf = BlockBuffer::new(b, self.spare.pop().unwrap_or_default());
        store.read_block_into(b, &mut buf)?;
        self.metrics.cache_misses += 1;
        self.metrics.record_read(store.block_bytes());
        self.slots.insert(b, Slot { buf, pinned: true });
        self.order.push_back(b);
        self.pins += 1;
        self.metrics.observe_cache_bytes(self.resident_bytes());
        Ok(BlockHandle(b))
    }

    pub fn release(&mut self, handle: BlockHandle) {
        if let Some(slot) = self.slots.get_mut(&handle.0) {
            if slot.pinned {
                slot.pinned = false;
                self.pins -= 1;
            }
        }
    }

    pub fn block_mut(&mut self, handle: &BlockHandle) -> &mut BlockBuffer {
        &mut self
            .slots
            .get_mut(&handle.0)
            .expect("handle keeps its block resident")
            .buf
    }

    pub fn block(&self, handle: &BlockHandle) -> &BlockBuffer {
        &self.slots[&handle.0].buf
    }

    /// Both buffers of a cross-block pair unit.
    pub fn pair_mut(
        &mut self,
        a: &BlockHandle,
        b: &BlockHandle,
    ) -> (&mut BlockBuffer, &mut BlockBuffer) {
        assert_ne!(a.0, b.0, "pair unit needs two distinct blocks");
        let [sa, sb] = self.slots.get_disjoint_mut([&a.0, &b.0]);
        (
            &mut sa.expect("handle keeps its block resident").buf,
            &mut sb.expect("handle keeps its block resident").buf,
        )
    }

    pub fn mark_dirty(&mut self, b: usize) -> Result<()> {
        let slot = self.slots.get_mut(&b).ok_or(Error::NotResident(b))?;
        slot.buf.dirty = true;
        Ok(())
    }

    fn evict_oldest(&mut self, store: &BlockStore) -> Result<()> {
        let pos = self
            .order
            .iter()
            .position(|b| !self.slots[b].pinned)
            .ok_or(Error::CapacityTooSmall {
                capacity_bytes: self.config.capacity_bytes,
                required_bytes: (self.slots.len() as u64 + 1) * self.config.block_bytes(),
            })?;
        let b = self.order.remove(pos).expect("position is in range");
        let slot = self.slots.remove(&b).expect("ordered ids are resident");
        self.write_back(store, slot.buf)?;
        self.evictions += 1;
        Ok(())
    }

    fn write_back(&mut self, store: &BlockStore, buf: BlockBuffer) -> Result<()> {
        if buf.dirty {
            store.write_block(&buf)?;
            self.metrics.record_write(store.block_bytes());
        }
        self.spare.push(buf.amps);
        Ok(())
    }

    /// Writes back every dirty block and empties the window. Outstanding
    /// pins are dropped. Calling it on an empty window is a no-op.
    pub fn flush(&mut self, store: &BlockStore) -> Result<()> {
        while let Some(b) = self.order.pop_front() {
            let slot = self.slots.remove(&b).expect("ordered ids are resident");
            if let Err(e) = self.write_back(store, slot.buf) {
                self.pins = 0;
                for s in self.slots.values_mut() {
                    s.pinned = false;
                }
                return Err(e);
            }
        }
        self.pins = 0;
        Ok(())
    }
}
