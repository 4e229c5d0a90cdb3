//! Run counters.
//!
//! Every engine reports through [`Metrics`]; per-worker instances are merged
//! at gate barriers. Traversals count planned sweeps over the state: the
//! streamed kernels add one per gate, the dense baseline `2^n` per gate.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_qubits: usize,
    pub strategy: String,
    pub workers: usize,
    pub gates_applied: u64,
    pub traversals: u64,
    pub blocks_read: u64,
    pub blocks_written: u64,
    pub bytes_read: u64,
    pub bytes_written: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub peak_cache_bytes: u64,
    pub wall_ms: f64,
    /// Complex multiply-adds; only the dense engine records these.
    #[serde(default)]
    pub multiply_adds: u64,
}

impl Metrics {
    pub fn new(n_qubits: usize, strategy: impl Into<String>, workers: usize) -> Self {
        Self {
            n_qubits,
            strategy: strategy.into(),
            workers,
            ..Self::default()
        }
    }

    pub fn record_read(&mut self, block_bytes: u64) {
        self.blocks_read += 1;
        self.bytes_read += block_bytes;
    }

    pub fn record_write(&mut self, block_bytes: u64) {
        self.blocks_written += 1;
        self.bytes_written += block_bytes;
    }

    pub fn observe_cache_bytes(&mut self, resident: u64) {
        self.peak_cache_bytes = self.peak_cache_bytes.max(resident);
    }

    /// Folds `other` into `self`; see [`merge`].
    pub fn absorb(&mut self, other: &Metrics) {
        *self = merge(self, other);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Counters add; `peak_cache_bytes`, `wall_ms` and the identifying fields
/// take the maximum, so the operation is commutative and associative with
/// `Metrics::default()` as identity.
pub fn merge(a: &Metrics, b: &Metrics) -> Metrics {
    Metrics {
        n_qubits: a.n_qubits.max(b.n_qubits),
        strategy: a.strategy.clone().max(b.strategy.clone()),
        workers: a.workers.max(b.workers),
        gates_applied: a.gates_applied + b.gates_applied,
        traversals: a.traversals + b.traversals,
        blocks_read: a.blocks_read + b.blocks_read,
        blocks_written: a.blocks_written + b.blocks_written,
        bytes_read: a.bytes_read + b.bytes_read,
        bytes_written: a.bytes_written + b.bytes_written,
        cache_hits: a.cache_hits + b.cache_hits,
        cache_misses: a.cache_misses + b.cache_misses,
        peak_cache_bytes: a.peak_cache_bytes.max(b.peak_cache_bytes),
        wall_ms: a.wall_ms.max(b.wall_ms),
        multiply_adds: a.multiply_adds + b.multiply_adds,
    }
}

/// Serializes to a JSON object with the documented field names.
pub fn emit(m: &Metrics) -> serde_json::Value {
    serde_json::to_value(m).expect("metrics are plain data")
}

/// Lock-free block I/O tallies shared by all users of one store.
#[derive(Debug, Default)]
pub struct IoCounters {
    blocks_read: AtomicU64,
    blocks_written: AtomicU64,
    bytes_read: AtomicU64,
    bytes_written: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IoSnapshot {
    pub blocks_read: u64,
    pub blocks_written: u64,
    pub bytes_read: u64,
    pub bytes_written: u64,
}

impl IoSnapshot {
    pub fn since(&self, earlier: &IoSnapshot) -> IoSnapshot {
        IoSnapshot {
            blocks_read: self.blocks_read - earlier.blocks_read,
            blocks_written: self.blocks_written - earlier.blocks_written,
            bytes_read: self.bytes_read - earlier.bytes_read,
            bytes_written: self.bytes_written - earlier.bytes_written,
        }
    }
}

impl IoCounters {
    pub fn add_read(&self, bytes: u64) {
        self.blocks_read.fetch_add(1, Ordering::Relaxed);
        self.bytes_read.fetch_add(bytes, Ordering::Relaxed);
    }

    pub fn add_write(&self, bytes: u64) {
        self.blocks_written.fetch_add(1, Ordering::Relaxed);
        self.bytes_written.fetch_add(bytes, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> IoSnapshot {
        IoSnapshot {
            blocks_read: self.blocks_read.load(Ordering::Relaxed),
            blocks_written: self.blocks_written.load(Ordering::Relaxed),
            bytes_read: self.bytes_read.load(Ordering::Relaxed),
            bytes_written: self.bytes_written.load(Ordering::Relaxed),
        }
    }
}
