//! Paired streaming gate kernel.
//!
//! A gate on qubit `k` only mixes amplitude pairs `(i, i ^ 2^k)`. Lifting the
//! pairing from indices to blocks gives a list of pair units: when the stride
//! `2^k` is smaller than a block every pair is internal to one block, and
//! otherwise block `b` (with the relevant bit clear) pairs with block
//! `b ^ 2^k / block_amps`. Every block belongs to exactly one unit, so one
//! sweep over the units reads and writes each block exactly once.

use crate::cache::CacheWindow;
use crate::error::{Error, Result};
use crate::metrics::Metrics;
use crate::model::{ComplexAmp, Gate2x2, GateOp};
use crate::store::{BlockBuffer, BlockStore};

/// One block (intra-block stride) or two partner blocks processed together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairUnit {
    pub block_a: usize,
    pub block_b: usize,
}

impl PairUnit {
    pub fn is_intra_block(&self) -> bool {
        self.block_a == self.block_b
    }
}

impl From<(usize, usize)> for PairUnit {
    fn from((block_a, block_b): (usize, usize)) -> Self {
        Self { block_a, block_b }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatePlan {
    pub op: GateOp,
    pub units: Vec<PairUnit>,
}

impl GatePlan {
    pub fn new(op: GateOp, n_qubits: usize, block_amps: usize) -> Self {
        Self {
            op,
            units: plan_block_pairs(n_qubits, block_amps, op.target),
        }
    }
}

/// Pair units for a gate on qubit `k`, ascending by `block_a`.
pub fn plan_block_pairs(n_qubits: usize, block_amps: usize, k: usize) -> Vec<PairUnit> {
    let n_blocks = (1usize << n_qubits) / block_amps;
    let stride = 1usize << k;
    if stride < block_amps {
        return (0..n_blocks).map(|b| PairUnit::from((b, b))).collect();
    }
    let distance = stride / block_amps;
    (0..n_blocks)
        .filter(|b| b & distance == 0)
        .map(|b| PairUnit::from((b, b | distance)))
        .collect()
}

#[inline]
fn control_set(index: u64, control: Option<usize>) -> bool {
    control.is_none_or(|c| index & (1u64 << c) != 0)
}

/// Applies `g` to every pair `(j, j + 2^k)` inside one block whose global
/// index starts at `base_index`. Returns the number of pairs visited.
pub fn apply_gate_in_block(
    amps: &mut [ComplexAmp],
    g: &Gate2x2,
    k: usize,
    base_index: u64,
    control: Option<usize>,
) -> Result<u64> {
    let stride = 1usize << k;
    if stride >= amps.len() {
        return Err(Error::StrideTooLarge {
            stride: stride as u64,
            block_amps: amps.len(),
        });
    }
    let pairs = (amps.len() / 2) as u64;
    // A control bit above the block offset bits is constant over the block.
    let per_pair_control = match control {
        Some(c) if (1usize << c) >= amps.len() => {
            if !control_set(base_index, control) {
                return Ok(pairs);
            }
            None
        }
        other => other,
    };
    for (chunk_no, chunk) in amps.chunks_exact_mut(2 * stride).enumerate() {
        let (lo, hi) = chunk.split_at_mut(stride);
        match per_pair_control {
            None => {
                for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                    (*a, *b) = g.apply(*a, *b);
                }
            }
            Some(_) => {
                let chunk_base = base_index + (chunk_no * 2 * stride) as u64;
                for (j, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    if control_set(chunk_base + j as u64, per_pair_control) {
                        (*a, *b) = g.apply(*a, *b);
                    }
                }
            }
        }
    }
    Ok(pairs)
}

/// Applies `g` across partner blocks: pair `j` is `(a[j], b[j])`.
/// Returns the number of pairs visited.
pub fn apply_gate_cross_block(
    a: &mut BlockBuffer,
    b: &mut BlockBuffer,
    g: &Gate2x2,
    k: usize,
    control: Option<usize>,
) -> Result<u64> {
    let block_amps = a.amps.len();
    let stride = 1usize << k;
    if b.amps.len() != block_amps {
        return Err(Error::BufferLength {
            expected: block_amps,
            got: b.amps.len(),
        });
    }
    if stride < block_amps {
        return Err(Error::StrideTooSmall {
            stride: stride as u64,
            block_amps,
        });
    }
    let distance = stride / block_amps;
    if a.block_id & distance != 0 || b.block_id != a.block_id ^ distance {
        return Err(Error::MismatchedPairBlocks {
            a: a.block_id,
            b: b.block_id,
            expected: a.block_id ^ distance,
        });
    }
    let base = (a.block_id * block_amps) as u64;
    let per_pair_control = match control {
        Some(c) if (1usize << c) >= block_amps => {
            if !control_set(base, control) {
                return Ok(block_amps as u64);
            }
            None
        }
        other => other,
    };
    for (j, (x, y)) in a.amps.iter_mut().zip(b.amps.iter_mut()).enumerate() {
        if per_pair_control.is_none() || control_set(base + j as u64, per_pair_control) {
            (*x, *y) = g.apply(*x, *y);
        }
    }
    Ok(block_amps as u64)
}

/// Runs `units` of `op` through `cache`, marking every touched block dirty.
/// Does not flush. Returns the number of amplitude pairs visited.
pub fn process_units(
    store: &BlockStore,
    cache: &mut CacheWindow,
    op: &GateOp,
    units: &[PairUnit],
) -> Result<u64> {
    let block_amps = store.block_amps();
    let mut pairs = 0;
    for unit in units {
        if unit.is_intra_block() {
            let h = cache.acquire(store, unit.block_a)?;
            let buf = cache.block_mut(&h);
            let base = (buf.block_id * block_amps) as u64;
            pairs += apply_gate_in_block(&mut buf.amps, &op.gate, op.target, base, op.control)?;
            cache.mark_dirty(unit.block_a)?;
            cache.release(h);
        } else {
            let ha = cache.acquire(store, unit.block_a)?;
            let hb = cache.acquire(store, unit.block_b)?;
            let (a, b) = cache.pair_mut(&ha, &hb);
            pairs += apply_gate_cross_block(a, b, &op.gate, op.target, op.control)?;
            cache.mark_dirty(unit.block_a)?;
            cache.mark_dirty(unit.block_b)?;
            cache.release(ha);
            cache.release(hb);
        }
    }
    Ok(pairs)
}

fn check_op(store: &BlockStore, op: &GateOp) -> Result<()> {
    match op.check(store.n_qubits()) {
        None => Ok(()),
        Some(kind) => Err(Error::InvalidCircuit(vec![crate::model::Violation {
            op_index: None,
            kind,
        }])),
    }
}

/// Applies one gate to the whole store in a single sweep over its pair units,
/// then flushes the window. Adds one traversal and one gate to `metrics`
/// together with the window's I/O and cache counters.
pub fn apply_gate_streamed(
    store: &BlockStore,
    cache: &mut CacheWindow,
    op: &GateOp,
    metrics: &mut Metrics,
) -> Result<u64> {
    check_op(store, op)?;
    let units = plan_block_pairs(store.n_qubits(), store.block_amps(), op.target);
    let result = process_units(store, cache, op, &units).and_then(|pairs| {
        cache.flush(store)?;
        Ok(pairs)
    });
    metrics.absorb(&cache.take_metrics());
    let pairs = result?;
    metrics.traversals += 1;
    metrics.gates_applied += 1;
    Ok(pairs)
}
