//! Pair-aligned parallel execution.
//!
//! Each gate's pair units are cut into `C` contiguous chunks and processed by
//! `C` workers, each with a private cache window of `cache_bytes / C`. Units
//! never straddle workers, so every block is touched by exactly one worker
//! per gate and workers only ever write disjoint blocks. A scoped join after
//! every gate is the barrier.

use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::cache::{CacheConfig, CacheWindow};
use crate::error::{Error, Result};
use crate::kernel::{process_units, PairUnit};
use crate::metrics::Metrics;
use crate::model::{Circuit, GateOp};
use crate::store::BlockStore;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    pub workers: usize,
    /// Half-open ranges, one per worker.
    pub ranges: Vec<Range<u64>>,
}

impl PartitionPlan {
    /// Ranges as inclusive `[start, end]` pairs.
    pub fn inclusive(&self) -> Vec<(u64, u64)> {
        self.ranges.iter().map(|r| (r.start, r.end - 1)).collect()
    }
}

/// Index interval of worker `i`: `[⌊total·i/C⌋, ⌊total·(i+1)/C⌋ - 1]`.
pub fn partition_indices(total: u64, workers: usize) -> Result<PartitionPlan> {
    if workers == 0 || workers as u64 > total {
        return Err(Error::InvalidWorkerCount { workers, total });
    }
    let c = workers as u128;
    let bound = |i: u128| (total as u128 * i / c) as u64;
    let ranges = (0..c).map(|i| bound(i)..bound(i + 1)).collect();
    Ok(PartitionPlan { workers, ranges })
}

/// Contiguous chunks of `units`, sizes differing by at most one (larger
/// chunks first). Workers beyond the unit count get empty slices.
pub fn assign_pair_units(units: &[PairUnit], workers: usize) -> Vec<&[PairUnit]> {
    let workers = workers.max(1);
    let (q, r) = (units.len() / workers, units.len() % workers);
    let mut out = Vec::with_capacity(workers);
    let mut start = 0;
    for w in 0..workers {
        let len = q + usize::from(w < r);
        out.push(&units[start..start + len]);
        start += len;
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct WorkerReport {
    pub worker: usize,
    pub gate: usize,
    pub units: usize,
    pub pairs: u64,
    pub metrics: Metrics,
    pub wall_ms: f64,
    /// Global sequence numbers taken when the worker started and finished
    /// (after its flush) on this gate.
    pub start_seq: u64,
    pub end_seq: u64,
}

#[derive(Debug, Clone)]
pub struct ParallelConfig {
    pub workers: usize,
    pub cache_bytes: u64,
    /// Sleep `worker_delay × worker id` before each worker starts a gate.
    pub worker_delay: Option<Duration>,
}

impl ParallelConfig {
    pub fn new(workers: usize, cache_bytes: u64) -> Self {
        Self {
            workers,
            cache_bytes,
            worker_delay: None,
        }
    }

    pub fn per_worker_cache(&self, block_amps: usize) -> Result<CacheConfig> {
        if self.workers == 0 {
            return Err(Error::InvalidWorkerCount {
                workers: 0,
                total: 0,
            });
        }
        CacheConfig::new(self.cache_bytes / self.workers as u64, block_amps)
    }
}

struct Task<'a> {
    store: &'a BlockStore,
    op: &'a GateOp,
    units: &'a [PairUnit],
    cache: CacheConfig,
    worker: usize,
    gate: usize,
    delay: Option<Duration>,
    seq: &'a AtomicU64,
}

fn run_worker(task: Task<'_>) -> (WorkerReport, Result<()>) {
    if let Some(d) = task.delay {
        std::thread::sleep(d * task.worker as u32);
    }
    let start_seq = task.seq.fetch_add(1, Ordering::SeqCst);
    let t0 = Instant::now();
    let mut window = CacheWindow::new(task.cache);
    let outcome = process_units(task.store, &mut window, task.op, task.units)
        .and_then(|pairs| window.flush(task.store).map(|_| pairs));
    let end_seq = task.seq.fetch_add(1, Ordering::SeqCst);
    let report = WorkerReport {
        worker: task.worker,
        gate: task.gate,
        units: task.units.len(),
        pairs: *outcome.as_ref().unwrap_or(&0),
        metrics: window.take_metrics(),
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        start_seq,
        end_seq,
    };
    (report, outcome.map(|_| ()))
}

/// Runs `circuit` on `store` with `workers` workers; see [`run_parallel_with`].
pub fn run_parallel(
    store: &BlockStore,
    circuit: &Circuit,
    workers: usize,
    cache_bytes: u64,
    metrics: &mut Metrics,
) -> Result<Vec<WorkerReport>> {
    run_parallel_with(
        store,
        circuit,
        &ParallelConfig::new(workers, cache_bytes),
        metrics,
    )
}

/// Applies every gate of `circuit` in order, splitting each gate's pair units
/// across workers and joining all of them before the next gate starts.
/// Counters of finished work land in `metrics` even when a worker fails.
pub fn run_parallel_with(
    store: &BlockStore,
    circuit: &Circuit,
    config: &ParallelConfig,
    metrics: &mut Metrics,
) -> Result<Vec<WorkerReport>> {
    circuit.validate()?;
    if circuit.n_qubits != store.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: store.n_qubits(),
            got: circuit.n_qubits,
        });
    }
    let cache = config.per_worker_cache(store.block_amps())?;
    let seq = AtomicU64::new(0);
    let mut reports = Vec::with_capacity(circuit.len() * config.workers);

    for (gate, op) in circuit.ops.iter().enumerate() {
        let units =
            crate::kernel::plan_block_pairs(store.n_qubits(), store.block_amps(), op.target);
        let chunks = assign_pair_units(&units, config.workers);
        let task = |worker: usize, units| Task {
            store,
            op,
            units,
            cache,
            worker,
            gate,
            delay: config.worker_delay,
            seq: &seq,
        };
        let results: Vec<(WorkerReport, Result<()>)> = if chunks.len() == 1 {
            vec![run_worker(task(0, chunks[0]))]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = chunks
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(w, &c)| {
                        let t = task(w, c);
                        s.spawn(move || run_worker(t))
                    })
                    .collect();
                let mut out = vec![run_worker(task(0, chunks[0]))];
                out.extend(
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("worker thread panicked")),
                );
                out
            })
        };

        let mut failure = None;
        for (report, outcome) in results {
            metrics.absorb(&report.metrics);
            if let Err(e) = outcome {
                failure.get_or_insert(Error::WorkerFailed {
                    worker: report.worker,
                    gate,
                    source: Box::new(e),
                });
            }
            reports.push(report);
        }
        if let Some(e) = failure {
            return Err(e);
        }
        metrics.traversals += 1;
        metrics.gates_applied += 1;
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GateLabel;
    use proptest::prelude::*;

    #[test]
    fn partition_examples() {
        assert_eq!(
            partition_indices(16, 4).unwrap().inclusive(),
            vec![(0, 3), (4, 7), (8, 11), (12, 15)]
        );
        assert_eq!(partition_indices(16, 1).unwrap().inclusive(), vec![(0, 15)]);
        assert_eq!(
            partition_indices(10, 3).unwrap().inclusive(),
            vec![(0, 2), (3, 5), (6, 9)]
        );
        assert!(matches!(
            partition_indices(16, 0),
            Err(Error::InvalidWorkerCount { .. })
        ));
        assert!(partition_indices(4, 5).is_err());
    }

    fn units(n: usize) -> Vec<PairUnit> {
        (0..n).map(|b| PairUnit::from((b, b))).collect()
    }

    #[test]
    fn assign_examples() {
        let u = units(4);
        assert_eq!(assign_pair_units(&u, 2), vec![&u[0..2], &u[2..4]]);
        let u = units(5);
        let sizes: Vec<usize> = assign_pair_units(&u, 2).iter().map(|c| c.len()).collect();
        assert_eq!(sizes, vec![3, 2]);
        assert_eq!(assign_pair_units(&u, 1), vec![&u[..]]);
        let sizes: Vec<usize> = assign_pair_units(&units(2), 4)
            .iter()
            .map(|c| c.len())
            .collect();
        assert_eq!(sizes, vec![1, 1, 0, 0]);
    }

    proptest! {
        #[test]
        fn partitions_cover_and_balance(total in 1u64..100_000, workers in 1usize..64) {
            prop_assume!(workers as u64 <= total);
            let p = partition_indices(total, workers).unwrap();
            prop_assert_eq!(p.ranges.len(), workers);
            prop_assert_eq!(p.ranges[0].start, 0);
            prop_assert_eq!(p.ranges.last().unwrap().end, total);
            for w in p.ranges.windows(2) {
                prop_assert_eq!(w[0].end, w[1].start);
            }
            let sizes: Vec<u64> = p.ranges.iter().map(|r| r.end - r.start).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn unit_assignment_is_exact(n in 0usize..500, workers in 1usize..17) {
            let u = units(n);
            let chunks = assign_pair_units(&u, workers);
            prop_assert_eq!(chunks.len(), workers);
            let flat: Vec<PairUnit> = chunks.iter().flat_map(|c| c.iter().copied()).collect();
            prop_assert_eq!(&flat, &u);
            let max = chunks.iter().map(|c| c.len()).max().unwrap();
            let min = chunks.iter().map(|c| c.len()).min().unwrap();
            prop_assert!(max - min <= 1);
        }
    }

    #[test]
    fn per_worker_cache_must_fit_a_pair_unit() {
        let dir = tempfile::tempdir().unwrap();
        let store = BlockStore::create(dir.path().join("s"), 6, 8, false).unwrap();
        let c = Circuit::with_ops(6, vec![GateOp::single(GateLabel::H, 5)]);
        let mut m = Metrics::default();
        // 4 workers × 2 blocks × 128 bytes needs 1024
        assert!(matches!(
            run_parallel(&store, &c, 4, 1023, &mut m),
            Err(Error::CapacityTooSmall { .. })
        ));
        assert!(run_parallel(&store, &c, 4, 1024, &mut m).is_ok());
        assert_eq!(m.blocks_read, 8);
    }
}
