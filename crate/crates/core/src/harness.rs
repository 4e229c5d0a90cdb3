//! Oracle comparison (`verify`) and timing sweeps (`bench`).

use std::fmt;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dense::{DenseOracle, DenseState};
use crate::engine::{execute, EngineConfig, Strategy, DEFAULT_CACHE_BYTES};
use crate::error::{Error, Result};
use crate::model::{
    benchmark_circuit, random_circuit, Circuit, Gate2x2, GateLabel, GateOp, AMP_BYTES,
};
use crate::store::{default_block_amps, total_bytes, BlockStore};

/// Max amplitude deviation accepted between engines.
pub const VERIFY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub min_qubits: usize,
    pub max_qubits: usize,
    pub trials: usize,
    pub depth: usize,
    pub seed: u64,
    /// Block sizes to try; each is capped at `2^n`.
    pub block_amps: Vec<u64>,
    /// Worker counts; 1 runs the serial cached engine, more the parallel one.
    pub workers: Vec<usize>,
    pub tolerance: f64,
    /// Corrupts the gate at this position in every streamed run.
    pub inject_fault: Option<usize>,
    pub scratch: Option<PathBuf>,
}

impl VerifyConfig {
    /// Dense vs. the cached engine and the two-worker engine at default
    /// block size.
    pub fn new(n_qubits: usize, trials: usize, depth: usize, seed: u64) -> Self {
        Self {
            min_qubits: n_qubits,
            max_qubits: n_qubits,
            trials,
            depth,
            seed,
            block_amps: vec![crate::store::DEFAULT_BLOCK_AMPS],
            workers: vec![1, 2],
            tolerance: VERIFY_TOLERANCE,
            inject_fault: None,
            scratch: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Divergence {
    pub trial: usize,
    pub n_qubits: usize,
    pub block_amps: u64,
    pub workers: usize,
    pub deviation: f64,
    /// First gate after which the streamed state departs from the oracle.
    pub first_divergent_gate: Option<usize>,
    pub op: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub trials: usize,
    pub comparisons: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub failures: Vec<Divergence>,
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: {} trials, {} engine comparisons, max deviation {:.3e} (tolerance {:.0e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.trials,
            self.comparisons,
            self.max_deviation,
            self.tolerance
        )?;
        for d in &self.failures {
            write!(
                f,
                "  trial {} (n={}, block_amps={}, workers={}): deviation {:.3e}",
                d.trial, d.n_qubits, d.block_amps, d.workers, d.deviation
            )?;
            match (&d.first_divergent_gate, &d.op) {
                (Some(g), Some(op)) => writeln!(f, ", first divergent gate #{g} `{op}`")?,
                _ => writeln!(f)?,
            }
        }
        Ok(())
    }
}

fn scratch_dir(cfg: &Option<PathBuf>) -> Result<tempfile::TempDir> {
    Ok(match cfg {
        Some(dir) => tempfile::tempdir_in(dir)?,
        None => tempfile::tempdir()?,
    })
}

fn faulty(op: &GateOp) -> GateOp {
    let kick = GateLabel::Rx(0.5).matrix().expect("rotation");
    let g = op.gate;
    let m = Gate2x2::new(
        g.u00 * kick.u00 + g.u01 * kick.u10,
        g.u00 * kick.u01 + g.u01 * kick.u11,
        g.u10 * kick.u00 + g.u11 * kick.u10,
        g.u10 * kick.u01 + g.u11 * kick.u11,
    );
    GateOp::custom(m, op.target)
}

fn streamed_circuit(c: &Circuit, fault: Option<usize>) -> Circuit {
    let mut out = c.clone();
    if let Some(op) = fault.and_then(|i| out.ops.get_mut(i)) {
        *op = faulty(op);
    }
    out
}

fn engine_for(workers: usize, cache_bytes: u64) -> EngineConfig {
    let strategy = if workers == 1 {
        Strategy::PairedCached
    } else {
        Strategy::PairedCachedParallel
    };
    EngineConfig::new(strategy)
        .workers(workers)
        .cache_bytes(cache_bytes)
}

/// Replays both engines gate by gate and returns the first gate whose
/// output disagrees.
fn locate_divergence(
    dir: &std::path::Path,
    circuit: &Circuit,
    streamed: &Circuit,
    block_amps: u64,
    workers: usize,
    cache_bytes: u64,
    tolerance: f64,
) -> Result<Option<usize>> {
    let n = circuit.n_qubits;
    let path = dir.join("replay.qv");
    let store = BlockStore::create(&path, n, block_amps, true)?;
    let mut oracle = DenseOracle::default();
    let mut dense = DenseState::zero_state(n);
    let ecfg = engine_for(workers, cache_bytes);
    for (g, (reference, tested)) in circuit.ops.iter().zip(&streamed.ops).enumerate() {
        dense = oracle.run(&Circuit::with_ops(n, vec![*reference]), dense)?;
        execute(&store, &Circuit::with_ops(n, vec![*tested]), &ecfg).result?;
        if dense.max_deviation(&store.load_all()?) > tolerance {
            return Ok(Some(g));
        }
    }
    Ok(None)
}

/// Generates `trials` random circuits and compares every streamed
/// configuration against the dense oracle.
pub fn verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.min_qubits == 0 || cfg.min_qubits > cfg.max_qubits {
        return Err(Error::Config("invalid qubit range".into()));
    }
    if cfg.workers.contains(&0) {
        return Err(Error::Config("worker counts must be positive".into()));
    }
    let dir = scratch_dir(&cfg.scratch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = VerifyReport {
        trials: cfg.trials,
        comparisons: 0,
        max_deviation: 0.0,
        tolerance: cfg.tolerance,
        passed: true,
        failures: Vec::new(),
    };
    let path = dir.path().join("verify.qv");

    for trial in 0..cfg.trials {
        let n = rng.random_range(cfg.min_qubits..=cfg.max_qubits);
        let circuit = random_circuit(n, cfg.depth, &mut rng);
        let reference = DenseOracle::default().simulate(&circuit)?;
        let streamed = streamed_circuit(&circuit, cfg.inject_fault);

        let mut sizes: Vec<u64> = cfg.block_amps.iter().map(|&b| b.min(1 << n)).collect();
        sizes.sort_unstable();
        sizes.dedup();
        for &block_amps in &sizes {
            for &workers in &cfg.workers {
                // tightest legal window: one pair unit per worker
                let cache_bytes = 2 * block_amps * AMP_BYTES * workers as u64;
                let store = BlockStore::create(&path, n, block_amps, true)?;
                execute(&store, &streamed, &engine_for(workers, cache_bytes)).result?;
                let deviation = reference.max_deviation(&store.load_all()?);
                report.comparisons += 1;
                report.max_deviation = report.max_deviation.max(deviation);
                if deviation > cfg.tolerance || deviation.is_nan() {
                    report.passed = false;
                    let first = locate_divergence(
                        dir.path(),
                        &circuit,
                        &streamed,
                        block_amps,
                        workers,
                        cache_bytes,
                        cfg.tolerance,
                    )?;
                    report.failures.push(Divergence {
                        trial,
                        n_qubits: n,
                        block_amps,
                        workers,
                        deviation,
                        first_divergent_gate: first,
                        op: first.map(|g| circuit.ops[g].to_string()),
                    });
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub min_qubits: usize,
    pub max_qubits: usize,
    pub strategies: Vec<Strategy>,
    /// Worker counts swept for the parallel strategy.
    pub workers: Vec<usize>,
    pub block_amps: Option<u64>,
    pub cache_bytes: u64,
    /// Each point is timed this many times and the fastest run kept.
    pub repeats: usize,
    pub scratch: Option<PathBuf>,
}

impl BenchConfig {
    pub fn new(
        min_qubits: usize,
        max_qubits: usize,
        strategies: Vec<Strategy>,
        workers: Vec<usize>,
    ) -> Self {
        Self {
            min_qubits,
            max_qubits,
            strategies,
            workers,
            block_amps: None,
            cache_bytes: DEFAULT_CACHE_BYTES,
            repeats: 3,
            scratch: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub qubits: usize,
    pub data_size_bytes: u64,
    pub strategy: Strategy,
    pub workers: usize,
    pub wall_ms: f64,
    pub blocks_read_per_gate: f64,
    pub speedup_vs_1_worker: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Points that could not run, e.g. the dense engine beyond its limit.
    pub skipped: Vec<(usize, Strategy, String)>,
}

impl BenchReport {
    fn find(&self, qubits: usize, strategy: Strategy, workers: usize) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.qubits == qubits && r.strategy == strategy && r.workers == workers)
    }

    /// `(n, wall(n) / wall(n - 1))` for consecutive qubit counts.
    pub fn growth_factors(&self, strategy: Strategy, workers: usize) -> Vec<(usize, f64)> {
        let mut rows: Vec<&BenchRow> = self
            .rows
            .iter()
            .filter(|r| r.strategy == strategy && r.workers == workers)
            .collect();
        rows.sort_by_key(|r| r.qubits);
        rows.windows(2)
            .filter(|w| w[1].qubits == w[0].qubits + 1)
            .map(|w| (w[1].qubits, w[1].wall_ms / w[0].wall_ms))
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>6} {:>9} {:>24} {:>7} {:>12} {:>10} {:>8}",
            "qubits", "data", "strategy", "workers", "wall_ms", "blk/gate", "speedup"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>6} {:>9} {:>24} {:>7} {:>12.3} {:>10} {:>8}",
                r.qubits,
                crate::store::format_size(r.data_size_bytes),
                r.strategy.as_str(),
                r.workers,
                r.wall_ms,
                r.blocks_read_per_gate,
                r.speedup_vs_1_worker
                    .map(|s| format!("{s:.2}"))
                    .unwrap_or_default()
            )?;
        }
        let mut keys: Vec<(Strategy, usize)> =
            self.rows.iter().map(|r| (r.strategy, r.workers)).collect();
        keys.sort();
        keys.dedup();
        for (s, w) in keys {
            let g = self.growth_factors(s, w);
            if !g.is_empty() {
                let parts: Vec<String> = g.iter().map(|(n, x)| format!("{n}:{x:.2}")).collect();
                writeln!(
                    f,
                    "growth per qubit [{s}, {w} worker(s)]: {}",
                    parts.join(" ")
                )?;
            }
        }
        for (n, s, why) in &self.skipped {
            writeln!(f, "skipped n={n} {s}: {why}")?;
        }
        Ok(())
    }
}

/// Times one run of `circuit` from a fresh `|0…0⟩` store.
pub fn time_run(
    dir: &std::path::Path,
    circuit: &Circuit,
    block_amps: u64,
    cfg: &EngineConfig,
) -> Result<crate::metrics::Metrics> {
    let path = dir.join("bench.qv");
    let store = BlockStore::create(&path, circuit.n_qubits, block_amps, true)?;
    let out = execute(&store, circuit, cfg);
    drop(store);
    std::fs::remove_file(&path)?;
    out.result.map(|_| out.metrics)
}

/// Runs the one-Hadamard-per-qubit circuit for every `n` and strategy.
pub fn bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.min_qubits == 0 || cfg.min_qubits > cfg.max_qubits {
        return Err(Error::Config("invalid qubit range".into()));
    }
    let dir = scratch_dir(&cfg.scratch)?;
    let mut report = BenchReport::default();
    for n in cfg.min_qubits..=cfg.max_qubits {
        let circuit = benchmark_circuit(n);
        let block_amps = cfg
            .block_amps
            .unwrap_or_else(|| default_block_amps(n))
            .min(1 << n);
        for &strategy in &cfg.strategies {
            let worker_list: Vec<usize> = if strategy == Strategy::PairedCachedParallel {
                cfg.workers.clone()
            } else {
                vec![1]
            };
            for workers in worker_list {
                let ecfg = EngineConfig::new(strategy)
                    .workers(workers)
                    .cache_bytes(cfg.cache_bytes);
                let mut best: Option<crate::metrics::Metrics> = None;
                let mut failed = None;
                for _ in 0..cfg.repeats.max(1) {
                    match time_run(dir.path(), &circuit, block_amps, &ecfg) {
                        Ok(m) => {
                            if best.as_ref().is_none_or(|b| m.wall_ms < b.wall_ms) {
                                best = Some(m);
                            }
                        }
                        Err(e @ Error::OracleLimitExceeded { .. }) => {
                            failed = Some(e.to_string());
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
                if let Some(why) = failed {
                    report.skipped.push((n, strategy, why));
                    continue;
                }
                let m = best.expect("at least one repeat");
                report.rows.push(BenchRow {
                    qubits: n,
                    data_size_bytes: total_bytes(n)?,
                    strategy,
                    workers,
                    wall_ms: m.wall_ms,
                    blocks_read_per_gate: m.blocks_read as f64 / m.gates_applied.max(1) as f64,
                    speedup_vs_1_worker: None,
                });
            }
        }
    }
    let speedups: Vec<Option<f64>> = report
        .rows
        .iter()
        .map(|r| {
            report
                .find(r.qubits, r.strategy, 1)
                .map(|base| base.wall_ms / r.wall_ms)
        })
        .collect();
    for (row, s) in report.rows.iter_mut().zip(speedups) {
        row.speedup_vs_1_worker = s;
    }
    Ok(report)
}
