//! Selectable execution strategies and the `run` / `stats` front-ends.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::cache::{CacheConfig, CacheWindow};
use crate::circuit_io::parse_circuit_with;
use crate::dense::{DenseOracle, DenseState, DEFAULT_ORACLE_LIMIT};
use crate::error::{Error, Result};
use crate::kernel::apply_gate_streamed;
use crate::metrics::Metrics;
use crate::model::{Circuit, ComplexAmp};
use crate::parallel::{run_parallel_with, ParallelConfig, WorkerReport};
use crate::store::{default_block_amps, BlockStore, StoreHeader};

/// 64 MiB.
pub const DEFAULT_CACHE_BYTES: u64 = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Kronecker-expanded dense matrix per gate.
    Dense,
    /// Pair-unit sweep with every block allowed to stay resident.
    Paired,
    /// Pair-unit sweep through a window bounded by the cache budget.
    PairedCached,
    /// Bounded sweep split across workers.
    PairedCachedParallel,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Dense,
        Strategy::Paired,
        Strategy::PairedCached,
        Strategy::PairedCachedParallel,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Dense => "dense",
            Strategy::Paired => "paired",
            Strategy::PairedCached => "paired-cached",
            Strategy::PairedCachedParallel => "paired-cached-parallel",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub strategy: Strategy,
    pub cache_bytes: u64,
    pub workers: usize,
    pub oracle_limit: usize,
}

impl EngineConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            cache_bytes: DEFAULT_CACHE_BYTES,
            workers: 1,
            oracle_limit: DEFAULT_ORACLE_LIMIT,
        }
    }

    pub fn cache_bytes(mut self, bytes: u64) -> Self {
        self.cache_bytes = bytes;
        self
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// What an engine run produced. Metrics are filled in even when `result`
/// is an error.
#[derive(Debug)]
pub struct RunOutcome {
    pub metrics: Metrics,
    pub reports: Vec<WorkerReport>,
    pub result: Result<()>,
}

/// Applies `circuit` to the state held in `store` with the chosen strategy.
pub fn execute(store: &BlockStore, circuit: &Circuit, cfg: &EngineConfig) -> RunOutcome {
    let workers = match cfg.strategy {
        Strategy::PairedCachedParallel => cfg.workers,
        _ => 1,
    };
    let mut metrics = Metrics::new(circuit.n_qubits, cfg.strategy.as_str(), workers);
    let mut reports = Vec::new();
    let t0 = Instant::now();
    let result = execute_inner(store, circuit, cfg, &mut metrics, &mut reports);
    metrics.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
    RunOutcome {
        metrics,
        reports,
        result,
    }
}

fn execute_inner(
    store: &BlockStore,
    circuit: &Circuit,
    cfg: &EngineConfig,
    metrics: &mut Metrics,
    reports: &mut Vec<WorkerReport>,
) -> Result<()> {
    circuit.validate()?;
    if circuit.n_qubits != store.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: store.n_qubits(),
            got: circuit.n_qubits,
        });
    }
    match cfg.strategy {
        Strategy::Dense => {
            let n = circuit.n_qubits;
            if n > cfg.oracle_limit {
                return Err(Error::OracleLimitExceeded {
                    n,
                    limit: cfg.oracle_limit,
                });
            }
            let before = store.io();
            let state = DenseState::from_amps(n, store.load_all()?)?;
            let mut oracle = DenseOracle::new(cfg.oracle_limit);
            let result = oracle
                .run(circuit, state)
                .and_then(|s| store.store_all(&s.amps));
            let io = store.io().since(&before);
            metrics.blocks_read += io.blocks_read;
            metrics.bytes_read += io.bytes_read;
            metrics.blocks_written += io.blocks_written;
            metrics.bytes_written += io.bytes_written;
            metrics.multiply_adds += oracle.multiply_adds();
            let gates = oracle.multiply_adds() >> (2 * n);
            metrics.gates_applied += gates;
            // every output amplitude sweeps the whole input vector
            metrics.traversals += gates << n;
            result
        }
        Strategy::Paired | Strategy::PairedCached => {
            let cache = if cfg.strategy == Strategy::Paired {
                CacheConfig::unbounded(store)
            } else {
                CacheConfig::new(cfg.cache_bytes, store.block_amps())?
            };
            let mut window = CacheWindow::new(cache);
            for op in &circuit.ops {
                apply_gate_streamed(store, &mut window, op, metrics)?;
            }
            Ok(())
        }
        Strategy::PairedCachedParallel => {
            let pcfg = ParallelConfig::new(cfg.workers, cfg.cache_bytes);
            let r = run_parallel_with(store, circuit, &pcfg, metrics)?;
            reports.extend(r);
            Ok(())
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub circuit: PathBuf,
    pub n_qubits: Option<usize>,
    pub state: PathBuf,
    pub block_amps: Option<u64>,
    pub cache_bytes: u64,
    pub workers: usize,
    pub strategy: Strategy,
    pub metrics: Option<PathBuf>,
    pub strict: bool,
}

impl RunConfig {
    pub fn new(circuit: impl Into<PathBuf>, state: impl Into<PathBuf>) -> Self {
        Self {
            circuit: circuit.into(),
            n_qubits: None,
            state: state.into(),
            block_amps: None,
            cache_bytes: DEFAULT_CACHE_BYTES,
            workers: 1,
            strategy: Strategy::PairedCached,
            metrics: None,
            strict: false,
        }
    }
}

/// The document written to the metrics path.
#[derive(Debug, Clone, Serialize)]
pub struct RunDocument {
    #[serde(flatten)]
    pub metrics: Metrics,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub worker_reports: Vec<WorkerReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct RunReport {
    pub document: RunDocument,
    pub norm: Option<f64>,
    pub top: Vec<(u64, ComplexAmp)>,
    pub n_qubits: usize,
    pub result: Result<()>,
}

fn prepare(cfg: &RunConfig) -> Result<(Circuit, BlockStore)> {
    if cfg.strategy == Strategy::PairedCachedParallel && cfg.workers == 0 {
        return Err(Error::Config(
            "paired-cached-parallel needs at least one worker".into(),
        ));
    }
    let text = std::fs::read_to_string(&cfg.circuit)?;
    let circuit = parse_circuit_with(&text, cfg.n_qubits, cfg.strict)?;
    if cfg.strategy == Strategy::Dense && circuit.n_qubits > DEFAULT_ORACLE_LIMIT {
        return Err(Error::OracleLimitExceeded {
            n: circuit.n_qubits,
            limit: DEFAULT_ORACLE_LIMIT,
        });
    }
    let block_amps = cfg
        .block_amps
        .unwrap_or_else(|| default_block_amps(circuit.n_qubits));
    let store = BlockStore::open_or_create(&cfg.state, circuit.n_qubits, block_amps)?;
    Ok((circuit, store))
}

/// Parses the circuit, opens (or creates) the state file, runs the chosen
/// engine and writes the metrics document. The document is written even if
/// any step fails.
pub fn run(cfg: &RunConfig) -> RunReport {
    let n_hint = cfg.n_qubits.unwrap_or(0);
    let mut report = RunReport {
        document: RunDocument {
            metrics: Metrics::new(n_hint, cfg.strategy.as_str(), cfg.workers),
            worker_reports: Vec::new(),
            error: None,
        },
        norm: None,
        top: Vec::new(),
        n_qubits: n_hint,
        result: Ok(()),
    };
    let result = match prepare(cfg) {
        Ok((circuit, store)) => {
            report.n_qubits = circuit.n_qubits;
            let ecfg = EngineConfig::new(cfg.strategy)
                .cache_bytes(cfg.cache_bytes)
                .workers(cfg.workers);
            let outcome = execute(&store, &circuit, &ecfg);
            report.document.metrics = outcome.metrics;
            report.document.worker_reports = outcome.reports;
            outcome.result.and_then(|_| {
                store.sync()?;
                report.norm = Some(store.norm()?);
                report.top = store.top_amplitudes(8)?;
                Ok(())
            })
        }
        Err(e) => Err(e),
    };
    report.document.error = result.as_ref().err().map(ToString::to_string);
    if let Some(path) = &cfg.metrics {
        let written = serde_json::to_string_pretty(&report.document)
            .map_err(Error::from)
            .and_then(|s| std::fs::write(path, s + "\n").map_err(Error::from));
        if let (Ok(()), Err(e)) = (&result, written) {
            report.result = Err(e);
            return report;
        }
    }
    report.result = result;
    report
}

/// Header, norm and largest amplitudes of a state file.
#[derive(Debug, Clone)]
pub struct StoreStats {
    pub path: PathBuf,
    pub header: StoreHeader,
    pub n_blocks: usize,
    pub norm: f64,
    pub top: Vec<(u64, ComplexAmp)>,
}

pub fn stats(path: &Path, top_k: usize) -> Result<StoreStats> {
    let store = BlockStore::open(path)?;
    Ok(StoreStats {
        path: path.to_path_buf(),
        header: store.header(),
        n_blocks: store.n_blocks(),
        norm: store.norm()?,
        top: store.top_amplitudes(top_k)?,
    })
}

/// Renders `(index, amplitude)` rows with the index in binary, qubit 0 last.
pub fn format_amplitudes(n_qubits: usize, rows: &[(u64, ComplexAmp)]) -> String {
    let mut out = String::new();
    for (i, a) in rows {
        out.push_str(&format!(
            "  |{:0width$b}⟩  {:>12.9} {:+.9}i  p={:.9}\n",
            i,
            a.re,
            a.im,
            a.norm_sqr(),
            width = n_qubits.max(1)
        ));
    }
    out
}

impl fmt::Display for StoreStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "state file:   {}", self.path.display())?;
        writeln!(f, "qubits:       {}", self.header.n_qubits)?;
        writeln!(f, "block amps:   {}", self.header.block_amps)?;
        writeln!(f, "blocks:       {}", self.n_blocks)?;
        writeln!(f, "norm:         {:.15}", self.norm)?;
        writeln!(f, "top {} amplitudes:", self.top.len())?;
        f.write_str(&format_amplitudes(self.header.n_qubits as usize, &self.top))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{benchmark_circuit, GateLabel, GateOp};

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!("fast".parse::<Strategy>().is_err());
    }

    #[test]
    fn every_strategy_builds_a_bell_pair() {
        let bell = Circuit::with_ops(2, vec![GateOp::single(GateLabel::H, 0), GateOp::cx(0, 1)]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for strategy in Strategy::ALL {
            let dir = tempfile::tempdir().unwrap();
            let store = BlockStore::create(dir.path().join("s"), 2, 2, false).unwrap();
            let out = execute(&store, &bell, &EngineConfig::new(strategy).workers(2));
            out.result.unwrap();
            let amps = store.load_all().unwrap();
            assert!((amps[0].re - h).abs() < 1e-15 && (amps[3].re - h).abs() < 1e-15);
            assert_eq!(out.metrics.gates_applied, 2);
            assert_eq!(out.metrics.strategy, strategy.as_str());
        }
    }

    #[test]
    fn dense_strategy_counts() {
        let dir = tempfile::tempdir().unwrap();
        let store = BlockStore::create(dir.path().join("s"), 4, 4, false).unwrap();
        let out = execute(
            &store,
            &benchmark_circuit(4),
            &EngineConfig::new(Strategy::Dense),
        );
        out.result.unwrap();
        assert_eq!(out.metrics.gates_applied, 4);
        assert_eq!(out.metrics.multiply_adds, 4 * 256);
        assert_eq!(out.metrics.traversals, 4 * 16);
    }

    #[test]
    fn dense_refuses_large_states() {
        let dir = tempfile::tempdir().unwrap();
        let store = BlockStore::create(dir.path().join("s"), 13, 1024, false).unwrap();
        let out = execute(
            &store,
            &benchmark_circuit(13),
            &EngineConfig::new(Strategy::Dense),
        );
        assert!(matches!(out.result, Err(Error::OracleLimitExceeded { .. })));
        assert_eq!(out.metrics.blocks_read, 0);
    }

    #[test]
    fn cache_too_small_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let store = BlockStore::create(dir.path().join("s"), 10, 64, false).unwrap();
        let out = execute(
            &store,
            &benchmark_circuit(10),
            &EngineConfig::new(Strategy::PairedCached).cache_bytes(1024),
        );
        assert!(matches!(out.result, Err(Error::CapacityTooSmall { .. })));
    }
}
