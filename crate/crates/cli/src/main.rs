use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use qvsim_core::engine::{self, format_amplitudes, RunConfig, Strategy, DEFAULT_CACHE_BYTES};
use qvsim_core::harness::{self, BenchConfig, VerifyConfig};

#[derive(Debug, Parser)]
#[command(name = "qvsim", version, about = "Out-of-core state-vector simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply a circuit to a state file (created as |0…0⟩ if absent).
    Run {
        #[arg(long)]
        circuit: PathBuf,
        /// Qubit count; must agree with the circuit's `qubits` line if both are given.
        #[arg(long)]
        qubits: Option<usize>,
        #[arg(long)]
        state: PathBuf,
        /// Amplitudes per block (power of two). Defaults to min(65536, 2^n).
        #[arg(long)]
        block_amps: Option<u64>,
        /// Cache budget in bytes; K/M/G suffixes allowed.
        #[arg(long, value_parser = parse_bytes, default_value_t = DEFAULT_CACHE_BYTES)]
        cache_bytes: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value = "paired-cached", value_parser = parse_strategy)]
        strategy: Strategy,
        /// Where to write the JSON metrics document.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Tighter unitarity check for `u` gates.
        #[arg(long)]
        strict: bool,
    },
    /// Compare the streamed engines against the dense oracle on random circuits.
    Verify {
        #[arg(long)]
        qubits: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 20)]
        depth: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Block sizes to test, comma separated (capped at 2^n).
        #[arg(long, value_delimiter = ',', default_value = "65536")]
        block_amps: Vec<u64>,
        /// Worker counts to test, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        workers: Vec<usize>,
        /// Corrupt the gate at this position in the streamed runs.
        #[arg(long, hide = true)]
        inject_fault: Option<usize>,
    },
    /// Time the one-Hadamard-per-qubit circuit across sizes and strategies.
    Bench {
        #[arg(long)]
        min_qubits: usize,
        #[arg(long)]
        max_qubits: usize,
        #[arg(long, value_delimiter = ',', value_parser = parse_strategy, default_value = "paired-cached")]
        strategies: Vec<Strategy>,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        workers: Vec<usize>,
        /// CSV output path.
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        block_amps: Option<u64>,
        #[arg(long, value_parser = parse_bytes, default_value_t = DEFAULT_CACHE_BYTES)]
        cache_bytes: u64,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Directory for temporary state files.
        #[arg(long)]
        scratch: Option<PathBuf>,
    },
    /// Print header, norm and largest amplitudes of a state file.
    Stats {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, default_value_t = 8)]
        top: usize,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: qvsim_core::Error| e.to_string())
}

fn parse_bytes(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let (digits, shift) = match s.char_indices().last() {
        Some((i, 'k' | 'K')) => (&s[..i], 10),
        Some((i, 'm' | 'M')) => (&s[..i], 20),
        Some((i, 'g' | 'G')) => (&s[..i], 30),
        _ => (s, 0),
    };
    let value: u64 = digits.parse().map_err(|_| format!("invalid size `{s}`"))?;
    value
        .checked_mul(1 << shift)
        .ok_or_else(|| format!("size `{s}` overflows"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run {
            circuit,
            qubits,
            state,
            block_amps,
            cache_bytes,
            workers,
            strategy,
            metrics,
            strict,
        } => {
            let cfg = RunConfig {
                circuit,
                n_qubits: qubits,
                state,
                block_amps,
                cache_bytes,
                workers,
                strategy,
                metrics,
                strict,
            };
            let report = engine::run(&cfg);
            report.result?;
            let m = &report.document.metrics;
            println!(
                "{} gates on {} qubits [{}], {:.1} ms; blocks read {}, written {}",
                m.gates_applied,
                report.n_qubits,
                m.strategy,
                m.wall_ms,
                m.blocks_read,
                m.blocks_written
            );
            if let Some(norm) = report.norm {
                println!("norm: {norm:.15}");
            }
            println!("top {} amplitudes:", report.top.len());
            print!("{}", format_amplitudes(report.n_qubits, &report.top));
            Ok(true)
        }
        Command::Verify {
            qubits,
            trials,
            depth,
            seed,
            block_amps,
            workers,
            inject_fault,
        } => {
            let mut cfg = VerifyConfig::new(qubits, trials, depth, seed);
            cfg.block_amps = block_amps;
            cfg.workers = workers;
            cfg.inject_fault = inject_fault;
            let report = harness::verify(&cfg)?;
            print!("{report}");
            Ok(report.passed)
        }
        Command::Bench {
            min_qubits,
            max_qubits,
            strategies,
            workers,
            report,
            block_amps,
            cache_bytes,
            repeats,
            scratch,
        } => {
            if workers.contains(&0) {
                bail!("worker counts must be positive");
            }
            let mut cfg = BenchConfig::new(min_qubits, max_qubits, strategies, workers);
            cfg.block_amps = block_amps;
            cfg.cache_bytes = cache_bytes;
            cfg.repeats = repeats;
            cfg.scratch = scratch;
            let result = harness::bench(&cfg)?;
            let file = std::fs::File::create(&report)
                .with_context(|| format!("creating {}", report.display()))?;
            result.write_csv(file)?;
            print!("{result}");
            Ok(true)
        }
        Command::Stats { state, top } => {
            let s = engine::stats(&state, top)
                .with_context(|| format!("reading {}", state.display()))?;
            print!("{s}");
            Ok(true)
        }
    }
}
