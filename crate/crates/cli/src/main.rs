use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use bingnn::bitdense::{TrinaryStrategy, WordBits};
use bingnn::bitsparse::EdgeList;
use bingnn_cli::bench::{bench, BenchOptions};
use bingnn_cli::config::{synthetic_graph, ModelConfig, CORA_EDGES, CORA_NODES};
use bingnn_cli::ingest::{convert, load_edges, ConvertOptions};
use bingnn_cli::perf::{perf_report, single_threaded};
use bingnn_cli::tune::{tune, TuneOptions};
use bingnn_cli::verify::{verify, VerifyOptions};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[global_allocator]
static ALLOC: bingnn_cli::alloc::CountingAlloc = bingnn_cli::alloc::CountingAlloc;

#[derive(Parser)]
#[command(
    name = "bingnn",
    version,
    about = "Binary GNN inference: convert, verify, bench, tune"
)]
struct Cli {
    /// Engine worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert a MatrixMarket file or edge list to an FRDC file.
    Convert {
        input: PathBuf,
        output: PathBuf,
        /// Add every self-loop.
        #[arg(long)]
        self_loops: bool,
        /// Mirror every edge.
        #[arg(long)]
        undirected: bool,
        #[arg(long, default_value_t = 32, value_parser = word_bits)]
        word_bits: usize,
        /// Node count for edge lists (default: largest index + 1).
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Run the engine and the oracle on seeded inputs and compare.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// Flip a bit in this stored adjacency tile before running.
        #[arg(long)]
        corrupt_tile: Option<usize>,
    },
    /// Time repeated runs and report memory.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        /// Skip the oracle check.
        #[arg(long)]
        no_verify: bool,
        /// Also measure kernel throughput against naive loops.
        #[arg(long)]
        perf: bool,
    },
    /// Search kernel variants and trinary strategies for the fastest
    /// verified plan.
    Tune {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Keep the configured variants and only try strategies.
        #[arg(long)]
        freeze: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Model config JSON (default: the binary GCN on Cora-shaped data).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Graph file: MatrixMarket, edge list, or FRDC. Default: a random
    /// Cora-shaped graph.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Node count for edge-list graphs.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, default_value_t = CORA_NODES)]
    synthetic_nodes: usize,
    #[arg(long, default_value_t = CORA_EDGES)]
    synthetic_edges: usize,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trinary strategy (repeatable for tune): if-else, and-and-not,
    /// two-and-minus-popc.
    #[arg(long)]
    strategy: Vec<TrinaryStrategy>,
}

fn word_bits(s: &str) -> Result<usize, String> {
    match s.parse() {
        Ok(b @ (32 | 64)) => Ok(b),
        _ => Err("word bits must be 32 or 64".into()),
    }
}

impl RunArgs {
    fn load(&self) -> Result<(ModelConfig, EdgeList)> {
        let mut config = match &self.config {
            Some(p) => ModelConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => ModelConfig::gcn_bin(0),
        };
        if let Some(s) = self.seed {
            config.seed = s;
        }
        let edges = match &self.graph {
            Some(p) => {
                load_edges(p, self.nodes).with_context(|| format!("reading {}", p.display()))?
            }
            None => synthetic_graph(self.synthetic_nodes, self.synthetic_edges, config.seed),
        };
        Ok((config, edges))
    }
}

fn emit(out: &Option<PathBuf>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => {
            std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let mut o = std::io::stdout().lock();
            writeln!(o, "{text}")?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.cmd {
        Cmd::Convert {
            input,
            output,
            self_loops,
            undirected,
            word_bits,
            nodes,
        } => {
            let opts = ConvertOptions {
                self_loops,
                undirected,
                word_bits: WordBits::from_bits(word_bits).expect("validated"),
                nodes,
            };
            let s = convert(&input, &output, &opts)
                .with_context(|| format!("converting {}", input.display()))?;
            emit(&cli.out, &s)?;
            Ok(true)
        }
        Cmd::Verify { run, corrupt_tile } => {
            let (config, edges) = run.load()?;
            let opts = VerifyOptions {
                strategy: run.strategy.first().copied(),
                corrupt_tile,
            };
            let r = verify(&config, &edges, &opts)?;
            emit(&cli.out, &r)?;
            eprintln!("{}", r.summary());
            Ok(r.passed())
        }
        Cmd::Bench {
            run,
            reps,
            no_verify,
            perf,
        } => {
            let (config, edges) = run.load()?;
            let opts = BenchOptions {
                reps,
                strategy: run.strategy.first().copied(),
                verify: !no_verify,
            };
            let mut r = bench(&config, &edges, &opts)?;
            if perf {
                r.perf = Some(single_threaded(|| perf_report(config.seed))?);
            }
            emit(&cli.out, &r)?;
            let perf_ok = r.perf.as_ref().is_none_or(|p| p.passed());
            let verified = r
                .verification
                .is_none_or(|s| s == bingnn_cli::verify::Status::Pass);
            Ok(perf_ok && verified)
        }
        Cmd::Tune { run, reps, freeze } => {
            let (config, edges) = run.load()?;
            let mut opts = TuneOptions {
                reps,
                ..Default::default()
            };
            if !run.strategy.is_empty() {
                opts.strategies = run.strategy.clone();
            }
            if freeze {
                opts.free_ops.clear();
            }
            let r = tune(&config, &edges, &opts)?;
            emit(&cli.out, &r)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
