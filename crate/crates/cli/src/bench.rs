//! Repeated timed runs with a memory report.

use bingnn::bitdense::TrinaryStrategy;
use bingnn::bitsparse::{frdc_stats, EdgeList};
use bingnn::graphops::{run_model_with, Graph, LayerSpec, ModelRun, ModelSpec, RunOptions};
use bingnn::kernels::MatOperand;
use serde::Serialize;

use crate::alloc;
use crate::config::{ModelConfig, ModelKind};
use crate::perf::PerfReport;
use crate::verify::{check_run, run_oracle, run_recorded, Status};
use crate::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Timing {
    pub median_ns: u64,
    pub mean_ns: u64,
    pub min_ns: u64,
    pub max_ns: u64,
}

impl Timing {
    /// Summary of a non-empty sample. The median of an even count is the
    /// mean of the two middle values.
    pub fn of(samples: &[u64]) -> Self {
        assert!(!samples.is_empty(), "timing needs at least one sample");
        let mut s = samples.to_vec();
        s.sort_unstable();
        let mid = s.len() / 2;
        let median_ns = if s.len() % 2 == 1 {
            s[mid]
        } else {
            (s[mid - 1] + s[mid]) / 2
        };
        let sum: u128 = s.iter().map(|&v| u128::from(v)).sum();
        Self {
            median_ns,
            mean_ns: (sum / s.len() as u128) as u64,
            min_ns: s[0],
            max_ns: s[s.len() - 1],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelTiming {
    pub layer: usize,
    pub kernel: String,
    pub out_precision: String,
    pub out_bytes: usize,
    #[serde(flatten)]
    pub timing: Timing,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MemoryReport {
    /// FRDC payload of every adjacency structure the model reads.
    pub adjacency_bytes: usize,
    /// Model input plus every operator output, at their packed sizes.
    pub activation_bytes: usize,
    /// Weights in the precision their slots read them.
    pub weight_bytes: usize,
    /// High-water heap growth during one run; `None` when the counting
    /// allocator is not installed.
    pub peak_allocated_bytes: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub model: ModelKind,
    pub plan: Vec<String>,
    pub strategy: String,
    pub threads: usize,
    pub reps: usize,
    pub nodes: usize,
    pub edges: usize,
    pub features: usize,
    pub kernels: Vec<KernelTiming>,
    pub end_to_end: Timing,
    pub memory: MemoryReport,
    pub verification: Option<Status>,
    pub perf: Option<PerfReport>,
}

#[derive(Clone, Copy, Debug)]
pub struct BenchOptions {
    pub reps: usize,
    pub strategy: Option<TrinaryStrategy>,
    pub verify: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            reps: 10,
            strategy: None,
            verify: true,
        }
    }
}

pub fn adjacency_bytes(spec: &ModelSpec, graph: &Graph) -> usize {
    let uses = |f: fn(&LayerSpec) -> bool| spec.layers().iter().any(f);
    let mut bytes = 0;
    if uses(|l| matches!(l, LayerSpec::GcnConv { .. })) {
        bytes += frdc_stats(&graph.normalized().structure).bytes;
    }
    if uses(|l| matches!(l, LayerSpec::SageConv(_) | LayerSpec::GraphConv(_))) {
        bytes += frdc_stats(graph.neighbors()).bytes;
    }
    bytes
}

pub fn activation_bytes(input: &MatOperand, run: &ModelRun) -> usize {
    input.payload_bytes() + run.kernels.iter().map(|k| k.out_bytes).sum::<usize>()
}

/// Runs the model `reps` times after one untimed warm-up run.
pub fn bench(config: &ModelConfig, edges: &EdgeList, opts: &BenchOptions) -> Result<RunReport> {
    if opts.reps == 0 {
        return Err(CliError::Config("repetitions must be at least 1".into()));
    }
    let inst = config.instantiate(edges.node_count)?;
    let graph = Graph::new(edges)?;
    let input = inst.input();
    let run_opts = RunOptions {
        strategy: opts.strategy,
        record_bin_points: false,
    };

    let base = alloc::mark();
    let warm = run_model_with(&inst.spec, &graph, &input, &run_opts)?;
    let peak = alloc::peak_since(base);

    let mut runs = Vec::with_capacity(opts.reps);
    for _ in 0..opts.reps {
        runs.push(run_model_with(&inst.spec, &graph, &input, &run_opts)?);
    }
    let kernels = warm
        .kernels
        .iter()
        .enumerate()
        .map(|(k, rec)| KernelTiming {
            layer: rec.layer,
            kernel: rec.kernel.clone(),
            out_precision: rec.out_precision.to_string(),
            out_bytes: rec.out_bytes,
            timing: Timing::of(&runs.iter().map(|r| r.kernels[k].nanos).collect::<Vec<_>>()),
        })
        .collect();
    let end_to_end = Timing::of(&runs.iter().map(|r| r.total_nanos).collect::<Vec<_>>());

    let verification = if opts.verify {
        let run = run_recorded(&inst, &graph, opts.strategy)?;
        let (oracle, cfg) = run_oracle(&inst, edges)?;
        Some(check_run(&run, &oracle, &cfg)?.status)
    } else {
        None
    };

    Ok(RunReport {
        model: config.model,
        plan: config.plan.clone(),
        strategy: opts
            .strategy
            .map_or_else(|| "default".to_string(), |s| s.name().to_string()),
        threads: rayon::current_num_threads(),
        reps: opts.reps,
        nodes: edges.node_count,
        edges: edges.edges.len(),
        features: config.features,
        kernels,
        end_to_end,
        memory: MemoryReport {
            adjacency_bytes: adjacency_bytes(&inst.spec, &graph),
            activation_bytes: activation_bytes(&input, &warm),
            weight_bytes: inst.spec.weight_bytes(),
            peak_allocated_bytes: peak,
        },
        verification,
        perf: None,
    })
}
