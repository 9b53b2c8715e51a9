//! Engine-versus-oracle verification of a configured model.

use bingnn::bitdense::{DenseMatrix, TrinaryStrategy};
use bingnn::bitsparse::EdgeList;
use bingnn::graphops::{run_model_with, Graph, LayerSpec, ModelRun, ModelSpec, RunOptions};
use bingnn::kernels::Precision;
use bingnn::oracle::{
    argmax_agreement, compare_bin_points, max_relative_error, oracle_model, OracleConfig,
    OracleRun, RefMatrix, BIN_TIE_TOLERANCE,
};
use serde::Serialize;

use crate::config::{Instance, ModelConfig, ModelKind};
use crate::{CliError, Result};

/// Logits closer than this to the row maximum count as tied for argmax.
pub const ARGMAX_TIE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// No real mismatch, but some bits flipped on values that are zero up
    /// to rounding, so everything downstream of them is not comparable.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BitDiff {
    pub point: usize,
    pub layer: usize,
    pub source: String,
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogitDiff {
    pub row: usize,
    pub col: usize,
    pub engine: f64,
    pub oracle: f64,
}

/// Comparison of one engine run against one oracle run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Checks {
    pub max_rel_logit_error: f64,
    pub tolerance: f64,
    pub worst_logit: Option<LogitDiff>,
    pub bin_points: usize,
    pub bit_mismatches: usize,
    pub tie_flips: usize,
    pub first_mismatch: Option<BitDiff>,
    pub argmax_agreement: f64,
    pub status: Status,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub model: ModelKind,
    pub plan: Vec<String>,
    pub strategy: String,
    pub seed: u64,
    pub oracle: &'static str,
    /// Edge injected by the corruption hook, if any.
    pub corrupted_edge: Option<(usize, usize)>,
    #[serde(flatten)]
    pub checks: Checks,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.status == Status::Pass
    }

    /// One human-readable line, naming the first differing coordinate on
    /// failure.
    pub fn summary(&self) -> String {
        let c = &self.checks;
        let mut s = format!(
            "{:?}: max relative logit error {:.3e} (tolerance {:.0e}), {} bit mismatches over {} points, {} tie flips, argmax agreement {:.2}%",
            c.status,
            c.max_rel_logit_error,
            c.tolerance,
            c.bit_mismatches,
            c.bin_points,
            c.tie_flips,
            100.0 * c.argmax_agreement
        );
        if let Some(d) = &c.first_mismatch {
            s += &format!(
                "; first bit mismatch at point {} ({} in layer {}), row {}, col {}",
                d.point, d.source, d.layer, d.row, d.col
            );
        } else if c.status != Status::Pass {
            if let Some(d) = &c.worst_logit {
                s += &format!(
                    "; largest logit difference at row {}, col {} ({} vs {})",
                    d.row, d.col, d.engine, d.oracle
                );
            }
        }
        s
    }
}

/// Oracle configuration matching a plan: simulated binarization as soon
/// as any slot or layer produces bits.
pub fn oracle_config(spec: &ModelSpec) -> OracleConfig {
    let binary = spec.input_precision() == Precision::B
        || spec.layers().iter().any(|l| {
            matches!(l, LayerSpec::Binarize)
                || l.slots()
                    .iter()
                    .any(|v| [v.in1, v.in2, v.out].contains(&Precision::B))
        });
    if binary {
        OracleConfig::simulated()
    } else {
        OracleConfig::default()
    }
}

fn worst(engine: &DenseMatrix, oracle: &RefMatrix) -> Option<LogitDiff> {
    let mut best: Option<(f64, LogitDiff)> = None;
    for i in 0..oracle.rows() {
        for j in 0..oracle.cols() {
            let (a, b) = (f64::from(engine.get(i, j)), oracle.get(i, j));
            let d = (a - b).abs();
            if best.as_ref().is_none_or(|(m, _)| d > *m) {
                best = Some((
                    d,
                    LogitDiff {
                        row: i,
                        col: j,
                        engine: a,
                        oracle: b,
                    },
                ));
            }
        }
    }
    best.map(|(_, d)| d)
}

pub fn check_run(run: &ModelRun, oracle: &OracleRun, cfg: &OracleConfig) -> Result<Checks> {
    let bins = compare_bin_points(&run.bin_points, &oracle.bin_points, BIN_TIE_TOLERANCE)?;
    let rel = max_relative_error(&run.logits, &oracle.logits)?;
    let argmax = argmax_agreement(&run.logits, &oracle.logits, ARGMAX_TIE);
    let status = if bins.mismatches > 0 || argmax < 1.0 || rel > cfg.tolerance {
        if bins.mismatches == 0 && bins.tie_flips > 0 {
            Status::Inconclusive
        } else {
            Status::Fail
        }
    } else if bins.tie_flips > 0 {
        Status::Inconclusive
    } else {
        Status::Pass
    };
    Ok(Checks {
        max_rel_logit_error: rel,
        tolerance: cfg.tolerance,
        worst_logit: worst(&run.logits, &oracle.logits),
        bin_points: run.bin_points.len(),
        bit_mismatches: bins.mismatches,
        tie_flips: bins.tie_flips,
        first_mismatch: bins.first.map(|m| BitDiff {
            point: m.point,
            layer: m.layer,
            source: run.bin_points[m.point].source.clone(),
            row: m.row,
            col: m.col,
        }),
        argmax_agreement: argmax,
        status,
    })
}

pub fn run_recorded(
    inst: &Instance,
    graph: &Graph,
    strategy: Option<TrinaryStrategy>,
) -> Result<ModelRun> {
    let opts = RunOptions {
        strategy,
        record_bin_points: true,
    };
    Ok(run_model_with(&inst.spec, graph, &inst.input(), &opts)?)
}

pub fn run_oracle(inst: &Instance, edges: &EdgeList) -> Result<(OracleRun, OracleConfig)> {
    let cfg = oracle_config(&inst.spec);
    Ok((
        oracle_model(&inst.spec, edges, &inst.oracle_input(), &cfg)?,
        cfg,
    ))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    pub strategy: Option<TrinaryStrategy>,
    /// Fault injection: corrupt this stored tile of the engine's copy of the
    /// graph before running.
    pub corrupt_tile: Option<usize>,
}

/// Deterministic in `(config, edges, opts)`.
pub fn verify(
    config: &ModelConfig,
    edges: &EdgeList,
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    let inst = config.instantiate(edges.node_count)?;
    let mut graph = Graph::new(edges)?;
    let corrupted_edge = match opts.corrupt_tile {
        Some(t) => Some(graph.corrupt_tile(t).ok_or_else(|| {
            CliError::Config(format!(
                "tile {t} does not exist or cannot take another edge"
            ))
        })?),
        None => None,
    };
    let run = run_recorded(&inst, &graph, opts.strategy)?;
    let (oracle, cfg) = run_oracle(&inst, edges)?;
    let checks = check_run(&run, &oracle, &cfg)?;
    Ok(VerifyReport {
        model: config.model,
        plan: config.plan.clone(),
        strategy: opts
            .strategy
            .map_or_else(|| "default".to_string(), |s| s.name().to_string()),
        seed: config.seed,
        oracle: match cfg.mode {
            bingnn::oracle::OracleMode::FullPrecision => "full-precision",
            bingnn::oracle::OracleMode::SimulatedBinarization => "simulated-binarization",
        },
        corrupted_edge,
        checks,
    })
}
