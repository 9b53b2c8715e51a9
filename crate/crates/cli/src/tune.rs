//! Variant tuning: substitute each kernel slot with the other variants that
//! fit between its neighbors, try every trinary strategy, and keep the
//! fastest plan that still matches the oracle.

use bingnn::bitdense::TrinaryStrategy;
use bingnn::bitsparse::EdgeList;
use bingnn::graphops::{run_model_with, Graph, ModelSpec, RunOptions};
use bingnn::kernels::{KernelOp, KernelVariant};
use serde::Serialize;

use crate::bench::Timing;
use crate::config::{Instance, ModelConfig};
use crate::verify::{check_run, run_oracle, run_recorded, Status};
use crate::{CliError, Result};

#[derive(Clone, Debug)]
pub struct TuneOptions {
    pub strategies: Vec<TrinaryStrategy>,
    /// Operators whose slots may be substituted; other slots keep the base
    /// variant.
    pub free_ops: Vec<KernelOp>,
    /// Timed runs per candidate, after one warm-up.
    pub reps: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            strategies: TrinaryStrategy::ALL.to_vec(),
            free_ops: vec![
                KernelOp::Mm,
                KernelOp::Bmm,
                KernelOp::Bspmm,
                KernelOp::Add,
                KernelOp::Concat,
            ],
            reps: 3,
        }
    }
}

/// Variants that can replace `v` without touching its neighbors: same
/// operator family (`MM` and `BMM` are one family), same first-operand and
/// output tags.
pub fn slot_options(v: KernelVariant, free_ops: &[KernelOp]) -> Vec<KernelVariant> {
    if !free_ops.contains(&v.op) {
        return vec![v];
    }
    let family: &[KernelOp] = match v.op {
        KernelOp::Mm | KernelOp::Bmm => &[KernelOp::Mm, KernelOp::Bmm],
        KernelOp::Bspmm => &[KernelOp::Bspmm],
        KernelOp::Add => &[KernelOp::Add],
        KernelOp::Concat => &[KernelOp::Concat],
    };
    family
        .iter()
        .flat_map(|&op| KernelVariant::all_of(op))
        .filter(|c| free_ops.contains(&c.op) || *c == v)
        .filter(|c| c.in1 == v.in1 && c.out == v.out)
        .collect()
}

/// Every combination of slot options that the model validator accepts, the
/// base plan first.
pub fn enumerate_plans(spec: &ModelSpec, free_ops: &[KernelOp]) -> Vec<Vec<Vec<KernelVariant>>> {
    let base = spec.plan();
    let options: Vec<Vec<Vec<KernelVariant>>> = base
        .iter()
        .map(|slots| slots.iter().map(|&v| slot_options(v, free_ops)).collect())
        .collect();
    let mut plans = vec![Vec::new()];
    for layer in &options {
        let mut layer_plans = vec![Vec::new()];
        for slot in layer {
            layer_plans = layer_plans
                .into_iter()
                .flat_map(|p: Vec<KernelVariant>| {
                    slot.iter().map(move |&v| {
                        let mut p = p.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        plans = plans
            .into_iter()
            .flat_map(|p: Vec<Vec<KernelVariant>>| {
                layer_plans.iter().map(move |l| {
                    let mut p = p.clone();
                    p.push(l.clone());
                    p
                })
            })
            .collect();
    }
    plans.retain(|p| spec.with_plan(p).is_ok());
    if let Some(i) = plans.iter().position(|p| *p == base) {
        plans.swap(0, i);
    }
    plans
}

#[derive(Clone, Debug, Serialize)]
pub struct Candidate {
    pub plan: Vec<String>,
    pub strategy: String,
    #[serde(flatten)]
    pub timing: Timing,
    pub status: Status,
    pub max_rel_logit_error: f64,
    pub bit_mismatches: usize,
    pub tie_flips: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Winner {
    /// Ready to use as a config file.
    pub config: ModelConfig,
    pub strategy: String,
    pub median_ns: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TuneResult {
    pub base_plan: Vec<String>,
    pub candidates: Vec<Candidate>,
    pub winner: Winner,
}

pub fn tune(config: &ModelConfig, edges: &EdgeList, opts: &TuneOptions) -> Result<TuneResult> {
    if opts.reps == 0 || opts.strategies.is_empty() {
        return Err(CliError::Config(
            "tuning needs at least one repetition and one strategy".into(),
        ));
    }
    let base = config.instantiate(edges.node_count)?;
    let graph = Graph::new(edges)?;
    let mut candidates = Vec::new();
    let mut best: Option<(u64, usize)> = None;
    for plan in enumerate_plans(&base.spec, &opts.free_ops) {
        let inst = Instance {
            spec: base.spec.with_plan(&plan)?,
            features: base.features.clone(),
        };
        let plan_config = config.with_plan(&plan);
        let (oracle, cfg) = run_oracle(&inst, edges)?;
        let input = inst.input();
        for &strategy in &opts.strategies {
            let checks = check_run(&run_recorded(&inst, &graph, Some(strategy))?, &oracle, &cfg)?;
            let run_opts = RunOptions {
                strategy: Some(strategy),
                record_bin_points: false,
            };
            run_model_with(&inst.spec, &graph, &input, &run_opts)?;
            let mut samples = Vec::with_capacity(opts.reps);
            for _ in 0..opts.reps {
                samples.push(run_model_with(&inst.spec, &graph, &input, &run_opts)?.total_nanos);
            }
            let timing = Timing::of(&samples);
            if checks.status == Status::Pass && best.is_none_or(|(t, _)| timing.median_ns < t) {
                best = Some((timing.median_ns, candidates.len()));
            }
            candidates.push((
                plan_config.clone(),
                Candidate {
                    plan: plan_config.plan.clone(),
                    strategy: strategy.name().to_string(),
                    timing,
                    status: checks.status,
                    max_rel_logit_error: checks.max_rel_logit_error,
                    bit_mismatches: checks.bit_mismatches,
                    tie_flips: checks.tie_flips,
                },
            ));
        }
    }
    let (median_ns, w) = best.ok_or(CliError::NoVerifiedCandidate(candidates.len()))?;
    let winner = Winner {
        config: candidates[w].0.clone(),
        strategy: candidates[w].1.strategy.clone(),
        median_ns,
    };
    Ok(TuneResult {
        base_plan: config.plan.clone(),
        candidates: candidates.into_iter().map(|(_, c)| c).collect(),
        winner,
    })
}
