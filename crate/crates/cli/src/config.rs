//! Model configuration files and the seeded inputs built from them.

use std::path::Path;

use bingnn::bitdense::{binarize, DenseMatrix};
use bingnn::bitsparse::EdgeList;
use bingnn::graphops::{gcn_model, parse_plan, sage_model, saint_model, ModelSpec};
use bingnn::kernels::{KernelVariant, MatOperand, Precision};
use bingnn::oracle::RefMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

/// Node, undirected edge, and feature counts of the Cora citation graph.
pub const CORA_NODES: usize = 2708;
pub const CORA_EDGES: usize = 5429;
pub const CORA_FEATURES: usize = 1433;
pub const CORA_CLASSES: usize = 7;

/// Two-layer binary GCN: binarizing product and structure-only aggregation
/// in the first layer, bit product and full-precision normalized
/// aggregation in the second.
pub const GCN_BIN_PLAN: [&str; 2] = ["MM.FBB+BSpMM.BBB", "MM.BBF+BSpMM.FBF"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Sage,
    Saint,
}

impl ModelKind {
    /// Number of per-layer plan strings the model takes.
    pub fn plan_len(self) -> usize {
        match self {
            ModelKind::Gcn | ModelKind::Sage => 2,
            ModelKind::Saint => 3,
        }
    }
}

fn default_features() -> usize {
    CORA_FEATURES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub hidden: usize,
    pub classes: usize,
    /// One string per layer, kernels joined by `+`.
    pub plan: Vec<String>,
    pub seed: u64,
    /// Input feature width.
    #[serde(default = "default_features")]
    pub features: usize,
}

impl ModelConfig {
    /// The binary GCN on Cora-shaped inputs.
    pub fn gcn_bin(seed: u64) -> Self {
        Self {
            model: ModelKind::Gcn,
            hidden: 16,
            classes: CORA_CLASSES,
            plan: GCN_BIN_PLAN.iter().map(|s| s.to_string()).collect(),
            seed,
            features: CORA_FEATURES,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.plans()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn plans(&self) -> Result<Vec<Vec<KernelVariant>>> {
        if self.plan.len() != self.model.plan_len() {
            return Err(CliError::Config(format!(
                "{:?} takes {} layer plans, got {}",
                self.model,
                self.model.plan_len(),
                self.plan.len()
            )));
        }
        if self.hidden == 0 || self.classes == 0 || self.features == 0 {
            return Err(CliError::Config(
                "hidden, classes, and features must be positive".into(),
            ));
        }
        Ok(self
            .plan
            .iter()
            .map(|p| parse_plan(p))
            .collect::<bingnn::Result<_>>()?)
    }

    /// The same config with per-layer plans rewritten from slot lists.
    /// Groups without slots (as [`ModelSpec::plan`] gives for ReLU and
    /// softmax layers) are skipped.
    pub fn with_plan(&self, plan: &[Vec<KernelVariant>]) -> Self {
        let join = |slots: &[KernelVariant]| {
            slots
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("+")
        };
        Self {
            plan: plan
                .iter()
                .filter(|p| !p.is_empty())
                .map(|p| join(p))
                .collect(),
            ..self.clone()
        }
    }

    /// Builds the model and input features for a graph of `nodes` nodes.
    /// Weights are drawn first, then features, all uniform in (−1, 1) from
    /// one stream seeded with `seed`.
    pub fn instantiate(&self, nodes: usize) -> Result<Instance> {
        let plans = self.plans()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut w =
            |r: usize, c: usize| DenseMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
        let (f, h, c) = (self.features, self.hidden, self.classes);
        let spec = match self.model {
            ModelKind::Gcn => gcn_model([w(f, h), w(h, c)], &plans)?,
            ModelKind::Sage => sage_model([[w(f, h), w(f, h)], [w(h, c), w(h, c)]], &plans)?,
            ModelKind::Saint => {
                let conv = [[w(f, h), w(f, h)], [w(h, h), w(h, h)]];
                saint_model(conv, w(h, c), &plans)?
            }
        };
        let features = w(nodes, f);
        Ok(Instance { spec, features })
    }
}

/// A model with its seeded input.
#[derive(Clone, Debug)]
pub struct Instance {
    pub spec: ModelSpec,
    pub features: DenseMatrix,
}

impl Instance {
    /// Engine input: the features, binarized when the first slot reads
    /// bits.
    pub fn input(&self) -> MatOperand {
        match self.spec.input_precision() {
            Precision::F => MatOperand::from(self.features.clone()),
            Precision::B => MatOperand::bits(binarize(&self.features)),
        }
    }

    /// The same input for the oracle.
    pub fn oracle_input(&self) -> RefMatrix {
        match self.input() {
            MatOperand::Dense(m) => RefMatrix::from_dense(&m),
            MatOperand::Bits { bits, .. } => RefMatrix::from_bits(&bits),
        }
    }
}

/// Random undirected graph with `edges` distinct-endpoint pairs, mirrored.
/// Drawn from stream 1 of `seed`, so it does not shift the model stream.
pub fn synthetic_graph(nodes: usize, edges: usize, seed: u64) -> EdgeList {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut out = Vec::with_capacity(edges);
    if nodes > 1 {
        while out.len() < edges {
            let (i, j) = (rng.gen_range(0..nodes), rng.gen_range(0..nodes));
            if i != j {
                out.push((i, j));
            }
        }
    }
    EdgeList::new(nodes, out).symmetrized()
}
