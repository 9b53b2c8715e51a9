use std::time::Instant;

use super::layer::{batchnorm_infer, relu, softmax, LayerSpec, TwoWeightConv, Weight};
use super::Graph;
use crate::bitdense::{binarize, BitDenseMatrix, DenseMatrix, TrinaryStrategy};
use crate::error::{Error, Result};
use crate::kernels::{add, bspmm, mm, scl, KernelVariant, MatOperand, Precision};

/// A validated sequence of layers.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    layers: Vec<LayerSpec>,
    input_precision: Precision,
}

impl ModelSpec {
    /// Rejects specs whose precision tags do not chain from `input_precision`
    /// through every layer, or whose final output is not full precision.
    pub fn new(layers: Vec<LayerSpec>, input_precision: Precision) -> Result<Self> {
        let mut p = input_precision;
        for (i, layer) in layers.iter().enumerate() {
            p = layer.output_precision(p).map_err(|e| e.in_layer(i))?;
        }
        if p != Precision::F {
            return Err(Error::PrecisionChain(
                "model output must be full precision".into(),
            ));
        }
        Ok(Self {
            layers,
            input_precision,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_precision(&self) -> Precision {
        self.input_precision
    }

    /// Kernel variants of every slot, grouped by layer (layers without
    /// slots give empty groups).
    pub fn plan(&self) -> Vec<Vec<KernelVariant>> {
        self.layers.iter().map(LayerSpec::slots).collect()
    }

    /// The same model with every layer's slots replaced, validated anew.
    pub fn with_plan(&self, plan: &[Vec<KernelVariant>]) -> Result<Self> {
        if plan.len() != self.layers.len() {
            return Err(Error::Model(format!(
                "plan covers {} layers, model has {}",
                plan.len(),
                self.layers.len()
            )));
        }
        let layers = self
            .layers
            .iter()
            .zip(plan)
            .enumerate()
            .map(|(i, (l, slots))| l.with_slots(slots).map_err(|e| e.in_layer(i)))
            .collect::<Result<Vec<_>>>()?;
        let input = plan
            .iter()
            .find_map(|slots| slots.first().map(|v| v.in1))
            .unwrap_or(self.input_precision);
        Self::new(layers, input)
    }

    /// Payload bytes of all weights in the form the plan reads them.
    pub fn weight_bytes(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                LayerSpec::GcnConv { mm, weight, .. }
                | LayerSpec::FullyConnected { mm, weight } => weight.bytes(mm.in2),
                LayerSpec::SageConv(c) | LayerSpec::GraphConv(c) => {
                    c.w_self.bytes(c.self_mm.in2) + c.w_neigh.bytes(c.neigh_mm.in2)
                }
                _ => 0,
            })
            .sum()
    }
}

/// Parses a layer plan such as `"BMM.FBB+BSpMM.BBB"`.
pub fn parse_plan(s: &str) -> Result<Vec<KernelVariant>> {
    s.split('+').map(|v| v.trim().parse()).collect()
}

fn conv_layers(
    count: usize,
    plans: &[Vec<KernelVariant>],
    mut build: impl FnMut(usize, &[KernelVariant]) -> Result<LayerSpec>,
) -> Result<Vec<LayerSpec>> {
    if plans.len() != count {
        return Err(Error::Model(format!(
            "expected {count} layer plans, got {}",
            plans.len()
        )));
    }
    let mut layers = Vec::new();
    for (i, plan) in plans.iter().enumerate() {
        if i > 0 {
            layers.push(LayerSpec::ReLU);
        }
        layers.push(build(i, plan)?);
    }
    layers.push(LayerSpec::Softmax);
    Ok(layers)
}

fn slots<const N: usize>(plan: &[KernelVariant]) -> Result<[KernelVariant; N]> {
    plan.try_into().map_err(|_| {
        Error::Model(format!(
            "a layer plan needs {N} kernels, got {}",
            plan.len()
        ))
    })
}

fn input_of(plans: &[Vec<KernelVariant>]) -> Precision {
    plans
        .first()
        .and_then(|p| p.first())
        .map_or(Precision::F, |v| v.in1)
}

/// Two GCN layers with a ReLU between them and a softmax on top. Each plan
/// is `[product, aggregation]`.
pub fn gcn_model(weights: [DenseMatrix; 2], plans: &[Vec<KernelVariant>]) -> Result<ModelSpec> {
    let mut weights = weights.into_iter();
    let layers = conv_layers(2, plans, |_, plan| {
        let [mm, spmm] = slots(plan)?;
        Ok(LayerSpec::GcnConv {
            mm,
            spmm,
            weight: Weight::new(weights.next().expect("two weights"))?,
        })
    })?;
    ModelSpec::new(layers, input_of(plans))
}

/// Two SAGE layers (mean aggregation). Weights are `[self, neighbor]` per
/// layer; each plan is `[self product, neighbor product, aggregation, merge]`.
pub fn sage_model(
    weights: [[DenseMatrix; 2]; 2],
    plans: &[Vec<KernelVariant>],
) -> Result<ModelSpec> {
    let mut weights = weights.into_iter();
    let layers = conv_layers(2, plans, |_, plan| {
        Ok(LayerSpec::SageConv(two_weight(
            plan,
            weights.next().expect("two layers"),
        )?))
    })?;
    ModelSpec::new(layers, input_of(plans))
}

/// Two GraphConv layers (sum aggregation) followed by a fully-connected
/// layer. The last plan is `[product]`.
pub fn saint_model(
    conv_weights: [[DenseMatrix; 2]; 2],
    fc_weight: DenseMatrix,
    plans: &[Vec<KernelVariant>],
) -> Result<ModelSpec> {
    let mut conv = conv_weights.into_iter();
    let mut fc = Some(fc_weight);
    let layers = conv_layers(3, plans, |i, plan| {
        if i < 2 {
            Ok(LayerSpec::GraphConv(two_weight(
                plan,
                conv.next().expect("two layers"),
            )?))
        } else {
            let [mm] = slots(plan)?;
            Ok(LayerSpec::FullyConnected {
                mm,
                weight: Weight::new(fc.take().expect("one fc weight"))?,
            })
        }
    })?;
    ModelSpec::new(layers, input_of(plans))
}

fn two_weight(
    plan: &[KernelVariant],
    [w_self, w_neigh]: [DenseMatrix; 2],
) -> Result<TwoWeightConv> {
    let [self_mm, neigh_mm, spmm, add] = slots(plan)?;
    Ok(TwoWeightConv {
        self_mm,
        neigh_mm,
        spmm,
        add,
        w_self: Weight::new(w_self)?,
        w_neigh: Weight::new(w_neigh)?,
    })
}

/// Deletes every SCL layer whose consumer is a BIN layer, repeating until
/// none is left. Positive scales never change a sign, so every BIN output
/// is unchanged.
pub fn rewrite_eliminate_scl(m: &ModelSpec) -> ModelSpec {
    let mut layers = m.layers.clone();
    loop {
        let before = layers.len();
        let mut kept = Vec::with_capacity(layers.len());
        for (i, layer) in layers.iter().enumerate() {
            let feeds_bin = matches!(layers.get(i + 1), Some(LayerSpec::Binarize));
            if !(matches!(layer, LayerSpec::Scale { .. }) && feeds_bin) {
                kept.push(layer.clone());
            }
        }
        layers = kept;
        if layers.len() == before {
            break;
        }
    }
    ModelSpec {
        layers,
        input_precision: m.input_precision,
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Trinary strategy for every aggregation; `None` uses the default per
    /// activation precision.
    pub strategy: Option<TrinaryStrategy>,
    /// Keep a copy of every binary tensor produced.
    pub record_bin_points: bool,
}

/// A binary tensor produced during a run, in production order.
#[derive(Clone, Debug, PartialEq)]
pub struct BinPoint {
    pub layer: usize,
    /// Producing kernel (`"BSpMM.BBB"`, …) or `"BIN"`.
    pub source: String,
    pub bits: BitDenseMatrix,
}

/// Timing of one operator call.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelRecord {
    pub layer: usize,
    pub kernel: String,
    pub nanos: u64,
    /// Payload bytes of the result.
    pub out_bytes: usize,
    pub out_precision: Precision,
}

#[derive(Clone, Debug)]
pub struct ModelRun {
    pub output: DenseMatrix,
    /// Input of the final softmax, or the output when the model ends
    /// without one.
    pub logits: DenseMatrix,
    pub bin_points: Vec<BinPoint>,
    pub kernels: Vec<KernelRecord>,
    pub total_nanos: u64,
}

pub fn run_model(m: &ModelSpec, graph: &Graph, x0: &MatOperand) -> Result<ModelRun> {
    run_model_with(m, graph, x0, &RunOptions::default())
}

pub fn run_model_with(
    m: &ModelSpec,
    graph: &Graph,
    x0: &MatOperand,
    opts: &RunOptions,
) -> Result<ModelRun> {
    if x0.precision() != m.input_precision {
        return Err(Error::PrecisionChain(format!(
            "model expects {} input, got {}",
            m.input_precision,
            x0.precision()
        )));
    }
    if x0.rows() != graph.node_count() {
        return Err(Error::dims(
            "run_model",
            format!(
                "{} feature rows for {} nodes",
                x0.rows(),
                graph.node_count()
            ),
        ));
    }
    let start = Instant::now();
    let mut rec = Recorder {
        opts,
        layer: 0,
        bin_points: Vec::new(),
        kernels: Vec::new(),
    };
    let mut x = x0.clone();
    let mut logits = None;
    for (i, layer) in m.layers.iter().enumerate() {
        rec.layer = i;
        if i + 1 == m.layers.len() && matches!(layer, LayerSpec::Softmax) {
            logits = x.as_dense().cloned();
        }
        x = run_layer(layer, graph, x, &mut rec).map_err(|e| e.in_layer(i))?;
    }
    let output = x
        .into_dense()
        .ok_or_else(|| Error::PrecisionChain("model output must be full precision".into()))?;
    Ok(ModelRun {
        logits: logits.unwrap_or_else(|| output.clone()),
        output,
        bin_points: rec.bin_points,
        kernels: rec.kernels,
        total_nanos: start.elapsed().as_nanos() as u64,
    })
}

struct Recorder<'a> {
    opts: &'a RunOptions,
    layer: usize,
    bin_points: Vec<BinPoint>,
    kernels: Vec<KernelRecord>,
}

impl Recorder<'_> {
    fn call(
        &mut self,
        kernel: impl ToString,
        f: impl FnOnce() -> Result<MatOperand>,
    ) -> Result<MatOperand> {
        let t = Instant::now();
        let out = f()?;
        let nanos = t.elapsed().as_nanos() as u64;
        let kernel = kernel.to_string();
        if let (true, Some(bits)) = (self.opts.record_bin_points, out.as_bits()) {
            self.bin_points.push(BinPoint {
                layer: self.layer,
                source: kernel.clone(),
                bits: bits.clone(),
            });
        }
        self.kernels.push(KernelRecord {
            layer: self.layer,
            kernel,
            nanos,
            out_bytes: out.payload_bytes(),
            out_precision: out.precision(),
        });
        Ok(out)
    }
}

fn dense(x: &MatOperand) -> Result<&DenseMatrix> {
    x.as_dense()
        .ok_or_else(|| Error::PrecisionChain("layer needs full-precision input".into()))
}

fn run_layer(
    layer: &LayerSpec,
    g: &Graph,
    x: MatOperand,
    rec: &mut Recorder<'_>,
) -> Result<MatOperand> {
    let strategy = rec.opts.strategy;
    match layer {
        LayerSpec::GcnConv {
            mm: m,
            spmm,
            weight,
        } => {
            let h = rec.call(m, || mm(*m, &x, weight.operand(m.in2)))?;
            rec.call(spmm, || {
                bspmm(*spmm, &g.gcn_adjacency(spmm.in2), &h, strategy)
            })
        }
        LayerSpec::SageConv(c) | LayerSpec::GraphConv(c) => {
            let mean = matches!(layer, LayerSpec::SageConv(_));
            let s = rec.call(c.self_mm, || {
                mm(c.self_mm, &x, c.w_self.operand(c.self_mm.in2))
            })?;
            let h = rec.call(c.neigh_mm, || {
                mm(c.neigh_mm, &x, c.w_neigh.operand(c.neigh_mm.in2))
            })?;
            let agg = rec.call(c.spmm, || {
                bspmm(
                    c.spmm,
                    &g.neighbor_adjacency(c.spmm.in2, mean),
                    &h,
                    strategy,
                )
            })?;
            rec.call(c.add, || add(c.add, &s, &agg))
        }
        LayerSpec::FullyConnected { mm: m, weight } => {
            rec.call(m, || mm(*m, &x, weight.operand(m.in2)))
        }
        LayerSpec::ReLU => match x {
            MatOperand::Bits { .. } => Ok(x),
            MatOperand::Dense(d) => rec.call("ReLU", || Ok(MatOperand::Dense(relu(&d)))),
        },
        LayerSpec::BatchNorm(bn) => rec.call("BatchNorm", || {
            batchnorm_infer(dense(&x)?, bn).map(MatOperand::Dense)
        }),
        LayerSpec::Binarize => rec.call("BIN", || Ok(MatOperand::bits(binarize(dense(&x)?)))),
        LayerSpec::Scale { row, col } => rec.call("SCL", || {
            scl(dense(&x)?, row.as_ref(), col.as_ref()).map(MatOperand::Dense)
        }),
        LayerSpec::Softmax => rec.call("Softmax", || Ok(MatOperand::Dense(softmax(dense(&x)?)))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitdense::{Axis, ScaleVector};
    use crate::bitsparse::EdgeList;
    use crate::graphops::BatchNorm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plan(s: &str) -> Vec<KernelVariant> {
        parse_plan(s).unwrap()
    }

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn identity(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[test]
    fn identity_gcn_on_loop_only_graph_is_softmax() {
        let g = Graph::new(&EdgeList::new(3, vec![])).unwrap();
        let x = DenseMatrix::new(3, 2, vec![0.5, -1.0, 2.0, 0.0, -3.0, 1.0]).unwrap();
        let layers = vec![
            LayerSpec::GcnConv {
                mm: "MM.FFF".parse().unwrap(),
                spmm: "BSpMM.FFF".parse().unwrap(),
                weight: Weight::new(identity(2)).unwrap(),
            },
            LayerSpec::Softmax,
        ];
        let m = ModelSpec::new(layers, Precision::F).unwrap();
        let run = run_model(&m, &g, &x.clone().into()).unwrap();
        assert_eq!(run.output, softmax(&x));
        assert_eq!(run.kernels.len(), 3);
    }

    #[test]
    fn binary_gcn_plan_is_expressible_and_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let plans = [plan("MM.FBB+BSpMM.BBB"), plan("MM.BBF+BSpMM.FBF")];
        let m = gcn_model([random(10, 6, &mut rng), random(6, 3, &mut rng)], &plans).unwrap();
        assert_eq!(m.plan()[0], plans[0]);
        assert_eq!(m.input_precision(), Precision::F);
        let e = EdgeList::new(12, (0..11).map(|i| (i, i + 1)).collect()).symmetrized();
        let g = Graph::new(&e).unwrap();
        let opts = RunOptions {
            record_bin_points: true,
            ..Default::default()
        };
        let run = run_model_with(&m, &g, &random(12, 10, &mut rng).into(), &opts).unwrap();
        let sources: Vec<_> = run.bin_points.iter().map(|b| b.source.as_str()).collect();
        assert_eq!(sources, ["BMM.FBB", "BSpMM.BBB"]);
        assert_eq!(run.output.rows(), 12);
        assert_eq!(run.output.cols(), 3);

        let broken = [plan("MM.FBF+BSpMM.BBB"), plan("MM.BBF+BSpMM.FBF")];
        let err =
            gcn_model([random(10, 6, &mut rng), random(6, 3, &mut rng)], &broken).unwrap_err();
        assert!(matches!(err, Error::Layer { index: 0, .. }));
    }

    #[test]
    fn mismatched_input_is_reported_with_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let plans = [plan("MM.FFF+BSpMM.FFF"), plan("MM.FFF+BSpMM.FFF")];
        let m = gcn_model([random(4, 3, &mut rng), random(5, 2, &mut rng)], &plans).unwrap();
        let g = Graph::new(&EdgeList::new(6, vec![(0, 1)])).unwrap();
        let err = run_model(&m, &g, &random(6, 4, &mut rng).into()).unwrap_err();
        assert!(matches!(err, Error::Layer { index: 2, .. }), "{err}");
        assert!(run_model(&m, &g, &random(5, 4, &mut rng).into()).is_err());
    }

    #[test]
    fn scl_rewrite_scope() {
        let s = || LayerSpec::Scale {
            row: None,
            col: Some(ScaleVector::ones(Axis::Col, 2)),
        };
        let fc = |v: &str| LayerSpec::FullyConnected {
            mm: v.parse().unwrap(),
            weight: Weight::new(identity(2)).unwrap(),
        };
        let m = ModelSpec::new(
            vec![
                s(),
                s(),
                LayerSpec::Binarize,
                fc("BMM.BFF"),
                s(),
                LayerSpec::ReLU,
                LayerSpec::Binarize,
                fc("BMM.BFF"),
            ],
            Precision::F,
        )
        .unwrap();
        let r = rewrite_eliminate_scl(&m);
        let names: Vec<_> = r.layers().iter().map(LayerSpec::name).collect();
        assert_eq!(
            names,
            [
                "BIN",
                "FullyConnected",
                "SCL",
                "ReLU",
                "BIN",
                "FullyConnected"
            ]
        );
    }

    #[test]
    fn scl_rewrite_keeps_bin_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let n = 20;
        let e = EdgeList::new(
            n,
            (0..40)
                .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
                .collect(),
        );
        let g = Graph::new(&e).unwrap();
        let scale = |rng: &mut ChaCha8Rng, axis, len| {
            ScaleVector::new(axis, (0..len).map(|_| rng.gen_range(0.01..5.0)).collect()).unwrap()
        };
        let layers = vec![
            LayerSpec::GcnConv {
                mm: "MM.FFF".parse().unwrap(),
                spmm: "BSpMM.FFF".parse().unwrap(),
                weight: Weight::new(random(8, 6, &mut rng)).unwrap(),
            },
            LayerSpec::BatchNorm(BatchNorm::identity(6)),
            LayerSpec::Scale {
                row: Some(scale(&mut rng, Axis::Row, n)),
                col: Some(scale(&mut rng, Axis::Col, 6)),
            },
            LayerSpec::Binarize,
            LayerSpec::GcnConv {
                mm: "BMM.BBF".parse().unwrap(),
                spmm: "BSpMM.FFF".parse().unwrap(),
                weight: Weight::new(random(6, 3, &mut rng)).unwrap(),
            },
            LayerSpec::Softmax,
        ];
        let m = ModelSpec::new(layers, Precision::F).unwrap();
        let r = rewrite_eliminate_scl(&m);
        assert_eq!(r.layers().len(), m.layers().len() - 1);
        let opts = RunOptions {
            record_bin_points: true,
            ..Default::default()
        };
        let x = random(n, 8, &mut rng);
        let a = run_model_with(&m, &g, &x.clone().into(), &opts).unwrap();
        let b = run_model_with(&r, &g, &x.into(), &opts).unwrap();
        assert_eq!(a.bin_points.len(), 1);
        assert_eq!(
            a.bin_points.iter().map(|p| &p.bits).collect::<Vec<_>>(),
            b.bin_points.iter().map(|p| &p.bits).collect::<Vec<_>>()
        );
        assert_eq!(a.output, b.output);
    }

    #[test]
    fn builders_validate_plan_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let w = |rng: &mut ChaCha8Rng, r, c| random(r, c, rng);
        assert!(gcn_model(
            [w(&mut rng, 3, 3), w(&mut rng, 3, 2)],
            &[plan("MM.FFF+BSpMM.FFF")]
        )
        .is_err());
        let sage_plan = plan("MM.FFF+MM.FFF+BSpMM.FFF+ADD.FFF");
        let m = sage_model(
            [
                [w(&mut rng, 4, 3), w(&mut rng, 4, 3)],
                [w(&mut rng, 3, 2), w(&mut rng, 3, 2)],
            ],
            &[sage_plan.clone(), sage_plan.clone()],
        )
        .unwrap();
        assert_eq!(m.layers().len(), 4);
        let m = saint_model(
            [
                [w(&mut rng, 4, 3), w(&mut rng, 4, 3)],
                [w(&mut rng, 3, 3), w(&mut rng, 3, 3)],
            ],
            w(&mut rng, 3, 2),
            &[sage_plan.clone(), sage_plan, plan("MM.FFF")],
        )
        .unwrap();
        let names: Vec<_> = m.layers().iter().map(LayerSpec::name).collect();
        assert_eq!(
            names,
            [
                "GraphConv",
                "ReLU",
                "GraphConv",
                "ReLU",
                "FullyConnected",
                "Softmax"
            ]
        );
        let swapped = m.with_plan(&m.plan()).unwrap();
        assert_eq!(swapped, m);
    }
}
