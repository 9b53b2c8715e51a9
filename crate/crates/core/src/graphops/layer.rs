use crate::bitdense::{binarize_with_scale, Axis, DenseMatrix, ScaleVector};
use crate::error::{Error, Result};
use crate::kernels::{KernelOp, KernelVariant, MatOperand, Precision};

/// A weight matrix together with its packed signs and column scales `β`, so
/// that `B`-tagged weight slots do not rebinarize on every run.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    dense: MatOperand,
    bits: MatOperand,
}

impl Weight {
    pub fn new(w: DenseMatrix) -> Result<Self> {
        let (bits, beta) = binarize_with_scale(&w, Axis::Col)?;
        Ok(Self {
            dense: MatOperand::Dense(w),
            bits: MatOperand::scaled_bits(bits, beta),
        })
    }

    pub fn dense(&self) -> &DenseMatrix {
        self.dense.as_dense().expect("dense weight")
    }

    pub fn rows(&self) -> usize {
        self.dense.rows()
    }

    pub fn cols(&self) -> usize {
        self.dense.cols()
    }

    /// The operand a slot with this weight tag consumes.
    pub fn operand(&self, tag: Precision) -> &MatOperand {
        match tag {
            Precision::F => &self.dense,
            Precision::B => &self.bits,
        }
    }

    /// Payload bytes of the form a slot with this tag reads, scales included.
    pub fn bytes(&self, tag: Precision) -> usize {
        match tag {
            Precision::F => self.dense.payload_bytes(),
            Precision::B => self.bits.payload_bytes() + self.cols() * std::mem::size_of::<f64>(),
        }
    }
}

/// Lower bound applied to batch-norm standard deviations.
pub const BN_STD_FLOOR: f64 = 1e-5;

/// Inference-time batch normalization parameters, one entry per feature.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl BatchNorm {
    /// `std` entries below [`BN_STD_FLOOR`] are raised to it.
    pub fn new(gamma: Vec<f64>, beta: Vec<f64>, mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        let n = gamma.len();
        if beta.len() != n || mean.len() != n || std.len() != n {
            return Err(Error::dims(
                "BatchNorm::new",
                format!(
                    "gamma {n}, beta {}, mean {}, std {}",
                    beta.len(),
                    mean.len(),
                    std.len()
                ),
            ));
        }
        if gamma
            .iter()
            .chain(&beta)
            .chain(&mean)
            .chain(&std)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Model("batch-norm parameters must be finite".into()));
        }
        let std = std.into_iter().map(|s| s.max(BN_STD_FLOOR)).collect();
        Ok(Self {
            gamma,
            beta,
            mean,
            std,
        })
    }

    pub fn identity(features: usize) -> Self {
        Self {
            gamma: vec![1.0; features],
            beta: vec![0.0; features],
            mean: vec![0.0; features],
            std: vec![1.0; features],
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }
}

/// `out(i, j) = γ_j · (x(i, j) − μ_j) / σ_j + β_j`.
pub fn batchnorm_infer(x: &DenseMatrix, bn: &BatchNorm) -> Result<DenseMatrix> {
    if bn.features() != x.cols() {
        return Err(Error::dims(
            "batchnorm_infer",
            format!("{} parameters for {} features", bn.features(), x.cols()),
        ));
    }
    Ok(DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| {
        let v = f64::from(x.get(i, j));
        (bn.gamma[j] * (v - bn.mean[j]) / bn.std[j] + bn.beta[j]) as f32
    }))
}

pub fn relu(x: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j).max(0.0))
}

/// Row-wise softmax, computed in f64 after subtracting the row maximum.
pub fn softmax(x: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let row = x.row(i);
        let max = row
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(f64::from(v)));
        let exps: Vec<f64> = row.iter().map(|&v| (f64::from(v) - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for (j, e) in exps.into_iter().enumerate() {
            out.set(i, j, (e / sum) as f32);
        }
    }
    out
}

/// One step of a model.
///
/// Convolution layers carry their precision plan as kernel variants, one per
/// slot. SAGE and GraphConv compute `X·W_self + agg(X·W_neigh)` where `agg`
/// is the neighbor mean (SAGE) or sum (GraphConv); their slots are
/// `[self product, neighbor product, aggregation, merge]`.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    GcnConv {
        mm: KernelVariant,
        spmm: KernelVariant,
        weight: Weight,
    },
    SageConv(TwoWeightConv),
    GraphConv(TwoWeightConv),
    FullyConnected {
        mm: KernelVariant,
        weight: Weight,
    },
    /// `max(0, x)` on full-precision input; a no-op on bits, which already
    /// encode a sign.
    ReLU,
    BatchNorm(BatchNorm),
    /// BIN: sign binarization of a full-precision input.
    Binarize,
    /// SCL: `diag(row) · x · diag(col)`.
    Scale {
        row: Option<ScaleVector>,
        col: Option<ScaleVector>,
    },
    Softmax,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoWeightConv {
    pub self_mm: KernelVariant,
    pub neigh_mm: KernelVariant,
    pub spmm: KernelVariant,
    pub add: KernelVariant,
    pub w_self: Weight,
    pub w_neigh: Weight,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::GcnConv { .. } => "GCNConv",
            LayerSpec::SageConv(_) => "SAGEConv",
            LayerSpec::GraphConv(_) => "GraphConv",
            LayerSpec::FullyConnected { .. } => "FullyConnected",
            LayerSpec::ReLU => "ReLU",
            LayerSpec::BatchNorm(_) => "BatchNorm",
            LayerSpec::Binarize => "BIN",
            LayerSpec::Scale { .. } => "SCL",
            LayerSpec::Softmax => "Softmax",
        }
    }

    /// Kernel variants of the layer's slots, in execution order.
    pub fn slots(&self) -> Vec<KernelVariant> {
        match self {
            LayerSpec::GcnConv { mm, spmm, .. } => vec![*mm, *spmm],
            LayerSpec::SageConv(c) | LayerSpec::GraphConv(c) => {
                vec![c.self_mm, c.neigh_mm, c.spmm, c.add]
            }
            LayerSpec::FullyConnected { mm, .. } => vec![*mm],
            _ => Vec::new(),
        }
    }

    /// Returns a copy with the slots replaced, in [`LayerSpec::slots`] order.
    pub fn with_slots(&self, slots: &[KernelVariant]) -> Result<Self> {
        let n = self.slots().len();
        if slots.len() != n {
            return Err(Error::Model(format!(
                "{} has {n} kernel slots, got {}",
                self.name(),
                slots.len()
            )));
        }
        let mut out = self.clone();
        match &mut out {
            LayerSpec::GcnConv { mm, spmm, .. } => {
                *mm = slots[0];
                *spmm = slots[1];
            }
            LayerSpec::SageConv(c) | LayerSpec::GraphConv(c) => {
                c.self_mm = slots[0];
                c.neigh_mm = slots[1];
                c.spmm = slots[2];
                c.add = slots[3];
            }
            LayerSpec::FullyConnected { mm, .. } => *mm = slots[0],
            _ => {}
        }
        Ok(out)
    }

    /// Checks the layer's internal chain and returns its output precision
    /// for the given input precision.
    pub fn output_precision(&self, input: Precision) -> Result<Precision> {
        let chain = |msg: String| Err(Error::PrecisionChain(format!("{}: {msg}", self.name())));
        let expect_op = |v: KernelVariant, ops: &[KernelOp], slot: &str| -> Result<()> {
            if ops.contains(&v.op) {
                Ok(())
            } else {
                Err(Error::PrecisionChain(format!(
                    "{}: {slot} slot cannot run {v}",
                    self.name()
                )))
            }
        };
        let product = [KernelOp::Mm, KernelOp::Bmm];
        match self {
            LayerSpec::GcnConv { mm, spmm, .. } => {
                expect_op(*mm, &product, "product")?;
                expect_op(*spmm, &[KernelOp::Bspmm], "aggregation")?;
                if mm.in1 != input {
                    return chain(format!("{mm} expects {} input, got {input}", mm.in1));
                }
                if mm.out != spmm.in1 {
                    return chain(format!(
                        "{mm} emits {} but {spmm} expects {}",
                        mm.out, spmm.in1
                    ));
                }
                Ok(spmm.out)
            }
            LayerSpec::SageConv(c) | LayerSpec::GraphConv(c) => {
                expect_op(c.self_mm, &product, "self product")?;
                expect_op(c.neigh_mm, &product, "neighbor product")?;
                expect_op(c.spmm, &[KernelOp::Bspmm], "aggregation")?;
                expect_op(c.add, &[KernelOp::Add], "merge")?;
                for v in [c.self_mm, c.neigh_mm] {
                    if v.in1 != input {
                        return chain(format!("{v} expects {} input, got {input}", v.in1));
                    }
                }
                if c.neigh_mm.out != c.spmm.in1 {
                    return chain(format!(
                        "{} emits {} but {} expects {}",
                        c.neigh_mm, c.neigh_mm.out, c.spmm, c.spmm.in1
                    ));
                }
                if c.self_mm.out != c.add.in1 || c.spmm.out != c.add.in2 {
                    return chain(format!(
                        "{} merges {}{} but receives {}{}",
                        c.add, c.add.in1, c.add.in2, c.self_mm.out, c.spmm.out
                    ));
                }
                Ok(c.add.out)
            }
            LayerSpec::FullyConnected { mm, .. } => {
                expect_op(*mm, &product, "product")?;
                if mm.in1 != input {
                    return chain(format!("{mm} expects {} input, got {input}", mm.in1));
                }
                Ok(mm.out)
            }
            LayerSpec::ReLU => Ok(input),
            LayerSpec::BatchNorm(_) | LayerSpec::Scale { .. } | LayerSpec::Softmax => {
                if input != Precision::F {
                    return chain("needs full-precision input".into());
                }
                Ok(Precision::F)
            }
            LayerSpec::Binarize => {
                if input != Precision::F {
                    return chain("needs full-precision input".into());
                }
                Ok(Precision::B)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_batchnorm() {
        let x = DenseMatrix::new(2, 3, vec![1.0, -2.0, 0.5, 3.0, 0.0, -1.0]).unwrap();
        assert_eq!(batchnorm_infer(&x, &BatchNorm::identity(3)).unwrap(), x);
        assert!(batchnorm_infer(&x, &BatchNorm::identity(2)).is_err());
    }

    #[test]
    fn batchnorm_sign_is_a_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let f = 17;
        let g: Vec<f64> = (0..f).map(|_| rng.gen_range(0.1..2.0)).collect();
        let b: Vec<f64> = (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m: Vec<f64> = (0..f).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s: Vec<f64> = (0..f).map(|_| rng.gen_range(0.5..2.0)).collect();
        let bn = BatchNorm::new(g.clone(), b.clone(), m.clone(), s.clone()).unwrap();
        let x = DenseMatrix::from_fn(40, f, |_, _| rng.gen_range(-3.0..3.0));
        let y = batchnorm_infer(&x, &bn).unwrap();
        for i in 0..40 {
            for j in 0..f {
                let threshold = m[j] - s[j] * b[j] / g[j];
                let v = f64::from(x.get(i, j));
                // skip values within rounding distance of the threshold
                if (v - threshold).abs() > 1e-5 {
                    assert_eq!(y.get(i, j) >= 0.0, v >= threshold);
                }
                let want = g[j] * (v - m[j]) / s[j] + b[j];
                assert!((f64::from(y.get(i, j)) - want).abs() <= 1e-6 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn std_is_floored() {
        let bn = BatchNorm::new(vec![1.0], vec![0.0], vec![0.0], vec![0.0]).unwrap();
        assert_eq!(bn.std(), &[BN_STD_FLOOR]);
        assert!(BatchNorm::new(vec![1.0], vec![0.0], vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = DenseMatrix::new(2, 3, vec![1000.0, 1000.0, 1000.0, 0.0, 1.0, 2.0]).unwrap();
        let p = softmax(&x);
        for i in 0..2 {
            let s: f32 = p.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
        assert!((p.get(0, 0) - 1.0 / 3.0).abs() < 1e-7);
        assert!(p.get(1, 2) > p.get(1, 1));
    }

    #[test]
    fn layer_chains() {
        let w = Weight::new(DenseMatrix::from_fn(4, 2, |i, j| (i as f32) - (j as f32))).unwrap();
        let v = |s: &str| s.parse::<KernelVariant>().unwrap();
        let gcn = LayerSpec::GcnConv {
            mm: v("BMM.FBB"),
            spmm: v("BSpMM.BBB"),
            weight: w.clone(),
        };
        assert_eq!(gcn.output_precision(Precision::F).unwrap(), Precision::B);
        assert!(gcn.output_precision(Precision::B).is_err());
        let bad = gcn.with_slots(&[v("BMM.FBF"), v("BSpMM.BBB")]).unwrap();
        assert!(matches!(
            bad.output_precision(Precision::F),
            Err(Error::PrecisionChain(_))
        ));
        let swapped = gcn.with_slots(&[v("BSpMM.FBB"), v("BSpMM.BBB")]).unwrap();
        assert!(swapped.output_precision(Precision::F).is_err());
        assert_eq!(
            LayerSpec::ReLU.output_precision(Precision::B).unwrap(),
            Precision::B
        );
        assert!(LayerSpec::Binarize.output_precision(Precision::B).is_err());
        assert!(LayerSpec::Softmax.output_precision(Precision::B).is_err());
    }
}
