//! Reference implementations in f64 over dense matrices.
//!
//! Nothing here touches packed bits or tiles: adjacency matrices are built
//! densely from the edge list, binarization is `sign()` followed by an
//! ordinary real multiply. `SimulatedBinarization` evaluates a model's
//! precision plan that way, which is what a binary network computes when its
//! tensors stay in full precision.

use crate::bitdense::{BitDenseMatrix, DenseMatrix, Semantics};
use crate::bitsparse::EdgeList;
use crate::error::{Error, Result};
use crate::graphops::{LayerSpec, ModelSpec};
use crate::kernels::{KernelOp, KernelVariant, Precision};

/// Row-major f64 matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct RefMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RefMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        Self::from_fn(m.rows(), m.cols(), |i, j| f64::from(m.get(i, j)))
    }

    /// Decodes bits per their semantics (0/1 or ±1).
    pub fn from_bits(m: &BitDenseMatrix) -> Self {
        let zero = match m.semantics() {
            Semantics::ZeroOne => 0.0,
            Semantics::PlusMinus => -1.0,
        };
        Self::from_fn(
            m.rows(),
            m.cols(),
            |i, j| if m.get(i, j) { 1.0 } else { zero },
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `+1` where the entry is `>= 0`, else `-1`.
    pub fn signs(&self) -> RefMatrix {
        self.map(sign)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RefMatrix {
        RefMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Index of the first maximum of each row.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

pub fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OracleMode {
    /// Every slot in plain real arithmetic.
    #[default]
    FullPrecision,
    /// Every `B`-tagged value is replaced by its sign, with scales applied as
    /// real multiplies.
    SimulatedBinarization,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub mode: OracleMode,
    /// Relative tolerance for full-precision comparisons; see
    /// [`max_relative_error`].
    pub tolerance: f64,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            mode: OracleMode::FullPrecision,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl OracleConfig {
    pub fn simulated() -> Self {
        Self {
            mode: OracleMode::SimulatedBinarization,
            ..Self::default()
        }
    }
}

fn check_inner(op: &'static str, a: &RefMatrix, b: &RefMatrix) -> Result<()> {
    if a.cols != b.rows {
        return Err(Error::dims(
            op,
            format!("{}x{} times {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    Ok(())
}

/// Naive `i, j, k` triple loop.
pub fn naive_mm(a: &RefMatrix, b: &RefMatrix) -> Result<RefMatrix> {
    check_inner("naive_mm", a, b)?;
    Ok(RefMatrix::from_fn(a.rows, b.cols, |i, j| {
        let mut s = 0.0;
        for k in 0..a.cols {
            s += a.get(i, k) * b.get(k, j);
        }
        s
    }))
}

/// Second loop order (`k` outermost, rank-1 updates), kept independent of
/// [`naive_mm`] for cross-checking.
pub fn naive_mm_outer(a: &RefMatrix, b: &RefMatrix) -> Result<RefMatrix> {
    check_inner("naive_mm_outer", a, b)?;
    let mut out = RefMatrix::zeros(a.rows, b.cols);
    for k in 0..a.cols {
        for i in 0..a.rows {
            let aik = a.get(i, k);
            for j in 0..b.cols {
                out.data[i * b.cols + j] += aik * b.get(k, j);
            }
        }
    }
    Ok(out)
}

/// Mean of `|v|` over the slice, or the zero-slice floor.
fn l1_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v.abs();
        n += 1;
    }
    let m = s / n.max(1) as f64;
    if m > 0.0 {
        m
    } else {
        crate::bitdense::ZERO_SLICE_SCALE
    }
}

/// Full precision: `a · w`. Simulated: `diag(α) · (sign(a) · sign(w)) ·
/// diag(β)` with `α` the row L1 means of `a` and `β` the column L1 means of
/// `w` (both 1 for ±1 inputs).
pub fn oracle_mm(a: &RefMatrix, w: &RefMatrix, cfg: &OracleConfig) -> Result<RefMatrix> {
    match cfg.mode {
        OracleMode::FullPrecision => naive_mm(a, w),
        OracleMode::SimulatedBinarization => {
            check_inner("oracle_mm", a, w)?;
            let alpha: Vec<f64> = (0..a.rows)
                .map(|i| l1_mean(a.row(i).iter().copied()))
                .collect();
            let beta: Vec<f64> = (0..w.cols)
                .map(|j| l1_mean((0..w.rows).map(|k| w.get(k, j))))
                .collect();
            let p = naive_mm(&a.signs(), &w.signs())?;
            Ok(RefMatrix::from_fn(p.rows, p.cols, |i, j| {
                alpha[i] * p.get(i, j) * beta[j]
            }))
        }
    }
}

/// `adj · x`; in simulated mode `x` is replaced by its signs first.
pub fn oracle_spmm(adj: &RefMatrix, x: &RefMatrix, cfg: &OracleConfig) -> Result<RefMatrix> {
    match cfg.mode {
        OracleMode::FullPrecision => naive_mm(adj, x),
        OracleMode::SimulatedBinarization => naive_mm(adj, &x.signs()),
    }
}

/// `out(i) = Σ over distinct edges (i, j) of x(j)`, accumulated edge by edge.
pub fn spmm_edges(e: &EdgeList, x: &RefMatrix) -> Result<RefMatrix> {
    e.validate()?;
    if x.rows != e.node_count {
        return Err(Error::dims(
            "spmm_edges",
            format!("{} rows for {} nodes", x.rows, e.node_count),
        ));
    }
    let mut edges = e.edges.clone();
    edges.sort_unstable();
    edges.dedup();
    let mut out = RefMatrix::zeros(e.node_count, x.cols);
    for (i, j) in edges {
        for k in 0..x.cols {
            out.data[i * x.cols + k] += x.get(j, k);
        }
    }
    Ok(out)
}

/// Dense 0/1 adjacency of the distinct edges, optionally with every
/// diagonal entry set.
pub fn dense_adjacency(e: &EdgeList, self_loops: bool) -> Result<RefMatrix> {
    e.validate()?;
    let n = e.node_count;
    let mut a = RefMatrix::zeros(n, n);
    for &(i, j) in &e.edges {
        a.set(i, j, 1.0);
    }
    if self_loops {
        for i in 0..n {
            a.set(i, i, 1.0);
        }
    }
    Ok(a)
}

fn row_sums(a: &RefMatrix) -> Vec<f64> {
    (0..a.rows).map(|i| a.row(i).iter().sum()).collect()
}

/// `D̂^{-1/2} Â D̂^{-1/2}` with `Â` including self-loops.
pub fn dense_normalized(e: &EdgeList) -> Result<RefMatrix> {
    let a = dense_adjacency(e, true)?;
    let d = row_sums(&a);
    Ok(RefMatrix::from_fn(a.rows, a.cols, |i, j| {
        a.get(i, j) / (d[i].sqrt() * d[j].sqrt())
    }))
}

/// Rows of the loop-free adjacency divided by their neighbor count.
pub fn dense_mean(e: &EdgeList) -> Result<RefMatrix> {
    let a = dense_adjacency(e, false)?;
    let d = row_sums(&a);
    Ok(RefMatrix::from_fn(a.rows, a.cols, |i, j| {
        if d[i] > 0.0 {
            a.get(i, j) / d[i]
        } else {
            0.0
        }
    }))
}

/// Sign pattern produced at a binarization point.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleBinPoint {
    pub layer: usize,
    pub source: String,
    /// Entries are ±1.
    pub signs: RefMatrix,
    /// The values the signs were taken of.
    pub values: RefMatrix,
}

#[derive(Clone, Debug)]
pub struct OracleRun {
    pub output: RefMatrix,
    /// Input of the final softmax, or the output when there is none.
    pub logits: RefMatrix,
    pub bin_points: Vec<OracleBinPoint>,
}

struct Adjacencies {
    with_loops: RefMatrix,
    normalized: RefMatrix,
    neighbors: RefMatrix,
    mean: RefMatrix,
}

struct Evaluator<'a> {
    cfg: &'a OracleConfig,
    adj: Adjacencies,
    layer: usize,
    bin_points: Vec<OracleBinPoint>,
}

impl Evaluator<'_> {
    fn simulated(&self) -> bool {
        self.cfg.mode == OracleMode::SimulatedBinarization
    }

    /// Applies `sign()` to a `B`-tagged slot result and records it.
    fn finish(&mut self, v: KernelVariant, out: RefMatrix) -> RefMatrix {
        if self.simulated() && v.out == Precision::B {
            self.bin(v.to_string(), &out)
        } else {
            out
        }
    }

    fn bin(&mut self, source: String, x: &RefMatrix) -> RefMatrix {
        let signs = x.signs();
        self.bin_points.push(OracleBinPoint {
            layer: self.layer,
            source,
            signs: signs.clone(),
            values: x.clone(),
        });
        signs
    }

    fn product(&mut self, v: KernelVariant, x: &RefMatrix, w: &DenseMatrix) -> Result<RefMatrix> {
        let w = RefMatrix::from_dense(w);
        let out = if v.op == KernelOp::Bmm {
            oracle_mm(x, &w, self.cfg)?
        } else {
            naive_mm(x, &w)?
        };
        Ok(self.finish(v, out))
    }

    /// `mean` selects the SAGE normalization; `gcn` the GCN one.
    fn aggregate(
        &mut self,
        v: KernelVariant,
        h: &RefMatrix,
        gcn: bool,
        mean: bool,
    ) -> Result<RefMatrix> {
        let structure_only = self.simulated() && v.in2 == Precision::B;
        let a = match (gcn, structure_only, mean) {
            (true, true, _) => &self.adj.with_loops,
            (true, false, _) => &self.adj.normalized,
            (false, false, true) => &self.adj.mean,
            (false, _, _) => &self.adj.neighbors,
        };
        let out = naive_mm(a, h)?;
        Ok(self.finish(v, out))
    }

    fn layer(&mut self, layer: &LayerSpec, x: &RefMatrix, tag: Precision) -> Result<RefMatrix> {
        Ok(match layer {
            LayerSpec::GcnConv { mm, spmm, weight } => {
                let h = self.product(*mm, x, weight.dense())?;
                self.aggregate(*spmm, &h, true, false)?
            }
            LayerSpec::SageConv(c) | LayerSpec::GraphConv(c) => {
                let mean = matches!(layer, LayerSpec::SageConv(_));
                let s = self.product(c.self_mm, x, c.w_self.dense())?;
                let h = self.product(c.neigh_mm, x, c.w_neigh.dense())?;
                let agg = self.aggregate(c.spmm, &h, false, mean)?;
                let sum = RefMatrix::from_fn(s.rows, s.cols, |i, j| s.get(i, j) + agg.get(i, j));
                self.finish(c.add, sum)
            }
            LayerSpec::FullyConnected { mm, weight } => self.product(*mm, x, weight.dense())?,
            LayerSpec::ReLU if self.simulated() && tag == Precision::B => x.clone(),
            LayerSpec::ReLU => x.map(|v| v.max(0.0)),
            LayerSpec::BatchNorm(bn) => RefMatrix::from_fn(x.rows, x.cols, |i, j| {
                bn.gamma()[j] * (x.get(i, j) - bn.mean()[j]) / bn.std()[j] + bn.beta()[j]
            }),
            LayerSpec::Binarize => self.bin("BIN".into(), x),
            LayerSpec::Scale { row, col } => RefMatrix::from_fn(x.rows, x.cols, |i, j| {
                let r = row.as_ref().map_or(1.0, |s| s.get(i));
                let c = col.as_ref().map_or(1.0, |s| s.get(j));
                r * x.get(i, j) * c
            }),
            LayerSpec::Softmax => {
                let mut out = RefMatrix::zeros(x.rows, x.cols);
                for i in 0..x.rows {
                    let max = x.row(i).iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    let sum: f64 = x.row(i).iter().map(|&v| (v - max).exp()).sum();
                    for j in 0..x.cols {
                        out.set(i, j, (x.get(i, j) - max).exp() / sum);
                    }
                }
                out
            }
        })
    }
}

/// Runs `m` layer by layer. In simulated mode each slot follows its tags:
/// a `B` output is `sign()` of the real result and is recorded as a
/// binarization point, in the same order the engine produces them, and a
/// `B` aggregation uses the 0/1 structure. In full-precision mode tags are
/// ignored (explicit BIN layers still apply).
pub fn oracle_model(
    m: &ModelSpec,
    e: &EdgeList,
    x0: &RefMatrix,
    cfg: &OracleConfig,
) -> Result<OracleRun> {
    let mut ev = Evaluator {
        cfg,
        adj: Adjacencies {
            with_loops: dense_adjacency(e, true)?,
            normalized: dense_normalized(e)?,
            neighbors: dense_adjacency(e, false)?,
            mean: dense_mean(e)?,
        },
        layer: 0,
        bin_points: Vec::new(),
    };
    let mut x = x0.clone();
    let mut tag = m.input_precision();
    let mut logits = None;
    for (index, layer) in m.layers().iter().enumerate() {
        ev.layer = index;
        if index + 1 == m.layers().len() && matches!(layer, LayerSpec::Softmax) {
            logits = Some(x.clone());
        }
        x = ev
            .layer(layer, &x, tag)
            .map_err(|err| err.in_layer(index))?;
        tag = layer
            .output_precision(tag)
            .map_err(|err| err.in_layer(index))?;
    }
    Ok(OracleRun {
        logits: logits.unwrap_or_else(|| x.clone()),
        output: x,
        bin_points: ev.bin_points,
    })
}

/// Normwise relative error `max |a − b| / max |b|` (0 when both are all
/// zero). Elementwise ratios are avoided because entries near zero after
/// cancellation would turn f32 storage rounding into arbitrarily large
/// relative errors.
pub fn max_relative_error(engine: &DenseMatrix, reference: &RefMatrix) -> Result<f64> {
    if (engine.rows(), engine.cols()) != (reference.rows, reference.cols) {
        return Err(Error::dims(
            "max_relative_error",
            format!(
                "{}x{} against {}x{}",
                engine.rows(),
                engine.cols(),
                reference.rows,
                reference.cols
            ),
        ));
    }
    let scale = reference.data.iter().fold(0f64, |m, v| m.max(v.abs()));
    let diff = engine
        .as_slice()
        .iter()
        .zip(&reference.data)
        .fold(0f64, |m, (&a, &b)| m.max((f64::from(a) - b).abs()));
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// First differing bit between engine and oracle binarization points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMismatch {
    pub point: usize,
    pub layer: usize,
    pub row: usize,
    pub col: usize,
}

/// Relative magnitude below which a reference value counts as a tie at a
/// binarization point: sums that cancel exactly in real arithmetic can come
/// out on either side of zero in floating point, depending on order.
pub const BIN_TIE_TOLERANCE: f64 = 1e-12;

/// Outcome of matching engine bits against oracle signs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BinComparison {
    /// Differing bits whose reference value is not a tie.
    pub mismatches: usize,
    /// Differing bits whose reference value is within the tie tolerance.
    pub tie_flips: usize,
    pub first: Option<BitMismatch>,
}

/// Whether a point produced by `source` binarizes integers: bit-by-bit
/// products and aggregations over the 0/1 structure. Those values are exact,
/// so a zero there is a real zero and never a tie.
fn integer_point(source: &str) -> bool {
    source
        .parse::<KernelVariant>()
        .is_ok_and(|v| v.is_binary_kernel() && v.in1 == Precision::B && v.in2 == Precision::B)
}

/// Matches points by position; a differing count or shape is an error. A
/// differing bit is a tie flip when `|value| <= tie * max|value|` over its
/// point and the point does not binarize integers, and a mismatch
/// otherwise.
pub fn compare_bin_points(
    engine: &[crate::graphops::BinPoint],
    oracle: &[OracleBinPoint],
    tie: f64,
) -> Result<BinComparison> {
    if engine.len() != oracle.len() {
        return Err(Error::Model(format!(
            "engine produced {} binarization points, oracle {}",
            engine.len(),
            oracle.len()
        )));
    }
    let mut out = BinComparison::default();
    for (p, (e, o)) in engine.iter().zip(oracle).enumerate() {
        if (e.bits.rows(), e.bits.cols()) != (o.signs.rows, o.signs.cols) {
            return Err(Error::dims(
                "compare_bin_points",
                format!("point {p} shapes differ"),
            ));
        }
        let floor = if integer_point(&e.source) {
            -1.0
        } else {
            tie * o.values.data.iter().fold(0f64, |m, v| m.max(v.abs()))
        };
        for i in 0..o.signs.rows {
            for j in 0..o.signs.cols {
                if e.bits.get(i, j) == (o.signs.get(i, j) > 0.0) {
                    continue;
                }
                if o.values.get(i, j).abs() <= floor {
                    out.tie_flips += 1;
                    continue;
                }
                out.mismatches += 1;
                out.first.get_or_insert(BitMismatch {
                    point: p,
                    layer: e.layer,
                    row: i,
                    col: j,
                });
            }
        }
    }
    Ok(out)
}

/// Fraction of rows whose argmax agrees. A row counts as agreeing when the
/// engine's pick is within `tie` of the reference row maximum, so exact
/// ties broken differently by f32 rounding are not reported.
pub fn argmax_agreement(engine: &DenseMatrix, reference: &RefMatrix, tie: f64) -> f64 {
    let rows = engine.rows().min(reference.rows);
    if rows == 0 {
        return 1.0;
    }
    let picks = RefMatrix::from_dense(engine).argmax_rows();
    let agree = (0..rows)
        .filter(|&i| {
            let row = reference.row(i);
            let best = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            best - row[picks[i]] <= tie
        })
        .count();
    agree as f64 / rows as f64
}
