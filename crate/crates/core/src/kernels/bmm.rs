use std::borrow::Cow;

use rayon::prelude::*;

use super::operand::{check_scale, expect_precision, expect_sign_bits, MatOperand};
use super::variant::{KernelOp, KernelVariant, Precision};
use crate::bitdense::{
    binarize_with_scale, transpose, Axis, BitDenseMatrix, DenseMatrix, ScaleVector, Semantics,
    LANE_BITS,
};
use crate::error::{Error, Result};

/// Output rows computed per task.
const ROW_GROUP: usize = 16;
/// Weight columns kept hot while a row group sweeps over them.
const COL_BLOCK: usize = 64;

/// Matrix product dispatch: `MM.FFF` runs in full precision, every other
/// variant goes through [`bmm`].
pub fn mm(variant: KernelVariant, a: &MatOperand, w: &MatOperand) -> Result<MatOperand> {
    match variant.op {
        KernelOp::Mm => {
            let (Some(a), Some(w)) = (a.as_dense(), w.as_dense()) else {
                return Err(Error::OperandKind {
                    variant: variant.to_string(),
                    position: "1 and 2",
                    expected: "full precision",
                });
            };
            dense_mm(a, w).map(MatOperand::Dense)
        }
        _ => bmm(variant, a, w),
    }
}

/// Binary matrix product `a (n x k) · w (k x m)`.
///
/// Full-precision inputs are binarized on entry: `a` with row scales `α`,
/// `w` with column scales `β`. Bit inputs use the scales they carry, or 1.
/// An `F` output is `diag(α) · (±a)(±w) · diag(β)`; a `B` output is the sign
/// of the integer product, with the scales dropped since they are positive.
pub fn bmm(variant: KernelVariant, a: &MatOperand, w: &MatOperand) -> Result<MatOperand> {
    if variant.op != KernelOp::Bmm {
        return Err(Error::InvalidVariant(format!(
            "{variant} is not a BMM variant"
        )));
    }
    expect_precision(&variant, "1 (activation)", variant.in1, a.precision())?;
    expect_precision(&variant, "2 (weight)", variant.in2, w.precision())?;
    if a.cols() != w.rows() {
        return Err(Error::dims(
            "bmm",
            format!("{}x{} times {}x{}", a.rows(), a.cols(), w.rows(), w.cols()),
        ));
    }
    let (a_bits, alpha) = prepare(&variant, a, Axis::Row, "1 (activation)")?;
    let (w_bits, beta) = prepare(&variant, w, Axis::Col, "2 (weight)")?;
    let wt = transpose(&w_bits);
    let k = a.cols();
    let (n, m) = (a.rows(), w.cols());

    match variant.out {
        Precision::B => {
            let mut out = BitDenseMatrix::zeros(n, m, a_bits.word_bits(), Semantics::PlusMinus);
            let lanes = out.lanes_per_row();
            if lanes > 0 {
                out.as_lanes_mut()
                    .par_chunks_mut(ROW_GROUP * lanes)
                    .enumerate()
                    .for_each(|(g, chunk)| {
                        let rows = chunk.len() / lanes;
                        let dots = group_dots(&a_bits, &wt, k, g * ROW_GROUP, rows);
                        for (r, row_lanes) in chunk.chunks_mut(lanes).enumerate() {
                            pack_nonnegative(&dots[r * m..(r + 1) * m], row_lanes);
                        }
                    });
            }
            Ok(MatOperand::bits(out))
        }
        Precision::F => {
            let mut out = DenseMatrix::zeros(n, m);
            if m > 0 {
                out.as_mut_slice()
                    .par_chunks_mut(ROW_GROUP * m)
                    .enumerate()
                    .for_each(|(g, chunk)| {
                        let i0 = g * ROW_GROUP;
                        let rows = chunk.len() / m;
                        let dots = group_dots(&a_bits, &wt, k, i0, rows);
                        for (r, (dst, src)) in chunk.chunks_mut(m).zip(dots.chunks(m)).enumerate() {
                            let a_s = alpha.as_ref().map_or(1.0, |s| s.get(i0 + r));
                            for (j, (o, &d)) in dst.iter_mut().zip(src).enumerate() {
                                let b_s = beta.as_ref().map_or(1.0, |s| s.get(j));
                                *o = (a_s * f64::from(d) * b_s) as f32;
                            }
                        }
                    });
            }
            Ok(MatOperand::Dense(out))
        }
    }
}

type Prepared<'a> = (Cow<'a, BitDenseMatrix>, Option<Cow<'a, ScaleVector>>);

fn prepare<'a>(
    variant: &KernelVariant,
    op: &'a MatOperand,
    axis: Axis,
    position: &'static str,
) -> Result<Prepared<'a>> {
    match op {
        MatOperand::Dense(d) => {
            let (bits, scale) = binarize_with_scale(d, axis)?;
            Ok((Cow::Owned(bits), Some(Cow::Owned(scale))))
        }
        MatOperand::Bits { bits, scale } => {
            expect_sign_bits(variant, position, bits)?;
            if let Some(s) = scale {
                let len = if axis == Axis::Row {
                    bits.rows()
                } else {
                    bits.cols()
                };
                check_scale(s, len, axis, "bmm operand scale")?;
            }
            Ok((Cow::Borrowed(bits), scale.as_ref().map(Cow::Borrowed)))
        }
    }
}

#[inline]
fn xor_popcount(a: &[u32], b: &[u32]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// ±1 dot products of rows `i0..i0+rows` of `a` against every row of `wt`.
fn group_dots(
    a: &BitDenseMatrix,
    wt: &BitDenseMatrix,
    k: usize,
    i0: usize,
    rows: usize,
) -> Vec<i32> {
    let m = wt.rows();
    let lanes = k.div_ceil(LANE_BITS);
    let mut dots = vec![0i32; rows * m];
    for j0 in (0..m).step_by(COL_BLOCK) {
        let j1 = (j0 + COL_BLOCK).min(m);
        for r in 0..rows {
            let a_row = &a.row(i0 + r)[..lanes];
            let dst = &mut dots[r * m..(r + 1) * m];
            for (j, d) in (j0..j1).zip(&mut dst[j0..j1]) {
                let diff = xor_popcount(a_row, &wt.row(j)[..lanes]);
                *d = k as i32 - 2 * diff as i32;
            }
        }
    }
    dots
}

/// Packs `values[j] >= 0` MSB-first into `lanes`.
pub(crate) fn pack_nonnegative<T: Copy + PartialOrd + Default>(values: &[T], lanes: &mut [u32]) {
    for (lane, chunk) in lanes.iter_mut().zip(values.chunks(LANE_BITS)) {
        let mut w = 0u32;
        for (b, &v) in chunk.iter().enumerate() {
            w |= u32::from(v >= T::default()) << (LANE_BITS - 1 - b);
        }
        *lane = w;
    }
}

/// Full-precision product with f64 accumulation.
pub fn dense_mm(a: &DenseMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != w.rows() {
        return Err(Error::dims(
            "dense_mm",
            format!("{}x{} times {}x{}", a.rows(), a.cols(), w.rows(), w.cols()),
        ));
    }
    let m = w.cols();
    let mut out = DenseMatrix::zeros(a.rows(), m);
    if m == 0 {
        return Ok(out);
    }
    out.as_mut_slice()
        .par_chunks_mut(m)
        .enumerate()
        .for_each_init(
            || vec![0f64; m],
            |acc, (i, dst)| {
                acc.fill(0.0);
                for (kk, &av) in a.row(i).iter().enumerate() {
                    let av = f64::from(av);
                    for (s, &wv) in acc.iter_mut().zip(w.row(kk)) {
                        *s += av * f64::from(wv);
                    }
                }
                for (o, &s) in dst.iter_mut().zip(acc.iter()) {
                    *o = s as f32;
                }
            },
        );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitdense::{binarize, unpack, WordBits};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(s: &str) -> KernelVariant {
        s.parse().unwrap()
    }

    fn bits_from_rows(rows: &[&str]) -> BitDenseMatrix {
        let cols = rows[0].len();
        BitDenseMatrix::from_fn(
            rows.len(),
            cols,
            WordBits::W32,
            Semantics::PlusMinus,
            |i, j| rows[i].as_bytes()[j] == b'1',
        )
    }

    #[test]
    fn bbf_by_hand() {
        let a = bits_from_rows(&["1010", "1111"]);
        let w = bits_from_rows(&["1", "1", "0", "0"]);
        let out = bmm(v("BMM.BBF"), &a.into(), &w.into()).unwrap();
        assert_eq!(out.as_dense().unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn bbb_self_product_has_positive_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x =
            BitDenseMatrix::from_fn(9, 45, WordBits::W32, Semantics::PlusMinus, |_, _| rng.gen());
        let xt = transpose(&x);
        let out = bmm(v("BMM.BBB"), &x.into(), &xt.into()).unwrap();
        let out = out.as_bits().unwrap();
        for i in 0..9 {
            assert!(out.get(i, i));
        }
        assert!(out.padding_is_zero());
    }

    #[test]
    fn fbf_matches_scaled_sign_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DenseMatrix::from_fn(16, 32, |_, _| rng.gen_range(-1.0..1.0));
        let w = DenseMatrix::from_fn(32, 8, |_, _| rng.gen_range(-1.0..1.0));
        let (wb, beta) = binarize_with_scale(&w, Axis::Col).unwrap();
        let out = bmm(
            v("BMM.FBF"),
            &a.clone().into(),
            &MatOperand::scaled_bits(wb, beta),
        )
        .unwrap();
        let out = out.as_dense().unwrap();
        for i in 0..16 {
            let alpha: f64 = a.row(i).iter().map(|x| f64::from(x.abs())).sum::<f64>() / 32.0;
            for j in 0..8 {
                let beta: f64 = (0..32).map(|k| f64::from(w.get(k, j).abs())).sum::<f64>() / 32.0;
                let dot: f64 = (0..32)
                    .map(|k| {
                        let s = |x: f32| if x >= 0.0 { 1.0 } else { -1.0 };
                        s(a.get(i, k)) * s(w.get(k, j))
                    })
                    .sum();
                let want = alpha * dot * beta;
                let got = f64::from(out.get(i, j));
                assert!(
                    (got - want).abs() <= 1e-6 * want.abs().max(1e-30),
                    "({i},{j}) {got} {want}"
                );
            }
        }
    }

    #[test]
    fn mixed_word_widths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a =
            BitDenseMatrix::from_fn(5, 20, WordBits::W64, Semantics::PlusMinus, |_, _| rng.gen());
        let w =
            BitDenseMatrix::from_fn(20, 7, WordBits::W32, Semantics::PlusMinus, |_, _| rng.gen());
        let got = bmm(v("BMM.BBF"), &a.clone().into(), &w.clone().into()).unwrap();
        let want = dense_mm(&unpack(&a), &unpack(&w)).unwrap();
        assert_eq!(got.as_dense().unwrap(), &want);
    }

    #[test]
    fn rejects_mismatches() {
        let a = binarize(&DenseMatrix::zeros(2, 3));
        let w = binarize(&DenseMatrix::zeros(4, 2));
        assert!(matches!(
            bmm(v("BMM.BBF"), &a.clone().into(), &w.into()),
            Err(Error::DimensionMismatch { .. })
        ));
        let w = DenseMatrix::zeros(3, 2);
        assert!(matches!(
            bmm(v("BMM.BBF"), &a.clone().into(), &w.into()),
            Err(Error::OperandKind { .. })
        ));
        let zo = a.with_semantics(Semantics::ZeroOne);
        let w = binarize(&DenseMatrix::zeros(3, 2));
        assert!(bmm(v("BMM.BBF"), &zo.into(), &w.into()).is_err());
    }

    #[test]
    fn dense_mm_identity() {
        let x = DenseMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f32);
        let id = DenseMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.0 });
        assert_eq!(dense_mm(&x, &id).unwrap(), x);
    }
}
