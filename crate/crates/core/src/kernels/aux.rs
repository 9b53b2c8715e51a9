//! BIN, SCL, ADD and CONCAT.

use super::operand::{check_scale, expect_precision, expect_sign_bits, MatOperand};
use super::variant::{KernelOp, KernelVariant, Precision};
use crate::bitdense::{
    binarize_with, Axis, BitDenseMatrix, DenseMatrix, ScaleVector, Semantics, WordBits,
};
use crate::error::{Error, Result};

/// Sign binarization; identical to [`crate::bitdense::binarize_with`].
pub fn bin(x: &DenseMatrix, word_bits: WordBits) -> BitDenseMatrix {
    binarize_with(x, word_bits)
}

/// `out(i, j) = α(i) · x(i, j) · β(j)`; a missing vector counts as all ones.
pub fn scl(
    x: &DenseMatrix,
    alpha: Option<&ScaleVector>,
    beta: Option<&ScaleVector>,
) -> Result<DenseMatrix> {
    if let Some(a) = alpha {
        check_scale(a, x.rows(), Axis::Row, "scl row scale")?;
    }
    if let Some(b) = beta {
        check_scale(b, x.cols(), Axis::Col, "scl column scale")?;
    }
    Ok(DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| {
        let a = alpha.map_or(1.0, |s| s.get(i));
        let b = beta.map_or(1.0, |s| s.get(j));
        (a * f64::from(x.get(i, j)) * b) as f32
    }))
}

fn check_aux(variant: KernelVariant, op: KernelOp, a: &MatOperand, b: &MatOperand) -> Result<()> {
    if variant.op != op {
        return Err(Error::InvalidVariant(format!(
            "{variant} is not an {} variant",
            op.name()
        )));
    }
    expect_precision(&variant, "1", variant.in1, a.precision())?;
    expect_precision(&variant, "2", variant.in2, b.precision())?;
    for (pos, m) in [("1", a), ("2", b)] {
        if let MatOperand::Bits { bits, scale } = m {
            expect_sign_bits(&variant, pos, bits)?;
            if let Some(s) = scale {
                check_scale(s, bits.rows(), Axis::Row, "aux operand scale")?;
            }
        }
    }
    Ok(())
}

/// Decoded value of entry `(i, j)`: ±1 times the row scale, if any.
fn decode(m: &MatOperand, i: usize, j: usize) -> f64 {
    match m {
        MatOperand::Dense(d) => f64::from(d.get(i, j)),
        MatOperand::Bits { bits, scale } => {
            let s = scale.as_ref().map_or(1.0, |s| s.get(i));
            if bits.get(i, j) {
                s
            } else {
                -s
            }
        }
    }
}

/// Elementwise sum. `ADD.BBF` yields the sum of the two decodes (in
/// `{-2, 0, 2}` for unscaled bits), `ADD.BBB` its sign, `ADD.FFF` the real
/// sum.
pub fn add(variant: KernelVariant, a: &MatOperand, b: &MatOperand) -> Result<MatOperand> {
    check_aux(variant, KernelOp::Add, a, b)?;
    if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
        return Err(Error::dims(
            "add",
            format!("{}x{} plus {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
        ));
    }
    let (n, m) = (a.rows(), a.cols());
    match (variant.out, a, b) {
        (
            Precision::B,
            MatOperand::Bits {
                bits: x,
                scale: None,
            },
            MatOperand::Bits {
                bits: y,
                scale: None,
            },
        ) if x.word_bits() == y.word_bits() => {
            // Without scales the sum is negative only when both bits are 0.
            let mut out = x.clone();
            for (o, &l) in out.as_lanes_mut().iter_mut().zip(y.as_lanes()) {
                *o |= l;
            }
            Ok(MatOperand::bits(out))
        }
        (Precision::B, _, _) => {
            let wb = a.as_bits().map_or(WordBits::W32, |x| x.word_bits());
            let out = BitDenseMatrix::from_fn(n, m, wb, Semantics::PlusMinus, |i, j| {
                decode(a, i, j) + decode(b, i, j) >= 0.0
            });
            Ok(MatOperand::bits(out))
        }
        (Precision::F, _, _) => Ok(MatOperand::Dense(DenseMatrix::from_fn(n, m, |i, j| {
            (decode(a, i, j) + decode(b, i, j)) as f32
        }))),
    }
}

/// Stacks `a` and `b` along the feature axis. With a `B` output the bits are
/// repacked so that `b`'s columns follow `a`'s contiguously; row scales are
/// dropped. `CONCAT.BBF` emits the decodes.
pub fn concat(variant: KernelVariant, a: &MatOperand, b: &MatOperand) -> Result<MatOperand> {
    check_aux(variant, KernelOp::Concat, a, b)?;
    if a.rows() != b.rows() {
        return Err(Error::dims(
            "concat",
            format!("{} rows beside {} rows", a.rows(), b.rows()),
        ));
    }
    let (n, ca, cb) = (a.rows(), a.cols(), b.cols());
    match variant.out {
        Precision::B => {
            let (x, y) = (a.as_bits().expect("checked"), b.as_bits().expect("checked"));
            let out =
                BitDenseMatrix::from_fn(n, ca + cb, x.word_bits(), Semantics::PlusMinus, |i, j| {
                    if j < ca {
                        x.get(i, j)
                    } else {
                        y.get(i, j - ca)
                    }
                });
            Ok(MatOperand::bits(out))
        }
        Precision::F => Ok(MatOperand::Dense(DenseMatrix::from_fn(
            n,
            ca + cb,
            |i, j| {
                let v = if j < ca {
                    decode(a, i, j)
                } else {
                    decode(b, i, j - ca)
                };
                v as f32
            },
        ))),
    }
}
