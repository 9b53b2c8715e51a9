use super::variant::{KernelVariant, Precision};
use crate::bitdense::{Axis, BitDenseMatrix, DenseMatrix, ScaleVector, Semantics};
use crate::bitsparse::FrdcMatrix;
use crate::error::{Error, Result};

/// A dense kernel operand: full precision, or ±1 bits with optional
/// scaling factors.
#[derive(Clone, Debug, PartialEq)]
pub enum MatOperand {
    Dense(DenseMatrix),
    Bits {
        bits: BitDenseMatrix,
        scale: Option<ScaleVector>,
    },
}

impl MatOperand {
    pub fn bits(bits: BitDenseMatrix) -> Self {
        MatOperand::Bits { bits, scale: None }
    }

    pub fn scaled_bits(bits: BitDenseMatrix, scale: ScaleVector) -> Self {
        MatOperand::Bits {
            bits,
            scale: Some(scale),
        }
    }

    pub fn precision(&self) -> Precision {
        match self {
            MatOperand::Dense(_) => Precision::F,
            MatOperand::Bits { .. } => Precision::B,
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            MatOperand::Dense(m) => m.rows(),
            MatOperand::Bits { bits, .. } => bits.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            MatOperand::Dense(m) => m.cols(),
            MatOperand::Bits { bits, .. } => bits.cols(),
        }
    }

    pub fn as_dense(&self) -> Option<&DenseMatrix> {
        match self {
            MatOperand::Dense(m) => Some(m),
            MatOperand::Bits { .. } => None,
        }
    }

    pub fn as_bits(&self) -> Option<&BitDenseMatrix> {
        match self {
            MatOperand::Bits { bits, .. } => Some(bits),
            MatOperand::Dense(_) => None,
        }
    }

    pub fn into_dense(self) -> Option<DenseMatrix> {
        match self {
            MatOperand::Dense(m) => Some(m),
            MatOperand::Bits { .. } => None,
        }
    }

    pub fn into_bits(self) -> Option<BitDenseMatrix> {
        match self {
            MatOperand::Bits { bits, .. } => Some(bits),
            MatOperand::Dense(_) => None,
        }
    }

    /// Payload bytes of the tensor (scales excluded).
    pub fn payload_bytes(&self) -> usize {
        match self {
            MatOperand::Dense(m) => m.payload_bytes(),
            MatOperand::Bits { bits, .. } => bits.payload_bytes(),
        }
    }
}

impl From<DenseMatrix> for MatOperand {
    fn from(m: DenseMatrix) -> Self {
        MatOperand::Dense(m)
    }
}

impl From<BitDenseMatrix> for MatOperand {
    fn from(bits: BitDenseMatrix) -> Self {
        MatOperand::bits(bits)
    }
}

/// Sparse adjacency operand of BSpMM: the 0/1 structure, optionally with a
/// rank-1 factorization `diag(row) · A · diag(col)`.
#[derive(Clone, Copy, Debug)]
pub struct Adjacency<'a> {
    structure: &'a FrdcMatrix,
    row_scale: Option<&'a ScaleVector>,
    col_scale: Option<&'a ScaleVector>,
}

impl<'a> Adjacency<'a> {
    pub fn binary(structure: &'a FrdcMatrix) -> Self {
        Self {
            structure,
            row_scale: None,
            col_scale: None,
        }
    }

    pub fn factorized(
        structure: &'a FrdcMatrix,
        row_scale: Option<&'a ScaleVector>,
        col_scale: Option<&'a ScaleVector>,
    ) -> Result<Self> {
        if row_scale.is_none() && col_scale.is_none() {
            return Err(Error::InvalidScale(
                "a factorized adjacency needs at least one scale vector".into(),
            ));
        }
        if let Some(s) = row_scale {
            check_scale(s, structure.node_rows(), Axis::Row, "adjacency row scale")?;
        }
        if let Some(s) = col_scale {
            check_scale(
                s,
                structure.node_cols(),
                Axis::Col,
                "adjacency column scale",
            )?;
        }
        Ok(Self {
            structure,
            row_scale,
            col_scale,
        })
    }

    pub fn structure(&self) -> &'a FrdcMatrix {
        self.structure
    }

    pub fn row_scale(&self) -> Option<&'a ScaleVector> {
        self.row_scale
    }

    pub fn col_scale(&self) -> Option<&'a ScaleVector> {
        self.col_scale
    }

    pub fn precision(&self) -> Precision {
        if self.row_scale.is_none() && self.col_scale.is_none() {
            Precision::B
        } else {
            Precision::F
        }
    }
}

pub(crate) fn check_scale(
    s: &ScaleVector,
    len: usize,
    axis: Axis,
    what: &'static str,
) -> Result<()> {
    if s.len() != len {
        return Err(Error::dims(
            what,
            format!("{} factors for {len} entries", s.len()),
        ));
    }
    if s.axis() != axis {
        return Err(Error::InvalidScale(format!("{what} must be {axis:?}-wise")));
    }
    Ok(())
}

pub(crate) fn expect_precision(
    variant: &KernelVariant,
    position: &'static str,
    expected: Precision,
    actual: Precision,
) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::OperandKind {
            variant: variant.to_string(),
            position,
            expected: match expected {
                Precision::F => "full precision",
                Precision::B => "binary",
            },
        })
    }
}

pub(crate) fn expect_sign_bits(
    variant: &KernelVariant,
    position: &'static str,
    m: &BitDenseMatrix,
) -> Result<()> {
    if m.semantics() == Semantics::PlusMinus {
        Ok(())
    } else {
        Err(Error::OperandKind {
            variant: variant.to_string(),
            position,
            expected: "±1-encoded bits",
        })
    }
}
