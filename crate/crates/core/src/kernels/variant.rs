use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Operand or result precision: full (`F`) or binary (`B`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Precision {
    F,
    B,
}

impl Precision {
    pub const BOTH: [Precision; 2] = [Precision::F, Precision::B];

    pub fn letter(self) -> char {
        match self {
            Precision::F => 'F',
            Precision::B => 'B',
        }
    }

    fn from_letter(c: char) -> Option<Self> {
        match c {
            'F' | 'f' => Some(Precision::F),
            'B' | 'b' => Some(Precision::B),
            _ => None,
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Operator family of a kernel variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelOp {
    /// Plain full-precision matrix product; only `FFF` exists.
    Mm,
    /// Binary matrix product. Operands: activation, weight.
    Bmm,
    /// Binary sparse-dense product. Operands: activation (the dense
    /// matrix being aggregated), adjacency. A `B` adjacency is the raw 0/1
    /// structure; an `F` adjacency carries a full-precision factorization
    /// `diag(row) · A · diag(col)`.
    Bspmm,
    Add,
    Concat,
}

impl KernelOp {
    pub fn name(self) -> &'static str {
        match self {
            KernelOp::Mm => "MM",
            KernelOp::Bmm => "BMM",
            KernelOp::Bspmm => "BSpMM",
            KernelOp::Add => "ADD",
            KernelOp::Concat => "CONCAT",
        }
    }
}

/// An operator together with its three-letter precision suffix
/// (first operand, second operand, output), e.g. `BSpMM.FBB`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KernelVariant {
    pub op: KernelOp,
    pub in1: Precision,
    pub in2: Precision,
    pub out: Precision,
}

impl KernelVariant {
    pub fn new(op: KernelOp, in1: Precision, in2: Precision, out: Precision) -> Result<Self> {
        let v = Self { op, in1, in2, out };
        if v.is_legal() {
            Ok(v)
        } else {
            Err(Error::InvalidVariant(v.to_string()))
        }
    }

    pub fn is_legal(&self) -> bool {
        use Precision::*;
        match self.op {
            KernelOp::Mm => (self.in1, self.in2, self.out) == (F, F, F),
            KernelOp::Bmm => (self.in1, self.in2, self.out) != (F, F, F),
            KernelOp::Bspmm => true,
            KernelOp::Add | KernelOp::Concat => matches!(
                (self.in1, self.in2, self.out),
                (B, B, F) | (B, B, B) | (F, F, F)
            ),
        }
    }

    /// Every legal variant of `op`.
    pub fn all_of(op: KernelOp) -> Vec<KernelVariant> {
        let mut out = Vec::new();
        for in1 in Precision::BOTH {
            for in2 in Precision::BOTH {
                for o in Precision::BOTH {
                    let v = KernelVariant {
                        op,
                        in1,
                        in2,
                        out: o,
                    };
                    if v.is_legal() {
                        out.push(v);
                    }
                }
            }
        }
        out
    }

    /// Whether the operator is one of the bit-level kernels (BMM or BSpMM).
    pub fn is_binary_kernel(&self) -> bool {
        matches!(self.op, KernelOp::Bmm | KernelOp::Bspmm)
    }

    /// Whether the product of an `MM`-family slot is executed in full
    /// precision.
    pub fn is_full_precision_mm(&self) -> bool {
        self.op == KernelOp::Mm
    }
}

impl fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}{}{}", self.op.name(), self.in1, self.in2, self.out)
    }
}

impl FromStr for KernelVariant {
    type Err = Error;

    /// Accepts `BMM`, `BSpMM`, `SpMM`, `ADD`, `CONCAT`, and `MM` prefixes.
    /// `MM.FFF` is the full-precision product; any other `MM.xyz` names the
    /// binary variant `BMM.xyz`, and `SpMM.xyz` names `BSpMM.xyz`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidVariant(s.to_string());
        let (name, suffix) = s.trim().split_once('.').ok_or_else(bad)?;
        let letters: Vec<Precision> = suffix
            .chars()
            .map(Precision::from_letter)
            .collect::<Option<_>>()
            .ok_or_else(bad)?;
        let [in1, in2, out] = letters[..] else {
            return Err(bad());
        };
        let op = match name.to_ascii_uppercase().as_str() {
            "MM" if (in1, in2, out) == (Precision::F, Precision::F, Precision::F) => KernelOp::Mm,
            "MM" | "BMM" => KernelOp::Bmm,
            "SPMM" | "BSPMM" => KernelOp::Bspmm,
            "ADD" => KernelOp::Add,
            "CONCAT" => KernelOp::Concat,
            _ => return Err(bad()),
        };
        KernelVariant::new(op, in1, in2, out).map_err(|_| bad())
    }
}
