//! Kernel variants: BMM, BSpMM, the auxiliary operators, and the fused
//! product-aggregation pipeline.

pub mod aux;
pub mod bmm;
pub mod bspmm;
pub mod fused;
pub mod operand;
pub mod variant;

pub use aux::{add, bin, concat, scl};
pub use bmm::{bmm, dense_mm, mm};
pub use bspmm::{bspmm, default_strategy};
pub use fused::{fused_mm_spmm, MmSpmm};
pub use operand::{Adjacency, MatOperand};
pub use variant::{KernelOp, KernelVariant, Precision};
