use super::bmm::mm;
use super::bspmm::bspmm;
use super::operand::{Adjacency, MatOperand};
use super::variant::{KernelOp, KernelVariant};
use crate::bitdense::TrinaryStrategy;
use crate::error::{Error, Result};

/// A matrix product followed by neighbor aggregation of its result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MmSpmm {
    pub mm: KernelVariant,
    pub spmm: KernelVariant,
}

impl MmSpmm {
    /// Rejects pipelines whose intermediate precision does not chain: the
    /// product's output tag must equal the aggregation's activation tag.
    pub fn new(mm: KernelVariant, spmm: KernelVariant) -> Result<Self> {
        if !matches!(mm.op, KernelOp::Mm | KernelOp::Bmm) || spmm.op != KernelOp::Bspmm {
            return Err(Error::PrecisionChain(format!(
                "{mm}+{spmm} is not a product followed by an aggregation"
            )));
        }
        if mm.out != spmm.in1 {
            return Err(Error::PrecisionChain(format!(
                "{mm} emits {} but {spmm} expects {}",
                mm.out, spmm.in1
            )));
        }
        Ok(Self { mm, spmm })
    }
}

/// `bspmm(spmm, adj, mm(x, w))`. A `B` intermediate is produced directly as
/// packed bits, so no full-precision tensor of the product exists.
pub fn fused_mm_spmm(
    pipeline: MmSpmm,
    x: &MatOperand,
    w: &MatOperand,
    adj: &Adjacency<'_>,
    strategy: Option<TrinaryStrategy>,
) -> Result<MatOperand> {
    let MmSpmm { mm: m, spmm } = MmSpmm::new(pipeline.mm, pipeline.spmm)?;
    let h = mm(m, x, w)?;
    bspmm(spmm, adj, &h, strategy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitdense::{binarize, DenseMatrix};
    use crate::bitsparse::{frdc_from_edges, EdgeList};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(s: &str) -> KernelVariant {
        s.parse().unwrap()
    }

    #[test]
    fn fused_equals_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 37;
        let edges = (0..200)
            .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
            .collect();
        let a = frdc_from_edges(&EdgeList::new(n, edges), true).unwrap();
        let adj = Adjacency::binary(&a);
        let x = DenseMatrix::from_fn(n, 50, |_, _| rng.gen_range(-1.0..1.0));
        let w = DenseMatrix::from_fn(50, 20, |_, _| rng.gen_range(-1.0..1.0));
        for (m, s, xo) in [
            ("BMM.BBF", "BSpMM.FBF", MatOperand::from(binarize(&x))),
            ("BMM.FBB", "BSpMM.BBB", MatOperand::from(x.clone())),
            ("BMM.FFB", "BSpMM.BBF", MatOperand::from(x.clone())),
        ] {
            let wo = if m == "BMM.BBF" || m == "BMM.FBB" {
                MatOperand::from(binarize(&w))
            } else {
                MatOperand::from(w.clone())
            };
            let p = MmSpmm::new(v(m), v(s)).unwrap();
            let fused = fused_mm_spmm(p, &xo, &wo, &adj, None).unwrap();
            let h = mm(v(m), &xo, &wo).unwrap();
            assert_eq!(fused, bspmm(v(s), &adj, &h, None).unwrap(), "{m}+{s}");
        }
    }

    #[test]
    fn mismatched_chain_is_rejected() {
        assert!(matches!(
            MmSpmm::new(v("BMM.FBF"), v("BSpMM.BBB")),
            Err(Error::PrecisionChain(_))
        ));
        assert!(MmSpmm::new(v("BSpMM.FBF"), v("BSpMM.FBF")).is_err());
        assert!(MmSpmm::new(v("MM.FFF"), v("BSpMM.FFF")).is_ok());
    }
}
