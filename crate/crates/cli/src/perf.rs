//! Throughput of the bit kernels against naive full-precision loops.
//!
//! Both sides run on one thread. Each side is timed as the fastest of a
//! few repetitions, after one untimed warm-up.

use std::time::Instant;

use bingnn::bitdense::{BitDenseMatrix, Semantics, WordBits};
use bingnn::bitsparse::{frdc_from_edges_with, EdgeList};
use bingnn::kernels::{bmm, bspmm, Adjacency, KernelVariant, MatOperand};
use bingnn::oracle::{naive_mm, RefMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::Result;

pub const BMM_SPEEDUP_MIN: f64 = 8.0;
pub const BSPMM_SPEEDUP_MIN: f64 = 3.0;

#[derive(Clone, Debug, Serialize)]
pub struct PerfCase {
    pub name: String,
    pub engine_ns: u64,
    pub baseline_ns: u64,
    pub speedup: f64,
    pub threshold: f64,
    pub passed: bool,
    pub note: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerfReport {
    pub cases: Vec<PerfCase>,
}

impl PerfReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }
}

pub fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("one-thread pool")
        .install(f)
}

fn best_of<T>(reps: usize, mut f: impl FnMut() -> T) -> (u64, T) {
    let mut out = f();
    let mut best = u64::MAX;
    for _ in 0..reps {
        let t = Instant::now();
        out = f();
        best = best.min(t.elapsed().as_nanos() as u64);
    }
    (best, out)
}

fn case(name: String, engine_ns: u64, baseline_ns: u64, threshold: f64, note: String) -> PerfCase {
    let speedup = baseline_ns as f64 / engine_ns.max(1) as f64;
    PerfCase {
        name,
        engine_ns,
        baseline_ns,
        speedup,
        threshold,
        passed: speedup >= threshold,
        note,
    }
}

fn signs(rows: usize, cols: usize, rng: &mut impl Rng) -> BitDenseMatrix {
    BitDenseMatrix::from_fn(rows, cols, WordBits::W32, Semantics::PlusMinus, |_, _| {
        rng.gen()
    })
}

/// `BMM.BBF` on `n x n` times `n x n` against the oracle's `i, j, k`
/// triple loop. The triple loop is timed on the first `band` rows of the
/// left operand and scaled by `n / band`; its cost is linear in the row
/// count.
pub fn bmm_case(n: usize, band: usize, seed: u64) -> Result<PerfCase> {
    let band = band.clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = signs(n, n, &mut rng);
    let w = signs(n, n, &mut rng);
    let variant: KernelVariant = "BMM.BBF".parse()?;
    let (a_op, w_op) = (MatOperand::bits(a.clone()), MatOperand::bits(w.clone()));
    let (engine_ns, out) = single_threaded(|| best_of(3, || bmm(variant, &a_op, &w_op)));
    out?;
    let a_band = RefMatrix::from_fn(band, n, |i, j| if a.get(i, j) { 1.0 } else { -1.0 });
    let w_ref = RefMatrix::from_bits(&w);
    let (band_ns, out) = best_of(1, || naive_mm(&a_band, &w_ref));
    out?;
    let baseline_ns = (band_ns as f64 * n as f64 / band as f64) as u64;
    Ok(case(
        format!("BMM.BBF {n}x{n}x{n}"),
        engine_ns,
        baseline_ns,
        BMM_SPEEDUP_MIN,
        format!("triple loop timed on {band} of {n} rows and scaled"),
    ))
}

/// `out(i) = Σ_{j ∈ N(i)} x(j)` over a CSR structure, in f64.
pub fn naive_csr_spmm(row_ptr: &[usize], cols: &[usize], x: &[f64], f: usize) -> Vec<f64> {
    let n = row_ptr.len() - 1;
    let mut out = vec![0.0; n * f];
    for i in 0..n {
        let o = &mut out[i * f..(i + 1) * f];
        for &j in &cols[row_ptr[i]..row_ptr[i + 1]] {
            for (acc, v) in o.iter_mut().zip(&x[j * f..(j + 1) * f]) {
                *acc += v;
            }
        }
    }
    out
}

/// Distinct random directed edges at the given density, as CSR.
fn random_csr(nodes: usize, density: f64, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let target = (nodes as f64 * nodes as f64 * density).round() as usize;
    let mut edges: Vec<(usize, usize)> = (0..target)
        .map(|_| (rng.gen_range(0..nodes), rng.gen_range(0..nodes)))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    let mut row_ptr = vec![0; nodes + 1];
    for &(i, _) in &edges {
        row_ptr[i + 1] += 1;
    }
    for i in 0..nodes {
        row_ptr[i + 1] += row_ptr[i];
    }
    (row_ptr, edges.into_iter().map(|(_, j)| j).collect())
}

/// `BSpMM.BBB` on a random graph with bit features against
/// [`naive_csr_spmm`] on the same graph with ±1.0 features.
pub fn bspmm_case(nodes: usize, density: f64, features: usize, seed: u64) -> Result<PerfCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (row_ptr, cols) = random_csr(nodes, density, &mut rng);
    let edges = EdgeList::new(
        nodes,
        (0..nodes)
            .flat_map(|i| {
                cols[row_ptr[i]..row_ptr[i + 1]]
                    .iter()
                    .map(move |&j| (i, j))
            })
            .collect(),
    );
    let structure = frdc_from_edges_with(&edges, false, WordBits::W32)?;
    let x = signs(nodes, features, &mut rng);
    let x_ref = RefMatrix::from_bits(&x);
    let x_op = MatOperand::bits(x);
    let variant: KernelVariant = "BSpMM.BBB".parse()?;
    let adj = Adjacency::binary(&structure);
    let (engine_ns, out) = single_threaded(|| best_of(3, || bspmm(variant, &adj, &x_op, None)));
    out?;
    let (baseline_ns, _) = best_of(3, || {
        naive_csr_spmm(&row_ptr, &cols, x_ref.as_slice(), features)
    });
    Ok(case(
        format!("BSpMM.BBB {nodes} nodes, density {density}, {features} features"),
        engine_ns,
        baseline_ns,
        BSPMM_SPEEDUP_MIN,
        format!("{} edges", cols.len()),
    ))
}

/// Both cases at the sizes the thresholds are stated for.
pub fn perf_report(seed: u64) -> Result<PerfReport> {
    Ok(PerfReport {
        cases: vec![
            bmm_case(2048, 128, seed)?,
            bspmm_case(65_536, 0.001, 128, seed)?,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_baseline_sums_neighbors() {
        let row_ptr = [0, 2, 2, 3];
        let cols = [1, 2, 0];
        let x = [1.0, -1.0, 2.0, 0.5, -3.0, 4.0];
        assert_eq!(
            naive_csr_spmm(&row_ptr, &cols, &x, 2),
            vec![-1.0, 4.5, 0.0, 0.0, 1.0, -1.0]
        );
    }

    #[test]
    fn small_cases_run() {
        let c = bmm_case(64, 16, 1).unwrap();
        assert!(c.engine_ns > 0 && c.baseline_ns > 0);
        let c = bspmm_case(200, 0.05, 16, 1).unwrap();
        assert_eq!(c.threshold, BSPMM_SPEEDUP_MIN);
    }
}
