//! Sparse-dense products over the tiled adjacency.
//!
//! Work is split by tile row (four output nodes). Within a tile row the
//! stored tiles are consumed `TS` at a time:
//!
//! 1. load the tileset's tiles and the feature rows of the `4·TS` neighbor
//!    nodes they address;
//! 2. splice the tiles' nibble rows into one `word_bits`-wide word per
//!    output node (the adjacency bits of that node against all gathered
//!    neighbors);
//! 3. bit-transpose the gathered feature rows in 32x32 blocks, so that each
//!    feature becomes one word holding that feature's bit for every gathered
//!    neighbor, aligned with the spliced adjacency word;
//! 4. combine the two words with a trinary dot product and accumulate;
//! 5. once the tile row is done, binarize (`>= 0`) and pack, or emit
//!    full-precision values.
//!
//! A tileset with few set bits (typical of sparse graphs, where most tiles
//! hold a single edge) leaves most transposed words empty. Such tilesets
//! instead add each selected neighbor row into per-feature byte counters,
//! which yields the same `2·popc(a & x) − popc(a)` with the popcount taken
//! along the neighbor axis.
//!
//! Full-precision activations skip the transpose and are summed per set
//! adjacency bit. A factorized adjacency with a column factor weights each
//! neighbor individually, so it takes the same per-bit route.

use rayon::prelude::*;

use super::bmm::pack_nonnegative;
use super::operand::{expect_precision, expect_sign_bits, Adjacency, MatOperand};
use super::variant::{KernelOp, KernelVariant, Precision};
use crate::bitdense::{
    transpose::transpose32_in_place, BitDenseMatrix, DenseMatrix, Semantics, TrinaryStrategy,
    LANE_BITS,
};
use crate::bitsparse::{assemble, FrdcMatrix, TILE_DIM};
use crate::error::{Error, Result};

/// Trinary strategy used when none is requested: the popcount form for bit
/// activations, per-bit evaluation for full-precision ones.
pub fn default_strategy(activation: Precision) -> TrinaryStrategy {
    match activation {
        Precision::B => TrinaryStrategy::TwoAndMinusPopc,
        Precision::F => TrinaryStrategy::IfElse,
    }
}

/// `out(i, k) = Σ_{j: A(i,j)=1} x(j, k)`, with `x` decoded to ±1 when it is
/// binary, scaled by the adjacency factorization when it has one, and
/// binarized with `>= 0` when the variant's output is `B`.
///
/// `strategy` only affects bit activations; every strategy produces the
/// same integer sums.
pub fn bspmm(
    variant: KernelVariant,
    adj: &Adjacency<'_>,
    x: &MatOperand,
    strategy: Option<TrinaryStrategy>,
) -> Result<MatOperand> {
    if variant.op != KernelOp::Bspmm {
        return Err(Error::InvalidVariant(format!(
            "{variant} is not a BSpMM variant"
        )));
    }
    expect_precision(&variant, "1 (activation)", variant.in1, x.precision())?;
    expect_precision(&variant, "2 (adjacency)", variant.in2, adj.precision())?;
    let a = adj.structure();
    if a.node_cols() != x.rows() {
        return Err(Error::dims(
            "bspmm",
            format!(
                "{}x{} adjacency times {}x{} activation",
                a.node_rows(),
                a.node_cols(),
                x.rows(),
                x.cols()
            ),
        ));
    }
    let strategy = strategy.unwrap_or_else(|| default_strategy(x.precision()));

    let sums = match x {
        MatOperand::Bits { bits, .. } => {
            expect_sign_bits(&variant, "1 (activation)", bits)?;
            match adj.col_scale() {
                None => Sums::Int(pm1_sums(a, bits, strategy)),
                Some(cs) => {
                    Sums::Real(weighted_sums(a, bits.cols(), cs.as_slice(), |j, acc, w| {
                        add_pm1_row(bits.row(j), acc, w)
                    }))
                }
            }
        }
        MatOperand::Dense(d) => {
            let cs = adj.col_scale().map(|s| s.as_slice());
            Sums::Real(weighted_sums(
                a,
                d.cols(),
                cs.unwrap_or(&[]),
                |j, acc, w| add_real_row(d.row(j), acc, w),
            ))
        }
    };

    let (rows, cols) = (a.node_rows(), x.cols());
    let row_scale = adj.row_scale();
    match variant.out {
        Precision::B => {
            let mut out = BitDenseMatrix::zeros(rows, cols, a.word_bits(), Semantics::PlusMinus);
            let lanes = out.lanes_per_row();
            if lanes > 0 {
                out.as_lanes_mut()
                    .par_chunks_mut(lanes)
                    .enumerate()
                    .for_each(|(i, dst)| match &sums {
                        Sums::Int(s) => pack_nonnegative(&s[i * cols..(i + 1) * cols], dst),
                        Sums::Real(s) => pack_nonnegative(&s[i * cols..(i + 1) * cols], dst),
                    });
            }
            Ok(MatOperand::bits(out))
        }
        Precision::F => {
            let mut out = DenseMatrix::zeros(rows, cols);
            if cols > 0 {
                out.as_mut_slice()
                    .par_chunks_mut(cols)
                    .enumerate()
                    .for_each(|(i, dst)| {
                        let rs = row_scale.map_or(1.0, |s| s.get(i));
                        for (k, o) in dst.iter_mut().enumerate() {
                            let v = match &sums {
                                Sums::Int(s) => f64::from(s[i * cols + k]),
                                Sums::Real(s) => s[i * cols + k],
                            };
                            *o = (rs * v) as f32;
                        }
                    });
            }
            Ok(MatOperand::Dense(out))
        }
    }
}

enum Sums {
    Int(Vec<i32>),
    Real(Vec<f64>),
}

/// Node `j` addressed by neighbor position `p` of a tileset whose slots hold
/// `cols`; `None` for padded slots and nodes past the matrix edge.
#[inline(always)]
fn neighbor(cols: &[u32], p: usize, node_cols: usize) -> Option<usize> {
    let slot = p / TILE_DIM;
    let j = *cols.get(slot)? as usize * TILE_DIM + p % TILE_DIM;
    (j < node_cols).then_some(j)
}

/// Tilesets with fewer set adjacency bits than this are counted along the
/// neighbor axis instead of being transposed.
const TRANSPOSE_MIN_BITS: u32 = 12;

/// Per-task scratch of the popcount strategies.
#[derive(Default)]
struct Scratch {
    blocks: Vec<[u32; 32]>,
    /// Eight byte-wide counters per u64, four u64 per feature lane, per row.
    counters: Vec<u64>,
}

/// `SPREAD[b]` holds bit `7 - m` of `b` in byte `m`.
static SPREAD: [u64; 256] = {
    let mut t = [0u64; 256];
    let mut b = 0;
    while b < 256 {
        let mut m = 0;
        while m < 8 {
            t[b] |= (((b >> (7 - m)) & 1) as u64) << (8 * m);
            m += 1;
        }
        b += 1;
    }
    t
};

/// Byte counters are flushed before they can wrap.
const BYTE_COUNTER_MAX: u32 = 255;

/// Integer ±1 sums for bit activations, one tile row per task.
fn pm1_sums(a: &FrdcMatrix, x: &BitDenseMatrix, strategy: TrinaryStrategy) -> Vec<i32> {
    let f = x.cols();
    let mut sums = vec![0i32; a.node_rows() * f];
    if f == 0 {
        return sums;
    }
    sums.par_chunks_mut(TILE_DIM * f).enumerate().for_each_init(
        Scratch::default,
        |scratch, (tr, acc)| match strategy {
            TrinaryStrategy::IfElse => tile_row_if_else(a, x, tr, acc),
            TrinaryStrategy::AndAndNot => tile_row_popcount(a, x, tr, acc, scratch, |w, b| {
                (w & b).count_ones() as i32 - (w & !b).count_ones() as i32
            }),
            TrinaryStrategy::TwoAndMinusPopc => {
                tile_row_popcount(a, x, tr, acc, scratch, |w, b| {
                    2 * (w & b).count_ones() as i32 - w.count_ones() as i32
                })
            }
        },
    );
    sums
}

/// Tileset loop with popcount dots.
///
/// Dense tilesets transpose the gathered neighbor features and take `dot`
/// of each adjacency word against each feature column. Sparse tilesets
/// compute the same `2·popc(a & x) − popc(a)` with the popcount running
/// along the neighbor axis: each selected neighbor row is added into
/// bit-sliced per-feature counters, which are decoded once per tile row.
fn tile_row_popcount(
    a: &FrdcMatrix,
    x: &BitDenseMatrix,
    tr: usize,
    acc: &mut [i32],
    scratch: &mut Scratch,
    dot: impl Fn(u64, u64) -> i32,
) {
    let f = x.cols();
    let ts = a.tileset_size();
    let word_bits = ts * TILE_DIM;
    let halves = word_bits / LANE_BITS;
    let feature_lanes = f.div_ceil(LANE_BITS);
    let live_rows = acc.len() / f;
    let (cols, tiles) = a.row_tiles(tr);

    let Scratch { blocks, counters } = scratch;
    let row_counters = feature_lanes * 4;
    blocks.resize(halves * feature_lanes, [0; 32]);
    counters.clear();
    counters.resize(TILE_DIM * row_counters, 0);
    // Neighbors added per row since the last flush, and in total.
    let mut pending = [0u32; TILE_DIM];
    let mut counted = [0i32; TILE_DIM];

    for (set_cols, set_tiles) in cols.chunks(ts).zip(tiles.chunks(ts)) {
        let set_bits: u32 = set_tiles.iter().map(|t| t.count_ones()).sum();
        if set_bits < TRANSPOSE_MIN_BITS {
            // Stored tiles carry no bits past the matrix edge, so every set
            // bit addresses a real neighbor.
            for (&col, &tile) in set_cols.iter().zip(set_tiles) {
                let mut bits = tile;
                while bits != 0 {
                    let p = 15 - bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    let (r, j) = (p / TILE_DIM, col as usize * TILE_DIM + p % TILE_DIM);
                    if pending[r] == BYTE_COUNTER_MAX {
                        flush_counters(
                            &mut counters[r * row_counters..(r + 1) * row_counters],
                            &mut acc[r * f..(r + 1) * f],
                        );
                        pending[r] = 0;
                    }
                    pending[r] += 1;
                    counted[r] += 1;
                    let dst = &mut counters[r * row_counters..(r + 1) * row_counters];
                    for (quad, &word) in dst.chunks_exact_mut(4).zip(&x.row(j)[..feature_lanes]) {
                        quad[0] += SPREAD[(word >> 24) as usize];
                        quad[1] += SPREAD[((word >> 16) & 0xFF) as usize];
                        quad[2] += SPREAD[((word >> 8) & 0xFF) as usize];
                        quad[3] += SPREAD[(word & 0xFF) as usize];
                    }
                }
            }
            continue;
        }

        let words = assemble(set_tiles, ts);
        let union = words.iter().fold(0, |u, w| u | w);

        // Gather neighbor feature words, then transpose each 32x32 block.
        for half in 0..halves {
            for lane in 0..feature_lanes {
                let block = &mut blocks[half * feature_lanes + lane];
                for (q, slot) in block.iter_mut().enumerate() {
                    let p = half * LANE_BITS + q;
                    *slot = match neighbor(set_cols, p, x.rows()) {
                        Some(j) if (union >> (word_bits - 1 - p)) & 1 == 1 => x.row(j)[lane],
                        _ => 0,
                    };
                }
                transpose32_in_place(block);
            }
        }

        for (r, &w) in words.iter().enumerate().take(live_rows) {
            if w == 0 {
                continue;
            }
            let acc_row = &mut acc[r * f..(r + 1) * f];
            for lane in 0..feature_lanes {
                let k0 = lane * LANE_BITS;
                let width = (f - k0).min(LANE_BITS);
                let hi = &blocks[lane];
                let dst = &mut acc_row[k0..k0 + width];
                if halves == 1 {
                    for (o, &col) in dst.iter_mut().zip(hi.iter()) {
                        *o += dot(w, u64::from(col));
                    }
                } else {
                    let lo = &blocks[feature_lanes + lane];
                    for (k, o) in dst.iter_mut().enumerate() {
                        *o += dot(w, (u64::from(hi[k]) << 32) | u64::from(lo[k]));
                    }
                }
            }
        }
    }

    // Sparse-tileset contribution: 2·popc(a & x) − popc(a).
    for r in 0..live_rows {
        if counted[r] == 0 {
            continue;
        }
        let acc_row = &mut acc[r * f..(r + 1) * f];
        flush_counters(
            &mut counters[r * row_counters..(r + 1) * row_counters],
            acc_row,
        );
        for o in acc_row.iter_mut() {
            *o -= counted[r];
        }
    }
}

/// Adds twice each byte counter into `acc` and clears the counters.
fn flush_counters(counters: &mut [u64], acc: &mut [i32]) {
    for (chunk, c) in acc.chunks_mut(8).zip(counters.iter_mut()) {
        for (m, o) in chunk.iter_mut().enumerate() {
            *o += 2 * ((*c >> (8 * m)) & 0xFF) as i32;
        }
        *c = 0;
    }
}

/// Tileset loop that walks the set adjacency bits and adds the neighbor's
/// ±1 features directly.
fn tile_row_if_else(a: &FrdcMatrix, x: &BitDenseMatrix, tr: usize, acc: &mut [i32]) {
    let f = x.cols();
    let ts = a.tileset_size();
    let word_bits = ts * TILE_DIM;
    let live_rows = acc.len() / f;
    let (cols, tiles) = a.row_tiles(tr);
    for (set_cols, set_tiles) in cols.chunks(ts).zip(tiles.chunks(ts)) {
        let words = assemble(set_tiles, ts);
        for (r, &w) in words.iter().enumerate().take(live_rows) {
            let acc_row = &mut acc[r * f..(r + 1) * f];
            let mut bits = w;
            while bits != 0 {
                let p = word_bits - 1 - bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let Some(j) = neighbor(set_cols, p, x.rows()) else {
                    continue;
                };
                for (chunk, &lane) in acc_row.chunks_mut(LANE_BITS).zip(x.row(j)) {
                    for (k, o) in chunk.iter_mut().enumerate() {
                        *o += if (lane >> (LANE_BITS - 1 - k)) & 1 == 1 {
                            1
                        } else {
                            -1
                        };
                    }
                }
            }
        }
    }
}

/// Real-valued sums: for every set bit `(i, j)`, `acc[i] += w_j · row_j`
/// where `w_j` is the column factor (1 when `col_scale` is empty).
fn weighted_sums(
    a: &FrdcMatrix,
    f: usize,
    col_scale: &[f64],
    add_row: impl Fn(usize, &mut [f64], Option<f64>) + Sync,
) -> Vec<f64> {
    let mut sums = vec![0f64; a.node_rows() * f];
    if f == 0 {
        return sums;
    }
    let ts = a.tileset_size();
    let word_bits = ts * TILE_DIM;
    sums.par_chunks_mut(TILE_DIM * f)
        .enumerate()
        .for_each(|(tr, acc)| {
            let live_rows = acc.len() / f;
            let (cols, tiles) = a.row_tiles(tr);
            for (set_cols, set_tiles) in cols.chunks(ts).zip(tiles.chunks(ts)) {
                let words = assemble(set_tiles, ts);
                for (r, &w) in words.iter().enumerate().take(live_rows) {
                    let acc_row = &mut acc[r * f..(r + 1) * f];
                    let mut bits = w;
                    while bits != 0 {
                        let lead = bits.leading_zeros() as usize;
                        bits &= !(1u64 << (63 - lead));
                        let p = lead - (64 - word_bits);
                        if let Some(j) = neighbor(set_cols, p, a.node_cols()) {
                            add_row(j, acc_row, col_scale.get(j).copied());
                        }
                    }
                }
            }
        });
    sums
}

fn add_pm1_row(lanes: &[u32], acc: &mut [f64], weight: Option<f64>) {
    let w = weight.unwrap_or(1.0);
    for (chunk, &lane) in acc.chunks_mut(LANE_BITS).zip(lanes) {
        for (k, o) in chunk.iter_mut().enumerate() {
            *o += if (lane >> (LANE_BITS - 1 - k)) & 1 == 1 {
                w
            } else {
                -w
            };
        }
    }
}

fn add_real_row(row: &[f32], acc: &mut [f64], weight: Option<f64>) {
    match weight {
        None => {
            for (o, &v) in acc.iter_mut().zip(row) {
                *o += f64::from(v);
            }
        }
        Some(w) => {
            for (o, &v) in acc.iter_mut().zip(row) {
                *o += w * f64::from(v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitdense::{unpack, Axis, ScaleVector, WordBits};
    use crate::bitsparse::{frdc_from_edges, frdc_from_edges_with, EdgeList};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(s: &str) -> KernelVariant {
        s.parse().unwrap()
    }

    fn random_bits(rows: usize, cols: usize, wb: WordBits, rng: &mut impl Rng) -> BitDenseMatrix {
        BitDenseMatrix::from_fn(rows, cols, wb, Semantics::PlusMinus, |_, _| rng.gen())
    }

    /// Dense reference over an explicit edge set.
    fn reference(n: usize, edges: &[(usize, usize)], x: &DenseMatrix) -> Vec<f64> {
        let set: std::collections::BTreeSet<_> = edges.iter().copied().collect();
        let mut out = vec![0f64; n * x.cols()];
        for &(i, j) in &set {
            for k in 0..x.cols() {
                out[i * x.cols() + k] += f64::from(x.get(j, k));
            }
        }
        out
    }

    #[test]
    fn all_positive_features_on_path_graph() {
        let e = EdgeList::new(4, vec![(0, 1), (1, 2), (2, 3)]).symmetrized();
        let a = frdc_from_edges(&e, true).unwrap();
        let x = BitDenseMatrix::from_fn(4, 32, WordBits::W32, Semantics::PlusMinus, |_, _| true);
        for s in TrinaryStrategy::ALL {
            let out = bspmm(
                v("BSpMM.BBB"),
                &Adjacency::binary(&a),
                &x.clone().into(),
                Some(s),
            )
            .unwrap();
            assert_eq!(out.as_bits().unwrap().count_ones(), 4 * 32, "{s}");
        }
    }

    #[test]
    fn single_neighbor_copies_the_neighbor_row() {
        let a = frdc_from_edges(&EdgeList::new(8, vec![(0, 5), (1, 2)]), false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_bits(8, 40, WordBits::W32, &mut rng);
        let out = bspmm(
            v("BSpMM.BBF"),
            &Adjacency::binary(&a),
            &x.clone().into(),
            None,
        )
        .unwrap();
        let out = out.as_dense().unwrap();
        let dx = unpack(&x);
        assert_eq!(out.row(0), dx.row(5));
        assert_eq!(out.row(1), dx.row(2));
        assert!(out.row(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn factorized_triangle_matches_normalized_aggregation() {
        let e = EdgeList::new(3, vec![(0, 1), (1, 2), (0, 2)]).symmetrized();
        let a = frdc_from_edges(&e, true).unwrap();
        let s = ScaleVector::new(Axis::Row, vec![1.0 / 3f64.sqrt(); 3]).unwrap();
        let c = ScaleVector::new(Axis::Col, vec![1.0 / 3f64.sqrt(); 3]).unwrap();
        let adj = Adjacency::factorized(&a, Some(&s), Some(&c)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DenseMatrix::from_fn(3, 5, |_, _| rng.gen_range(-1.0..1.0));
        let out = bspmm(v("BSpMM.FFF"), &adj, &x.clone().into(), None).unwrap();
        let out = out.as_dense().unwrap();
        for i in 0..3 {
            for k in 0..5 {
                // every entry of the normalized triangle adjacency is 1/3
                let want: f64 = (0..3).map(|j| f64::from(x.get(j, k)) / 3.0).sum();
                let got = f64::from(out.get(i, k));
                assert!(
                    (got - want).abs() <= 1e-6 * want.abs().max(1e-6),
                    "{got} {want}"
                );
            }
        }
    }

    #[test]
    fn strategies_and_word_widths_agree_with_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for trial in 0..20 {
            let n = rng.gen_range(1..150);
            let f = rng.gen_range(1..100);
            let count = rng.gen_range(0..n * n / 8 + 2);
            let edges: Vec<_> = (0..count)
                .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
                .collect();
            let e = EdgeList::new(n, edges.clone());
            let wb = if trial % 2 == 0 {
                WordBits::W32
            } else {
                WordBits::W64
            };
            let a = frdc_from_edges_with(&e, false, wb).unwrap();
            let x = random_bits(n, f, WordBits::W32, &mut rng);
            let want = reference(n, &edges, &unpack(&x));
            for s in TrinaryStrategy::ALL {
                let out = bspmm(
                    v("BSpMM.BBF"),
                    &Adjacency::binary(&a),
                    &x.clone().into(),
                    Some(s),
                )
                .unwrap();
                let got: Vec<f64> = out
                    .as_dense()
                    .unwrap()
                    .as_slice()
                    .iter()
                    .map(|&v| f64::from(v))
                    .collect();
                assert_eq!(got, want, "trial {trial} strategy {s}");
                let bits = bspmm(
                    v("BSpMM.BBB"),
                    &Adjacency::binary(&a),
                    &x.clone().into(),
                    Some(s),
                )
                .unwrap();
                let bits = bits.as_bits().unwrap();
                assert!(bits.padding_is_zero());
                for i in 0..n {
                    for k in 0..f {
                        assert_eq!(bits.get(i, k), want[i * f + k] >= 0.0);
                    }
                }
            }
            let xf = DenseMatrix::from_fn(n, f, |_, _| rng.gen_range(-1.0..1.0));
            let want = reference(n, &edges, &xf);
            let out = bspmm(
                v("BSpMM.FBF"),
                &Adjacency::binary(&a),
                &xf.clone().into(),
                None,
            )
            .unwrap();
            for (g, w) in out.as_dense().unwrap().as_slice().iter().zip(&want) {
                assert_eq!(*g, *w as f32);
            }
        }
    }

    fn check_all_strategies(n: usize, edges: Vec<(usize, usize)>, f: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = frdc_from_edges(&EdgeList::new(n, edges.clone()), false).unwrap();
        let x = random_bits(n, f, WordBits::W32, &mut rng);
        let want = reference(n, &edges, &unpack(&x));
        for s in TrinaryStrategy::ALL {
            let out = bspmm(
                v("BSpMM.BBF"),
                &Adjacency::binary(&a),
                &x.clone().into(),
                Some(s),
            )
            .unwrap();
            let got: Vec<f64> = out
                .as_dense()
                .unwrap()
                .as_slice()
                .iter()
                .map(|&v| f64::from(v))
                .collect();
            assert_eq!(got, want, "{s}");
        }
    }

    #[test]
    fn full_tilesets_take_the_transpose_path() {
        let n = 70;
        let edges = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        check_all_strategies(n, edges, 45, 7);
    }

    #[test]
    fn byte_counters_flush_past_255_neighbors() {
        // One bit per tile keeps every tileset on the counting path.
        let n = 1300;
        let edges = (0..n / 4)
            .flat_map(|k| [(0, 4 * k), (5, 4 * k + 1)])
            .collect();
        check_all_strategies(n, edges, 70, 8);
    }

    #[test]
    fn operand_checks() {
        let a = frdc_from_edges(&EdgeList::new(4, vec![(0, 1)]), false).unwrap();
        let x = DenseMatrix::zeros(4, 3);
        assert!(matches!(
            bspmm(
                v("BSpMM.BBF"),
                &Adjacency::binary(&a),
                &x.clone().into(),
                None
            ),
            Err(Error::OperandKind { .. })
        ));
        let s = ScaleVector::ones(Axis::Row, 4);
        let adj = Adjacency::factorized(&a, Some(&s), None).unwrap();
        assert!(matches!(
            bspmm(v("BSpMM.FBF"), &adj, &x.clone().into(), None),
            Err(Error::OperandKind { .. })
        ));
        let short = DenseMatrix::zeros(3, 3);
        assert!(matches!(
            bspmm(v("BSpMM.FBF"), &Adjacency::binary(&a), &short.into(), None),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(bspmm(v("BMM.FBF"), &Adjacency::binary(&a), &x.into(), None).is_err());
        let bad = ScaleVector::ones(Axis::Row, 3);
        assert!(Adjacency::factorized(&a, Some(&bad), None).is_err());
    }
}
