//! Sparse binary adjacency stored as block-CSR over 4x4 bit tiles.
//!
//! Each non-empty 4x4 block of the adjacency matrix is one `u16`; local bit
//! `(r, c)` sits at bit `15 - (4r + c)`, so nibble `r` of the tile is node row
//! `r` of the block, MSB-first. Blocks that are entirely zero are not stored.
//!
//! Kernels never look at a single tile in isolation. They walk a tile row in
//! groups of `TS = word_bits / 4` tiles and splice the matching nibbles into
//! one machine word per node row (see [`gather_tileset`]), turning several
//! fine-grained blocks into one word-aligned bit vector.

mod io;

pub use io::{read_frdc, write_frdc, FRDC_MAGIC, FRDC_VERSION, HEADER_BYTES};

use crate::bitdense::{BitDenseMatrix, Semantics, WordBits};
use crate::error::{Error, Result};

/// Tile edge length.
pub const TILE_DIM: usize = 4;

/// Largest tileset size (64-bit words).
pub const MAX_TILESET: usize = 16;

/// Column index stored in tileset slots that hold no tile.
pub const SENTINEL_COL: u32 = u32::MAX;

/// Bit position of local `(r, c)` inside a tile payload.
pub const fn tile_bit(r: usize, c: usize) -> u16 {
    1 << (15 - (TILE_DIM * r + c))
}

/// Nibble `r` of a tile, right-aligned; bit `3 - c` is local column `c`.
#[inline(always)]
pub const fn nibble_row(tile: u16, r: usize) -> u64 {
    ((tile >> (12 - TILE_DIM * r)) & 0xF) as u64
}

/// Payload bytes of one `h x w` bit tile.
pub const fn tile_payload_bytes(h: usize, w: usize) -> usize {
    (h * w).div_ceil(8)
}

/// Graph ingestion carrier. Weights, if present, are ignored by the binary
/// structure.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EdgeList {
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
    pub weights: Option<Vec<f64>>,
}

impl EdgeList {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Self {
        Self {
            node_count,
            edges,
            weights: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (index, &(src, dst)) in self.edges.iter().enumerate() {
            if src >= self.node_count || dst >= self.node_count {
                return Err(Error::EdgeOutOfRange {
                    index,
                    src,
                    dst,
                    nodes: self.node_count,
                });
            }
        }
        Ok(())
    }

    /// Adds the reverse of every edge.
    pub fn symmetrized(&self) -> Self {
        let mut edges = self.edges.clone();
        edges.extend(self.edges.iter().map(|&(s, d)| (d, s)));
        Self::new(self.node_count, edges)
    }
}

/// Block-CSR sparse bit matrix over 4x4 tiles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrdcMatrix {
    node_rows: usize,
    node_cols: usize,
    word_bits: WordBits,
    row_ptr: Vec<usize>,
    col_ind: Vec<u32>,
    tiles: Vec<u16>,
}

/// Storage statistics of an [`FrdcMatrix`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrdcStats {
    pub nnz_tiles: usize,
    pub nnz_bits: usize,
    /// `row_ptr` (u64) + `col_ind` (u32) + tiles (u16), as laid out on disk.
    pub bytes: usize,
    /// `nnz_bits / (16 * nnz_tiles)`, 0 for an empty matrix.
    pub fill_ratio: f64,
}

impl FrdcMatrix {
    /// Builds a matrix from raw block-CSR arrays, checking every invariant.
    pub fn from_parts(
        node_rows: usize,
        node_cols: usize,
        word_bits: WordBits,
        row_ptr: Vec<usize>,
        col_ind: Vec<u32>,
        tiles: Vec<u16>,
    ) -> Result<Self> {
        let m = Self {
            node_rows,
            node_cols,
            word_bits,
            row_ptr,
            col_ind,
            tiles,
        };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Format(msg));
        if self.row_ptr.len() != self.tile_rows() + 1 {
            return bad(format!(
                "row_ptr has {} entries, expected {}",
                self.row_ptr.len(),
                self.tile_rows() + 1
            ));
        }
        if self.row_ptr[0] != 0 || *self.row_ptr.last().unwrap() != self.tiles.len() {
            return bad("row_ptr must start at 0 and end at nnz_tiles".into());
        }
        if self.col_ind.len() != self.tiles.len() {
            return bad("col_ind and tiles differ in length".into());
        }
        let last_rows = self.node_rows - (self.tile_rows().max(1) - 1) * TILE_DIM;
        let last_cols = self.node_cols - (self.tile_cols().max(1) - 1) * TILE_DIM;
        for tr in 0..self.tile_rows() {
            let (lo, hi) = (self.row_ptr[tr], self.row_ptr[tr + 1]);
            if lo > hi || hi > self.tiles.len() {
                return bad(format!("row_ptr decreases at tile row {tr}"));
            }
            let cols = &self.col_ind[lo..hi];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("col_ind not strictly increasing in tile row {tr}"));
            }
            for (k, (&tc, &tile)) in cols.iter().zip(&self.tiles[lo..hi]).enumerate() {
                if tc as usize >= self.tile_cols() {
                    return bad(format!("tile column {tc} out of range in tile row {tr}"));
                }
                if tile == 0 {
                    return bad(format!("tile {} is all zero", lo + k));
                }
                let rows_live = if tr + 1 == self.tile_rows() {
                    last_rows
                } else {
                    TILE_DIM
                };
                let cols_live = if tc as usize + 1 == self.tile_cols() {
                    last_cols
                } else {
                    TILE_DIM
                };
                if tile & !live_mask(rows_live, cols_live) != 0 {
                    return bad(format!("tile {} sets bits outside the matrix", lo + k));
                }
            }
        }
        Ok(())
    }

    pub fn node_rows(&self) -> usize {
        self.node_rows
    }

    pub fn node_cols(&self) -> usize {
        self.node_cols
    }

    pub fn word_bits(&self) -> WordBits {
        self.word_bits
    }

    pub fn tile_rows(&self) -> usize {
        self.node_rows.div_ceil(TILE_DIM)
    }

    pub fn tile_cols(&self) -> usize {
        self.node_cols.div_ceil(TILE_DIM)
    }

    pub fn nnz_tiles(&self) -> usize {
        self.tiles.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_ind(&self) -> &[u32] {
        &self.col_ind
    }

    pub fn tiles(&self) -> &[u16] {
        &self.tiles
    }

    /// Tiles per tileset: `word_bits / tile_dim`.
    pub fn tileset_size(&self) -> usize {
        self.word_bits.bits() / TILE_DIM
    }

    /// Number of tilesets in `tile_row`: `ceil(NT / TS)`.
    pub fn tileset_count(&self, tile_row: usize) -> usize {
        let nt = self.row_ptr[tile_row + 1] - self.row_ptr[tile_row];
        nt.div_ceil(self.tileset_size())
    }

    /// Column indices and payloads of one tile row.
    pub fn row_tiles(&self, tile_row: usize) -> (&[u32], &[u16]) {
        let (lo, hi) = (self.row_ptr[tile_row], self.row_ptr[tile_row + 1]);
        (&self.col_ind[lo..hi], &self.tiles[lo..hi])
    }

    /// Same structure, assembled at a different word width.
    pub fn with_word_bits(mut self, word_bits: WordBits) -> Self {
        self.word_bits = word_bits;
        self
    }

    /// Number of set bits in node row `i`.
    pub fn row_degree(&self, i: usize) -> usize {
        let (_, tiles) = self.row_tiles(i / TILE_DIM);
        tiles
            .iter()
            .map(|&t| nibble_row(t, i % TILE_DIM).count_ones() as usize)
            .sum()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        let (cols, tiles) = self.row_tiles(i / TILE_DIM);
        match cols.binary_search(&((j / TILE_DIM) as u32)) {
            Ok(k) => tiles[k] & tile_bit(i % TILE_DIM, j % TILE_DIM) != 0,
            Err(_) => false,
        }
    }

    /// Flips one bit of a stored tile without re-validating. Fault injection
    /// for verification tooling; the result may break the matrix invariants.
    #[doc(hidden)]
    pub fn flip_tile_bit(&mut self, tile: usize, r: usize, c: usize) {
        self.tiles[tile] ^= tile_bit(r, c);
    }

    /// Node coordinates `(i, j)` of local bit `(r, c)` of stored tile `tile`.
    pub fn tile_origin(&self, tile: usize) -> (usize, usize) {
        let tr = self.row_ptr.partition_point(|&p| p <= tile) - 1;
        (tr * TILE_DIM, self.col_ind[tile] as usize * TILE_DIM)
    }
}

fn live_mask(rows: usize, cols: usize) -> u16 {
    let mut m = 0;
    for r in 0..rows {
        for c in 0..cols {
            m |= tile_bit(r, c);
        }
    }
    m
}

/// Builds the tiled adjacency of `e` at 32-bit words. Bit `(i, j)` is set
/// iff `(i, j)` is an edge, or `i == j` when `add_self_loops` is set.
/// Duplicate edges collapse.
pub fn frdc_from_edges(e: &EdgeList, add_self_loops: bool) -> Result<FrdcMatrix> {
    frdc_from_edges_with(e, add_self_loops, WordBits::W32)
}

pub fn frdc_from_edges_with(
    e: &EdgeList,
    add_self_loops: bool,
    word_bits: WordBits,
) -> Result<FrdcMatrix> {
    e.validate()?;
    let n = e.node_count;
    let loops = if add_self_loops { n } else { 0 };
    let mut entries: Vec<(u64, u16)> = Vec::with_capacity(e.edges.len() + loops);
    let mut push = |i: usize, j: usize| {
        let key = ((i / TILE_DIM) as u64) << 32 | (j / TILE_DIM) as u64;
        entries.push((key, tile_bit(i % TILE_DIM, j % TILE_DIM)));
    };
    for &(i, j) in &e.edges {
        push(i, j);
    }
    for i in 0..loops {
        push(i, i);
    }
    entries.sort_unstable_by_key(|&(k, _)| k);

    let tile_rows = n.div_ceil(TILE_DIM);
    let mut row_ptr = vec![0usize; tile_rows + 1];
    let mut col_ind = Vec::new();
    let mut tiles: Vec<u16> = Vec::new();
    let mut last_key = None;
    for (key, bit) in entries {
        if last_key == Some(key) {
            *tiles.last_mut().unwrap() |= bit;
            continue;
        }
        last_key = Some(key);
        row_ptr[(key >> 32) as usize + 1] += 1;
        col_ind.push(key as u32);
        tiles.push(bit);
    }
    for tr in 0..tile_rows {
        row_ptr[tr + 1] += row_ptr[tr];
    }
    Ok(FrdcMatrix {
        node_rows: n,
        node_cols: n,
        word_bits,
        row_ptr,
        col_ind,
        tiles,
    })
}

/// Expands the tiles into a dense 0/1 bit matrix.
pub fn frdc_to_dense(m: &FrdcMatrix) -> BitDenseMatrix {
    let mut out = BitDenseMatrix::zeros(m.node_rows, m.node_cols, m.word_bits, Semantics::ZeroOne);
    for tr in 0..m.tile_rows() {
        let (cols, tiles) = m.row_tiles(tr);
        for (&tc, &tile) in cols.iter().zip(tiles) {
            for r in 0..TILE_DIM {
                for c in 0..TILE_DIM {
                    if tile & tile_bit(r, c) != 0 {
                        out.set(tr * TILE_DIM + r, tc as usize * TILE_DIM + c, true);
                    }
                }
            }
        }
    }
    out
}

/// A group of up to `TS` tiles of one tile row, spliced into one word per
/// node row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileSet {
    ts: usize,
    word_bits: WordBits,
    /// Word `r` holds nibble row `r` of slot `s` at bits
    /// `word_bits - 1 - 4s ..= word_bits - 4 - 4s`.
    pub assembled: [u64; TILE_DIM],
    cols: [u32; MAX_TILESET],
}

impl TileSet {
    pub fn size(&self) -> usize {
        self.ts
    }

    pub fn word_bits(&self) -> WordBits {
        self.word_bits
    }

    /// Source tile columns per slot; padded slots hold [`SENTINEL_COL`].
    pub fn cols(&self) -> &[u32] {
        &self.cols[..self.ts]
    }

    /// Number of slots holding a real tile.
    pub fn occupied(&self) -> usize {
        self.cols()
            .iter()
            .take_while(|&&c| c != SENTINEL_COL)
            .count()
    }

    /// Recovers the tile stored in `slot`.
    pub fn tile(&self, slot: usize) -> u16 {
        let shift = TILE_DIM * (self.ts - 1 - slot);
        let mut t = 0u16;
        for (r, word) in self.assembled.iter().enumerate() {
            t |= (((word >> shift) & 0xF) as u16) << (12 - TILE_DIM * r);
        }
        t
    }
}

/// Splices up to `ts` tiles into per-row words (bit-concatenation).
#[inline]
pub(crate) fn assemble(tiles: &[u16], ts: usize) -> [u64; TILE_DIM] {
    let mut a = [0u64; TILE_DIM];
    for (s, &tile) in tiles.iter().enumerate() {
        let shift = TILE_DIM * (ts - 1 - s);
        for (r, word) in a.iter_mut().enumerate() {
            *word |= nibble_row(tile, r) << shift;
        }
    }
    a
}

/// Gathers tileset `set_index` of `tile_row`.
pub fn gather_tileset(m: &FrdcMatrix, tile_row: usize, set_index: usize) -> Result<TileSet> {
    let out_of_range = Error::TilesetOutOfRange {
        tile_row,
        set_index,
    };
    if tile_row >= m.tile_rows() || set_index >= m.tileset_count(tile_row) {
        return Err(out_of_range);
    }
    let ts = m.tileset_size();
    let (cols, tiles) = m.row_tiles(tile_row);
    let lo = set_index * ts;
    let hi = (lo + ts).min(tiles.len());
    let mut slot_cols = [SENTINEL_COL; MAX_TILESET];
    slot_cols[..hi - lo].copy_from_slice(&cols[lo..hi]);
    Ok(TileSet {
        ts,
        word_bits: m.word_bits,
        assembled: assemble(&tiles[lo..hi], ts),
        cols: slot_cols,
    })
}

/// Storage statistics at the on-disk field widths.
pub fn frdc_stats(m: &FrdcMatrix) -> FrdcStats {
    let nnz_tiles = m.tiles.len();
    let nnz_bits = m.tiles.iter().map(|t| t.count_ones() as usize).sum();
    let bytes = (m.tile_rows() + 1) * 8 + nnz_tiles * 4 + nnz_tiles * tile_payload_bytes(4, 4);
    let fill_ratio = if nnz_tiles == 0 {
        0.0
    } else {
        nnz_bits as f64 / (16 * nnz_tiles) as f64
    };
    FrdcStats {
        nnz_tiles,
        nnz_bits,
        bytes,
        fill_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn random_edges(n: usize, density: f64, seed: u64) -> EdgeList {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = ((n * n) as f64 * density) as usize;
        let edges = (0..count)
            .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
            .collect();
        EdgeList::new(n, edges)
    }

    #[test]
    fn two_edges_tile_by_hand() {
        let m = frdc_from_edges(&EdgeList::new(8, vec![(0, 5), (1, 2)]), false).unwrap();
        assert_eq!(m.row_ptr(), &[0, 2, 2]);
        assert_eq!(m.col_ind(), &[0, 1]);
        assert_eq!(m.tiles(), &[tile_bit(1, 2), tile_bit(0, 1)]);
    }

    #[test]
    fn empty_graph_has_no_tiles() {
        let m = frdc_from_edges(&EdgeList::new(10, vec![]), false).unwrap();
        assert_eq!(m.row_ptr(), &[0, 0, 0, 0]);
        assert_eq!(m.nnz_tiles(), 0);
        assert_eq!(frdc_to_dense(&m).count_ones(), 0);
        let s = frdc_stats(&m);
        assert_eq!((s.nnz_tiles, s.nnz_bits, s.fill_ratio), (0, 0, 0.0));
    }

    #[test]
    fn path_with_self_loops_is_tridiagonal() {
        let e = EdgeList::new(4, vec![(0, 1), (1, 2), (2, 3)]).symmetrized();
        let m = frdc_from_edges(&e, true).unwrap();
        assert_eq!(m.tiles(), &[0b1100_1110_0111_0011]);
    }

    #[test]
    fn out_of_range_edge_is_named() {
        let err = frdc_from_edges(&EdgeList::new(3, vec![(0, 1), (2, 3)]), false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("#1") && msg.contains("(2, 3)"), "{msg}");
    }

    #[test]
    fn duplicates_collapse_and_boundary_tiles_stay_clean() {
        let e = EdgeList::new(6, vec![(5, 5), (5, 5), (4, 0), (5, 4)]);
        let m = frdc_from_edges(&e, false).unwrap();
        assert_eq!(frdc_stats(&m).nnz_bits, 3);
        assert!(FrdcMatrix::from_parts(
            6,
            6,
            WordBits::W32,
            m.row_ptr.clone(),
            m.col_ind.clone(),
            m.tiles.clone()
        )
        .is_ok());
    }

    #[test]
    fn single_tile_densifies_at_origin() {
        let m =
            FrdcMatrix::from_parts(4, 4, WordBits::W32, vec![0, 1], vec![0], vec![0x8421]).unwrap();
        let d = frdc_to_dense(&m);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(d.get(i, j), i == j);
            }
        }
    }

    #[test]
    fn random_round_trip_matches_edge_set() {
        let e = random_edges(100, 0.05, 5);
        let m = frdc_from_edges(&e, false).unwrap();
        let d = frdc_to_dense(&m);
        let set: BTreeSet<_> = e.edges.iter().copied().collect();
        for i in 0..100 {
            for j in 0..100 {
                assert_eq!(d.get(i, j), set.contains(&(i, j)));
                assert_eq!(m.get(i, j), set.contains(&(i, j)));
            }
        }
        assert_eq!(frdc_stats(&m).nnz_bits, set.len());
        assert!(m.tiles().iter().all(|&t| t != 0));
    }

    #[test]
    fn ten_tiles_make_two_tilesets() {
        let edges = (0..10).map(|k| (0, 4 * k)).collect();
        let m = frdc_from_edges(&EdgeList::new(40, edges), false).unwrap();
        assert_eq!(m.tileset_size(), 8);
        assert_eq!(m.tileset_count(0), 2);
        let second = gather_tileset(&m, 0, 1).unwrap();
        assert_eq!(second.occupied(), 2);
        assert_eq!(&second.cols()[2..], &[SENTINEL_COL; 6]);
        assert_eq!(second.assembled[0], 0b1000_1000 << 24);
        assert!(gather_tileset(&m, 0, 2).is_err());
        assert!(gather_tileset(&m, 10, 0).is_err());
    }

    #[test]
    fn full_tile_lands_in_top_nibble() {
        let m =
            FrdcMatrix::from_parts(4, 4, WordBits::W32, vec![0, 1], vec![0], vec![0xFFFF]).unwrap();
        let t = gather_tileset(&m, 0, 0).unwrap();
        assert_eq!(t.assembled, [0xF000_0000; 4]);
        let wide = gather_tileset(&m.with_word_bits(WordBits::W64), 0, 0).unwrap();
        assert_eq!(wide.size(), 16);
        assert_eq!(wide.assembled, [0xF000_0000_0000_0000; 4]);
    }

    #[test]
    fn stats_bytes_formula() {
        let e = random_edges(50, 0.05, 9);
        let m = frdc_from_edges(&e, true).unwrap();
        let s = frdc_stats(&m);
        assert_eq!(s.bytes, 14 * 8 + s.nnz_tiles * 6);
        assert!((s.fill_ratio - s.nnz_bits as f64 / (16.0 * s.nnz_tiles as f64)).abs() < 1e-15);
        assert_eq!(tile_payload_bytes(4, 4), 2);
        assert_eq!(tile_payload_bytes(4, 8), 2 * tile_payload_bytes(4, 4));
    }

    #[test]
    fn from_parts_rejects_broken_invariants() {
        let ok = |rp: Vec<usize>, ci: Vec<u32>, t: Vec<u16>| {
            FrdcMatrix::from_parts(6, 6, WordBits::W32, rp, ci, t)
        };
        assert!(ok(vec![0, 1, 1], vec![0], vec![1]).is_ok());
        assert!(ok(vec![0, 1, 1], vec![0], vec![0]).is_err(), "zero tile");
        assert!(
            ok(vec![0, 2, 2], vec![1, 0], vec![1, 1]).is_err(),
            "unsorted"
        );
        assert!(
            ok(vec![1, 1, 1], vec![0], vec![1]).is_err(),
            "row_ptr start"
        );
        // row 5 is live but rows 6/7 of the last tile row are not
        assert!(
            ok(vec![0, 0, 1], vec![0], vec![tile_bit(2, 0)]).is_err(),
            "boundary"
        );
        assert!(ok(vec![0, 0, 1], vec![0], vec![tile_bit(1, 0)]).is_ok());
    }

    proptest! {
        #[test]
        fn tilesets_reassemble_the_tile_row(
            n in 1usize..300,
            density in 0.001f64..0.1,
            wide in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let wb = if wide { WordBits::W64 } else { WordBits::W32 };
            let m = frdc_from_edges_with(&random_edges(n, density, seed), false, wb).unwrap();
            for tr in 0..m.tile_rows() {
                let (cols, tiles) = m.row_tiles(tr);
                let mut seen_cols = Vec::new();
                let mut seen_tiles = Vec::new();
                for s in 0..m.tileset_count(tr) {
                    let set = gather_tileset(&m, tr, s).unwrap();
                    for slot in 0..set.size() {
                        if set.cols()[slot] == SENTINEL_COL {
                            prop_assert_eq!(set.tile(slot), 0);
                        } else {
                            seen_cols.push(set.cols()[slot]);
                            seen_tiles.push(set.tile(slot));
                        }
                    }
                }
                prop_assert_eq!(&seen_cols[..], cols);
                prop_assert_eq!(&seen_tiles[..], tiles);
            }
        }
    }
}
