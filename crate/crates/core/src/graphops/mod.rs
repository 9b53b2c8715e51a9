//! GNN-level composition: adjacency normalization, layer definitions, model
//! specs with their precision plans, the SCL-elimination rewrite, and the
//! model runner.

mod layer;
mod model;

pub use layer::{
    batchnorm_infer, relu, softmax, BatchNorm, LayerSpec, TwoWeightConv, Weight, BN_STD_FLOOR,
};
pub use model::{
    gcn_model, parse_plan, rewrite_eliminate_scl, run_model, run_model_with, sage_model,
    saint_model, BinPoint, KernelRecord, ModelRun, ModelSpec, RunOptions,
};

use crate::bitdense::{Axis, ScaleVector, WordBits};
use crate::bitsparse::{frdc_from_edges_with, EdgeList, FrdcMatrix, TILE_DIM};
use crate::error::{Error, Result};
use crate::kernels::{Adjacency, Precision};

/// `Ã = diag(s) · Â · diag(s)` with `Â` the adjacency plus self-loops and
/// `s_i = d̂_i^{-1/2}`, `d̂_i` the row count of `Â`.
#[derive(Clone, Debug)]
pub struct NormalizedAdjacency {
    pub structure: FrdcMatrix,
    /// `s` as a row factor.
    pub row_scale: ScaleVector,
    /// The same `s` as a column factor.
    pub col_scale: ScaleVector,
}

impl NormalizedAdjacency {
    pub fn adjacency(&self) -> Adjacency<'_> {
        Adjacency::factorized(
            &self.structure,
            Some(&self.row_scale),
            Some(&self.col_scale),
        )
        .expect("scales built for this structure")
    }
}

pub fn normalize_adjacency(e: &EdgeList) -> Result<NormalizedAdjacency> {
    normalize_adjacency_with(e, WordBits::W32)
}

pub fn normalize_adjacency_with(e: &EdgeList, word_bits: WordBits) -> Result<NormalizedAdjacency> {
    if e.node_count == 0 {
        return Err(Error::Model("cannot normalize an empty graph".into()));
    }
    let structure = frdc_from_edges_with(e, true, word_bits)?;
    let s: Vec<f64> = (0..e.node_count)
        .map(|i| 1.0 / (structure.row_degree(i) as f64).sqrt())
        .collect();
    Ok(NormalizedAdjacency {
        row_scale: ScaleVector::new(Axis::Row, s.clone())?,
        col_scale: ScaleVector::new(Axis::Col, s)?,
        structure,
    })
}

/// Everything the layers need from one graph: the normalized structure
/// with self-loops for GCN, and the plain neighbor structure for SAGE and
/// GraphConv.
#[derive(Clone, Debug)]
pub struct Graph {
    normalized: NormalizedAdjacency,
    neighbors: FrdcMatrix,
    /// `1 / |N(i)|`, or 1 for an isolated node (whose sum is empty anyway).
    inv_degree: ScaleVector,
    unit: ScaleVector,
}

impl Graph {
    pub fn new(e: &EdgeList) -> Result<Self> {
        Self::with_word_bits(e, WordBits::W32)
    }

    pub fn with_word_bits(e: &EdgeList, word_bits: WordBits) -> Result<Self> {
        let normalized = normalize_adjacency_with(e, word_bits)?;
        let neighbors = frdc_from_edges_with(e, false, word_bits)?;
        let inv: Vec<f64> = (0..e.node_count)
            .map(|i| match neighbors.row_degree(i) {
                0 => 1.0,
                d => 1.0 / d as f64,
            })
            .collect();
        Ok(Self {
            normalized,
            neighbors,
            inv_degree: ScaleVector::new(Axis::Row, inv)?,
            unit: ScaleVector::ones(Axis::Row, e.node_count),
        })
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.node_rows()
    }

    pub fn normalized(&self) -> &NormalizedAdjacency {
        &self.normalized
    }

    /// Neighbor structure without self-loops.
    pub fn neighbors(&self) -> &FrdcMatrix {
        &self.neighbors
    }

    /// GCN aggregation operand: `Â` for a `B` tag, `Ã` for `F`.
    pub fn gcn_adjacency(&self, tag: Precision) -> Adjacency<'_> {
        match tag {
            Precision::B => Adjacency::binary(&self.normalized.structure),
            Precision::F => self.normalized.adjacency(),
        }
    }

    /// Neighbor aggregation operand: the 0/1 sum for a `B` tag; for `F`,
    /// the mean (`mean = true`) or the sum with unit factors.
    pub fn neighbor_adjacency(&self, tag: Precision, mean: bool) -> Adjacency<'_> {
        match tag {
            Precision::B => Adjacency::binary(&self.neighbors),
            Precision::F => {
                let row = if mean { &self.inv_degree } else { &self.unit };
                Adjacency::factorized(&self.neighbors, Some(row), None)
                    .expect("scales built for this structure")
            }
        }
    }

    /// Fault injection for verification tooling: sets one unset off-diagonal
    /// bit inside stored tile `tile` of the neighbor structure, and the same
    /// bit of the normalized structure (scales are left as they were).
    /// Returns the node coordinates of the new edge, or `None` when the tile
    /// does not exist or has no such bit.
    #[doc(hidden)]
    pub fn corrupt_tile(&mut self, tile: usize) -> Option<(usize, usize)> {
        let m = &self.neighbors;
        if tile >= m.nnz_tiles() {
            return None;
        }
        let (i0, j0) = m.tile_origin(tile);
        let (r, c) = (0..TILE_DIM * TILE_DIM)
            .map(|b| (b / TILE_DIM, b % TILE_DIM))
            .find(|&(r, c)| {
                let (i, j) = (i0 + r, j0 + c);
                i < m.node_rows() && j < m.node_cols() && i != j && !m.get(i, j)
            })?;
        self.neighbors.flip_tile_bit(tile, r, c);
        let n = &mut self.normalized.structure;
        let tr = i0 / TILE_DIM;
        let (cols, _) = n.row_tiles(tr);
        let pos = cols
            .binary_search(&((j0 / TILE_DIM) as u32))
            .expect("the normalized structure covers every neighbor tile");
        let k = n.row_ptr()[tr] + pos;
        n.flip_tile_bit(k, r, c);
        Some((i0 + r, j0 + c))
    }

    /// Total bytes of both structures in the file layout.
    pub fn structure_bytes(&self) -> usize {
        crate::bitsparse::frdc_stats(&self.normalized.structure).bytes
            + crate::bitsparse::frdc_stats(&self.neighbors).bytes
    }
}
