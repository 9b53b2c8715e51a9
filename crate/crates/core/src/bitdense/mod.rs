//! Bit-packed dense tensors and the word-level primitives every kernel is
//! built from.
//!
//! A [`BitDenseMatrix`] stores one bit per element, row-major, MSB-first
//! inside each word: logical column `j` of a row lives at bit
//! `word_bits - 1 - (j % word_bits)` of word `j / word_bits`. Storage is a
//! flat array of 32-bit lanes; a 64-bit word is two consecutive lanes with the
//! high lane first, which is the same bit order, so both word widths share one
//! code path and differ only in how far each row is padded.
//!
//! Padding bits past the logical column count are always zero. Kernels rely
//! on this: XOR of two padded words contributes nothing to a popcount.

mod dot;
pub(crate) mod transpose;

pub use dot::{
    bit_dot_01, bit_dot_pm1, bit_dot_pm1_xnor, bit_dot_trinary, lane_mask, TrinaryStrategy,
};
pub use transpose::{bit_transpose_block, transpose};

use std::fmt;

use crate::error::{Error, Result};

/// Width of one storage lane.
pub const LANE_BITS: usize = 32;

/// Machine word width a bit matrix is padded to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum WordBits {
    #[default]
    W32,
    W64,
}

impl WordBits {
    pub const fn bits(self) -> usize {
        match self {
            WordBits::W32 => 32,
            WordBits::W64 => 64,
        }
    }

    /// Number of 32-bit storage lanes per word.
    pub const fn lanes(self) -> usize {
        self.bits() / LANE_BITS
    }

    pub fn from_bits(bits: usize) -> Option<Self> {
        match bits {
            32 => Some(WordBits::W32),
            64 => Some(WordBits::W64),
            _ => None,
        }
    }
}

impl fmt::Display for WordBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bits())
    }
}

/// How a stored bit is interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Semantics {
    /// Connectivity: 1 means 1, 0 means 0.
    ZeroOne,
    /// Sign: 1 means +1, 0 means -1.
    PlusMinus,
}

/// Row-major full-precision matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                "DenseMatrix::new",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::dims(
                "DenseMatrix::new",
                format!(
                    "non-finite value at ({}, {})",
                    pos / cols.max(1),
                    pos % cols.max(1)
                ),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f32) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// Payload size at 4 bytes per element.
    pub fn payload_bytes(&self) -> usize {
        self.rows * self.cols * std::mem::size_of::<f32>()
    }
}

/// Row-major bit-packed matrix. See the module docs for the bit layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitDenseMatrix {
    rows: usize,
    cols: usize,
    word_bits: WordBits,
    semantics: Semantics,
    lanes_per_row: usize,
    data: Vec<u32>,
}

/// Number of bytes a `rows x cols` bit matrix occupies once padded to
/// `word_bits`.
pub fn packed_bytes(rows: usize, cols: usize, word_bits: WordBits) -> usize {
    rows * cols.div_ceil(word_bits.bits()) * (word_bits.bits() / 8)
}

impl BitDenseMatrix {
    pub fn zeros(rows: usize, cols: usize, word_bits: WordBits, semantics: Semantics) -> Self {
        let lanes_per_row = cols.div_ceil(word_bits.bits()) * word_bits.lanes();
        Self {
            rows,
            cols,
            word_bits,
            semantics,
            lanes_per_row,
            data: vec![0; rows * lanes_per_row],
        }
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        word_bits: WordBits,
        semantics: Semantics,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Self {
        let mut m = Self::zeros(rows, cols, word_bits, semantics);
        for i in 0..rows {
            for j in 0..cols {
                if f(i, j) {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    /// Wraps raw lanes, rejecting wrong lengths and dirty padding.
    pub fn from_lanes(
        rows: usize,
        cols: usize,
        word_bits: WordBits,
        semantics: Semantics,
        data: Vec<u32>,
    ) -> Result<Self> {
        let lanes_per_row = cols.div_ceil(word_bits.bits()) * word_bits.lanes();
        if data.len() != rows * lanes_per_row {
            return Err(Error::dims(
                "BitDenseMatrix::from_lanes",
                format!(
                    "{} lanes for {rows} rows of {lanes_per_row} lanes",
                    data.len()
                ),
            ));
        }
        let m = Self {
            rows,
            cols,
            word_bits,
            semantics,
            lanes_per_row,
            data,
        };
        if !m.padding_is_zero() {
            return Err(Error::dims(
                "BitDenseMatrix::from_lanes",
                "padding bits past the last column are set",
            ));
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn word_bits(&self) -> WordBits {
        self.word_bits
    }

    pub fn semantics(&self) -> Semantics {
        self.semantics
    }

    /// Words of `word_bits` bits per row.
    pub fn words_per_row(&self) -> usize {
        self.cols.div_ceil(self.word_bits.bits())
    }

    /// 32-bit storage lanes per row.
    pub fn lanes_per_row(&self) -> usize {
        self.lanes_per_row
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.rows && j < self.cols);
        let lane = self.data[i * self.lanes_per_row + j / LANE_BITS];
        (lane >> (LANE_BITS - 1 - j % LANE_BITS)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, bit: bool) {
        assert!(
            i < self.rows && j < self.cols,
            "bit ({i}, {j}) out of range"
        );
        let lane = &mut self.data[i * self.lanes_per_row + j / LANE_BITS];
        let mask = 1u32 << (LANE_BITS - 1 - j % LANE_BITS);
        if bit {
            *lane |= mask;
        } else {
            *lane &= !mask;
        }
    }

    /// Storage lanes of row `i`, padding included.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.lanes_per_row..(i + 1) * self.lanes_per_row]
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [u32] {
        &mut self.data[i * self.lanes_per_row..(i + 1) * self.lanes_per_row]
    }

    /// Word `w` of row `i` at the matrix's word width, right-aligned.
    pub fn word(&self, i: usize, w: usize) -> u64 {
        let row = self.row(i);
        match self.word_bits {
            WordBits::W32 => u64::from(row[w]),
            WordBits::W64 => (u64::from(row[2 * w]) << 32) | u64::from(row[2 * w + 1]),
        }
    }

    pub fn as_lanes(&self) -> &[u32] {
        &self.data
    }

    pub(crate) fn as_lanes_mut(&mut self) -> &mut [u32] {
        &mut self.data
    }

    pub fn with_semantics(mut self, semantics: Semantics) -> Self {
        self.semantics = semantics;
        self
    }

    /// Exact payload size: `rows * words_per_row * word_bits / 8`.
    pub fn payload_bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<u32>()
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn padding_is_zero(&self) -> bool {
        if self.lanes_per_row == 0 {
            return true;
        }
        let full = self.cols / LANE_BITS;
        let tail = lane_mask(self.cols);
        (0..self.rows).all(|i| {
            let row = self.row(i);
            row.iter().enumerate().skip(full).all(|(l, &w)| {
                if l == full && !self.cols.is_multiple_of(LANE_BITS) {
                    w & !tail == 0
                } else {
                    w == 0
                }
            })
        })
    }
}

/// Binarization axis of a scale vector: one factor per row or per column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    Row,
    Col,
}

/// Strictly positive per-row or per-column scaling factors.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleVector {
    axis: Axis,
    data: Vec<f64>,
}

/// Scale assigned to an all-zero slice so that every factor stays positive.
pub const ZERO_SLICE_SCALE: f64 = 1e-12;

impl ScaleVector {
    pub fn new(axis: Axis, data: Vec<f64>) -> Result<Self> {
        if let Some((k, v)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidScale(format!(
                "entry {k} is {v}; scales must be finite and > 0"
            )));
        }
        Ok(Self { axis, data })
    }

    pub fn ones(axis: Axis, len: usize) -> Self {
        Self {
            axis,
            data: vec![1.0; len],
        }
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.data[k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Sign binarization at 32-bit words: bit is 1 iff the value is `>= 0`.
pub fn binarize(m: &DenseMatrix) -> BitDenseMatrix {
    binarize_with(m, WordBits::W32)
}

pub fn binarize_with(m: &DenseMatrix, word_bits: WordBits) -> BitDenseMatrix {
    let mut out = BitDenseMatrix::zeros(m.rows, m.cols, word_bits, Semantics::PlusMinus);
    for i in 0..m.rows {
        pack_signs(m.row(i), out.row_mut(i));
    }
    out
}

/// Packs `values[j] >= 0` MSB-first into `lanes`.
pub(crate) fn pack_signs(values: &[f32], lanes: &mut [u32]) {
    for (lane, chunk) in lanes.iter_mut().zip(values.chunks(LANE_BITS)) {
        let mut w = 0u32;
        for (b, &v) in chunk.iter().enumerate() {
            w |= u32::from(v >= 0.0) << (LANE_BITS - 1 - b);
        }
        *lane = w;
    }
}

/// Binarizes `m` and extracts L1-mean scales along `axis`.
///
/// With `Axis::Row`, `scale[i]` is the mean of `|m[i, :]|`; with `Axis::Col`,
/// `scale[j]` is the mean of `|m[:, j]|`. An all-zero slice gets
/// [`ZERO_SLICE_SCALE`].
pub fn binarize_with_scale(m: &DenseMatrix, axis: Axis) -> Result<(BitDenseMatrix, ScaleVector)> {
    binarize_with_scale_at(m, axis, WordBits::W32)
}

pub fn binarize_with_scale_at(
    m: &DenseMatrix,
    axis: Axis,
    word_bits: WordBits,
) -> Result<(BitDenseMatrix, ScaleVector)> {
    let (len, span) = match axis {
        Axis::Row => (m.rows, m.cols),
        Axis::Col => (m.cols, m.rows),
    };
    if len == 0 || span == 0 {
        return Err(Error::dims(
            "binarize_with_scale",
            format!("cannot take L1 means of a {}x{} matrix", m.rows, m.cols),
        ));
    }
    let mut sums = vec![0f64; len];
    for i in 0..m.rows {
        for (j, &v) in m.row(i).iter().enumerate() {
            let k = if axis == Axis::Row { i } else { j };
            sums[k] += f64::from(v).abs();
        }
    }
    let data = sums
        .into_iter()
        .map(|s| {
            let mean = s / span as f64;
            if mean > 0.0 {
                mean
            } else {
                ZERO_SLICE_SCALE
            }
        })
        .collect();
    Ok((binarize_with(m, word_bits), ScaleVector { axis, data }))
}

/// Decodes bits to reals according to the matrix semantics.
pub fn unpack(m: &BitDenseMatrix) -> DenseMatrix {
    let (one, zero) = match m.semantics {
        Semantics::ZeroOne => (1.0, 0.0),
        Semantics::PlusMinus => (1.0, -1.0),
    };
    DenseMatrix::from_fn(m.rows, m.cols, |i, j| if m.get(i, j) { one } else { zero })
}
