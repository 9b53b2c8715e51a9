//! On-disk FRDC layout, little-endian throughout:
//!
//! | field      | type                 |
//! |------------|----------------------|
//! | magic      | `b"FRDC"`            |
//! | version    | u32 = 1              |
//! | tile_dim   | u8 = 4               |
//! | word_bits  | u8 (32 or 64)        |
//! | reserved   | u16 = 0              |
//! | node_rows  | u64                  |
//! | node_cols  | u64                  |
//! | nnz_tiles  | u64                  |
//! | row_ptr    | u64 × (tile_rows+1)  |
//! | col_ind    | u32 × nnz_tiles      |
//! | tiles      | u16 × nnz_tiles      |

use std::io::{Read, Write};

use super::{FrdcMatrix, TILE_DIM};
use crate::bitdense::WordBits;
use crate::error::{Error, Result};

pub const FRDC_MAGIC: [u8; 4] = *b"FRDC";
pub const FRDC_VERSION: u32 = 1;
pub const HEADER_BYTES: usize = 36;

pub fn write_frdc<W: Write>(m: &FrdcMatrix, mut w: W) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_BYTES + m.row_ptr.len() * 8 + m.tiles.len() * 6);
    buf.extend_from_slice(&FRDC_MAGIC);
    buf.extend_from_slice(&FRDC_VERSION.to_le_bytes());
    buf.push(TILE_DIM as u8);
    buf.push(m.word_bits.bits() as u8);
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&(m.node_rows as u64).to_le_bytes());
    buf.extend_from_slice(&(m.node_cols as u64).to_le_bytes());
    buf.extend_from_slice(&(m.tiles.len() as u64).to_le_bytes());
    for &p in &m.row_ptr {
        buf.extend_from_slice(&(p as u64).to_le_bytes());
    }
    for &c in &m.col_ind {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    for &t in &m.tiles {
        buf.extend_from_slice(&t.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated at {what}")),
            _ => Error::Io(e),
        })?;
        Ok(b)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(what)?))
    }
}

fn to_usize(v: u64, what: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit in memory")))
}

pub fn read_frdc<R: Read>(r: R) -> Result<FrdcMatrix> {
    let mut c = Cursor { inner: r };
    if c.take::<4>("magic")? != FRDC_MAGIC {
        return Err(Error::Format("bad magic, expected \"FRDC\"".into()));
    }
    let version = u32::from_le_bytes(c.take("version")?);
    if version != FRDC_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let [tile_dim] = c.take::<1>("tile_dim")?;
    if tile_dim as usize != TILE_DIM {
        return Err(Error::Format(format!("tile_dim {tile_dim}, expected 4")));
    }
    let [wb] = c.take::<1>("word_bits")?;
    let word_bits = WordBits::from_bits(wb as usize)
        .ok_or_else(|| Error::Format(format!("word_bits {wb}, expected 32 or 64")))?;
    if u16::from_le_bytes(c.take("reserved")?) != 0 {
        return Err(Error::Format("reserved field is not zero".into()));
    }
    let node_rows = to_usize(c.u64("node_rows")?, "node_rows")?;
    let node_cols = to_usize(c.u64("node_cols")?, "node_cols")?;
    let nnz = to_usize(c.u64("nnz_tiles")?, "nnz_tiles")?;
    if node_cols.div_ceil(TILE_DIM) > u32::MAX as usize {
        return Err(Error::Format(
            "too many tile columns for u32 col_ind".into(),
        ));
    }

    let tile_rows = node_rows.div_ceil(TILE_DIM);
    let mut row_ptr = Vec::with_capacity(tile_rows + 1);
    for _ in 0..=tile_rows {
        row_ptr.push(to_usize(c.u64("row_ptr")?, "row_ptr")?);
    }
    let mut col_ind = Vec::with_capacity(nnz.min(1 << 24));
    for _ in 0..nnz {
        col_ind.push(u32::from_le_bytes(c.take("col_ind")?));
    }
    let mut tiles = Vec::with_capacity(nnz.min(1 << 24));
    for _ in 0..nnz {
        tiles.push(u16::from_le_bytes(c.take("tiles")?));
    }
    let mut rest = [0u8; 1];
    if c.inner.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after tiles".into()));
    }
    FrdcMatrix::from_parts(node_rows, node_cols, word_bits, row_ptr, col_ind, tiles)
}
