//! Graph ingestion: MatrixMarket coordinate files, plain edge lists, and
//! FRDC files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use bingnn::bitdense::WordBits;
use bingnn::bitsparse::{
    frdc_from_edges_with, frdc_stats, read_frdc, write_frdc, EdgeList, FrdcMatrix, FRDC_MAGIC,
    HEADER_BYTES, TILE_DIM,
};
use serde::Serialize;

use crate::{CliError, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Parse {
        line,
        msg: msg.into(),
    }
}

fn index(tok: &str, line: usize) -> Result<usize> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("`{tok}` is not a node index")))
}

/// Reads a graph in either text format. Text starting with a
/// `%%MatrixMarket` banner is MatrixMarket (1-based, size line required);
/// anything else is an edge list of `src dst [weight]` lines (0-based, `#`
/// and `%` start comments). `nodes` overrides the node count of an edge
/// list; for MatrixMarket it may only confirm or enlarge the header size.
pub fn parse_graph<R: BufRead>(r: R, nodes: Option<usize>) -> Result<EdgeList> {
    let mut lines = r.lines().enumerate().peekable();
    while let Some((_, Ok(l))) = lines.peek() {
        if !l.trim().is_empty() {
            break;
        }
        lines.next();
    }
    let is_mm =
        matches!(lines.peek(), Some((_, Ok(l))) if l.trim_start().starts_with("%%MatrixMarket"));
    let mut numbered = Vec::new();
    for (i, l) in lines {
        numbered.push((i + 1, l?));
    }
    if is_mm {
        parse_matrix_market(&numbered, nodes)
    } else {
        parse_edge_list(&numbered, nodes)
    }
}

fn parse_edge_list(lines: &[(usize, String)], nodes: Option<usize>) -> Result<EdgeList> {
    let mut edges = Vec::new();
    let mut seen = Vec::new();
    for (n, l) in lines {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') || l.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = l.split_whitespace().collect();
        if !(2..=3).contains(&toks.len()) {
            return Err(parse_err(
                *n,
                format!("expected `src dst [weight]`, got {} fields", toks.len()),
            ));
        }
        if let Some(w) = toks.get(2) {
            w.parse::<f64>()
                .map_err(|_| parse_err(*n, format!("`{w}` is not a weight")))?;
        }
        let (i, j) = (index(toks[0], *n)?, index(toks[1], *n)?);
        edges.push((i, j));
        seen.push(*n);
    }
    let count = match nodes {
        Some(c) => {
            for (&(i, j), &line) in edges.iter().zip(&seen) {
                if i.max(j) >= c {
                    return Err(CliError::NodeOutOfRange {
                        line,
                        index: i.max(j),
                        nodes: c,
                    });
                }
            }
            c
        }
        None => edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0),
    };
    Ok(EdgeList::new(count, edges))
}

fn parse_matrix_market(lines: &[(usize, String)], nodes: Option<usize>) -> Result<EdgeList> {
    let (first, banner) = &lines[0];
    let fields: Vec<String> = banner
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if fields.len() != 5 || fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(parse_err(
            *first,
            "expected `%%MatrixMarket matrix coordinate <field> <symmetry>`",
        ));
    }
    if !["real", "integer", "pattern", "complex"].contains(&fields[3].as_str()) {
        return Err(parse_err(*first, format!("unknown field `{}`", fields[3])));
    }
    let mirror = match fields[4].as_str() {
        "general" => false,
        "symmetric" | "skew-symmetric" | "hermitian" => true,
        s => return Err(parse_err(*first, format!("unknown symmetry `{s}`"))),
    };
    let mut body = lines[1..]
        .iter()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let (size_line, size) = body
        .next()
        .ok_or_else(|| parse_err(*first, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| index(t, *size_line))
        .collect::<Result<_>>()?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(parse_err(*size_line, "size line needs `rows cols entries`"));
    };
    if rows != cols {
        return Err(parse_err(
            *size_line,
            format!("adjacency must be square, got {rows}x{cols}"),
        ));
    }
    let count = match nodes {
        Some(c) if c < rows => {
            return Err(parse_err(
                *size_line,
                format!("--nodes {c} is smaller than the declared {rows}"),
            ))
        }
        Some(c) => c,
        None => rows,
    };
    let mut edges = Vec::with_capacity(nnz);
    let mut entries = 0;
    for (n, l) in body {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() < 2 {
            return Err(parse_err(*n, "entry needs a row and a column"));
        }
        let (i, j) = (index(toks[0], *n)?, index(toks[1], *n)?);
        for v in [i, j] {
            if v == 0 || v > rows {
                return Err(CliError::NodeOutOfRange {
                    line: *n,
                    index: v,
                    nodes: rows,
                });
            }
        }
        edges.push((i - 1, j - 1));
        if mirror && i != j {
            edges.push((j - 1, i - 1));
        }
        entries += 1;
    }
    if entries != nnz {
        return Err(parse_err(
            *size_line,
            format!("header declares {nnz} entries, found {entries}"),
        ));
    }
    Ok(EdgeList::new(count, edges))
}

/// The set bits of a stored matrix as an edge list.
pub fn edges_from_frdc(m: &FrdcMatrix) -> EdgeList {
    let mut edges = Vec::new();
    for tr in 0..m.tile_rows() {
        let (cols, tiles) = m.row_tiles(tr);
        for (&tc, &tile) in cols.iter().zip(tiles) {
            for b in 0..TILE_DIM * TILE_DIM {
                if tile >> (15 - b) & 1 == 1 {
                    edges.push((
                        tr * TILE_DIM + b / TILE_DIM,
                        tc as usize * TILE_DIM + b % TILE_DIM,
                    ));
                }
            }
        }
    }
    EdgeList::new(m.node_rows(), edges)
}

/// Loads a graph file of any supported kind, telling FRDC files apart by
/// their magic bytes.
pub fn load_edges(path: &Path, nodes: Option<usize>) -> Result<EdgeList> {
    let mut head = [0u8; 4];
    let n = File::open(path)?.read(&mut head)?;
    if n == 4 && head == FRDC_MAGIC {
        let m = read_frdc(BufReader::new(File::open(path)?))?;
        return Ok(edges_from_frdc(&m));
    }
    parse_graph(BufReader::new(File::open(path)?), nodes)
}

#[derive(Clone, Copy, Debug)]
pub struct ConvertOptions {
    pub self_loops: bool,
    pub undirected: bool,
    pub word_bits: WordBits,
    pub nodes: Option<usize>,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        Self {
            self_loops: false,
            undirected: false,
            word_bits: WordBits::W32,
            nodes: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvertSummary {
    pub nodes: usize,
    pub input_edges: usize,
    pub nnz_tiles: usize,
    pub nnz_bits: usize,
    pub fill_ratio: f64,
    pub payload_bytes: usize,
    pub file_bytes: usize,
}

pub fn build_frdc(e: &EdgeList, opts: &ConvertOptions) -> Result<FrdcMatrix> {
    let e = if opts.undirected {
        e.symmetrized()
    } else {
        e.clone()
    };
    Ok(frdc_from_edges_with(&e, opts.self_loops, opts.word_bits)?)
}

pub fn convert(input: &Path, output: &Path, opts: &ConvertOptions) -> Result<ConvertSummary> {
    let e = parse_graph(BufReader::new(File::open(input)?), opts.nodes)?;
    let m = build_frdc(&e, opts)?;
    let mut w = BufWriter::new(File::create(output)?);
    write_frdc(&m, &mut w)?;
    w.flush()?;
    let s = frdc_stats(&m);
    Ok(ConvertSummary {
        nodes: m.node_rows(),
        input_edges: e.edges.len(),
        nnz_tiles: s.nnz_tiles,
        nnz_bits: s.nnz_bits,
        fill_ratio: s.fill_ratio,
        payload_bytes: s.bytes,
        file_bytes: HEADER_BYTES + s.bytes,
    })
}
