use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::LinearOperator;
use crate::error::{Error, ParseError, Result};

/// Coordinate-format sparse matrix with unique, in-range entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("sparse matrix dimensions must be positive"));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for &(i, j, v) in &entries {
            if i >= rows || j >= cols {
                return Err(Error::invalid(format!("entry ({i}, {j}) outside {rows}x{cols}")));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("entry ({i}, {j}) is not finite")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::invalid(format!("duplicate entry ({i}, {j})")));
            }
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Fraction of zero entries.
    pub fn sparsity(&self) -> f64 {
        1.0 - self.nnz() as f64 / (self.rows as f64 * self.cols as f64)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
        }
        m
    }
}

fn header_err(line: usize, reason: &str) -> ParseError {
    ParseError::MalformedHeader { line, reason: reason.to_string() }
}

fn entry_err(line: usize, reason: &str) -> ParseError {
    ParseError::MalformedEntry { line, reason: reason.to_string() }
}

/// Parses a real or integer general coordinate MatrixMarket file.
pub fn parse_matrix_market(text: &str) -> std::result::Result<SparseMatrix, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or(ParseError::Empty)?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.first().map(String::as_str) != Some("%%matrixmarket") {
        return Err(header_err(1, "missing %%MatrixMarket banner"));
    }
    if tokens.len() != 5 || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(header_err(1, "expected 'matrix coordinate <field> general'"));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(header_err(1, "field must be real or integer"));
    }
    if tokens[4] != "general" {
        return Err(header_err(1, "only general symmetry is supported"));
    }

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = body.next().ok_or_else(|| header_err(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| header_err(size_line, "size line must hold three integers"))?;
    if dims.len() != 3 || dims[0] == 0 || dims[1] == 0 {
        return Err(header_err(size_line, "size line must be 'rows cols nnz' with positive dimensions"));
    }
    let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);

    let mut entries = Vec::with_capacity(nnz);
    let mut seen = HashSet::with_capacity(nnz);
    for (line, text) in body {
        let mut it = text.split_whitespace();
        let (Some(a), Some(b), Some(c), None) = (it.next(), it.next(), it.next(), it.next()) else {
            return Err(entry_err(line, "expected 'row col value'"));
        };
        let i: usize = a.parse().map_err(|_| entry_err(line, "bad row index"))?;
        let j: usize = b.parse().map_err(|_| entry_err(line, "bad column index"))?;
        let v: f64 = c.parse().map_err(|_| entry_err(line, "bad value"))?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(ParseError::OutOfRange { line, row: i, col: j, rows, cols });
        }
        if !v.is_finite() {
            return Err(entry_err(line, "value is not finite"));
        }
        if !seen.insert((i, j)) {
            return Err(ParseError::Duplicate { line, row: i, col: j });
        }
        entries.push((i - 1, j - 1, v));
    }
    if entries.len() != nnz {
        return Err(ParseError::EntryCount { expected: nnz, found: entries.len() });
    }
    Ok(SparseMatrix { rows, cols, entries })
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(&text).map_err(|source| Error::Parse { path: path.to_path_buf(), source })
}

pub fn write_matrix_market(path: impl AsRef<Path>, m: &SparseMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(32 * m.nnz() + 64);
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", m.rows, m.cols, m.nnz());
    for &(i, j, v) in &m.entries {
        let _ = writeln!(out, "{} {} {:?}", i + 1, j + 1, v);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses MovieLens `u.data` (user, item, rating, timestamp; 1-based ids)
/// into a users x items rating matrix. Dimensions are the largest ids seen.
pub fn parse_movielens(text: &str) -> std::result::Result<SparseMatrix, ParseError> {
    let mut raw = Vec::new();
    let mut seen = HashSet::new();
    let (mut rows, mut cols) = (0, 0);
    for (idx, l) in text.lines().enumerate() {
        let line = idx + 1;
        if l.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 4 {
            return Err(entry_err(line, "expected 'user item rating timestamp'"));
        }
        let u: usize = f[0].parse().map_err(|_| entry_err(line, "bad user id"))?;
        let i: usize = f[1].parse().map_err(|_| entry_err(line, "bad item id"))?;
        let r: f64 = f[2].parse().map_err(|_| entry_err(line, "bad rating"))?;
        if u == 0 || i == 0 {
            return Err(entry_err(line, "ids are 1-based"));
        }
        if !seen.insert((u, i)) {
            return Err(ParseError::Duplicate { line, row: u, col: i });
        }
        rows = rows.max(u);
        cols = cols.max(i);
        raw.push((u - 1, i - 1, r));
    }
    if raw.is_empty() {
        return Err(ParseError::Empty);
    }
    Ok(SparseMatrix { rows, cols, entries: raw })
}

pub fn read_movielens(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_movielens(&text).map_err(|source| Error::Parse { path: path.to_path_buf(), source })
}

/// `v -> X (X^T v)` for a sparse `X`, charged two units per column.
#[derive(Clone, Debug)]
pub struct GramianOperator {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

pub fn gramian(x: &SparseMatrix) -> Result<GramianOperator> {
    if x.nnz() == 0 {
        return Err(Error::invalid("Gramian of an empty matrix"));
    }
    let mut sorted = x.entries.clone();
    sorted.sort_by_key(|&(i, j, _)| (i, j));
    let mut row_ptr = vec![0; x.rows + 1];
    for &(i, _, _) in &sorted {
        row_ptr[i + 1] += 1;
    }
    for i in 0..x.rows {
        row_ptr[i + 1] += row_ptr[i];
    }
    Ok(GramianOperator {
        rows: x.rows,
        cols: x.cols,
        row_ptr,
        col_idx: sorted.iter().map(|e| e.1).collect(),
        vals: sorted.iter().map(|e| e.2).collect(),
    })
}

impl GramianOperator {
    pub fn data_cols(&self) -> usize {
        self.cols
    }
}

impl LinearOperator for GramianOperator {
    fn dim(&self) -> usize {
        self.rows
    }

    fn apply(&self, block: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, m) = block.shape();
        assert_eq!(n, self.rows, "block has wrong number of rows");
        let mut out = DMatrix::zeros(n, m);
        let mut t = vec![0.0; self.cols];
        for j in 0..m {
            t.iter_mut().for_each(|v| *v = 0.0);
            let b = block.column(j);
            for r in 0..n {
                let br = b[r];
                if br != 0.0 {
                    for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                        t[self.col_idx[p]] += self.vals[p] * br;
                    }
                }
            }
            let mut o = out.column_mut(j);
            for r in 0..n {
                let mut acc = 0.0;
                for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.vals[p] * t[self.col_idx[p]];
                }
                o[r] = acc;
            }
        }
        out
    }

    fn units_per_column(&self) -> usize {
        2
    }
}
