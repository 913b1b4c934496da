//! Matrix Market coordinate files.

use std::fmt::Write as _;
use std::path::Path;

use sdqlite::interp::Value;

/// A real matrix as 0-based COO triplets, with the derived CSR arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixMarket {
    pub rows: usize,
    pub cols: usize,
    pub row: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum MtxError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Header { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    Entry { line: usize, msg: String },
    #[error("line {line}: index ({row}, {col}) outside the declared {rows}x{cols} matrix")]
    OutOfBounds {
        line: usize,
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("expected {expected} entries, found {found}")]
    Count { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

fn header(line: usize, msg: impl Into<String>) -> MtxError {
    MtxError::Header { line, msg: msg.into() }
}

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<MatrixMarket, MtxError> {
    parse_matrix_market(&std::fs::read_to_string(path)?)
}

pub fn parse_matrix_market(text: &str) -> Result<MatrixMarket, MtxError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (n, banner) = lines.next().ok_or_else(|| header(1, "empty file"))?;
    let words: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" {
        return Err(header(n, "expected `%%MatrixMarket matrix coordinate real <symmetry>`"));
    }
    if words[1] != "matrix" || words[2] != "coordinate" {
        return Err(header(n, format!("unsupported object `{} {}`", words[1], words[2])));
    }
    if words[3] != "real" {
        return Err(header(n, format!("field `{}` is not real", words[3])));
    }
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(header(n, format!("unsupported symmetry `{}`", other))),
    };
    let mut body = lines.filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('%'));
    let (n, size) = body.next().ok_or_else(|| header(n + 1, "missing size line"))?;
    let size: Vec<usize> = size
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| header(n, "size line must be three integers"))?;
    let [rows, cols, entries] = size[..] else {
        return Err(header(n, "size line must be three integers"));
    };
    let mut m = MatrixMarket {
        rows,
        cols,
        row: Vec::with_capacity(entries),
        col: Vec::with_capacity(entries),
        val: Vec::with_capacity(entries),
    };
    let mut found = 0;
    for (line, l) in body {
        let f: Vec<&str> = l.split_whitespace().collect();
        let bad = |msg: &str| MtxError::Entry { line, msg: msg.into() };
        if f.len() != 3 {
            return Err(bad("entry must be `row col value`"));
        }
        let i: usize = f[0].parse().map_err(|_| bad("row index is not an integer"))?;
        let j: usize = f[1].parse().map_err(|_| bad("column index is not an integer"))?;
        let x: f64 = f[2].parse().map_err(|_| bad("value is not a real"))?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(MtxError::OutOfBounds {
                line,
                row: i,
                col: j,
                rows,
                cols,
            });
        }
        found += 1;
        m.push(i - 1, j - 1, x);
        if symmetry == Symmetry::Symmetric && i != j {
            m.push(j - 1, i - 1, x);
        }
    }
    if found != entries {
        return Err(MtxError::Count { expected: entries, found });
    }
    Ok(m)
}

impl MatrixMarket {
    fn push(&mut self, i: usize, j: usize, x: f64) {
        self.row.push(i);
        self.col.push(j);
        self.val.push(x);
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    /// The matrix as a nested dictionary; repeated coordinates are summed.
    pub fn to_value(&self) -> Value {
        let mut v = Value::empty();
        for ((&i, &j), &x) in self.row.iter().zip(&self.col).zip(&self.val) {
            v.add_assign(Value::singleton(i as i64, Value::singleton(j as i64, Value::Real(x))))
                .expect("real leaves");
        }
        v
    }

    /// CSR arrays `(pos, idx, val)` with entries ordered by row, then column.
    pub fn to_csr(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut order: Vec<usize> = (0..self.nnz()).collect();
        order.sort_by_key(|&e| (self.row[e], self.col[e]));
        let mut pos = vec![0; self.rows + 1];
        for &r in &self.row {
            pos[r + 1] += 1;
        }
        for r in 0..self.rows {
            pos[r + 1] += pos[r];
        }
        let idx = order.iter().map(|&e| self.col[e]).collect();
        let val = order.iter().map(|&e| self.val[e]).collect();
        (pos, idx, val)
    }

    /// General coordinate text that loads back to the same triplets.
    pub fn to_text(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.rows, self.cols, self.nnz());
        for ((&i, &j), &x) in self.row.iter().zip(&self.col).zip(&self.val) {
            let _ = writeln!(s, "{} {} {:?}", i + 1, j + 1, x);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GENERAL: &str = "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 5.0\n2 1 3.0\n";

    #[test]
    fn general_two_by_two() {
        let m = parse_matrix_market(GENERAL).unwrap();
        assert_eq!((m.row.clone(), m.col.clone(), m.val.clone()), (vec![0, 1], vec![0, 0], vec![5.0, 3.0]));
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.to_csr(), (vec![0, 1, 2], vec![0, 0], vec![5.0, 3.0]));
    }

    #[test]
    fn symmetric_entries_are_mirrored() {
        let m = parse_matrix_market("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n2 1 3.0\n").unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!((m.row, m.col), (vec![1, 0], vec![0, 1]));
    }

    #[test]
    fn round_trip() {
        let m = parse_matrix_market(GENERAL).unwrap();
        assert_eq!(parse_matrix_market(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_matrix_market("%%MatrixMarket matrix array real general\n"), Err(MtxError::Header { .. })));
        assert!(matches!(parse_matrix_market("hello\n"), Err(MtxError::Header { .. })));
        assert!(matches!(
            parse_matrix_market("%%MatrixMarket matrix coordinate complex general\n1 1 0\n"),
            Err(MtxError::Header { .. })
        ));
        assert!(matches!(
            parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n"),
            Err(MtxError::OutOfBounds { .. })
        ));
        assert!(matches!(
            parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n"),
            Err(MtxError::Count { .. })
        ));
    }
}
