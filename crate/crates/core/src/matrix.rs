//! Dense distance matrices and their on-disk formats.
//!
//! Two formats are supported, both storing the full square row-major:
//!
//! * `.dmat` text: first line is `n`, then `n` lines of `n` whitespace-separated
//!   decimal entries. Entries are written with the shortest representation that
//!   round-trips exactly.
//! * `.dmatb` binary: 8-byte little-endian `u64` n, then `n*n` little-endian `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n x n` matrix of finite distances.
///
/// The full square is stored so that raw, possibly asymmetric inputs can be
/// represented and rejected by [`crate::clean::clean_check`]. Matrices built
/// through [`DistanceMatrix::from_fn`] are symmetric with a zero diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// All-zero `n x n` matrix.
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Symmetric matrix with zero diagonal; `f(i, j)` is called once per `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                m.set_sym(i, j, f(i, j));
            }
        }
        m
    }

    /// Raw matrix from rows. Symmetry is not enforced; entries must be finite.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Self::from_raw(n, data)
    }

    /// Raw matrix from a row-major buffer of length `n*n`.
    pub fn from_raw(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "buffer has {} entries, expected {}",
                data.len(),
                n * n
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite entry at ({},{})",
                pos / n,
                pos % n
            )));
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Row `i` as a slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Sets a single ordered entry. Used to build raw test inputs.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Sets both `(i,j)` and `(j,i)`.
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// First `(i, j)` with `i < j` and `M(i,j) != M(j,i)`, row-major.
    pub fn first_asymmetry(&self) -> Option<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| (i + 1..self.n).map(move |j| (i, j)))
            .find(|&(i, j)| self.get(i, j) != self.get(j, i))
    }

    pub fn is_symmetric(&self) -> bool {
        self.first_asymmetry().is_none()
    }

    /// Relabels points: entry `(a, b)` of `self` lands at `(perm[a], perm[b])`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n, "permutation length mismatch");
        let mut out = Self::zeros(self.n);
        for a in 0..self.n {
            for b in 0..self.n {
                out.data[perm[a] * self.n + perm[b]] = self.get(a, b);
            }
        }
        out
    }

    /// Restriction to `idx x idx`, in the given order.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let k = idx.len();
        let mut out = Self::zeros(k);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out.data[a * k + b] = self.get(i, j);
            }
        }
        out
    }

    /// Number of ordered off-diagonal entries where the two matrices differ.
    pub fn changed_entries(&self, other: &Self) -> usize {
        assert_eq!(self.n, other.n, "dimension mismatch");
        (0..self.n)
            .flat_map(|i| (0..self.n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && self.get(i, j) != other.get(i, j))
            .count()
    }

    /// Sorted `(value, count)` pairs over all ordered off-diagonal entries.
    pub fn value_histogram(&self) -> Vec<(f64, usize)> {
        let mut vals: Vec<f64> = (0..self.n)
            .flat_map(|i| (0..self.n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        vals.sort_by(f64::total_cmp);
        let mut out: Vec<(f64, usize)> = Vec::new();
        for v in vals {
            match out.last_mut() {
                Some((last, c)) if *last == v => *c += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }

    /// Minimum and maximum over off-diagonal entries, if `n >= 2`.
    pub fn off_diagonal_range(&self) -> Option<(f64, f64)> {
        let mut range: Option<(f64, f64)> = None;
        for i in 0..self.n {
            for j in 0..self.n {
                if i == j {
                    continue;
                }
                let v = self.get(i, j);
                range = Some(match range {
                    None => (v, v),
                    Some((lo, hi)) => (lo.min(v), hi.max(v)),
                });
            }
        }
        range
    }

    /// Canonical text serialization.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.n * self.n * 4 + 16);
        let _ = writeln!(s, "{}", self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{v}");
            }
            s.push('\n');
        }
        s
    }

    /// Parses the text format without checking symmetry.
    pub fn parse_text_raw(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (hdr_line, hdr) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty input".into(),
        })?;
        let n: usize = hdr.trim().parse().map_err(|_| Error::Parse {
            line: hdr_line + 1,
            message: format!("invalid header {:?}", hdr.trim()),
        })?;
        let mut data = Vec::with_capacity(n * n);
        for row in 0..n {
            let (ln, line) = lines.next().ok_or(Error::Parse {
                line: hdr_line + row + 2,
                message: format!("expected {n} rows, found {row}"),
            })?;
            let before = data.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: ln + 1,
                    message: format!("invalid number {tok:?}"),
                })?;
                data.push(v);
            }
            if data.len() - before != n {
                return Err(Error::Parse {
                    line: ln + 1,
                    message: format!("row has {} entries, expected {n}", data.len() - before),
                });
            }
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse {
                line: ln + 1,
                message: "trailing data after last row".into(),
            });
        }
        Self::from_raw(n, data).map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })
    }

    /// Parses the text format and rejects asymmetric input.
    pub fn parse_text(text: &str) -> Result<Self> {
        let m = Self::parse_text_raw(text)?;
        m.require_symmetric()?;
        Ok(m)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.data.len());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn parse_binary_raw(bytes: &[u8]) -> Result<Self> {
        let bad = |message: String| Error::Parse { line: 0, message };
        if bytes.len() < 8 {
            return Err(bad("binary header truncated".into()));
        }
        let n = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
        let expected = n
            .checked_mul(n)
            .and_then(|x| x.checked_mul(8))
            .and_then(|x| x.checked_add(8))
            .ok_or_else(|| bad(format!("n = {n} overflows")))?;
        if bytes.len() != expected {
            return Err(bad(format!(
                "binary length {} does not match n = {n} (expected {expected})",
                bytes.len()
            )));
        }
        let data = bytes[8..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Self::from_raw(n, data).map_err(|e| bad(e.to_string()))
    }

    fn require_symmetric(&self) -> Result<()> {
        match self.first_asymmetry() {
            Some((i, j)) => Err(Error::Asymmetric {
                i,
                j,
                a: self.get(i, j),
                b: self.get(j, i),
            }),
            None => Ok(()),
        }
    }
}

fn is_binary_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "dmatb")
}

/// Loads a matrix, choosing the format by extension (`.dmatb` is binary,
/// anything else is text). Asymmetric files are rejected.
pub fn load_matrix(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
    let m = load_matrix_raw(&path)?;
    m.require_symmetric()?;
    Ok(m)
}

/// Like [`load_matrix`] but keeps asymmetric inputs so they can be clean-checked.
pub fn load_matrix_raw(path: impl AsRef<Path>) -> Result<DistanceMatrix> {
    let path = path.as_ref();
    if is_binary_path(path) {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        DistanceMatrix::parse_binary_raw(&bytes)
    } else {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DistanceMatrix::parse_text_raw(&text)
    }
}

pub fn save_matrix(m: &DistanceMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let res = if is_binary_path(path) {
        fs::write(path, m.to_binary())
    } else {
        fs::write(path, m.to_text())
    };
    res.map_err(|e| Error::io(path, e))
}
