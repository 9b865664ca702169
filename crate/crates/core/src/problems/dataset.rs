//! Compressed sparse rows and the `label idx:val ...` text format.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::oracle::RealVector;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: label {label} is not binary")]
    Label { line: usize, label: f64 },
    #[error("dataset contains no records")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; columns within a row are sorted.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                assert!(c < ncols, "column {c} out of range");
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows: indptr.len() - 1,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn row_dot(&self, i: usize, x: &RealVector) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(c, v)| v * x[*c]).sum()
    }

    /// `out += a·u_i`
    pub fn row_axpy(&self, i: usize, a: f64, out: &mut RealVector) {
        let (idx, val) = self.row(i);
        for (c, v) in idx.iter().zip(val) {
            out[*c] += a * v;
        }
    }

    pub fn row_norm_squared(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}

/// Parses the sparse text format with 1-based indices. Labels `0` map to `−1`.
pub fn parse_sparse_dataset(text: &str) -> Result<(CsrMatrix, Vec<f64>), DatasetError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut ncols = 0;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut tok = body.split_whitespace();
        let lab = tok.next().unwrap_or_default();
        let label: f64 = lab.parse().map_err(|_| DatasetError::Malformed {
            line,
            msg: format!("bad label `{lab}`"),
        })?;
        let label = if label == 0.0 { -1.0 } else { label };
        if label != 1.0 && label != -1.0 {
            return Err(DatasetError::Label { line, label });
        }
        let mut row = Vec::new();
        for t in tok {
            let (i, v) = t.split_once(':').ok_or_else(|| DatasetError::Malformed {
                line,
                msg: format!("expected idx:val, got `{t}`"),
            })?;
            let i: usize = i.parse().map_err(|_| DatasetError::Malformed {
                line,
                msg: format!("bad index `{i}`"),
            })?;
            if i == 0 {
                return Err(DatasetError::Malformed {
                    line,
                    msg: "indices are 1-based".into(),
                });
            }
            let v: f64 = v.parse().map_err(|_| DatasetError::Malformed {
                line,
                msg: format!("bad value `{v}`"),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::Malformed {
                    line,
                    msg: "non-finite value".into(),
                });
            }
            ncols = ncols.max(i);
            row.push((i - 1, v));
        }
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok((CsrMatrix::from_rows(ncols, rows), labels))
}

pub fn load_sparse_dataset(path: &Path) -> Result<(CsrMatrix, Vec<f64>), DatasetError> {
    parse_sparse_dataset(&std::fs::read_to_string(path)?)
}

pub fn format_sparse_dataset(data: &CsrMatrix, labels: &[f64]) -> String {
    let mut s = String::new();
    for (i, lab) in labels.iter().enumerate() {
        s.push_str(if *lab > 0.0 { "+1" } else { "-1" });
        let (idx, val) = data.row(i);
        for (c, v) in idx.iter().zip(val) {
            // `{:?}` prints the shortest representation that round-trips
            let _ = write!(s, " {}:{:?}", c + 1, v);
        }
        s.push('\n');
    }
    s
}

pub fn write_sparse_dataset(path: &Path, data: &CsrMatrix, labels: &[f64]) -> std::io::Result<()> {
    std::fs::write(path, format_sparse_dataset(data, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_record() {
        let (m, l) = parse_sparse_dataset("+1 1:0.5 3:2\n").unwrap();
        assert_eq!((m.nrows, m.ncols), (1, 3));
        let x = RealVector::from_vec(vec![1.0, 10.0, 100.0]);
        assert_eq!(m.row_dot(0, &x), 0.5 + 200.0);
        assert_eq!(l, vec![1.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_sparse_dataset(""), Err(DatasetError::Empty)));
        assert!(matches!(parse_sparse_dataset("\n# c\n"), Err(DatasetError::Empty)));
        assert!(matches!(
            parse_sparse_dataset("1 1:2\n1 3-4\n"),
            Err(DatasetError::Malformed { line: 2, .. })
        ));
        assert!(matches!(
            parse_sparse_dataset("2 1:1\n"),
            Err(DatasetError::Label { line: 1, .. })
        ));
        assert!(matches!(
            parse_sparse_dataset("1 0:1\n"),
            Err(DatasetError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn zero_label_maps_to_minus_one() {
        let (_, l) = parse_sparse_dataset("0 1:1\n1 2:1\n").unwrap();
        assert_eq!(l, vec![-1.0, 1.0]);
    }

    #[test]
    fn round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ncols = 40;
        let rows: Vec<Vec<(usize, f64)>> = (0..30)
            .map(|_| {
                let mut r = Vec::new();
                for c in 0..ncols {
                    if rng.random::<f64>() < 0.2 {
                        r.push((c, rng.random::<f64>() * 10.0 - 5.0));
                    }
                }
                if r.is_empty() {
                    r.push((0, 1.0));
                }
                r
            })
            .collect();
        // make sure the last column is used so ncols is inferred exactly
        let mut rows = rows;
        rows[0].push((ncols - 1, 0.25));
        let m = CsrMatrix::from_rows(ncols, rows);
        let labels: Vec<f64> = (0..30).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.txt");
        write_sparse_dataset(&p, &m, &labels).unwrap();
        let (m2, l2) = load_sparse_dataset(&p).unwrap();
        assert_eq!(m2, m);
        assert_eq!(l2, labels);
    }
}
