//! Text formats: boundary pairs, potentials and line potentials as TOML,
//! result tables as CSV with `#` metadata lines.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::core::bc::{validate_boundary, BoundaryPair, NormalForm};
use crate::core::linalg::CMat;
use crate::core::potential::PotentialGrid;
use crate::AppError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryFile {
    pub n: usize,
    pub a_re: Vec<f64>,
    pub a_im: Vec<f64>,
    pub b_re: Vec<f64>,
    pub b_im: Vec<f64>,
}

fn split(m: &CMat) -> (Vec<f64>, Vec<f64>) {
    let n = m.nrows();
    let mut re = Vec::with_capacity(n * n);
    let mut im = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..m.ncols() {
            re.push(m[(r, c)].re);
            im.push(m[(r, c)].im);
        }
    }
    (re, im)
}

fn join(n: usize, re: &[f64], im: &[f64], what: &str) -> Result<CMat, AppError> {
    if re.len() != n * n || im.len() != n * n {
        return Err(AppError::Config(format!(
            "{what} needs {} row-major entries",
            n * n
        )));
    }
    Ok(CMat::from_fn(n, n, |r, c| {
        Complex64::new(re[r * n + c], im[r * n + c])
    }))
}

impl BoundaryFile {
    pub fn from_pair(bp: &BoundaryPair) -> Self {
        let (a_re, a_im) = split(&bp.a);
        let (b_re, b_im) = split(&bp.b);
        Self {
            n: bp.n,
            a_re,
            a_im,
            b_re,
            b_im,
        }
    }

    pub fn to_pair(&self) -> Result<BoundaryPair, AppError> {
        let a = join(self.n, &self.a_re, &self.a_im, "A")?;
        let b = join(self.n, &self.b_re, &self.b_im, "B")?;
        Ok(validate_boundary(a, b)?)
    }
}

/// Normal form `(M, theta)` as written by `bc-validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormRecord {
    pub thetas: Vec<f64>,
    pub n_m: usize,
    pub n_d: usize,
    pub n_n: usize,
    pub m_re: Vec<f64>,
    pub m_im: Vec<f64>,
}

impl From<&NormalForm> for NormalFormRecord {
    fn from(nf: &NormalForm) -> Self {
        let (m_re, m_im) = split(&nf.m);
        Self {
            thetas: nf.thetas.clone(),
            n_m: nf.n_mixed,
            n_d: nf.n_dirichlet,
            n_n: nf.n_neumann,
            m_re,
            m_im,
        }
    }
}

/// Potential samples on cells `[i h, (i+1) h)`; a line potential covers
/// `[-x_max, x_max)` from the left. `samples` interleaves `(re, im)` of each
/// cell matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialFile {
    pub n: usize,
    pub x_max: f64,
    pub h: f64,
    pub samples: Vec<f64>,
}

impl PotentialFile {
    pub fn from_cells(n: usize, h: f64, x_max: f64, cells: &[CMat]) -> Self {
        let mut samples = Vec::with_capacity(cells.len() * n * n * 2);
        for m in cells {
            for r in 0..n {
                for c in 0..n {
                    samples.push(m[(r, c)].re);
                    samples.push(m[(r, c)].im);
                }
            }
        }
        Self {
            n,
            x_max,
            h,
            samples,
        }
    }

    pub fn from_grid(pg: &PotentialGrid) -> Self {
        Self::from_cells(pg.n, pg.h, pg.x_max, &pg.samples)
    }

    /// Cell matrices, checking the count against `x_max / h` (`span` is 1 for
    /// the half-line and 2 for the line).
    pub fn cells(&self, span: f64) -> Result<Vec<CMat>, AppError> {
        let n = self.n;
        if n == 0 || !(self.h > 0.0) || !(self.x_max > 0.0) {
            return Err(AppError::Config(
                "potential file needs n >= 1, h > 0 and x_max > 0".into(),
            ));
        }
        let per = 2 * n * n;
        let count = (span * self.x_max / self.h).round() as usize;
        if self.samples.len() != count * per {
            return Err(AppError::Config(format!(
                "potential file holds {} numbers, expected {} for {count} cells",
                self.samples.len(),
                count * per
            )));
        }
        Ok(self
            .samples
            .chunks(per)
            .map(|s| {
                CMat::from_fn(n, n, |r, c| {
                    Complex64::new(s[2 * (r * n + c)], s[2 * (r * n + c) + 1])
                })
            })
            .collect())
    }

    pub fn to_grid(&self) -> Result<PotentialGrid, AppError> {
        Ok(PotentialGrid::new(self.n, self.h, self.cells(1.0)?)?)
    }

    /// SHA-256 of the canonical text.
    pub fn digest(&self) -> Result<String, AppError> {
        let text = to_toml(self)?;
        Ok(Sha256::digest(text.as_bytes())
            .iter()
            .fold(String::new(), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            }))
    }
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String, AppError> {
    toml::to_string(value).map_err(|e| AppError::Config(e.to_string()))
}

pub fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))
}

pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    fs::write(path, to_toml(value)?)?;
    Ok(())
}

pub fn load_potential(path: &Path) -> Result<PotentialGrid, AppError> {
    read_toml::<PotentialFile>(path)?.to_grid()
}

pub fn save_potential(path: &Path, pg: &PotentialGrid) -> Result<(), AppError> {
    write_toml(path, &PotentialFile::from_grid(pg))
}

pub fn load_boundary(path: &Path) -> Result<BoundaryPair, AppError> {
    read_toml::<BoundaryFile>(path)?.to_pair()
}

/// Numeric table written as CSV; every number uses `{:.17e}` so the body
/// is byte-identical across runs.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            meta: Vec::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, AppError> {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k} = {v}");
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| AppError::Io(std::io::Error::other(e));
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:.17e}")))
                .map_err(csv_err)?;
        }
        let body = w.into_inner().map_err(|e| AppError::Io(e.into_error()))?;
        out.push_str(&String::from_utf8_lossy(&body));
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<(), AppError> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

/// Column names `prefix_re_rc` and `prefix_im_rc` for an `n x n` matrix.
pub fn matrix_columns(prefix: &str, n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(2 * n * n);
    for r in 0..n {
        for c in 0..n {
            out.push(format!("{prefix}_re_{r}{c}"));
            out.push(format!("{prefix}_im_{r}{c}"));
        }
    }
    out
}

/// Entries of `m` in the order of [`matrix_columns`].
pub fn matrix_values(m: &CMat, row: &mut Vec<f64>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            row.push(m[(r, c)].re);
            row.push(m[(r, c)].im);
        }
    }
}
