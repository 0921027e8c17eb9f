//! Dense linear-algebra core: a row-major [`Matrix`], ridge regression through
//! a Cholesky factorization, the triplet score, and cosine distance.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Magic bytes at the head of a persisted matrix file.
pub const MATRIX_MAGIC: &[u8; 4] = b"CRMX";

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Input(format!(
                "matrix {}x{} needs {} values, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Input(format!(
                    "row {} has {} columns, expected {}",
                    i,
                    row.len(),
                    cols
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }


    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Input(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                axpy(a, other.row(k), out_row);
            }
        }
        Ok(out)
    }

    /// `selfᵀ · self`.
    pub fn gram(&self) -> Matrix {
        let k = self.cols;
        let mut g = Matrix::zeros(k, k);
        for r in 0..self.rows {
            let row = self.row(r);
            for a in 0..k {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..k {
                    g.data[a * k + b] += ra * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                g.data[a * k + b] = g.data[b * k + a];
            }
        }
        g
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::Input(format!(
                "cannot form transpose product of {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let rhs = other.row(r);
            for (a, &v) in self.row(r).iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                axpy(v, rhs, &mut out.data[a * other.cols..(a + 1) * other.cols]);
            }
        }
        Ok(out)
    }

    /// Writes the `CRMX` little-endian binary layout.
    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(MATRIX_MAGIC)?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Matrix> {
        let bad = |m: &str| Error::format("matrix file", m);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MATRIX_MAGIC {
            return Err(bad("bad magic bytes"));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
        let rows = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
        let cols = u64::from_le_bytes(word) as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| bad("dimension overflow"))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut word).map_err(|_| bad("truncated body"))?;
            data.push(f64::from_le_bytes(word));
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|_| bad("read failure"))? != 0 {
            return Err(bad("trailing bytes after matrix body"));
        }
        Matrix::from_vec(rows, cols, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Matrix> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Matrix::read_from(BufReader::new(file)).map_err(|e| match e {
            Error::Format { message, .. } => Error::format(path.display().to_string(), message),
            other => other,
        })
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a·x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Triplet score `Uᵀx + Uᵀy + xᵀy`.
pub fn score(user: &[f64], last: &[f64], next: &[f64]) -> Result<f64> {
    if user.len() != last.len() || last.len() != next.len() {
        return Err(Error::Input(format!(
            "score dimension mismatch: {}, {}, {}",
            user.len(),
            last.len(),
            next.len()
        )));
    }
    Ok(score_unchecked(user, last, next))
}

#[inline]
pub(crate) fn score_unchecked(user: &[f64], last: &[f64], next: &[f64]) -> f64 {
    dot(user, last) + dot(user, next) + dot(last, next)
}

/// `1 − cos(a, b)`; a zero vector is at distance 1 from everything.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine_distance dimension mismatch");
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    cosine_distance_from_parts(dot(a, b), na, nb)
}

pub(crate) fn cosine_distance_from_parts(ab: f64, norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 1.0;
    }
    (1.0 - ab / (norm_a * norm_b)).clamp(0.0, 2.0)
}

/// Ridge regression `W = (GᵀG + λI)⁻¹ GᵀR`.
///
/// With `λ > 0` and fewer rows than columns the equivalent dual system
/// `W = Gᵀ(GGᵀ + λI)⁻¹R` is solved instead, so the factorized matrix is
/// always the smaller of the two Gram matrices.
pub fn ridge_solve(g: &Matrix, r: &Matrix, lambda: f64) -> Result<Matrix> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Input(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    if g.rows() != r.rows() {
        return Err(Error::Input(format!(
            "ridge design has {} rows but targets have {}",
            g.rows(),
            r.rows()
        )));
    }
    if !g.is_finite() || !r.is_finite() {
        return Err(Error::Input("ridge inputs contain non-finite values".into()));
    }
    if lambda > 0.0 && g.rows() < g.cols() {
        let mut kernel = g.transpose().gram();
        add_diagonal(&mut kernel, lambda);
        let alpha = cholesky_solve(&kernel, r, true)?;
        return g.t_matmul(&alpha);
    }
    let mut normal = g.gram();
    add_diagonal(&mut normal, lambda);
    let rhs = g.t_matmul(r)?;
    cholesky_solve(&normal, &rhs, lambda > 0.0)
}

pub(crate) fn add_diagonal(m: &mut Matrix, v: f64) {
    let n = m.rows().min(m.cols());
    for i in 0..n {
        let cur = m.get(i, i);
        m.set(i, i, cur + v);
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

// Pivots at or below this fraction of the largest diagonal entry count as
// rank deficiency.
const PIVOT_TOLERANCE: f64 = 1e-13;

impl Cholesky {
    pub(crate) fn factor(a: &Matrix) -> Option<Cholesky> {
        let n = a.rows();
        debug_assert_eq!(n, a.cols());
        let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        let floor = PIVOT_TOLERANCE * max_diag.max(f64::MIN_POSITIVE);
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = a.get(j, j);
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            if !(diag > floor) {
                return None;
            }
            let pivot = diag.sqrt();
            l[j * n + j] = pivot;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / pivot;
            }
        }
        Some(Cholesky { n, l })
    }

    /// Solves `L Lᵀ x = b` in place.
    pub(crate) fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

/// Factors `a` once, retrying with a trace-scaled jitter of `1e-10` when
/// `allow_jitter` is set, and solves for every column of `b`.
pub(crate) fn cholesky_solve(a: &Matrix, b: &Matrix, allow_jitter: bool) -> Result<Matrix> {
    let n = a.rows();
    let chol = match Cholesky::factor(a) {
        Some(c) => c,
        None if allow_jitter => {
            let trace: f64 = (0..n).map(|i| a.get(i, i)).sum();
            let mut jittered = a.clone();
            add_diagonal(&mut jittered, 1e-10 * (trace / n.max(1) as f64).max(1.0));
            Cholesky::factor(&jittered).ok_or_else(|| {
                Error::Singular(format!("{n}x{n} system not positive definite after jitter"))
            })?
        }
        None => {
            return Err(Error::Singular(format!(
                "{n}x{n} normal equations are singular"
            )))
        }
    };
    let mut out = Matrix::zeros(n, b.cols());
    let mut col = vec![0.0; n];
    for c in 0..b.cols() {
        for (r, v) in col.iter_mut().enumerate() {
            *v = b.get(r, c);
        }
        chol.solve_in_place(&mut col);
        for (r, v) in col.iter().enumerate() {
            out.set(r, c, *v);
        }
    }
    Ok(out)
}
