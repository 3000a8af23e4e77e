//! Dense matrix primitives and spectral quantities.
//!
//! Storage is column-major because nearly every consumer works column by
//! column (normalization, coherence, `Xᵗr`). Constructors accept row-major
//! input so literals in tests read naturally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default floor below which a column is considered degenerate.
pub const COLUMN_NORM_FLOOR: f64 = 1e-12;
/// Default tolerance for power iteration.
pub const SPECTRAL_TOL: f64 = 1e-10;
pub const SPECTRAL_MAX_ITER: usize = 100_000;
/// Largest Gram side for which the smallest singular value is computed
/// instead of bounded.
pub const MIN_SINGULAR_MAX_DIM: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from entries given in row-major order.
    pub fn new(rows: usize, cols: usize, row_major: Vec<f64>) -> Result<Self> {
        check_shape(rows, cols, row_major.len())?;
        let mut data = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                data[j * rows + i] = row_major[i * cols + j];
            }
        }
        Self::from_col_major(rows, cols, data)
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(rows, cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::Dimension(format!(
                    "column {j} has length {} but {rows} rows expected",
                    c.len()
                )));
            }
            data.extend_from_slice(c);
        }
        Self::from_col_major(rows, columns.len(), data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.rows.max(1)).take(self.cols)
    }

    pub fn col_major(&self) -> &[f64] {
        &self.data
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data: self.to_row_major(),
        }
    }

    /// `M v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "matvec dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                axpy(vj, self.col(j), &mut out);
            }
        }
        out
    }

    /// `Mᵗ u`.
    pub fn tr_matvec(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.rows, "tr_matvec dimension mismatch");
        self.columns().map(|c| dot(c, u)).collect()
    }

    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        Matrix {
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    /// `MᵗM`.
    pub fn gram(&self) -> Matrix {
        let k = self.cols;
        let mut g = Matrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let v = dot(self.col(a), self.col(b));
                g.data[b * k + a] = v;
                g.data[a * k + b] = v;
            }
        }
        g
    }

    pub fn sub_identity(mut self) -> Matrix {
        assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            self.data[i * self.rows + i] -= 1.0;
        }
        self
    }

    pub fn scaled_column(&mut self, j: usize, s: f64) {
        let r = self.rows;
        self.data[j * r..(j + 1) * r].iter_mut().for_each(|v| *v *= s);
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        norm2(&self.data)
    }
}

fn check_shape(rows: usize, cols: usize, len: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!("empty matrix {rows}x{cols}")));
    }
    if rows * cols != len {
        return Err(Error::Dimension(format!(
            "{rows}x{cols} matrix needs {} entries, got {len}",
            rows * cols
        )));
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators let the compiler vectorize without reassociation flags.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let k = 4 * i;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `y += a x`.
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub operator_norm: f64,
    /// Smallest singular value over the smaller side of the matrix. When the
    /// smaller side exceeds [`MIN_SINGULAR_MAX_DIM`] this is the trivial
    /// lower bound 0 and `min_singular_is_bound` is set.
    pub min_singular: f64,
    pub min_singular_is_bound: bool,
    pub iterations: usize,
    /// Relative change of the eigenvalue estimate at the last step.
    pub residual: f64,
}

/// Symmetric PSD operator on vectors of the smaller side of `M`.
fn gram_apply(m: &Matrix, v: &[f64]) -> Vec<f64> {
    if m.rows < m.cols {
        m.matvec(&m.tr_matvec(v))
    } else {
        m.tr_matvec(&m.matvec(v))
    }
}

fn start_vectors(k: usize) -> impl Iterator<Item = Vec<f64>> {
    let ones = vec![1.0; k];
    let alt: Vec<f64> = (0..k).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let basis = (0..k).map(move |i| {
        let mut e = vec![0.0; k];
        e[i] = 1.0;
        e
    });
    std::iter::once(ones).chain(std::iter::once(alt)).chain(basis)
}

struct PowerResult {
    eigenvalue: f64,
    iterations: usize,
    residual: f64,
}

/// Largest eigenvalue of a symmetric PSD operator of dimension `k`.
/// The relative change is measured against `max(eigenvalue, floor)`.
fn power_iterate(
    k: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    tol: f64,
    max_iter: usize,
    floor: f64,
) -> Result<PowerResult> {
    let mut v = None;
    for mut s in start_vectors(k) {
        let ns = norm2(&s);
        s.iter_mut().for_each(|x| *x /= ns);
        if norm2(&apply(&s)) > 0.0 {
            v = Some(s);
            break;
        }
    }
    let Some(mut v) = v else {
        // Operator annihilates a basis: it is zero.
        return Ok(PowerResult {
            eigenvalue: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    };

    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let w = apply(&v);
        let next = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return Ok(PowerResult {
                eigenvalue: 0.0,
                iterations: it,
                residual: 0.0,
            });
        }
        let denom = next.max(floor);
        residual = if denom > 0.0 {
            (next - lambda).abs() / denom
        } else {
            0.0
        };
        lambda = next;
        v = w.into_iter().map(|x| x / nw).collect();
        if residual <= tol && it > 1 {
            return Ok(PowerResult {
                eigenvalue: lambda,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::SpectralNonConvergence {
        iterations: max_iter,
        estimate: lambda.max(0.0).sqrt(),
        residual,
        last_iterate: v,
    })
}

/// Operator norm and smallest singular value by power iteration on the
/// smaller Gram matrix, from the normalized all-ones start vector.
pub fn spectral_norm(m: &Matrix, tol: f64, max_iter: usize) -> Result<SpectralReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be > 0, got {tol}")));
    }
    let k = m.rows.min(m.cols);
    let top = power_iterate(k, |v| gram_apply(m, v), tol, max_iter, 0.0)?;
    let lmax = top.eigenvalue.max(0.0);
    let operator_norm = lmax.sqrt();

    let (min_singular, min_singular_is_bound) = if k > MIN_SINGULAR_MAX_DIM {
        (0.0, true)
    } else if lmax == 0.0 {
        (0.0, false)
    } else {
        // Largest eigenvalue of lmax·I − MᵗM is lmax − λ_min.
        let shifted = power_iterate(
            k,
            |v| {
                let g = gram_apply(m, v);
                v.iter().zip(&g).map(|(a, b)| lmax * a - b).collect()
            },
            tol,
            max_iter,
            lmax,
        )?;
        let lmin = (lmax - shifted.eigenvalue).clamp(0.0, lmax);
        (lmin.sqrt(), false)
    };

    Ok(SpectralReport {
        operator_norm,
        min_singular: min_singular.min(operator_norm),
        min_singular_is_bound,
        iterations: top.iterations,
        residual: top.residual,
    })
}

pub fn operator_norm(m: &Matrix) -> Result<f64> {
    let k = m.rows.min(m.cols);
    let top = power_iterate(k, |v| gram_apply(m, v), SPECTRAL_TOL, SPECTRAL_MAX_ITER, 0.0)?;
    Ok(top.eigenvalue.max(0.0).sqrt())
}

/// `‖MᵗM − I‖`.
pub fn gram_deviation(m: &Matrix) -> Result<f64> {
    operator_norm(&m.gram().sub_identity())
}

/// Returns a copy with unit-norm columns, or the first column whose norm is
/// at or below `floor`.
pub fn normalize_columns_with_floor(m: &Matrix, floor: f64) -> Result<Matrix> {
    let mut out = m.clone();
    for j in 0..m.cols {
        let nrm = norm2(m.col(j));
        if !(nrm > floor) {
            return Err(Error::DegenerateColumn {
                index: j,
                norm: nrm,
                floor,
            });
        }
        out.scaled_column(j, 1.0 / nrm);
    }
    Ok(out)
}

pub fn normalize_columns(m: &Matrix) -> Result<Matrix> {
    normalize_columns_with_floor(m, COLUMN_NORM_FLOOR)
}

/// Mutual coherence: largest absolute inner product between distinct
/// normalized columns.
pub fn coherence(m: &Matrix) -> Result<f64> {
    if m.cols < 2 {
        return Err(Error::Dimension(format!(
            "coherence needs at least 2 columns, got {}",
            m.cols
        )));
    }
    let mut norms = Vec::with_capacity(m.cols);
    for (j, c) in m.columns().enumerate() {
        let nrm = norm2(c);
        if nrm == 0.0 {
            return Err(Error::DegenerateColumn {
                index: j,
                norm: 0.0,
                floor: 0.0,
            });
        }
        norms.push(nrm);
    }
    let mut mu = 0.0f64;
    for a in 0..m.cols {
        for b in a + 1..m.cols {
            let v = (dot(m.col(a), m.col(b)) / (norms[a] * norms[b])).abs();
            mu = mu.max(v);
        }
    }
    Ok(mu.min(1.0))
}

/// Lower-triangular Cholesky factor, column-major.
fn cholesky(g: &Matrix) -> Result<Vec<f64>> {
    let n = g.rows;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = g.get(j, j);
        for k in 0..j {
            d -= l[k * n + j] * l[k * n + j];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = g.get(i, j);
            for k in 0..j {
                s -= l[k * n + i] * l[k * n + j];
            }
            l[j * n + i] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `G x = b` for symmetric positive definite `G`.
pub fn solve_gram_system(g: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = g.rows;
    if g.cols != n || b.len() != n {
        return Err(Error::Dimension(format!(
            "gram system {}x{} with rhs of length {}",
            g.rows,
            g.cols,
            b.len()
        )));
    }
    let l = cholesky(g)?;
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    Ok(y)
}
