//! Shared low-level numerics: dense complex linear algebra at small sizes
//! (the genus is ≤ ~6 in practice), Cholesky factorization of real symmetric
//! positive-definite matrices, and Gauss quadrature rules.
//!
//! All tolerances below are absolute-relative hybrids,
//! `|a−b| ≤ atol + rtol·max(|a|,|b|)` with `atol = 1e-12`, `rtol = 1e-10`.

use num_complex::Complex64;
use thiserror::Error;

/// Default absolute tolerance for kernel-level comparisons.
pub const ATOL: f64 = 1e-12;
/// Default relative tolerance for kernel-level comparisons.
pub const RTOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum NumericError {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is singular or near-singular (pivot magnitude {pivot:.3e})")]
    SingularMatrix { pivot: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Hybrid absolute/relative closeness test used throughout the crate.
pub fn approx_eq(a: f64, b: f64, atol: f64, rtol: f64) -> bool {
    (a - b).abs() <= atol + rtol * a.abs().max(b.abs())
}

// ---------------------------------------------------------------------------
// Complex dense matrices
// ---------------------------------------------------------------------------

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Entry-wise maximum modulus.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn real_part(&self) -> RealMatrix {
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.re).collect(),
        }
    }

    pub fn imag_part(&self) -> RealMatrix {
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.im).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Solves `A·X = B` by partially pivoted Gaussian elimination.
    ///
    /// Fails with [`NumericError::SingularMatrix`] when a pivot falls below
    /// `1e-14·‖A‖_max`.
    pub fn solve(&self, rhs: &Self) -> Result<Self, NumericError> {
        if self.rows != self.cols {
            return Err(NumericError::DimensionMismatch(format!(
                "solve needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        if rhs.rows != self.rows {
            return Err(NumericError::DimensionMismatch(format!(
                "rhs has {} rows, matrix has {}",
                rhs.rows, self.rows
            )));
        }
        let n = self.rows;
        let k = rhs.cols;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let floor = 1e-14 * self.max_norm();

        for col in 0..n {
            // Partial pivoting on modulus.
            let (pivot_row, pivot_mag) = (col..n)
                .map(|r| (r, a[(r, col)].norm()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            if pivot_mag < floor || pivot_mag == 0.0 {
                return Err(NumericError::SingularMatrix { pivot: pivot_mag });
            }
            if pivot_row != col {
                for j in 0..n {
                    a.data.swap(col * n + j, pivot_row * n + j);
                }
                for j in 0..k {
                    b.data.swap(col * k + j, pivot_row * k + j);
                }
            }
            let pivot = a[(col, col)];
            for r in (col + 1)..n {
                let factor = a[(r, col)] / pivot;
                if factor.norm_sqr() == 0.0 {
                    continue;
                }
                for j in col..n {
                    let v = a[(col, j)];
                    a[(r, j)] -= factor * v;
                }
                for j in 0..k {
                    let v = b[(col, j)];
                    b[(r, j)] -= factor * v;
                }
            }
        }
        // Back substitution.
        let mut x = ComplexMatrix::zeros(n, k);
        for col in (0..n).rev() {
            for j in 0..k {
                let mut s = b[(col, j)];
                for r in (col + 1)..n {
                    s -= a[(col, r)] * x[(r, j)];
                }
                x[(col, j)] = s / a[(col, col)];
            }
        }
        Ok(x)
    }

    /// Inverse via `solve` against the identity.
    pub fn inverse(&self) -> Result<Self, NumericError> {
        self.solve(&Self::identity(self.rows))
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

// ---------------------------------------------------------------------------
// Real dense matrices and Cholesky
// ---------------------------------------------------------------------------

/// Dense real matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn symmetry_defect(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                d = d.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        d
    }
}

impl std::ops::Index<(usize, usize)> for RealMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RealMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Cholesky factorization `M = L·Lᵀ` of a real symmetric positive-definite
/// matrix. `L` is lower triangular with positive diagonal.
pub fn cholesky_spd(m: &RealMatrix) -> Result<RealMatrix, NumericError> {
    assert_eq!(m.rows(), m.cols(), "cholesky needs a square matrix");
    let n = m.rows();
    let sym_tol = 1e-12 * m.max_norm().max(1.0);
    if m.symmetry_defect() > sym_tol {
        return Err(NumericError::DimensionMismatch(format!(
            "matrix is not symmetric (defect {:.3e})",
            m.symmetry_defect()
        )));
    }
    let mut l = RealMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(NumericError::NotPositiveDefinite { index: i, pivot: s });
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solves `L·Lᵀ·x = b` given the Cholesky factor `L`.
pub fn solve_with_cholesky(l: &RealMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    assert_eq!(b.len(), n);
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[(i, k)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l[(k, i)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    y
}

// ---------------------------------------------------------------------------
// Quadrature rules
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadKind {
    /// Integrates smooth functions on [-1, 1].
    GaussLegendre,
    /// Integrates `f(t)/sqrt(1-t²)` on [-1, 1]; nodes `cos((2k-1)π/2n)`,
    /// weights all `π/n`.
    GaussChebyshev,
}

/// Nodes and weights of a Gauss rule; exact on the matching weighted
/// polynomial basis up to degree `2·order − 1`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub kind: QuadKind,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

/// Builds the quadrature rule of the given kind and order (order ≥ 1).
pub fn quadrature_nodes(kind: QuadKind, order: usize) -> QuadratureRule {
    assert!(order >= 1, "quadrature order must be at least 1");
    match kind {
        QuadKind::GaussChebyshev => {
            let n = order as f64;
            let nodes = (1..=order)
                .map(|k| ((2.0 * k as f64 - 1.0) * std::f64::consts::PI / (2.0 * n)).cos())
                .collect();
            let weights = vec![std::f64::consts::PI / n; order];
            QuadratureRule {
                kind,
                nodes,
                weights,
            }
        }
        QuadKind::GaussLegendre => {
            let (nodes, weights) = gauss_legendre(order);
            QuadratureRule {
                kind,
                nodes,
                weights,
            }
        }
    }
}

/// Legendre polynomial value and derivative at `x` by the three-term
/// recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..60 {
            let (p, dp) = legendre_pair(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x.abs();
        nodes[n - 1 - i] = x.abs();
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        let (_, dp) = legendre_pair(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}
