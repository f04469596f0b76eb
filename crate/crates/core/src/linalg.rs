//! Dense linear algebra kernels sized for desk-scale problems (n + m up to a
//! few hundred): row-major matrices, cyclic Jacobi eigenvalues, LU with
//! partial pivoting, Cholesky, and power iteration.

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from rows; panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, s);
        }
        m
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
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `self * v`; panics on dimension mismatch.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "matvec dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for j in 0..self.cols {
                acc += row[j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `self^T * v` without forming the transpose.
    pub fn tr_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "tr_matvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = self.row(i);
            let vi = v[i];
            for j in 0..self.cols {
                out[j] += row[j] * vi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += aik * other.get(k, j);
                }
            }
        }
        out
    }

    /// `A * A^T`, symmetric by construction.
    pub fn gram_rows(&self) -> Mat {
        let mut out = Mat::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in i..self.rows {
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += self.get(i, k) * self.get(j, k);
                }
                out.set(i, j, acc);
                out.set(j, i, acc);
            }
        }
        out
    }

    /// `A^T * A`, symmetric by construction.
    pub fn gram_cols(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.cols);
        for i in 0..self.cols {
            for j in i..self.cols {
                let mut acc = 0.0;
                for k in 0..self.rows {
                    acc += self.get(k, i) * self.get(k, j);
                }
                out.set(i, j, acc);
                out.set(j, i, acc);
            }
        }
        out
    }

    /// Symmetric part `(A + A^T) / 2`; panics if not square.
    pub fn symmetric_part(&self) -> Mat {
        assert_eq!(self.rows, self.cols, "symmetric_part needs a square matrix");
        let mut out = Mat::zeros(self.rows, self.rows);
        for i in 0..self.rows {
            for j in 0..self.rows {
                out.set(i, j, 0.5 * (self.get(i, j) + self.get(j, i)));
            }
        }
        out
    }

    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.rows {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Mat {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub_vec(x: &[f64], y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method.
///
/// Rotations sweep the strict upper triangle until the off-diagonal Frobenius
/// norm falls below `1e-12 * max(1, ||A||_F)`, with a hard cap of 100 sweeps.
/// Returns the eigenvalues sorted ascending. Eigenvectors are never needed in
/// this crate, so they are not accumulated.
pub fn jacobi_eigenvalues(a: &Mat) -> Vec<f64> {
    assert_eq!(a.rows, a.cols, "jacobi needs a square matrix");
    let n = a.rows;
    let mut w = a.clone();
    let tol = 1e-12 * a.frobenius_norm().max(1.0);
    const MAX_SWEEPS: usize = 100;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * w.get(p, q) * w.get(p, q);
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..(n.saturating_sub(1)) {
            for q in (p + 1)..n {
                let apq = w.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = w.get(p, p);
                let aqq = w.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                // stable tangent of the rotation angle
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = w.get(k, p);
                    let akq = w.get(k, q);
                    w.set(k, p, c * akp - s * akq);
                    w.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = w.get(p, k);
                    let aqk = w.get(q, k);
                    w.set(p, k, c * apk - s * aqk);
                    w.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| w.get(i, i)).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}

/// LU factorization with partial pivoting.
pub struct LuFactor {
    lu: Mat,
    perm: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SingularMatrix;

impl std::fmt::Display for SingularMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "matrix is numerically singular")
    }
}

impl std::error::Error for SingularMatrix {}

impl LuFactor {
    pub fn new(a: &Mat) -> Result<Self, SingularMatrix> {
        assert_eq!(a.rows, a.cols, "LU needs a square matrix");
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for col in 0..n {
            let mut pivot = col;
            let mut best = lu.get(col, col).abs();
            for r in (col + 1)..n {
                let v = lu.get(r, col).abs();
                if v > best {
                    best = v;
                    pivot = r;
                }
            }
            if best < 1e-300 {
                return Err(SingularMatrix);
            }
            if pivot != col {
                for j in 0..n {
                    let tmp = lu.get(col, j);
                    lu.set(col, j, lu.get(pivot, j));
                    lu.set(pivot, j, tmp);
                }
                perm.swap(col, pivot);
            }
            let inv = 1.0 / lu.get(col, col);
            for r in (col + 1)..n {
                let f = lu.get(r, col) * inv;
                lu.set(r, col, f);
                if f != 0.0 {
                    for j in (col + 1)..n {
                        let v = lu.get(r, j) - f * lu.get(col, j);
                        lu.set(r, j, v);
                    }
                }
            }
        }
        Ok(LuFactor { lu, perm })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        assert_eq!(rhs.len(), n, "rhs dimension mismatch");
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = rhs[self.perm[i]];
            for j in 0..i {
                acc -= self.lu.get(i, j) * y[j];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in (i + 1)..n {
                acc -= self.lu.get(i, j) * y[j];
            }
            y[i] = acc / self.lu.get(i, i);
        }
        y
    }
}

/// Solves `A x = rhs` by dense LU with partial pivoting.
pub fn lu_solve(a: &Mat, rhs: &[f64]) -> Result<Vec<f64>, SingularMatrix> {
    Ok(LuFactor::new(a)?.solve(rhs))
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub struct CholeskyFactor {
    l: Mat,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotPositiveDefinite;

impl std::fmt::Display for NotPositiveDefinite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "matrix is not positive definite")
    }
}

impl std::error::Error for NotPositiveDefinite {}

impl CholeskyFactor {
    pub fn new(a: &Mat) -> Result<Self, NotPositiveDefinite> {
        assert_eq!(a.rows, a.cols, "cholesky needs a square matrix");
        let n = a.rows;
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut acc = a.get(i, j);
                for k in 0..j {
                    acc -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if acc <= 0.0 {
                        return Err(NotPositiveDefinite);
                    }
                    l.set(i, j, acc.sqrt());
                } else {
                    l.set(i, j, acc / l.get(j, j));
                }
            }
        }
        Ok(CholeskyFactor { l })
    }

    /// Solves `L y = rhs` (forward substitution).
    pub fn forward_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.l.rows;
        assert_eq!(rhs.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = rhs[i];
            for j in 0..i {
                acc -= self.l.get(i, j) * y[j];
            }
            y[i] = acc / self.l.get(i, i);
        }
        y
    }

    /// Solves `L^T x = rhs` (backward substitution).
    pub fn backward_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.l.rows;
        assert_eq!(rhs.len(), n);
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for j in (i + 1)..n {
                acc -= self.l.get(j, i) * x[j];
            }
            x[i] = acc / self.l.get(i, i);
        }
        x
    }

    /// Solves `(L L^T) x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.backward_solve(&self.forward_solve(rhs))
    }

    /// `L^T v`.
    pub fn lt_matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.l.rows;
        assert_eq!(v.len(), n);
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in i..n {
                acc += self.l.get(j, i) * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// `L v`.
    pub fn l_matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.l.rows;
        assert_eq!(v.len(), n);
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.l.get(i, j) * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn factor(&self) -> &Mat {
        &self.l
    }
}

/// Spectral radius estimate by power iteration with a deterministic start.
///
/// Intended for matrices with a real dominant eigenvalue (the `choose_k`
/// threshold matrix is similar to a symmetric positive definite one).
pub fn spectral_radius(a: &Mat, max_iters: usize, tol: f64) -> f64 {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    if n == 0 {
        return 0.0;
    }
    // deterministic start with unequal components to avoid symmetric traps
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) / (n as f64)).collect();
    let nv = norm2(&v);
    for x in &mut v {
        *x /= nv;
    }
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        let w = a.matvec(&v);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next: Vec<f64> = w.iter().map(|x| x / nw).collect();
        let new_lambda = dot(&next, &a.matvec(&next));
        let done = (new_lambda - lambda).abs() <= tol * new_lambda.abs().max(1.0);
        lambda = new_lambda;
        v = next;
        if done {
            break;
        }
    }
    lambda.abs()
}
