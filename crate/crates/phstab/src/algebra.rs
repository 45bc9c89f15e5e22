//! Small dense complex matrix kernel.
//!
//! Everything here targets matrices of dimension at most 64 (the systems we
//! care about have n <= 4), so the O(n^3) dense algorithms below are the
//! right tool: cyclic Jacobi rotations for Hermitian eigenvalues, column
//! pivoted QR for numerical rank, Gauss-Jordan for small inverses.
//!
//! The module also hosts the boundary-matrix algebra for port-Hamiltonian
//! boundary conditions: with `R = [P1 -P1; I I]` one has the closed form
//! `R^-1 = 1/2 [P1^-1 I; -P1^-1 I]`, the reduced boundary matrix
//! `W_B = W~_B R^-1` and the dissipativity indicator `W_B Sigma W_B^*`
//! with `Sigma = [0 I; I 0]`. Note that `W_B` here carries the global
//! factor 1/2 coming from `R^-1`; published variants sometimes drop that
//! factor, which rescales `W_B Sigma W_B^*` by a positive constant and
//! changes none of the rank or definiteness conclusions.

use num_complex::Complex64;
use thiserror::Error;

/// Hard cap on matrix dimensions; guards the dense O(n^3) kernels.
pub const MAX_DIM: usize = 64;

/// Default relative tolerance for definiteness classification.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix dimensions must be in 1..={MAX_DIM}, got {rows}x{cols}")]
    BadDimensions { rows: usize, cols: usize },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error(
        "matrix is not Hermitian: off-Hermitian deviation {deviation:.3e} exceeds {tolerance:.3e}"
    )]
    NotHermitian { deviation: f64, tolerance: f64 },
    #[error("matrix is singular or too ill-conditioned (condition estimate {cond:.3e})")]
    Singular { cond: f64 },
    #[error("Jacobi iteration failed to converge in {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("rank deficiency: expected rank {expected}, got {got}")]
    RankDeficient { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, AlgebraError>;

/// Dense row-major complex matrix. Real systems simply carry zero
/// imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM {
            return Err(AlgebraError::BadDimensions { rows, cols });
        }
        Ok(Mat {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Mat::zeros(n, n)?;
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|row| row.len()).unwrap_or(0);
        let mut m = Mat::zeros(r, c)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(AlgebraError::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(AlgebraError::NonFinite);
                }
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let conv: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|row| row.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Mat::from_rows(&conv)
    }

    /// Build from a flat row-major slice (the config wire format).
    pub fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(AlgebraError::DimensionMismatch(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        let mut m = Mat::zeros(rows, cols)?;
        for (k, &x) in data.iter().enumerate() {
            if !x.is_finite() {
                return Err(AlgebraError::NonFinite);
            }
            m.data[k] = Complex64::new(x, 0.0);
        }
        Ok(m)
    }

    pub fn diag_real(entries: &[f64]) -> Result<Self> {
        let mut m = Mat::zeros(entries.len(), entries.len())?;
        for (i, &x) in entries.iter().enumerate() {
            m[(i, i)] = Complex64::new(x, 0.0);
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn adjoint(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows).expect("dims already validated");
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn mul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(AlgebraError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, other.cols)?;
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(AlgebraError::DimensionMismatch("add shapes differ".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(AlgebraError::DimensionMismatch("sub shapes differ".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Mat {
        let mut out = self.clone();
        for a in out.data.iter_mut() {
            *a *= c;
        }
        out
    }

    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(AlgebraError::DimensionMismatch(format!(
                "matvec: {}x{} times vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..self.cols {
                acc += self[(i, j)] * x[j];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Spectral norm via the Hermitian eigenvalues of `m* m`.
    pub fn norm_2(&self) -> Result<f64> {
        let gram = self.adjoint().mul(self)?;
        let eigs = hermitian_eigenvalues(&gram)?;
        Ok(eigs.last().copied().unwrap_or(0.0).max(0.0).sqrt())
    }

    /// Hermitian part (m + m*)/2.
    pub fn hermitian_part(&self) -> Result<Mat> {
        if !self.is_square() {
            return Err(AlgebraError::NonSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(self.add(&self.adjoint())?.scale(0.5))
    }

    /// Off-Hermitian deviation ||m - m*||_F / 2.
    pub fn hermitian_deviation(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(AlgebraError::NonSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(self.sub(&self.adjoint())?.norm_fro() / 2.0)
    }

    pub fn trace(&self) -> Complex64 {
        let mut t = Complex64::new(0.0, 0.0);
        for i in 0..self.rows.min(self.cols) {
            t += self[(i, i)];
        }
        t
    }

    /// Inverse by Gauss-Jordan with partial pivoting.
    pub fn inverse(&self) -> Result<Mat> {
        if !self.is_square() {
            return Err(AlgebraError::NonSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::identity(n)?;
        for col in 0..n {
            let mut piv = col;
            let mut best = a[(col, col)].norm();
            for r in col + 1..n {
                if a[(r, col)].norm() > best {
                    best = a[(r, col)].norm();
                    piv = r;
                }
            }
            if best < f64::EPSILON * self.norm_fro().max(1.0) * 16.0 {
                return Err(AlgebraError::Singular {
                    cond: f64::INFINITY,
                });
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(col * n + j, piv * n + j);
                    inv.data.swap(col * n + j, piv * n + j);
                }
            }
            let d = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= d;
                inv[(col, j)] /= d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let ac = a[(col, j)];
                    let ic = inv[(col, j)];
                    a[(r, j)] -= f * ac;
                    inv[(r, j)] -= f * ic;
                }
            }
        }
        Ok(inv)
    }

    /// Horizontal split into left/right halves of `k` and `cols-k` columns.
    pub fn split_cols(&self, k: usize) -> Result<(Mat, Mat)> {
        if k == 0 || k >= self.cols {
            return Err(AlgebraError::DimensionMismatch(format!(
                "cannot split {} columns at {k}",
                self.cols
            )));
        }
        let mut left = Mat::zeros(self.rows, k)?;
        let mut right = Mat::zeros(self.rows, self.cols - k)?;
        for i in 0..self.rows {
            for j in 0..k {
                left[(i, j)] = self[(i, j)];
            }
            for j in k..self.cols {
                right[(i, j - k)] = self[(i, j)];
            }
        }
        Ok((left, right))
    }

    pub fn hcat(left: &Mat, right: &Mat) -> Result<Mat> {
        if left.rows != right.rows {
            return Err(AlgebraError::DimensionMismatch("hcat row mismatch".into()));
        }
        let mut out = Mat::zeros(left.rows, left.cols + right.cols)?;
        for i in 0..left.rows {
            for j in 0..left.cols {
                out[(i, j)] = left[(i, j)];
            }
            for j in 0..right.cols {
                out[(i, left.cols + j)] = right[(i, j)];
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        let c = self.cols;
        &mut self.data[i * c + j]
    }
}

/// Definiteness classification of a Hermitian matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemidefinite,
    Indefinite,
    NegativeSemidefinite,
    NegativeDefinite,
}

/// Outcome of [`psd_classify`]: the classification together with the extreme
/// eigenvalues it was derived from.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PsdVerdict {
    pub classification: Definiteness,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Absolute threshold `tol * max(1, ||m||)` the eigenvalues were compared
    /// against.
    pub threshold: f64,
}

impl PsdVerdict {
    pub fn is_positive_semidefinite(&self) -> bool {
        self.min_eigenvalue > -self.threshold
    }

    pub fn is_negative_semidefinite(&self) -> bool {
        self.max_eigenvalue < self.threshold
    }
}

/// Eigenvalues of a Hermitian matrix, ascending, by cyclic Jacobi rotations.
///
/// The input must be Hermitian within `1e-12 * ||m||_F`; it is symmetrized
/// before iterating. Iteration runs until the off-diagonal Frobenius norm
/// drops below `1e-13 * ||m||_F`.
pub fn hermitian_eigenvalues(m: &Mat) -> Result<Vec<f64>> {
    let (vals, _) = hermitian_eigen(m, false)?;
    Ok(vals)
}

/// Eigenvalues (ascending) and, when requested, the matching orthonormal
/// eigenvectors as columns.
pub fn hermitian_eigen(m: &Mat, want_vectors: bool) -> Result<(Vec<f64>, Option<Mat>)> {
    if !m.is_square() {
        return Err(AlgebraError::NonSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let n = m.rows;
    let scale = m.norm_fro();
    let herm_tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let dev = m.hermitian_deviation()?;
    if dev > herm_tol {
        return Err(AlgebraError::NotHermitian {
            deviation: dev,
            tolerance: herm_tol,
        });
    }
    let mut a = m.hermitian_part()?;
    let mut vecs = if want_vectors {
        Some(Mat::identity(n)?)
    } else {
        None
    };

    let target = 1e-13 * scale;
    let max_sweeps = 64;
    let mut sweeps = 0;
    while off_diag_norm(&a) > target && sweeps < max_sweeps {
        for p in 0..n {
            for q in p + 1..n {
                jacobi_rotate(&mut a, vecs.as_mut(), p, q);
            }
        }
        sweeps += 1;
    }
    if off_diag_norm(&a) > target && scale > 0.0 {
        return Err(AlgebraError::NoConvergence { sweeps });
    }

    let mut idx: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    idx.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("finite eigenvalues"));
    let vals: Vec<f64> = idx.iter().map(|&i| diag[i]).collect();
    let sorted_vecs = vecs.map(|v| {
        let mut out = Mat::zeros(n, n).expect("validated dims");
        for (new_col, &old_col) in idx.iter().enumerate() {
            for r in 0..n {
                out[(r, new_col)] = v[(r, old_col)];
            }
        }
        out
    });

    // eigenvalue sum must reproduce the trace (1e-10 * ||m|| contract)
    let tr = a.trace().re;
    debug_assert!(
        (vals.iter().sum::<f64>() - tr).abs() <= 1e-10 * scale.max(1.0),
        "eigenvalue sum drifted from trace"
    );
    Ok((vals, sorted_vecs))
}

fn off_diag_norm(a: &Mat) -> f64 {
    let n = a.rows;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// One complex Jacobi rotation annihilating `a[(p,q)]`.
///
/// The pivot block `[a_pp a_pq; a_qp a_qq]` is phase-reduced to a real
/// symmetric 2x2 and rotated by the classical Rutishauser formulas; the
/// combined unitary is applied to the full matrix from both sides.
fn jacobi_rotate(a: &mut Mat, vecs: Option<&mut Mat>, p: usize, q: usize) {
    let apq = a[(p, q)];
    let abs = apq.norm();
    if abs == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let phase = apq / abs; // e^{i theta}
    let tau = (aqq - app) / (2.0 * abs);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // J = [[c, s*phase], [-s*conj(phase), c]] is unitary; apply A <- J* A J.
    let j11 = Complex64::new(c, 0.0);
    let j12 = phase * s;
    let j21 = -phase.conj() * s;
    let j22 = Complex64::new(c, 0.0);

    let n = a.rows;
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * j11 + akq * j21;
        a[(k, q)] = akp * j12 + akq * j22;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = j11.conj() * apk + j21.conj() * aqk;
        a[(q, k)] = j12.conj() * apk + j22.conj() * aqk;
    }
    // keep the pivot exactly Hermitian against roundoff
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);

    if let Some(v) = vecs {
        for k in 0..n {
            let vkp = v[(k, p)];
            let vkq = v[(k, q)];
            v[(k, p)] = vkp * j11 + vkq * j21;
            v[(k, q)] = vkp * j12 + vkq * j22;
        }
    }
}

/// Classify (semi)definiteness with a relative tolerance band around zero.
///
/// Positive definite requires `lambda_min > tol * max(1, ||m||)`; positive
/// semidefinite `lambda_min > -tol * max(1, ||m||)`; mirrored rules on the
/// negative side; anything else is indefinite. The zero matrix classifies as
/// positive semidefinite (it also satisfies the negative-semidefinite rule;
/// use the verdict accessors when that distinction matters).
pub fn psd_classify(m: &Mat, tol: f64) -> Result<PsdVerdict> {
    assert!(tol > 0.0, "psd_classify requires tol > 0");
    let eigs = hermitian_eigenvalues(m)?;
    let lo = *eigs.first().expect("non-empty");
    let hi = *eigs.last().expect("non-empty");
    let threshold = tol * m.norm_fro().max(1.0);
    let classification = if lo > threshold {
        Definiteness::PositiveDefinite
    } else if hi < -threshold {
        Definiteness::NegativeDefinite
    } else if lo > -threshold {
        Definiteness::PositiveSemidefinite
    } else if hi < threshold {
        Definiteness::NegativeSemidefinite
    } else {
        Definiteness::Indefinite
    };
    Ok(PsdVerdict {
        classification,
        min_eigenvalue: lo,
        max_eigenvalue: hi,
        threshold,
    })
}

/// Numerical rank via column-pivoted Householder triangularization.
///
/// Diagonal magnitudes of R below `tol * |R_00|` (the largest, a proxy for
/// the top singular value) count as zero.
pub fn rank(m: &Mat, tol: f64) -> usize {
    assert!(tol > 0.0, "rank requires tol > 0");
    let rows = m.rows;
    let cols = m.cols;
    let mut a = m.clone();
    let kmax = rows.min(cols);
    let mut rdiag = Vec::with_capacity(kmax);

    for k in 0..kmax {
        // pivot: column with the largest remaining norm
        let mut best_col = k;
        let mut best_norm = 0.0;
        for j in k..cols {
            let nj: f64 = (k..rows).map(|i| a[(i, j)].norm_sqr()).sum();
            if nj > best_norm {
                best_norm = nj;
                best_col = j;
            }
        }
        if best_col != k {
            for i in 0..rows {
                let tmp = a[(i, k)];
                a[(i, k)] = a[(i, best_col)];
                a[(i, best_col)] = tmp;
            }
        }
        let col_norm = best_norm.sqrt();
        rdiag.push(col_norm);
        if col_norm == 0.0 {
            continue;
        }
        // Householder vector v = x + sign(x0) ||x|| e1
        let x0 = a[(k, k)];
        let sign = if x0.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x0 / x0.norm()
        };
        let alpha = -sign * col_norm;
        let mut v: Vec<Complex64> = (k..rows).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm_sqr: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm_sqr == 0.0 {
            continue;
        }
        for j in k..cols {
            let dot: Complex64 = (0..v.len()).map(|i| v[i].conj() * a[(k + i, j)]).sum();
            let f = dot * (2.0 / vnorm_sqr);
            for i in 0..v.len() {
                let vi = v[i];
                a[(k + i, j)] -= f * vi;
            }
        }
    }

    let top = rdiag.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    rdiag.iter().filter(|&&d| d > tol * top).count()
}

/// Closed-form inverse of the trace-coupling block matrix `R = [P1 -P1; I I]`.
///
/// Requires `p1` Hermitian and invertible; the result is verified by
/// `R R^-1 = I` to 1e-12.
pub fn boundary_block_inverse(p1: &Mat) -> Result<Mat> {
    if !p1.is_square() {
        return Err(AlgebraError::NonSquare {
            rows: p1.rows,
            cols: p1.cols,
        });
    }
    let n = p1.rows;
    let scale = p1.norm_fro().max(f64::MIN_POSITIVE);
    let dev = p1.hermitian_deviation()?;
    if dev > 1e-12 * scale {
        return Err(AlgebraError::NotHermitian {
            deviation: dev,
            tolerance: 1e-12 * scale,
        });
    }
    let eigs = hermitian_eigenvalues(p1)?;
    let abs_min = eigs.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    let abs_max = eigs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let cond = if abs_min > 0.0 {
        abs_max / abs_min
    } else {
        f64::INFINITY
    };
    if !(cond < 1e12) {
        return Err(AlgebraError::Singular { cond });
    }
    let p1_inv = p1.inverse()?;

    let mut out = Mat::zeros(2 * n, 2 * n)?;
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = p1_inv[(i, j)] * 0.5;
            out[(n + i, j)] = -p1_inv[(i, j)] * 0.5;
        }
        out[(i, n + i)] = Complex64::new(0.5, 0.0);
        out[(n + i, n + i)] = Complex64::new(0.5, 0.0);
    }

    // contract check: R * R^-1 = I to 1e-12
    let mut r = Mat::zeros(2 * n, 2 * n)?;
    for i in 0..n {
        for j in 0..n {
            r[(i, j)] = p1[(i, j)];
            r[(i, n + j)] = -p1[(i, j)];
        }
        r[(n + i, i)] = Complex64::new(1.0, 0.0);
        r[(n + i, n + i)] = Complex64::new(1.0, 0.0);
    }
    let resid = r.mul(&out)?.sub(&Mat::identity(2 * n)?)?.max_abs();
    if resid > 1e-12 * scale.max(1.0) {
        return Err(AlgebraError::Singular { cond });
    }
    Ok(out)
}

/// Reduced boundary matrix `W_B = W~_B [P1 -P1; I I]^-1`.
///
/// `wtilde` is n x 2n in the canonical trace order (b, a).
pub fn compute_wb(wtilde: &Mat, p1: &Mat) -> Result<Mat> {
    let n = p1.rows;
    if wtilde.rows != n || wtilde.cols != 2 * n {
        return Err(AlgebraError::DimensionMismatch(format!(
            "boundary matrix must be {n}x{}, got {}x{}",
            2 * n,
            wtilde.rows,
            wtilde.cols
        )));
    }
    let rinv = boundary_block_inverse(p1)?;
    wtilde.mul(&rinv)
}

/// Hermitian product `W_B Sigma W_B^*` with `Sigma = [0 I; I 0]`.
pub fn wb_sigma_wbstar(wb: &Mat) -> Result<Mat> {
    if !wb.cols.is_multiple_of(2) {
        return Err(AlgebraError::DimensionMismatch(format!(
            "W_B must have an even column count, got {}",
            wb.cols
        )));
    }
    let (u, v) = wb.split_cols(wb.cols / 2)?;
    let out = u.mul(&v.adjoint())?.add(&v.mul(&u.adjoint())?)?;
    out.hermitian_part()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sigma4() -> Mat {
        Mat::from_real_rows(&[
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn eigenvalues_identity() {
        let m = Mat::identity(3).unwrap();
        let e = hermitian_eigenvalues(&m).unwrap();
        assert_eq!(e.len(), 3);
        for v in e {
            assert!((v - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn eigenvalues_sigma_are_plus_minus_one() {
        let e = hermitian_eigenvalues(&sigma4()).unwrap();
        let expected = [-1.0, -1.0, 1.0, 1.0];
        for (got, want) in e.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn eigenvalues_2x2_hand_computed() {
        // characteristic polynomial (2-l)^2 - 1 => l in {1, 3}
        let m = Mat::from_real_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = hermitian_eigenvalues(&m).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-12);
        assert!((e[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_complex_hermitian() {
        // [[2, i],[-i, 2]] has eigenvalues 1 and 3
        let m = Mat::from_rows(&[
            vec![c(2.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, -1.0), c(2.0, 0.0)],
        ])
        .unwrap();
        let e = hermitian_eigenvalues(&m).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-12);
        assert!((e[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let m = Mat::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            hermitian_eigenvalues(&m),
            Err(AlgebraError::NotHermitian { .. })
        ));
    }

    #[test]
    fn eigenvectors_diagonalize() {
        let m = Mat::from_rows(&[
            vec![c(1.0, 0.0), c(0.5, 0.25), c(0.0, -1.0)],
            vec![c(0.5, -0.25), c(-2.0, 0.0), c(0.75, 0.0)],
            vec![c(0.0, 1.0), c(0.75, 0.0), c(0.5, 0.0)],
        ])
        .unwrap();
        let (vals, vecs) = hermitian_eigen(&m, true).unwrap();
        let v = vecs.unwrap();
        // V* V = I and M V = V diag(vals)
        let vtv = v.adjoint().mul(&v).unwrap();
        assert!(vtv.sub(&Mat::identity(3).unwrap()).unwrap().max_abs() < 1e-11);
        let mv = m.hermitian_part().unwrap().mul(&v).unwrap();
        for j in 0..3 {
            for i in 0..3 {
                let want = v[(i, j)] * vals[j];
                assert!((mv[(i, j)] - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn psd_string_damper_matrix() {
        // diag(2k, 0) with k = 1: PSD with min eigenvalue 0
        let m = Mat::diag_real(&[2.0, 0.0]).unwrap();
        let v = psd_classify(&m, DEFAULT_PSD_TOL).unwrap();
        assert_eq!(v.classification, Definiteness::PositiveSemidefinite);
        assert!(v.min_eigenvalue.abs() < 1e-12);
        assert!((v.max_eigenvalue - 2.0).abs() < 1e-12);
    }

    #[test]
    fn psd_sigma_indefinite() {
        let v = psd_classify(&sigma4(), DEFAULT_PSD_TOL).unwrap();
        assert_eq!(v.classification, Definiteness::Indefinite);
    }

    #[test]
    fn psd_timoshenko_pattern() {
        let m = Mat::diag_real(&[0.0, 0.0, 1.0, 1.0]).unwrap();
        let v = psd_classify(&m, DEFAULT_PSD_TOL).unwrap();
        assert_eq!(v.classification, Definiteness::PositiveSemidefinite);
    }

    #[test]
    fn psd_zero_matrix_is_both_semidefinite() {
        let v = psd_classify(&Mat::zeros(3, 3).unwrap(), DEFAULT_PSD_TOL).unwrap();
        assert!(v.is_positive_semidefinite());
        assert!(v.is_negative_semidefinite());
        assert_eq!(v.classification, Definiteness::PositiveSemidefinite);
    }

    #[test]
    fn rank_examples() {
        // string boundary matrix with k = 1
        let w = Mat::from_real_rows(&[vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(rank(&w, 1e-10), 2);
        assert_eq!(rank(&Mat::zeros(2, 4).unwrap(), 1e-10), 0);
        // Timoshenko boundary matrix: rows touch disjoint pivot columns => rank 4
        let wt = timoshenko_wtilde(1.0, 1.0);
        assert_eq!(rank(&wt, 1e-10), 4);
    }

    fn timoshenko_wtilde(a1: f64, a2: f64) -> Mat {
        Mat::from_real_rows(&[
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            vec![1.0, a1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, a2, 0.0, 0.0, 0.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn block_inverse_scalar() {
        let p1 = Mat::diag_real(&[1.0]).unwrap();
        let r = boundary_block_inverse(&p1).unwrap();
        let want = Mat::from_real_rows(&[vec![0.5, 0.5], vec![-0.5, 0.5]]).unwrap();
        assert!(r.sub(&want).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn block_inverse_swap_p1() {
        let p1 = Mat::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let r = boundary_block_inverse(&p1).unwrap();
        let want = Mat::from_real_rows(&[
            vec![0.0, 0.5, 0.5, 0.0],
            vec![0.5, 0.0, 0.0, 0.5],
            vec![0.0, -0.5, 0.5, 0.0],
            vec![-0.5, 0.0, 0.0, 0.5],
        ])
        .unwrap();
        assert!(r.sub(&want).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn block_inverse_rejects_singular() {
        let p1 = Mat::from_real_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(boundary_block_inverse(&p1).is_err());
    }

    #[test]
    fn wb_string_example() {
        // k = 1 string: W_B = 1/2 [[1,1,1,1],[0,-1,1,0]]
        let p1 = Mat::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let w = Mat::from_real_rows(&[vec![1.0, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]]).unwrap();
        let wb = compute_wb(&w, &p1).unwrap();
        let want =
            Mat::from_real_rows(&[vec![0.5, 0.5, 0.5, 0.5], vec![0.0, -0.5, 0.5, 0.0]]).unwrap();
        assert!(wb.sub(&want).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn wb_scalar_examples() {
        let p1 = Mat::diag_real(&[1.0]).unwrap();
        let wb = compute_wb(&Mat::from_real_rows(&[vec![0.0, 1.0]]).unwrap(), &p1).unwrap();
        assert!((wb[(0, 0)].re + 0.5).abs() < 1e-14 && (wb[(0, 1)].re - 0.5).abs() < 1e-14);
        let wb = compute_wb(&Mat::from_real_rows(&[vec![1.0, 0.0]]).unwrap(), &p1).unwrap();
        assert!((wb[(0, 0)].re - 0.5).abs() < 1e-14 && (wb[(0, 1)].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn wb_sigma_string() {
        // with the 1/2 convention the string indicator is [[k, 0], [0, 0]]
        let p1 = Mat::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        for k in [0.25, 0.5, 1.0] {
            let w =
                Mat::from_real_rows(&[vec![k, 1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]]).unwrap();
            let wb = compute_wb(&w, &p1).unwrap();
            let s = wb_sigma_wbstar(&wb).unwrap();
            assert!((s[(0, 0)].re - k).abs() < 1e-12);
            for (i, j) in [(0, 1), (1, 0), (1, 1)] {
                assert!(s[(i, j)].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn wb_sigma_zero() {
        let z = Mat::zeros(2, 4).unwrap();
        assert!(wb_sigma_wbstar(&z).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn wb_timoshenko_full_matrix() {
        // hand computation of W~_B R^-1 for the 4x4 beam system
        let p1 = Mat::from_real_rows(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        let (a1, a2) = (1.0, 1.0);
        let wb = compute_wb(&timoshenko_wtilde(a1, a2), &p1).unwrap();
        let want = Mat::from_real_rows(&[
            vec![-0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, -0.5, 0.0, 0.0, 0.0, 0.0, 0.5],
            vec![0.5 * a1, 0.5, 0.0, 0.0, 0.5, 0.5 * a1, 0.0, 0.0],
            vec![0.0, 0.0, 0.5 * a2, 0.5, 0.0, 0.0, 0.5, 0.5 * a2],
        ])
        .unwrap();
        assert!(wb.sub(&want).unwrap().max_abs() < 1e-12);
        assert_eq!(rank(&wb, 1e-10), 4);
    }

    #[test]
    fn wb_sigma_timoshenko_diagonal() {
        let p1 = Mat::from_real_rows(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        let (a1, a2) = (1.0, 1.0);
        let wb = compute_wb(&timoshenko_wtilde(a1, a2), &p1).unwrap();
        let s = wb_sigma_wbstar(&wb).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(s[(i, j)].norm() < 1e-12);
                }
            }
        }
        assert!(s[(0, 0)].norm() < 1e-12);
        assert!(s[(1, 1)].norm() < 1e-12);
        assert!((s[(2, 2)].re - a1).abs() < 1e-12);
        assert!((s[(3, 3)].re - a2).abs() < 1e-12);
        let v = psd_classify(&s, DEFAULT_PSD_TOL).unwrap();
        assert!(v.is_positive_semidefinite());
    }

    // ---- property tests ----

    fn random_hermitian(n: usize) -> impl Strategy<Value = Mat> {
        proptest::collection::vec(-1.0f64..1.0, n * n * 2).prop_map(move |raw| {
            let mut m = Mat::zeros(n, n).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let re = raw[2 * (i * n + j)];
                    let im = raw[2 * (i * n + j) + 1];
                    m[(i, j)] = c(re, im);
                }
            }
            m.hermitian_part().unwrap()
        })
    }

    proptest! {
        #[test]
        fn eig_trace_and_frobenius_match(m in (1usize..6).prop_flat_map(random_hermitian)) {
            let e = hermitian_eigenvalues(&m).unwrap();
            let tr = m.trace().re;
            prop_assert!((e.iter().sum::<f64>() - tr).abs() <= 1e-9 * m.norm_fro().max(1.0));
            let fro = m.norm_fro();
            let efro = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((fro - efro).abs() <= 1e-9 * fro.max(1.0));
        }

        #[test]
        fn wb_times_r_recovers_wtilde(
            herm in (1usize..5).prop_flat_map(random_hermitian),
            raw in proptest::collection::vec(-2.0f64..2.0, 40),
        ) {
            // P1: random Hermitian shifted to be safely invertible (adding
            // ||m|| + 1/2 times the identity keeps it Hermitian and pushes
            // every eigenvalue above 1/2); W~_B random n x 2n
            let n = herm.rows();
            let shift = Mat::identity(n).unwrap().scale(herm.norm_fro() + 0.5);
            let p1 = herm.add(&shift).unwrap();
            let mut w = Mat::zeros(n, 2 * n).unwrap();
            for i in 0..n {
                for j in 0..2 * n {
                    w[(i, j)] = c(raw[(i * 2 * n + j) % raw.len()], 0.0);
                }
            }
            let wb = compute_wb(&w, &p1).unwrap();
            // rebuild R and check W_B R = W~_B
            let mut r = Mat::zeros(2 * n, 2 * n).unwrap();
            for i in 0..n {
                for j in 0..n {
                    r[(i, j)] = p1[(i, j)];
                    r[(i, n + j)] = -p1[(i, j)];
                }
                r[(n + i, i)] = c(1.0, 0.0);
                r[(n + i, n + i)] = c(1.0, 0.0);
            }
            let back = wb.mul(&r).unwrap();
            prop_assert!(back.sub(&w).unwrap().max_abs() <= 1e-11 * w.norm_fro().max(1.0));
            // multiplication by the invertible R preserves rank
            prop_assert_eq!(rank(&w, 1e-9), rank(&wb, 1e-9));
        }

        #[test]
        fn psd_classification_scale_invariant(
            spec in proptest::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0, -1.0f64..-0.01], 2..5),
            log_c in -6.0f64..6.0,
        ) {
            // well separated spectrum, scaled so the relative rule stays active
            let base = Mat::diag_real(&spec.iter().map(|x| x * 10.0).collect::<Vec<_>>()).unwrap();
            let c_scale = 10f64.powf(log_c);
            let v1 = psd_classify(&base, DEFAULT_PSD_TOL).unwrap();
            let v2 = psd_classify(&base.scale(c_scale), DEFAULT_PSD_TOL).unwrap();
            prop_assert_eq!(v1.classification, v2.classification);
        }
    }
}
