//! Small dense linear-algebra helpers with diagonal equilibration.
//!
//! State vectors mix metres, radians and seconds, so covariance entries
//! span 20+ orders of magnitude. Every factorization here is carried out
//! on the correlation-scaled matrix `D^-1/2 A D^-1/2`, which leaves the
//! Cholesky factor unchanged in exact arithmetic but keeps jitter and
//! pivot tolerances meaningful for every state component.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const JITTER_BASE: f64 = 1e-12;
const JITTER_ATTEMPTS: usize = 6;

/// Replaces `a` with `(a + aᵀ) / 2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
}

/// Largest absolute entry of `a − aᵀ`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Ratio of extreme eigenvalue magnitudes of the equilibrated matrix.
pub fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    let (scaled, _) = equilibrate(a);
    let eig = scaled.symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Returns `(D^-1/2 a D^-1/2, d)` with `d_i = sqrt(a_ii)` (or 1 when the
/// diagonal entry is not positive).
fn equilibrate(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = a.nrows();
    let d = DVector::from_fn(n, |i, _| {
        let v = a[(i, i)];
        if v > 0.0 {
            v.sqrt()
        } else {
            1.0
        }
    });
    let scaled = DMatrix::from_fn(n, n, |i, j| a[(i, j)] / (d[i] * d[j]));
    (scaled, d)
}

fn cholesky_scaled(c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = c.clone().cholesky() {
        return Some(ch.l());
    }
    let n = c.nrows();
    let mut jitter = JITTER_BASE * c.trace().max(n as f64 * f64::EPSILON);
    for _ in 0..JITTER_ATTEMPTS {
        let mut cj = c.clone();
        for i in 0..n {
            cj[(i, i)] += jitter;
        }
        if let Some(ch) = cj.cholesky() {
            return Some(ch.l());
        }
        jitter *= 2.0;
    }
    None
}

/// Lower-triangular square root `L` with `L Lᵀ ≈ a` for a symmetric PSD
/// matrix.
///
/// Components with exactly zero variance get zero rows and columns in `L`
/// (the matrix is PSD only if their whole row is zero). The remaining block
/// is factored after equilibration; on failure a jitter of
/// `1e-12 · trace · I` is added to the equilibrated block and doubled up to
/// six times before giving up.
pub fn cholesky_jittered(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("cholesky of {}x{}", n, a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariance matrix".into()));
    }
    let active: Vec<usize> = (0..n).filter(|&i| a[(i, i)] != 0.0).collect();
    if active.iter().any(|&i| a[(i, i)] < 0.0) {
        return Err(Error::numerical("cholesky (negative variance)", f64::INFINITY));
    }
    let mut out = DMatrix::zeros(n, n);
    if active.is_empty() {
        return Ok(out);
    }
    let k = active.len();
    let sub = DMatrix::from_fn(k, k, |i, j| a[(active[i], active[j])]);
    let (scaled, d) = equilibrate(&sub);
    let l = cholesky_scaled(&scaled).ok_or_else(|| Error::numerical("cholesky", condition_estimate(&sub)))?;
    for i in 0..k {
        for j in 0..=i {
            out[(active[i], active[j])] = d[i] * l[(i, j)];
        }
    }
    Ok(out)
}

/// Solves `a x = b` for symmetric positive-definite `a`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Dimension(format!("solve {}x{} against {}x{}", n, a.ncols(), b.nrows(), b.ncols())));
    }
    if (0..n).any(|i| !(a[(i, i)] > 0.0)) {
        return Err(Error::numerical("spd solve (non-positive pivot)", condition_estimate(a)));
    }
    let (scaled, d) = equilibrate(a);
    let chol = scaled.clone().cholesky().ok_or_else(|| Error::numerical("spd solve", condition_estimate(a)))?;
    let mut rhs = b.clone();
    for i in 0..n {
        for j in 0..rhs.ncols() {
            rhs[(i, j)] /= d[i];
        }
    }
    let mut x = chol.solve(&rhs);
    for i in 0..n {
        for j in 0..x.ncols() {
            x[(i, j)] /= d[i];
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("spd solve", condition_estimate(a)));
    }
    Ok(x)
}

/// Inverse of a symmetric positive-definite matrix, re-symmetrized.
pub fn inverse_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut inv = solve_spd(a, &DMatrix::identity(a.nrows(), a.nrows()))?;
    symmetrize(&mut inv);
    Ok(inv)
}

/// Block-diagonal concatenation.
pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}
