//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Solve `A x = b` for symmetric positive (semi)definite `A`; falls back to
/// LU when Cholesky fails.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if a.nrows() == 0 {
        return Some(DVector::zeros(0));
    }
    if let Some(ch) = a.clone().cholesky() {
        let x = ch.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let x = a.clone().lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub fn inverse_spd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if a.nrows() == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let inv = match a.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => a.clone().try_inverse()?,
    };
    inv.iter().all(|v| v.is_finite()).then(|| symmetrize(&inv))
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Column-wise sample covariance (divisor n - 1) of row vectors.
pub fn sample_covariance(rows: &[DVector<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let p = rows.first().map_or(0, |r| r.len());
    if n < 2 {
        return DMatrix::zeros(p, p);
    }
    let mean = rows.iter().fold(DVector::zeros(p), |acc, r| acc + r) / n as f64;
    let mut c = DMatrix::zeros(p, p);
    for r in rows {
        let d = r - &mean;
        c += &d * d.transpose();
    }
    c / (n as f64 - 1.0)
}
