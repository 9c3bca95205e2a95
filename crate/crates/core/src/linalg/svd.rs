//! One-sided (Hestenes) Jacobi SVD.
//!
//! Columns of the working matrix are rotated pairwise until every pair is
//! numerically orthogonal; the column norms are then the singular values.
//! The sweep order is fixed, so the result is a deterministic function of
//! the input bits.

use super::Matrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `x = u · diag(sigma) · vᵀ` with `k = min(m, n)` triplets.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `m × k`, orthonormal columns.
    pub u: Matrix,
    /// Non-increasing, non-negative.
    pub sigma: Vec<f64>,
    /// `n × k`, orthonormal columns.
    pub v: Matrix,
}

impl SvdFactors {
    /// `u · diag(sigma) · vᵀ`
    pub fn reconstruct(&self) -> Matrix {
        let (m, k) = self.u.shape();
        let n = self.v.rows();
        Matrix::from_fn(m, n, |i, j| {
            (0..k)
                .map(|p| self.u[(i, p)] * self.sigma[p] * self.v[(j, p)])
                .sum()
        })
    }
}

/// Thin singular value decomposition.
///
/// Sign convention: the largest-magnitude entry of every column of `u` is
/// positive (the first such entry on ties).
pub fn svd(x: &Matrix) -> Result<SvdFactors> {
    ensure_finite(x)?;
    let (m, n) = x.shape();
    let tall = m >= n;
    let cols = if tall { columns(x) } else { columns(&x.transpose()) };
    let (rotated, right) = jacobi(cols, true);
    let right = right.expect("accumulated rotations");

    let norms: Vec<f64> = rotated.iter().map(|c| norm(c)).collect();
    let order = descending_order(&norms);
    let sigma: Vec<f64> = order.iter().map(|&i| norms[i]).collect();

    let mut left: Vec<Vec<f64>> = Vec::with_capacity(order.len());
    let mut missing = Vec::new();
    for (slot, &i) in order.iter().enumerate() {
        let s = norms[i];
        if s > f64::MIN_POSITIVE * 1e10 {
            left.push(rotated[i].iter().map(|v| v / s).collect());
        } else {
            left.push(vec![0.0; rotated[i].len()]);
            missing.push(slot);
        }
    }
    complete_orthonormal(&mut left, &missing);
    let right: Vec<Vec<f64>> = order.iter().map(|&i| right[i].clone()).collect();

    // For wide input the roles of the two factors are swapped.
    let (mut u_cols, mut v_cols) = if tall { (left, right) } else { (right, left) };

    for (uc, vc) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        let mut best = 0usize;
        for (i, val) in uc.iter().enumerate() {
            if val.abs() > uc[best].abs() {
                best = i;
            }
        }
        if uc[best] < 0.0 {
            uc.iter_mut().for_each(|v| *v = -*v);
            vc.iter_mut().for_each(|v| *v = -*v);
        }
    }

    Ok(SvdFactors {
        u: from_columns(m, &u_cols),
        sigma,
        v: from_columns(n, &v_cols),
    })
}

/// Singular values only, non-increasing. Skips the right-vector accumulation.
pub fn singular_values(x: &Matrix) -> Result<Vec<f64>> {
    ensure_finite(x)?;
    let cols = if x.rows() >= x.cols() {
        columns(x)
    } else {
        columns(&x.transpose())
    };
    let (rotated, _) = jacobi(cols, false);
    let mut s: Vec<f64> = rotated.iter().map(|c| norm(c)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

fn ensure_finite(x: &Matrix) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InputDomain("svd input has non-finite entries".into()))
    }
}

fn columns(x: &Matrix) -> Vec<Vec<f64>> {
    (0..x.cols())
        .map(|j| (0..x.rows()).map(|i| x[(i, j)]).collect())
        .collect()
}

fn from_columns(rows: usize, cols: &[Vec<f64>]) -> Matrix {
    Matrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xi, yi) = (*x, *y);
        *x = c * xi - s * yi;
        *y = s * xi + c * yi;
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Rotates the columns of `a` until they are mutually orthogonal. Returns the
/// rotated columns and, if requested, the accumulated rotation as columns.
fn jacobi(mut a: Vec<Vec<f64>>, want_v: bool) -> (Vec<Vec<f64>>, Option<Vec<Vec<f64>>>) {
    let k = a.len();
    let len = a.first().map_or(0, Vec::len);
    let mut v: Option<Vec<Vec<f64>>> = want_v.then(|| {
        (0..k)
            .map(|j| (0..k).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
            .collect()
    });
    let tol = f64::EPSILON * (len.max(1) as f64);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..k.saturating_sub(1) {
            for j in i + 1..k {
                let alpha = dot(&a[i], &a[i]);
                let beta = dot(&a[j], &a[j]);
                let gamma = dot(&a[i], &a[j]);
                if gamma == 0.0 || gamma.abs() <= tol * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() > 1e150 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = a.split_at_mut(j);
                rotate(&mut lo[i], &mut hi[0], c, s);
                if let Some(v) = v.as_mut() {
                    let (lo, hi) = v.split_at_mut(j);
                    rotate(&mut lo[i], &mut hi[0], c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (a, v)
}

/// Fills the listed (zero) slots with unit vectors orthogonal to every other
/// column, drawn from the standard basis by Gram-Schmidt.
fn complete_orthonormal(cols: &mut [Vec<f64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let len = cols[0].len();
    let mut candidate = 0usize;
    for &slot in missing {
        while candidate < len {
            let mut e = vec![0.0; len];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (idx, c) in cols.iter().enumerate() {
                    if idx == slot || c.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let proj = dot(&e, c);
                    e.iter_mut().zip(c).for_each(|(x, y)| *x -= proj * y);
                }
            }
            let nrm = norm(&e);
            if nrm > 0.5 {
                cols[slot] = e.into_iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }
}
