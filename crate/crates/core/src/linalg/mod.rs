//! Dense real-matrix kernel: SVD, polar factor, Schatten norms, range
//! projectors and orthogonality residuals.

mod io;
mod matrix;
mod svd;

pub use io::{parse_matrix, read_matrix, write_matrix};
pub use matrix::Matrix;
pub use svd::{singular_values, svd, SvdFactors};

use crate::error::{Error, Result};

/// Relative cut-off deciding which singular values count as positive.
///
/// `None` resolves to `max(m, n) · 2⁻⁵²` for an `m × n` input.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RankTolerance {
    relative_threshold: Option<f64>,
}

impl RankTolerance {
    pub fn new(relative_threshold: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&relative_threshold) {
            return Err(Error::Parameter(format!(
                "relative rank threshold must lie in [0, 1), got {relative_threshold}"
            )));
        }
        Ok(Self {
            relative_threshold: Some(relative_threshold),
        })
    }

    /// Threshold for an `rows × cols` matrix, relative to its largest
    /// singular value.
    pub fn resolve(&self, rows: usize, cols: usize) -> f64 {
        self.relative_threshold
            .unwrap_or_else(|| rows.max(cols) as f64 * f64::EPSILON)
    }

    /// Number of singular values strictly above `threshold · sigma[0]`.
    pub fn rank(&self, sigma: &[f64], rows: usize, cols: usize) -> usize {
        let Some(&top) = sigma.first() else { return 0 };
        if top == 0.0 {
            return 0;
        }
        let cut = self.resolve(rows, cols) * top;
        sigma.iter().take_while(|&&s| s > cut).count()
    }
}

/// Nuclear, operator and Frobenius norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixNorms {
    pub nuclear: f64,
    pub operator: f64,
    pub frobenius: f64,
}

pub fn matrix_norms(x: &Matrix) -> Result<MatrixNorms> {
    let s = singular_values(x)?;
    Ok(MatrixNorms {
        nuclear: s.iter().sum(),
        operator: s.first().copied().unwrap_or(0.0),
        frobenius: s.iter().map(|v| v * v).sum::<f64>().sqrt(),
    })
}

pub fn nuclear_norm(x: &Matrix) -> Result<f64> {
    Ok(singular_values(x)?.iter().sum())
}

pub fn operator_norm(x: &Matrix) -> Result<f64> {
    Ok(singular_values(x)?.first().copied().unwrap_or(0.0))
}

/// `⟨a, b⟩_F = tr(aᵀ b)`
pub fn frobenius_inner(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "inner product of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x * y)
        .sum())
}

/// `U_r V_rᵀ` over the singular triplets above tolerance. The zero matrix
/// maps to the zero matrix.
pub fn polar_factor(x: &Matrix, tol: RankTolerance) -> Result<Matrix> {
    let f = svd(x)?;
    let r = tol.rank(&f.sigma, x.rows(), x.cols());
    Ok(truncated_polar(&f, r))
}

/// `U_r V_rᵀ` from precomputed factors using the leading `r` triplets.
pub fn truncated_polar(f: &SvdFactors, r: usize) -> Matrix {
    let (m, n) = (f.u.rows(), f.v.rows());
    Matrix::from_fn(m, n, |i, j| (0..r).map(|p| f.u[(i, p)] * f.v[(j, p)]).sum())
}

/// Orthogonal projector onto the range of `m`.
pub fn range_projector(m: &Matrix, tol: RankTolerance) -> Result<Matrix> {
    let f = svd(m)?;
    let r = tol.rank(&f.sigma, m.rows(), m.cols());
    Ok(projector_from_left(&f.u, r))
}

/// `U_r U_rᵀ` from the leading `r` columns of `u`.
pub fn projector_from_left(u: &Matrix, r: usize) -> Matrix {
    let m = u.rows();
    Matrix::from_fn(m, m, |i, j| (0..r).map(|p| u[(i, p)] * u[(j, p)]).sum())
}

/// `‖Π − X Xᵀ‖_op`
pub fn orthogonality_residual(x: &Matrix, projector: &Matrix) -> Result<f64> {
    let m = x.rows();
    if projector.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "projector {:?} incompatible with {}-row matrix",
            projector.shape(),
            m
        )));
    }
    operator_norm(&(projector - &x.gram()))
}

/// `‖(I − Π) X Xᵀ (I − Π)‖_op`: mass of `X Xᵀ` outside the range of `Π`.
pub fn range_leakage(x: &Matrix, projector: &Matrix) -> Result<f64> {
    let m = x.rows();
    if projector.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "projector {:?} incompatible with {}-row matrix",
            projector.shape(),
            m
        )));
    }
    let complement = &Matrix::identity(m) - projector;
    let outside = complement.matmul(x);
    operator_norm(&outside.gram())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anti() -> Matrix {
        Matrix::from_rows(&[[0.0, 2.0], [1.0, 0.0]]).unwrap()
    }

    #[test]
    fn polar_examples() {
        let tol = RankTolerance::default();
        let p = polar_factor(&Matrix::from_diag(&[2.0, 3.0]), tol).unwrap();
        assert!(p.max_abs_diff(&Matrix::identity(2)) < 1e-15);

        let p = polar_factor(&anti(), tol).unwrap();
        let expect = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(p.max_abs_diff(&expect) < 1e-15);

        let z = Matrix::zeros(3, 2);
        assert_eq!(polar_factor(&z, tol).unwrap(), z);
    }

    #[test]
    fn norm_examples() {
        let n = matrix_norms(&Matrix::from_diag(&[1.0, 2.0, 3.0])).unwrap();
        assert!((n.nuclear - 6.0).abs() < 1e-14);
        assert!((n.operator - 3.0).abs() < 1e-14);
        assert!((n.frobenius - 14f64.sqrt()).abs() < 1e-14);

        let n = matrix_norms(&Matrix::zeros(2, 3)).unwrap();
        assert_eq!((n.nuclear, n.operator, n.frobenius), (0.0, 0.0, 0.0));

        let n = matrix_norms(&anti()).unwrap();
        assert!((n.nuclear - 3.0).abs() < 1e-14);
        assert!((n.operator - 2.0).abs() < 1e-14);
        assert!((n.frobenius - 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn inner_product_examples() {
        let i2 = Matrix::identity(2);
        assert_eq!(frobenius_inner(&i2, &i2).unwrap(), 2.0);
        let a = Matrix::from_diag(&[1.0, 2.0]);
        let b = Matrix::from_diag(&[3.0, 4.0]);
        assert_eq!(frobenius_inner(&a, &b).unwrap(), 11.0);
        let p = polar_factor(&anti(), RankTolerance::default()).unwrap();
        assert!((frobenius_inner(&anti(), &p).unwrap() - 3.0).abs() < 1e-14);
        assert!(matches!(
            frobenius_inner(&i2, &Matrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn projector_examples() {
        let tol = RankTolerance::default();
        let p = range_projector(&Matrix::from_diag(&[0.6, 0.8]), tol).unwrap();
        assert!(p.max_abs_diff(&Matrix::identity(2)) < 1e-15);

        let z = Matrix::zeros(2, 2);
        assert_eq!(range_projector(&z, tol).unwrap(), z);

        let outer = Matrix::from_rows(&[[1.0, 1.0], [0.0, 0.0]]).unwrap();
        let p = range_projector(&outer, tol).unwrap();
        assert!(p.max_abs_diff(&Matrix::from_diag(&[1.0, 0.0])) < 1e-15);
    }

    #[test]
    fn residual_examples() {
        let i2 = Matrix::identity(2);
        let r = orthogonality_residual(&Matrix::from_diag(&[0.6, 0.8]), &i2).unwrap();
        assert!((r - 0.64).abs() < 1e-15);
        assert!(orthogonality_residual(&i2, &i2).unwrap() < 1e-15);
        let z = Matrix::zeros(2, 2);
        assert_eq!(orthogonality_residual(&z, &z).unwrap(), 0.0);
        assert!(matches!(
            orthogonality_residual(&i2, &Matrix::identity(3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rank_tolerance_bounds() {
        assert!(RankTolerance::new(1.0).is_err());
        assert!(RankTolerance::new(-0.1).is_err());
        let t = RankTolerance::default();
        assert_eq!(t.resolve(3, 5), 5.0 * f64::EPSILON);
        assert_eq!(t.rank(&[2.0, 1.0, 1e-20], 3, 3), 2);
        assert_eq!(t.rank(&[0.0, 0.0], 2, 2), 0);
    }
}
