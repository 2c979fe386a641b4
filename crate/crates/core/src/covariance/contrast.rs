//! Orthonormal contrast bases and centered covariance matrices.
//!
//! A covariance `Σ` of size `n` is centered when the grand mean of its entries is zero.
//! Every centered PSD `Σ` is written uniquely as `A M Aᵀ` where the columns of `A`
//! span `1ₙ^⊥` orthonormally and `M` is PSD of size `n - 1`.

use nalgebra::DMatrix;

use crate::error::{domain, Result};
use crate::linalg::{max_abs, mean};

/// `n×(n-1)` matrix `A` with `AᵀA = I` and `Aᵀ1 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastBasis {
    matrix: DMatrix<f64>,
}

impl ContrastBasis {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// Normalized Helmert contrasts: column `k` (1-based) is `(-1, .., -1, k, 0, .., 0)`
/// with `k` leading `-1`s, divided by `sqrt(k(k+1))`.
pub fn helmert_basis(n: usize) -> Result<ContrastBasis> {
    if n < 2 {
        return domain(format!("Helmert basis needs n >= 2, got {n}"));
    }
    let mut a = DMatrix::zeros(n, n - 1);
    for col in 0..n - 1 {
        let k = (col + 1) as f64;
        let norm = (k * (k + 1.0)).sqrt();
        for row in 0..=col {
            a[(row, col)] = -1.0 / norm;
        }
        a[(col + 1, col)] = k / norm;
    }
    Ok(ContrastBasis { matrix: a })
}

/// Symmetric PSD matrix whose entries average to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredCovariance {
    matrix: DMatrix<f64>,
}

impl CenteredCovariance {
    /// Wraps `m` after checking squareness and the zero grand mean
    /// (tolerance `1e-12 · max|Σ|`).
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return domain("centered covariance must be square");
        }
        let tol = 1e-12 * max_abs(&matrix);
        let m = mean(&matrix);
        if m.abs() > tol {
            return domain(format!("matrix is not centered: grand mean {m:e} exceeds {tol:e}"));
        }
        Ok(Self { matrix })
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }
}

/// `Σ = A M Aᵀ`.
pub fn centered_from_reduced(
    reduced: &DMatrix<f64>,
    basis: &ContrastBasis,
) -> Result<CenteredCovariance> {
    let k = basis.size() - 1;
    if reduced.nrows() != k || reduced.ncols() != k {
        return domain(format!(
            "reduced matrix is {}x{}, basis expects {k}x{k}",
            reduced.nrows(),
            reduced.ncols()
        ));
    }
    let a = basis.matrix();
    Ok(CenteredCovariance { matrix: a * reduced * a.transpose() })
}

/// `M = Aᵀ Σ A`.
pub fn reduced_from_centered(
    centered: &CenteredCovariance,
    basis: &ContrastBasis,
) -> Result<DMatrix<f64>> {
    if centered.size() != basis.size() {
        return domain(format!(
            "centered matrix has size {}, basis has size {}",
            centered.size(),
            basis.size()
        ));
    }
    let a = basis.matrix();
    Ok(a.transpose() * centered.matrix() * a)
}
