//! Compound-symmetry (exchangeable) covariance matrices and their hierarchical
//! group-effect/level-effect representation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// `L×L` matrix with common variance `v` on the diagonal and common covariance `c` off it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsSpec {
    pub size: usize,
    pub variance: f64,
    pub covariance: f64,
}

impl CsSpec {
    pub fn new(size: usize, variance: f64, covariance: f64) -> Self {
        Self { size, variance, covariance }
    }

    pub fn correlation(&self) -> f64 {
        self.covariance / self.variance
    }

    /// `-(L-1)^{-1} v < c < v`, or `v > 0` when `L = 1`.
    pub fn is_valid(&self) -> bool {
        cs_is_positive_definite(self).unwrap_or(false)
    }
}

/// `(v - c) I + c J`.
pub fn cs_matrix(spec: &CsSpec) -> DMatrix<f64> {
    let n = spec.size;
    DMatrix::from_fn(n, n, |i, j| if i == j { spec.variance } else { spec.covariance })
}

pub fn cs_is_positive_definite(spec: &CsSpec) -> Result<bool> {
    if spec.size == 0 {
        return domain("CS matrix needs L >= 1");
    }
    if !(spec.variance > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "variance must be positive, got {}",
            spec.variance
        )));
    }
    let (v, c, l) = (spec.variance, spec.covariance, spec.size as f64);
    if spec.size == 1 {
        return Ok(true);
    }
    Ok(-v / (l - 1.0) < c && c < v)
}

/// CS matrix of `η_ℓ = μ + λ_ℓ` conditional on the level effects averaging to zero:
/// `v = v_μ + v_λ(1 - 1/L)`, `c = v_μ - v_λ/L`.
pub fn cs_from_hierarchical(level_count: usize, v_mu: f64, v_lambda: f64) -> Result<CsSpec> {
    if level_count < 2 {
        return domain(format!("hierarchical CS form needs L >= 2, got {level_count}"));
    }
    if v_mu < 0.0 || v_lambda < 0.0 || !v_mu.is_finite() || !v_lambda.is_finite() {
        return domain(format!("variances must be finite and >= 0, got ({v_mu}, {v_lambda})"));
    }
    if v_mu == 0.0 && v_lambda == 0.0 {
        return domain("v_mu and v_lambda cannot both be zero");
    }
    let l = level_count as f64;
    Ok(CsSpec::new(level_count, v_mu + v_lambda * (1.0 - 1.0 / l), v_mu - v_lambda / l))
}

/// Inverse of [`cs_from_hierarchical`]: `v_μ = v/L + c(1 - 1/L)`, `v_λ = v - c`.
pub fn hierarchical_from_cs(spec: &CsSpec) -> Result<(f64, f64)> {
    if !cs_is_positive_definite(spec)? {
        return domain(format!(
            "CS spec (L={}, v={}, c={}) is not positive definite",
            spec.size, spec.variance, spec.covariance
        ));
    }
    let l = spec.size as f64;
    let (v, c) = (spec.variance, spec.covariance);
    Ok((v / l + c * (1.0 - 1.0 / l), v - c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigenvalues;

    #[test]
    fn zero_covariance_is_identity() {
        assert_eq!(cs_matrix(&CsSpec::new(2, 1.0, 0.0)), DMatrix::identity(2, 2));
    }

    #[test]
    fn spectrum_l3() {
        let e = sym_eigenvalues(&cs_matrix(&CsSpec::new(3, 1.0, 0.5)));
        for (got, want) in e.iter().zip([0.5, 0.5, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn spectrum_negative_covariance() {
        let e = sym_eigenvalues(&cs_matrix(&CsSpec::new(4, 2.0, -0.5)));
        for (got, want) in e.iter().zip([0.5, 2.5, 2.5, 2.5]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn pd_condition() {
        assert!(!cs_is_positive_definite(&CsSpec::new(4, 1.0, -1.0 / 3.0)).unwrap());
        assert!(cs_is_positive_definite(&CsSpec::new(4, 1.0, 0.99)).unwrap());
        assert!(!cs_is_positive_definite(&CsSpec::new(2, 1.0, 1.0)).unwrap());
        assert!(cs_is_positive_definite(&CsSpec::new(1, 3.0, 7.0)).unwrap());
        assert!(matches!(
            cs_is_positive_definite(&CsSpec::new(3, 0.0, 0.0)),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn hierarchical_examples() {
        let s = cs_from_hierarchical(2, 1.0, 1.0).unwrap();
        assert!((s.variance - 1.5).abs() < 1e-15 && (s.covariance - 0.5).abs() < 1e-15);
        let s = cs_from_hierarchical(10, 0.0, 1.0).unwrap();
        assert!((s.variance - 0.9).abs() < 1e-15 && (s.covariance + 0.1).abs() < 1e-15);
        assert!((s.covariance + s.variance / 9.0).abs() < 1e-15);
        let s = cs_from_hierarchical(5, 0.7, 0.0).unwrap();
        assert_eq!(s.variance, 0.7);
        assert_eq!(s.covariance, 0.7);
        assert!(cs_from_hierarchical(1, 1.0, 1.0).is_err());
        assert!(cs_from_hierarchical(3, 0.0, 0.0).is_err());
    }

    #[test]
    fn hierarchical_boundary_is_psd_not_pd() {
        // v_mu = 0 lands exactly on c = -v/(L-1): PSD with a zero eigenvalue.
        let s = cs_from_hierarchical(4, 0.0, 2.0).unwrap();
        assert!(!s.is_valid());
        let e = sym_eigenvalues(&cs_matrix(&s));
        assert!(e[0].abs() < 1e-12);
    }

    #[test]
    fn inverse_examples() {
        let (a, b) = hierarchical_from_cs(&CsSpec::new(2, 1.5, 0.5)).unwrap();
        assert!((a - 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        let (a, b) = hierarchical_from_cs(&CsSpec::new(4, 1.0, 0.0)).unwrap();
        assert!((a - 0.25).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        let (_, b) = hierarchical_from_cs(&CsSpec::new(4, 1.0, 1.0 - 1e-9)).unwrap();
        assert!(b < 1e-8);
        assert!(hierarchical_from_cs(&CsSpec::new(3, 1.0, 1.0)).is_err());
    }
}
