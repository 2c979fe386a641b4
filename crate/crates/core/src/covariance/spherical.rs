//! Spherical parameterization of the Cholesky factor of a covariance matrix.

use nalgebra::DMatrix;

use crate::error::{domain, Result};

pub fn angle_count(level_count: usize) -> usize {
    level_count * level_count.saturating_sub(1) / 2
}

/// Lower-triangular factor whose row `i` is `sqrt(v_i)` times a unit vector in spherical
/// coordinates. Angles are consumed row by row (row `i` uses `i` angles). With all angles
/// in `(0, π)` the product `F Fᵀ` is positive definite with diagonal `v`, and the
/// correlation between levels 0 and 1 is `cos θ₀`.
///
/// `variances` holds either one shared variance or one per level.
pub fn spherical_to_cholesky(
    level_count: usize,
    variances: &[f64],
    angles: &[f64],
) -> Result<DMatrix<f64>> {
    if level_count == 0 {
        return domain("spherical factor needs L >= 1");
    }
    if angles.len() != angle_count(level_count) {
        return domain(format!(
            "L={level_count} needs {} angles, got {}",
            angle_count(level_count),
            angles.len()
        ));
    }
    if variances.len() != 1 && variances.len() != level_count {
        return domain(format!(
            "expected 1 or {level_count} variances, got {}",
            variances.len()
        ));
    }
    if let Some(v) = variances.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return domain(format!("variances must be positive and finite, got {v}"));
    }
    if angles.iter().any(|a| !a.is_finite()) {
        return domain("angles must be finite");
    }
    let mut f = DMatrix::zeros(level_count, level_count);
    let mut next = 0;
    for i in 0..level_count {
        let scale = variances[if variances.len() == 1 { 0 } else { i }].sqrt();
        let mut sin_prod = 1.0;
        for j in 0..i {
            let theta = angles[next + j];
            f[(i, j)] = scale * sin_prod * theta.cos();
            sin_prod *= theta.sin();
        }
        f[(i, i)] = scale * sin_prod;
        next += i;
    }
    Ok(f)
}

/// `F Fᵀ` for the factor of [`spherical_to_cholesky`].
pub fn spherical_covariance(
    level_count: usize,
    variances: &[f64],
    angles: &[f64],
) -> Result<DMatrix<f64>> {
    let f = spherical_to_cholesky(level_count, variances, angles)?;
    Ok(&f * f.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_level() {
        let f = spherical_to_cholesky(1, &[4.0], &[]).unwrap();
        assert_eq!(f, DMatrix::from_element(1, 1, 2.0));
    }

    #[test]
    fn two_levels_correlation_is_cosine() {
        for theta in [0.3, 1.0, 2.5] {
            let t = spherical_covariance(2, &[1.0], &[theta]).unwrap();
            assert!((t[(0, 1)] - theta.cos()).abs() < 1e-15);
            assert!((t[(1, 1)] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn right_angles_give_scaled_identity() {
        let t = spherical_covariance(4, &[2.5], &[PI / 2.0; 6]).unwrap();
        assert!((t - DMatrix::identity(4, 4) * 2.5).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn per_level_variances_on_diagonal() {
        let v = [1.0, 2.0, 0.5];
        let t = spherical_covariance(3, &v, &[0.4, 1.2, 2.0]).unwrap();
        for i in 0..3 {
            assert!((t[(i, i)] - v[i]).abs() < 1e-14);
        }
        assert!(nalgebra::Cholesky::new(t).is_some());
    }

    #[test]
    fn wrong_counts_rejected() {
        assert!(spherical_to_cholesky(3, &[1.0], &[0.1, 0.2]).is_err());
        assert!(spherical_to_cholesky(3, &[1.0, 1.0], &[0.1, 0.2, 0.3]).is_err());
        assert!(spherical_to_cholesky(2, &[-1.0], &[0.1]).is_err());
    }
}
