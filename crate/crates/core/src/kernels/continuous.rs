use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Stationary 1-D correlation kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ContinuousKernel1D {
    /// `(1 + √5 r + 5r²/3) exp(-√5 r)` with `r = |x - x'| / θ`.
    Matern52 { lengthscale: f64 },
    /// `exp(-r²/2)`.
    SquaredExponential { lengthscale: f64 },
    /// `cos(x - x')`; `alpha ∈ (0, π]` bounds the range of warped positions when used as
    /// the base of an ordinal kernel, fixing the minimal correlation `cos α`.
    Cosine { alpha: f64 },
}

impl ContinuousKernel1D {
    pub fn matern52(lengthscale: f64) -> Self {
        Self::Matern52 { lengthscale }
    }

    pub fn squared_exponential(lengthscale: f64) -> Self {
        Self::SquaredExponential { lengthscale }
    }

    pub fn cosine() -> Self {
        Self::Cosine { alpha: PI }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Matern52 { lengthscale } | Self::SquaredExponential { lengthscale } => {
                if !(lengthscale > 0.0) || !lengthscale.is_finite() {
                    return domain(format!("lengthscale must be positive, got {lengthscale}"));
                }
            }
            Self::Cosine { alpha } => {
                if !(alpha > 0.0 && alpha <= PI) {
                    return domain(format!("cosine range bound must lie in (0, π], got {alpha}"));
                }
            }
        }
        Ok(())
    }

    pub fn is_cosine(&self) -> bool {
        matches!(self, Self::Cosine { .. })
    }

    pub fn lengthscale(&self) -> Option<f64> {
        match *self {
            Self::Matern52 { lengthscale } | Self::SquaredExponential { lengthscale } => {
                Some(lengthscale)
            }
            Self::Cosine { .. } => None,
        }
    }

    pub fn with_lengthscale(self, lengthscale: f64) -> Self {
        match self {
            Self::Matern52 { .. } => Self::Matern52 { lengthscale },
            Self::SquaredExponential { .. } => Self::SquaredExponential { lengthscale },
            c @ Self::Cosine { .. } => c,
        }
    }

    /// Correlation at distance `d = |x - x'|`; assumes a validated kernel.
    #[inline]
    pub fn correlation(&self, d: f64) -> f64 {
        match *self {
            Self::Matern52 { lengthscale } => {
                let r = 5f64.sqrt() * d.abs() / lengthscale;
                (1.0 + r + r * r / 3.0) * (-r).exp()
            }
            Self::SquaredExponential { lengthscale } => {
                let r = d / lengthscale;
                (-0.5 * r * r).exp()
            }
            Self::Cosine { .. } => d.cos(),
        }
    }
}

pub fn eval_continuous(kernel: &ContinuousKernel1D, x: f64, x_prime: f64) -> Result<f64> {
    kernel.validate()?;
    Ok(kernel.correlation(x - x_prime))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_at_zero_distance() {
        for k in [
            ContinuousKernel1D::matern52(0.3),
            ContinuousKernel1D::squared_exponential(0.3),
            ContinuousKernel1D::cosine(),
        ] {
            assert_eq!(eval_continuous(&k, 0.4, 0.4).unwrap(), 1.0);
            let a = eval_continuous(&k, 0.1, 0.7).unwrap();
            let b = eval_continuous(&k, 0.7, 0.1).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn cosine_at_pi() {
        let k = ContinuousKernel1D::cosine();
        assert!((k.correlation(PI) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn matern_closed_form() {
        // r = √5 · 0.5 / 0.5 = √5: (1 + √5 + 5/3) e^{-√5}
        let k = ContinuousKernel1D::matern52(0.5);
        let s5 = 5f64.sqrt();
        let want = (1.0 + s5 + 5.0 / 3.0) * (-s5).exp();
        assert!((eval_continuous(&k, 0.0, 0.5).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.523_994_108_831_820_3).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(eval_continuous(&ContinuousKernel1D::matern52(0.0), 0.0, 1.0).is_err());
        assert!(eval_continuous(&ContinuousKernel1D::squared_exponential(-1.0), 0.0, 1.0).is_err());
        assert!(eval_continuous(&ContinuousKernel1D::Cosine { alpha: 4.0 }, 0.0, 1.0).is_err());
    }
}
