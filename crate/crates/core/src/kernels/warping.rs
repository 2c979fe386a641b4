use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{domain, Result};

/// Non-decreasing map from ordered levels `1..L` to positions on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warping {
    /// `F(1) = 0`, `F(ℓ+1) = F(ℓ) + increments[ℓ-1]`.
    PiecewiseLinear { increments: Vec<f64> },
    /// `Φ((ℓ - location)/scale)` affinely rescaled so that `F(1) = 0` and `F(L) = span`.
    NormalCdf { level_count: usize, location: f64, scale: f64, span: f64 },
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

impl Warping {
    pub fn equally_spaced(level_count: usize, span: f64) -> Self {
        let step = if level_count > 1 { span / (level_count - 1) as f64 } else { 0.0 };
        Self::PiecewiseLinear { increments: vec![step; level_count.saturating_sub(1)] }
    }

    pub fn level_count(&self) -> usize {
        match self {
            Self::PiecewiseLinear { increments } => increments.len() + 1,
            Self::NormalCdf { level_count, .. } => *level_count,
        }
    }
}

pub fn warp_positions(w: &Warping) -> Result<Vec<f64>> {
    match w {
        Warping::PiecewiseLinear { increments } => {
            if let Some(d) = increments.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
                return domain(format!("warping increments must be finite and >= 0, got {d}"));
            }
            let mut out = Vec::with_capacity(increments.len() + 1);
            let mut acc = 0.0;
            out.push(acc);
            for d in increments {
                acc += d;
                out.push(acc);
            }
            Ok(out)
        }
        &Warping::NormalCdf { level_count, location, scale, span } => {
            if level_count == 0 {
                return domain("warping needs at least one level");
            }
            if !(scale > 0.0) || !scale.is_finite() || !location.is_finite() {
                return domain(format!("normal warping needs scale > 0, got {scale}"));
            }
            if !(span >= 0.0) || !span.is_finite() {
                return domain(format!("warping span must be >= 0, got {span}"));
            }
            let raw: Vec<f64> = (1..=level_count)
                .map(|l| std_normal_cdf((l as f64 - location) / scale))
                .collect();
            let lo = raw[0];
            let width = raw[level_count - 1] - lo;
            if width <= 0.0 {
                return Ok(vec![0.0; level_count]);
            }
            Ok(raw.iter().map(|r| span * (r - lo) / width).collect())
        }
    }
}
