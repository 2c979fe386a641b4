//! Closed-form test functions of `(x, u)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::kernels::{CategoricalInput, InputSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// Two families of phase-shifted cosines, levels `1..9` and `10..13`.
    Example1,
    /// Near-linear curves (levels 1–4) and two opposite families of damped sinusoids.
    Example2,
}

impl TestFunction {
    pub fn level_count(self) -> usize {
        match self {
            Self::Example1 => 13,
            Self::Example2 => 10,
        }
    }

    pub fn schema(self) -> InputSchema {
        InputSchema {
            continuous: vec!["x".into()],
            categorical: vec![CategoricalInput { name: "u".into(), levels: self.level_count() }],
        }
    }

    pub fn eval(self, x: f64, u: usize) -> Result<f64> {
        if u < 1 || u > self.level_count() {
            return domain(format!("level {u} outside 1..={}", self.level_count()));
        }
        if !(0.0..=1.0).contains(&x) {
            return domain(format!("x = {x} outside [0, 1]"));
        }
        Ok(match self {
            Self::Example1 => example1(x, u),
            Self::Example2 => example2(x, u),
        })
    }
}

fn example1(x: f64, u: usize) -> f64 {
    let uf = u as f64;
    let p = if u > 9 { 0.4 + uf / 15.0 } else { 0.0 };
    (7.0 * PI * x / 2.0 + p * PI - uf / 20.0).cos()
}

fn example2(x: f64, u: usize) -> f64 {
    let uf = u as f64;
    match u {
        1..=4 => (x + 0.01 * (x - 0.5).powi(2)) * uf / 10.0,
        5..=7 => 0.9 * (2.0 * PI * (x + (uf - 4.0) / 20.0)).cos() * (-x).exp(),
        _ => -0.7 * (2.0 * PI * (x + (uf - 7.0) / 20.0)).cos() * (-x).exp(),
    }
}

/// Evaluates `f` at one point with one continuous and one categorical coordinate.
pub fn eval_test_function(f: TestFunction, x: f64, u: usize) -> Result<f64> {
    f.eval(x, u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_low_levels_have_no_phase() {
        for u in 1..=9 {
            let want = (-(u as f64) / 20.0).cos();
            assert_eq!(TestFunction::Example1.eval(0.0, u).unwrap(), want);
        }
    }

    #[test]
    fn example1_level_ten() {
        // Independent transcription: phase (0.4 + 10/15)·π = 3.351032163829112.
        let x = 0.3;
        let want = (7.0 * std::f64::consts::PI * 0.15 + 3.351_032_163_829_112 - 0.5).cos();
        assert!((TestFunction::Example1.eval(x, 10).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn example2_branches() {
        let x = 0.8;
        let f = TestFunction::Example2;
        assert!((f.eval(x, 1).unwrap() - (x + 0.01 * 0.09) * 0.1).abs() < 1e-15);
        let c = |s: f64| (2.0 * std::f64::consts::PI * (x + s)).cos() * (-x).exp();
        assert!((f.eval(x, 6).unwrap() - 0.9 * c(0.1)).abs() < 1e-15);
        assert!((f.eval(x, 10).unwrap() + 0.7 * c(0.15)).abs() < 1e-15);
    }

    #[test]
    fn level_range() {
        assert!(TestFunction::Example1.eval(0.5, 14).is_err());
        assert!(TestFunction::Example2.eval(0.5, 0).is_err());
        assert!(TestFunction::Example2.eval(0.5, 11).is_err());
    }
}
