use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalInput {
    pub name: String,
    pub levels: usize,
}

/// Declares the inputs of the mixed space `[0,1]^I × Π {1..L_j}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSchema {
    pub continuous: Vec<String>,
    pub categorical: Vec<CategoricalInput>,
}

impl InputSchema {
    pub fn new(continuous: Vec<String>, categorical: Vec<CategoricalInput>) -> Result<Self> {
        if let Some(c) = categorical.iter().find(|c| c.levels == 0) {
            return domain(format!("categorical input '{}' has no levels", c.name));
        }
        Ok(Self { continuous, categorical })
    }

    /// One continuous input `x` and one categorical input `u` with `levels` levels.
    pub fn one_by_one(levels: usize) -> Self {
        Self {
            continuous: vec!["x".into()],
            categorical: vec![CategoricalInput { name: "u".into(), levels }],
        }
    }

    pub fn continuous_count(&self) -> usize {
        self.continuous.len()
    }

    pub fn categorical_count(&self) -> usize {
        self.categorical.len()
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.categorical.iter().map(|c| c.levels).collect()
    }

    /// Checks dimensions and level ranges of a point.
    pub fn check_point(&self, p: &MixedPoint) -> Result<()> {
        if p.x.len() != self.continuous.len() || p.u.len() != self.categorical.len() {
            return domain(format!(
                "point has {} continuous / {} categorical coordinates, schema expects {} / {}",
                p.x.len(),
                p.u.len(),
                self.continuous.len(),
                self.categorical.len()
            ));
        }
        for (v, c) in p.u.iter().zip(&self.categorical) {
            if *v < 1 || *v > c.levels {
                return domain(format!(
                    "level {v} of '{}' is outside 1..={}",
                    c.name, c.levels
                ));
            }
        }
        if let Some(x) = p.x.iter().find(|x| !x.is_finite()) {
            return domain(format!("non-finite continuous coordinate {x}"));
        }
        Ok(())
    }
}

/// A point `w = (x, u)`; categorical levels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedPoint {
    pub x: Vec<f64>,
    pub u: Vec<usize>,
}

impl MixedPoint {
    pub fn new(x: Vec<f64>, u: Vec<usize>) -> Self {
        Self { x, u }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_range_checked() {
        let s = InputSchema::one_by_one(3);
        assert!(s.check_point(&MixedPoint::new(vec![0.5], vec![3])).is_ok());
        assert!(s.check_point(&MixedPoint::new(vec![0.5], vec![4])).is_err());
        assert!(s.check_point(&MixedPoint::new(vec![0.5], vec![0])).is_err());
        assert!(s.check_point(&MixedPoint::new(vec![], vec![1])).is_err());
    }
}
