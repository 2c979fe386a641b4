//! JSON configuration: schema, kernel specification, fit settings and benchmark.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::functions::TestFunction;
use crate::covariance::{BlockForm, CountScheme, GroupPartition, LevelRelabeling};
use crate::design::Placement;
use crate::error::{domain, Error, Result};
use crate::gp::FitConfig;
use crate::kernels::{
    combine, CategoricalForm, CategoricalKernel, CombineOp, ContinuousKernel1D, InputSchema, Kernel,
    KernelExpr, Warping,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Matern52,
    SquaredExponential,
    Cosine,
}

/// A 1-D continuous kernel; `lengthscale` is the template value, `alpha` the cosine bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengthscale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl FamilySpec {
    pub fn to_kernel(&self, default_lengthscale: f64) -> Result<ContinuousKernel1D> {
        let k = match self.family {
            Family::Matern52 => ContinuousKernel1D::matern52(self.lengthscale.unwrap_or(default_lengthscale)),
            Family::SquaredExponential => {
                ContinuousKernel1D::squared_exponential(self.lengthscale.unwrap_or(default_lengthscale))
            }
            Family::Cosine => ContinuousKernel1D::Cosine { alpha: self.alpha.unwrap_or(PI) },
        };
        k.validate()?;
        Ok(k)
    }
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self { family: Family::Matern52, lengthscale: None, alpha: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSpec {
    pub input: String,
    #[serde(flatten)]
    pub kernel: FamilySpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpingKind {
    #[default]
    PiecewiseLinear,
    NormalCdf,
}

/// One within-group form for every group, or one per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WithinForms {
    All(BlockForm),
    PerGroup(Vec<BlockForm>),
}

fn cosine_base() -> FamilySpec {
    FamilySpec { family: Family::Cosine, lengthscale: None, alpha: None }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CategoricalFormSpec {
    Cs,
    /// `groups` lists 1-based levels; every level must appear in exactly one group.
    Gcs { groups: Vec<Vec<usize>>, between: BlockForm, within: WithinForms },
    Spherical {
        #[serde(default)]
        heteroscedastic: bool,
    },
    Ordinal {
        #[serde(default)]
        warping: WarpingKind,
        #[serde(default = "cosine_base")]
        base: FamilySpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalSpec {
    pub input: String,
    #[serde(flatten)]
    pub form: CategoricalFormSpec,
    /// Whether this matrix is a covariance (true) or a unit-variance correlation.
    #[serde(default = "yes")]
    pub carries_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(default)]
    pub continuous: Vec<ContinuousSpec>,
    #[serde(default)]
    pub categorical: Vec<CategoricalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combination: Option<CombineOp>,
}

/// Template lengthscale used when a spec leaves it open.
pub const DEFAULT_LENGTHSCALE: f64 = 0.2;

/// Levels and group id (0-based) for every level, from 1-based group lists.
fn assignment(groups: &[Vec<usize>], level_count: usize) -> Result<Vec<usize>> {
    let mut group_of = vec![usize::MAX; level_count];
    for (g, levels) in groups.iter().enumerate() {
        if levels.is_empty() {
            return domain(format!("group {} is empty", g + 1));
        }
        for &l in levels {
            if l < 1 || l > level_count {
                return domain(format!("group {}: level {l} outside 1..={level_count}", g + 1));
            }
            if group_of[l - 1] != usize::MAX {
                return domain(format!("level {l} appears in more than one group"));
            }
            group_of[l - 1] = g;
        }
    }
    if let Some(l) = group_of.iter().position(|&g| g == usize::MAX) {
        return domain(format!("level {} is not assigned to a group", l + 1));
    }
    Ok(group_of)
}

impl CategoricalSpec {
    pub fn build(&self, level_count: usize) -> Result<CategoricalKernel> {
        let carries = self.carries_variance;
        match &self.form {
            CategoricalFormSpec::Cs => CategoricalKernel::cs(level_count, 1.0, 0.0, carries),
            CategoricalFormSpec::Gcs { groups, between, within } => {
                if !carries {
                    return Err(Error::Composition(format!(
                        "group kernel on '{}' must carry its covariance",
                        self.input
                    )));
                }
                let group_of = assignment(groups, level_count)?;
                let (partition, relabel) = LevelRelabeling::from_assignment(&group_of)?;
                let within = match within {
                    WithinForms::All(f) => vec![*f; partition.group_count()],
                    WithinForms::PerGroup(v) => v.clone(),
                };
                let k = CategoricalKernel::gcs_default(partition, *between, within)?;
                if relabel == LevelRelabeling::identity(level_count) {
                    Ok(k)
                } else {
                    k.with_relabel(relabel)
                }
            }
            CategoricalFormSpec::Spherical { heteroscedastic } => {
                let variances = vec![1.0; if *heteroscedastic { level_count } else { 1 }];
                CategoricalKernel::new(
                    CategoricalForm::Spherical {
                        level_count,
                        variances,
                        angles: vec![PI / 2.0; crate::covariance::angle_count(level_count)],
                    },
                    carries,
                )
            }
            CategoricalFormSpec::Ordinal { warping, base } => {
                let base = base.to_kernel(1.0)?;
                let span = match base {
                    ContinuousKernel1D::Cosine { alpha } => alpha,
                    _ => 1.0,
                };
                let w = match warping {
                    WarpingKind::PiecewiseLinear => Warping::equally_spaced(level_count, 0.5 * span),
                    WarpingKind::NormalCdf => Warping::NormalCdf {
                        level_count,
                        location: (level_count as f64 + 1.0) / 2.0,
                        scale: (level_count as f64 / 4.0).max(0.5),
                        span,
                    },
                };
                CategoricalKernel::ordinal(w, base, 1.0, carries)
            }
        }
    }

    /// Nominal count of the reference settings for group kernels with a uniform within form.
    pub fn nominal_count(&self, level_count: usize) -> Option<usize> {
        match &self.form {
            CategoricalFormSpec::Gcs { groups, between, within } => {
                let within = match within {
                    WithinForms::All(f) => *f,
                    WithinForms::PerGroup(v) => {
                        let first = *v.first()?;
                        if v.iter().any(|f| *f != first) {
                            return None;
                        }
                        first
                    }
                };
                let group_of = assignment(groups, level_count).ok()?;
                let (partition, _) = LevelRelabeling::from_assignment(&group_of).ok()?;
                Some(crate::covariance::parameter_count(CountScheme { within, between: *between }, &partition))
            }
            CategoricalFormSpec::Cs => {
                let p = GroupPartition::single(level_count).ok()?;
                Some(crate::covariance::parameter_count(
                    CountScheme { within: BlockForm::Cs, between: BlockForm::Cs },
                    &p,
                ))
            }
            _ => None,
        }
    }
}

impl KernelSpec {
    /// Builds the kernel template for `schema`.
    ///
    /// Inputs without a spec get a Matérn 5/2 (continuous) or a CS covariance
    /// (categorical). Leaves are combined in schema order, continuous inputs first. The
    /// root variance is fixed at 1 when a categorical leaf carries the variance and free
    /// otherwise.
    pub fn build(&self, schema: &InputSchema, default_op: CombineOp) -> Result<Kernel> {
        let op = self.combination.unwrap_or(default_op);
        let known_c: BTreeSet<&str> = schema.continuous.iter().map(String::as_str).collect();
        let known_u: BTreeSet<&str> = schema.categorical.iter().map(|c| c.name.as_str()).collect();
        for s in &self.continuous {
            if !known_c.contains(s.input.as_str()) {
                return domain(format!("kernel refers to unknown continuous input '{}'", s.input));
            }
        }
        for s in &self.categorical {
            if !known_u.contains(s.input.as_str()) {
                return domain(format!("kernel refers to unknown categorical input '{}'", s.input));
            }
        }
        let mut leaves = Vec::new();
        for (i, name) in schema.continuous.iter().enumerate() {
            let mut specs = self.continuous.iter().filter(|s| &s.input == name);
            let fam = specs.next().map(|s| s.kernel.clone()).unwrap_or_default();
            if specs.next().is_some() {
                return domain(format!("continuous input '{name}' has several kernel specs"));
            }
            leaves.push(KernelExpr::continuous(i, fam.to_kernel(DEFAULT_LENGTHSCALE)?));
        }
        for (j, c) in schema.categorical.iter().enumerate() {
            let mut specs = self.categorical.iter().filter(|s| s.input == c.name);
            let spec = specs.next().cloned().unwrap_or(CategoricalSpec {
                input: c.name.clone(),
                form: CategoricalFormSpec::Cs,
                carries_variance: true,
            });
            if specs.next().is_some() {
                return domain(format!("categorical input '{}' has several kernel specs", c.name));
            }
            leaves.push(KernelExpr::categorical(j, spec.build(c.levels)?));
        }
        let mut it = leaves.into_iter();
        let Some(mut expr) = it.next() else {
            return domain("schema declares no inputs");
        };
        for leaf in it {
            expr = combine(op, expr, leaf)?;
        }
        let carried = expr.categorical_leaves().iter().any(|(_, k)| k.carries_variance());
        let kernel = Kernel::new(expr, 1.0, !carried)?;
        kernel.check_schema(schema)?;
        Ok(kernel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Slhd,
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub points_per_level: usize,
    #[serde(default)]
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub name: String,
    pub kernel: KernelSpec,
}

fn default_test_grid() -> usize {
    1000
}

fn default_repetitions() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub function: TestFunction,
    pub design: DesignSpec,
    /// Points of the regular x-grid; the test set crosses it with every level.
    #[serde(default = "default_test_grid")]
    pub test_grid: usize,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    pub variants: Vec<VariantSpec>,
    /// Run repetition × variant cells on the rayon pool.
    #[serde(default = "yes")]
    pub parallel: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return domain("benchmark repetitions must be >= 1");
        }
        if self.variants.is_empty() {
            return domain("benchmark needs at least one variant");
        }
        if self.design.points_per_level == 0 {
            return domain("design needs at least one point per level");
        }
        if self.test_grid < 2 {
            return domain("test grid needs at least two points");
        }
        let mut names = BTreeSet::new();
        for v in &self.variants {
            if !names.insert(v.name.as_str()) {
                return domain(format!("duplicate variant name '{}'", v.name));
            }
        }
        Ok(())
    }
}

/// Top-level configuration document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<InputSchema>,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combination: Option<CombineOp>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkConfig>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!("config line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Parse(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        Self::from_json(&text)
    }

    /// Schema from the `schema` section, or from the benchmark's test function.
    pub fn resolved_schema(&self) -> Result<InputSchema> {
        if let Some(s) = &self.schema {
            return InputSchema::new(s.continuous.clone(), s.categorical.clone());
        }
        if let Some(b) = &self.benchmark {
            return Ok(b.function.schema());
        }
        domain("config has neither a schema nor a benchmark section")
    }

    pub fn combination(&self) -> CombineOp {
        self.combination.unwrap_or(CombineOp::Product)
    }

    pub fn build_kernel(&self) -> Result<Kernel> {
        self.kernel.build(&self.resolved_schema()?, self.combination())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_document() {
        let text = r#"{
            "schema": {"continuous": ["x"], "categorical": [{"name": "u", "levels": 13}]},
            "kernel": {
                "continuous": [{"input": "x", "family": "matern52", "lengthscale": 0.3}],
                "categorical": [{"input": "u", "type": "gcs",
                                 "groups": [[1,2,3,4,5,6,7,8,9],[10,11,12,13]],
                                 "between": "general", "within": "cs"}]
            },
            "combination": "product",
            "fit": {"n_starts": 3, "optimizer": "gradient_fd", "seed": 4}
        }"#;
        let c = Config::from_json(text).unwrap();
        assert_eq!(c.fit.n_starts, 3);
        let k = c.build_kernel().unwrap();
        assert!(!k.variance_free);
        assert_eq!(crate::kernels::pack(&k).unwrap().len(), 1 + 3 + 2);
    }

    #[test]
    fn non_contiguous_groups_are_relabeled() {
        let spec = CategoricalSpec {
            input: "u".into(),
            form: CategoricalFormSpec::Gcs {
                groups: vec![vec![1, 3], vec![2, 4, 5]],
                between: BlockForm::General,
                within: WithinForms::All(BlockForm::Cs),
            },
            carries_variance: true,
        };
        let k = spec.build(5).unwrap();
        let m = k.matrix();
        // Levels 1 and 3 share a group: same between-covariance with level 2.
        assert!((m[(0, 1)] - m[(2, 1)]).abs() < 1e-15);
        assert!(spec.build(6).is_err());
    }

    #[test]
    fn errors_carry_location() {
        let e = Config::from_json("{\n \"fit\": {\"n_starts\": \"x\"}\n}").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = Config::from_json(r#"{"schema": {"continuous": ["x"], "categorical": []},
            "kernel": {"continuous": [{"input": "z", "family": "cosine"}]}}"#)
        .unwrap()
        .build_kernel()
        .unwrap_err();
        assert!(e.to_string().contains("'z'"));
    }

    #[test]
    fn two_carriers_in_a_product_rejected() {
        let schema = InputSchema {
            continuous: vec![],
            categorical: vec![
                crate::kernels::CategoricalInput { name: "a".into(), levels: 3 },
                crate::kernels::CategoricalInput { name: "b".into(), levels: 3 },
            ],
        };
        let e = KernelSpec::default().build(&schema, CombineOp::Product).unwrap_err();
        assert!(matches!(e, Error::Composition(_)));
        assert!(KernelSpec::default().build(&schema, CombineOp::Sum).is_ok());
    }
}
