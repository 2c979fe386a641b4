//! Kernels on a single categorical input, i.e. PSD `L×L` matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::continuous::ContinuousKernel1D;
use super::warping::{warp_positions, Warping};
use crate::covariance::{
    cs_matrix, gcs_assemble, spherical_covariance, BlockForm, CsSpec, GcsParams, GroupPartition,
    LevelRelabeling,
};
use crate::error::{domain, Error, Result};

/// How a categorical kernel is parameterized.
#[derive(Debug, Clone, PartialEq)]
pub enum CategoricalForm {
    Cs(CsSpec),
    /// Group kernel. `within` gives the form of each group's reduced generator and
    /// `relabel`, if present, maps the caller's level order to the contiguous group order.
    Gcs {
        params: GcsParams,
        between: BlockForm,
        within: Vec<BlockForm>,
        relabel: Option<LevelRelabeling>,
    },
    /// Spherical Cholesky parameterization; one shared variance or one per level.
    Spherical { level_count: usize, variances: Vec<f64>, angles: Vec<f64> },
    /// `T[ℓ,ℓ'] = v · k(F(ℓ), F(ℓ'))`.
    Ordinal { warping: Warping, base: ContinuousKernel1D, variance: f64 },
}

/// A categorical kernel together with its materialized matrix.
///
/// In covariance mode the matrix is a full covariance (possibly heteroscedastic). In
/// correlation mode (`carries_variance == false`) the scale is fixed: CS and ordinal use
/// unit variance and spherical uses unit variance for every level. Group kernels always
/// carry their own variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CategoricalRepr", into = "CategoricalRepr")]
pub struct CategoricalKernel {
    form: CategoricalForm,
    carries_variance: bool,
    matrix: DMatrix<f64>,
}

fn check_ordinal(warping: &Warping, base: &ContinuousKernel1D, variance: f64) -> Result<Vec<f64>> {
    base.validate()?;
    if !(variance > 0.0) || !variance.is_finite() {
        return domain(format!("ordinal kernel variance must be positive, got {variance}"));
    }
    let pos = warp_positions(warping)?;
    if let ContinuousKernel1D::Cosine { alpha } = *base {
        let top = pos.last().copied().unwrap_or(0.0);
        if top > alpha * (1.0 + 1e-12) {
            return domain(format!(
                "warped positions reach {top}, beyond the cosine range bound {alpha}"
            ));
        }
    }
    Ok(pos)
}

/// Materialized ordinal matrix `v · k_Z(F(ℓ), F(ℓ'))`.
pub fn ordinal_kernel(
    warping: &Warping,
    base: &ContinuousKernel1D,
    variance: f64,
) -> Result<CategoricalKernel> {
    CategoricalKernel::new(
        CategoricalForm::Ordinal { warping: warping.clone(), base: *base, variance },
        true,
    )
}

impl CategoricalKernel {
    pub fn new(form: CategoricalForm, carries_variance: bool) -> Result<Self> {
        let matrix = materialize(&form)?;
        let k = Self { form, carries_variance, matrix };
        k.check_mode()?;
        Ok(k)
    }

    fn check_mode(&self) -> Result<()> {
        if self.carries_variance {
            return Ok(());
        }
        let unit = |v: f64| (v - 1.0).abs() < 1e-12;
        let ok = match &self.form {
            CategoricalForm::Cs(s) => unit(s.variance),
            CategoricalForm::Gcs { .. } => {
                return Err(Error::Composition(
                    "group kernels carry their own covariance and cannot be correlation-only"
                        .into(),
                ))
            }
            CategoricalForm::Spherical { variances, .. } => variances.iter().all(|v| unit(*v)),
            CategoricalForm::Ordinal { variance, .. } => unit(*variance),
        };
        if ok {
            Ok(())
        } else {
            domain("correlation-only categorical kernels must have unit variance")
        }
    }

    /// CS kernel; in correlation mode `variance` must be 1.
    pub fn cs(level_count: usize, variance: f64, covariance: f64, carries_variance: bool) -> Result<Self> {
        let spec = CsSpec::new(level_count, variance, covariance);
        if !spec.is_valid() {
            return domain(format!(
                "CS kernel (L={level_count}, v={variance}, c={covariance}) is not positive definite"
            ));
        }
        Self::new(CategoricalForm::Cs(spec), carries_variance)
    }

    /// Group kernel with identity generators.
    pub fn gcs_default(
        partition: GroupPartition,
        between: BlockForm,
        within: Vec<BlockForm>,
    ) -> Result<Self> {
        if within.len() != partition.group_count() {
            return domain(format!(
                "{} within forms for {} groups",
                within.len(),
                partition.group_count()
            ));
        }
        let g = partition.group_count();
        let b = DMatrix::identity(g, g);
        let w = partition.sizes().iter().map(|&n| DMatrix::identity(n - 1, n - 1)).collect();
        let params = GcsParams::new(partition, b, w)?;
        Self::new(CategoricalForm::Gcs { params, between, within, relabel: None }, true)
    }

    pub fn with_relabel(self, relabel: LevelRelabeling) -> Result<Self> {
        match self.form {
            CategoricalForm::Gcs { params, between, within, .. } => {
                if relabel.level_count() != params.partition().level_count() {
                    return domain("relabeling does not match the partition size");
                }
                Self::new(
                    CategoricalForm::Gcs { params, between, within, relabel: Some(relabel) },
                    self.carries_variance,
                )
            }
            _ => domain("only group kernels accept a level relabeling"),
        }
    }

    /// Homoscedastic spherical kernel with all angles `π/2`.
    pub fn spherical_default(level_count: usize, variance: f64, carries_variance: bool) -> Result<Self> {
        Self::new(
            CategoricalForm::Spherical {
                level_count,
                variances: vec![variance],
                angles: vec![std::f64::consts::FRAC_PI_2; crate::covariance::angle_count(level_count)],
            },
            carries_variance,
        )
    }

    pub fn ordinal(
        warping: Warping,
        base: ContinuousKernel1D,
        variance: f64,
        carries_variance: bool,
    ) -> Result<Self> {
        Self::new(CategoricalForm::Ordinal { warping, base, variance }, carries_variance)
    }

    pub fn form(&self) -> &CategoricalForm {
        &self.form
    }

    pub fn carries_variance(&self) -> bool {
        self.carries_variance
    }

    /// The `L×L` kernel matrix, indexed by 0-based level.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn level_count(&self) -> usize {
        self.matrix.nrows()
    }

    /// `D^{-1/2} T D^{-1/2}`.
    pub fn correlation_matrix(&self) -> DMatrix<f64> {
        let d: Vec<f64> = self.matrix.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
        DMatrix::from_fn(self.matrix.nrows(), self.matrix.ncols(), |i, j| {
            let s = d[i] * d[j];
            if s > 0.0 {
                self.matrix[(i, j)] / s
            } else {
                0.0
            }
        })
    }

    pub(crate) fn rebuild(&self, form: CategoricalForm) -> Result<Self> {
        Self::new(form, self.carries_variance)
    }
}

fn materialize(form: &CategoricalForm) -> Result<DMatrix<f64>> {
    match form {
        CategoricalForm::Cs(spec) => {
            if spec.size == 0 {
                return domain("CS kernel needs at least one level");
            }
            if !(spec.variance > 0.0) || !spec.covariance.is_finite() {
                return domain("CS kernel needs a positive variance");
            }
            Ok(cs_matrix(spec))
        }
        CategoricalForm::Gcs { params, within, relabel, .. } => {
            if within.len() != params.partition().group_count() {
                return domain("one within form per group is required");
            }
            let t = gcs_assemble(params).into_matrix();
            Ok(match relabel {
                Some(r) => r.to_original_matrix(&t),
                None => t,
            })
        }
        CategoricalForm::Spherical { level_count, variances, angles } => {
            spherical_covariance(*level_count, variances, angles)
        }
        CategoricalForm::Ordinal { warping, base, variance } => {
            let pos = check_ordinal(warping, base, *variance)?;
            let n = pos.len();
            Ok(DMatrix::from_fn(n, n, |i, j| variance * base.correlation(pos[i] - pos[j])))
        }
    }
}

/// Serialized shape of a [`CategoricalKernel`]; matrices as nested row vectors.
#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum CategoricalRepr {
    Cs {
        level_count: usize,
        variance: f64,
        covariance: f64,
        carries_variance: bool,
    },
    Gcs {
        groups: Vec<usize>,
        between_form: BlockForm,
        within_forms: Vec<BlockForm>,
        between: Vec<Vec<f64>>,
        within_reduced: Vec<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        relabel: Option<LevelRelabeling>,
    },
    Spherical {
        level_count: usize,
        variances: Vec<f64>,
        angles: Vec<f64>,
        carries_variance: bool,
    },
    Ordinal {
        warping: Warping,
        base: ContinuousKernel1D,
        variance: f64,
        carries_variance: bool,
    },
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = r.len();
    if r.iter().any(|row| row.len() != n) {
        return Err(Error::Parse("matrix rows must form a square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| r[i][j]))
}

impl From<CategoricalKernel> for CategoricalRepr {
    fn from(k: CategoricalKernel) -> Self {
        let cv = k.carries_variance;
        match k.form {
            CategoricalForm::Cs(s) => CategoricalRepr::Cs {
                level_count: s.size,
                variance: s.variance,
                covariance: s.covariance,
                carries_variance: cv,
            },
            CategoricalForm::Gcs { params, between, within, relabel } => CategoricalRepr::Gcs {
                groups: params.partition().sizes().to_vec(),
                between_form: between,
                within_forms: within,
                between: rows(params.between()),
                within_reduced: params.within_reduced().iter().map(rows).collect(),
                relabel,
            },
            CategoricalForm::Spherical { level_count, variances, angles } => {
                CategoricalRepr::Spherical { level_count, variances, angles, carries_variance: cv }
            }
            CategoricalForm::Ordinal { warping, base, variance } => {
                CategoricalRepr::Ordinal { warping, base, variance, carries_variance: cv }
            }
        }
    }
}

impl TryFrom<CategoricalRepr> for CategoricalKernel {
    type Error = Error;

    fn try_from(r: CategoricalRepr) -> Result<Self> {
        match r {
            CategoricalRepr::Cs { level_count, variance, covariance, carries_variance } => {
                Self::new(
                    CategoricalForm::Cs(CsSpec::new(level_count, variance, covariance)),
                    carries_variance,
                )
            }
            CategoricalRepr::Gcs { groups, between_form, within_forms, between, within_reduced, relabel } => {
                let partition = GroupPartition::new(groups)?;
                let within_m = within_reduced
                    .iter()
                    .map(|m| if m.is_empty() { Ok(DMatrix::zeros(0, 0)) } else { from_rows(m) })
                    .collect::<Result<Vec<_>>>()?;
                let params = GcsParams::new(partition, from_rows(&between)?, within_m)?;
                Self::new(
                    CategoricalForm::Gcs { params, between: between_form, within: within_forms, relabel },
                    true,
                )
            }
            CategoricalRepr::Spherical { level_count, variances, angles, carries_variance } => {
                Self::new(CategoricalForm::Spherical { level_count, variances, angles }, carries_variance)
            }
            CategoricalRepr::Ordinal { warping, base, variance, carries_variance } => {
                Self::new(CategoricalForm::Ordinal { warping, base, variance }, carries_variance)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::gcs_validate;
    use std::f64::consts::PI;

    #[test]
    fn identical_positions_all_ones() {
        let k = ordinal_kernel(
            &Warping::PiecewiseLinear { increments: vec![0.0; 3] },
            &ContinuousKernel1D::matern52(0.4),
            1.0,
        )
        .unwrap();
        assert!(k.matrix().iter().all(|v| (*v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn cosine_levels_at_distance_pi() {
        let k = ordinal_kernel(
            &Warping::PiecewiseLinear { increments: vec![PI] },
            &ContinuousKernel1D::cosine(),
            1.0,
        )
        .unwrap();
        assert!((k.matrix()[(0, 1)] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn cosine_three_equally_spaced_levels() {
        let k = ordinal_kernel(&Warping::equally_spaced(3, PI), &ContinuousKernel1D::cosine(), 1.0)
            .unwrap();
        let m = k.matrix();
        let want = [[1.0, 0.0, -1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[(i, j)] - want[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cosine_range_exceeded() {
        let r = ordinal_kernel(
            &Warping::PiecewiseLinear { increments: vec![2.0, 2.0] },
            &ContinuousKernel1D::cosine(),
            1.0,
        );
        assert!(r.is_err());
    }

    #[test]
    fn ordinal_matrix_is_psd() {
        let k = ordinal_kernel(
            &Warping::PiecewiseLinear { increments: vec![0.3, 1.1, 0.2, 0.9] },
            &ContinuousKernel1D::cosine(),
            2.0,
        )
        .unwrap();
        let r = gcs_validate(k.matrix(), &GroupPartition::singletons(5).unwrap()).unwrap();
        assert!(r.is_psd);
    }

    #[test]
    fn correlation_mode_rules() {
        assert!(CategoricalKernel::cs(4, 1.0, 0.2, false).is_ok());
        assert!(CategoricalKernel::cs(4, 2.0, 0.2, false).is_err());
        let p = GroupPartition::new(vec![2, 2]).unwrap();
        let g = CategoricalKernel::gcs_default(p, BlockForm::General, vec![BlockForm::Cs; 2]).unwrap();
        let form = g.form().clone();
        assert!(matches!(CategoricalKernel::new(form, false), Err(Error::Composition(_))));
    }

    #[test]
    fn relabel_permutes_levels() {
        let (p, r) = LevelRelabeling::from_assignment(&[1, 0, 1]).unwrap();
        let g = CategoricalKernel::gcs_default(p, BlockForm::General, vec![BlockForm::Cs; 2])
            .unwrap()
            .with_relabel(r)
            .unwrap();
        // Levels 0 and 2 share a group; level 1 is alone. With identity generators the
        // between covariance is zero and levels in the same group are correlated.
        let m = g.matrix();
        assert!(m[(0, 1)].abs() < 1e-15);
        assert!(m[(0, 2)].abs() > 0.1);
    }

    #[test]
    fn serde_round_trip_rebuilds_matrix() {
        let p = GroupPartition::new(vec![3, 1]).unwrap();
        let g = CategoricalKernel::gcs_default(p, BlockForm::Cs, vec![BlockForm::General, BlockForm::Cs])
            .unwrap();
        let text = serde_json::to_string(&g).unwrap();
        let back: CategoricalKernel = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
        let s = CategoricalKernel::spherical_default(3, 1.0, false).unwrap();
        let back: CategoricalKernel = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
