//! Generalized compound symmetry (GCS) block covariance matrices.
//!
//! A GCS matrix has constant off-diagonal blocks `B_{g,g'} = c_{g,g'} J` and diagonal
//! blocks `W_g` for which `W_g - mean(W_g) J` is PSD. Such a matrix is generated by a
//! `G×G` covariance `B★` of group means together with one reduced within-group
//! covariance `M_g` of size `n_g - 1` per group:
//!
//! ```text
//! W_g     = B★[g,g] J + A_g M_g A_gᵀ
//! B_{g,g'} = B★[g,g'] J
//! ```
//!
//! and it is PSD iff its block-average matrix `T̃` is PSD.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::contrast::{helmert_basis, ContrastBasis};
use super::partition::GroupPartition;
use crate::error::{domain, Error, Result};
use crate::linalg::{eigen_tolerance, max_abs, max_asymmetry, mean, min_eigenvalue};

/// Generator parameters of a GCS block covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GcsParams {
    partition: GroupPartition,
    between: DMatrix<f64>,
    within_reduced: Vec<DMatrix<f64>>,
}

fn check_psd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let scale = 1e-10 * m.trace().abs().max(1.0);
    if max_asymmetry(m) > 1e-12 * max_abs(m).max(1.0) {
        return Err(Error::InvalidParams(format!("{name} is not symmetric")));
    }
    let lo = min_eigenvalue(m);
    if lo < -scale {
        return Err(Error::InvalidParams(format!(
            "{name} is not PSD (min eigenvalue {lo:e})"
        )));
    }
    Ok(())
}

impl GcsParams {
    /// Checks shapes, symmetry and PSD-ness (eigenvalue floor `-1e-10 · trace`).
    /// Groups of size one take a `0×0` reduced matrix.
    pub fn new(
        partition: GroupPartition,
        between: DMatrix<f64>,
        within_reduced: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let g = partition.group_count();
        if between.nrows() != g || between.ncols() != g {
            return Err(Error::InvalidParams(format!(
                "between-group matrix is {}x{}, expected {g}x{g}",
                between.nrows(),
                between.ncols()
            )));
        }
        if within_reduced.len() != g {
            return Err(Error::InvalidParams(format!(
                "{} within-group matrices for {g} groups",
                within_reduced.len()
            )));
        }
        for (i, m) in within_reduced.iter().enumerate() {
            let k = partition.size(i) - 1;
            if m.nrows() != k || m.ncols() != k {
                return Err(Error::InvalidParams(format!(
                    "within matrix of group {} is {}x{}, expected {k}x{k}",
                    i + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if between.iter().chain(within_reduced.iter().flat_map(|m| m.iter())).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite entry".into()));
        }
        check_psd("B★", &between)?;
        for (i, m) in within_reduced.iter().enumerate() {
            check_psd(&format!("M_{}", i + 1), m)?;
        }
        Ok(Self { partition, between, within_reduced })
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn between(&self) -> &DMatrix<f64> {
        &self.between
    }

    pub fn within_reduced(&self) -> &[DMatrix<f64>] {
        &self.within_reduced
    }
}

/// Symmetric `L×L` matrix together with the partition defining its blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCovariance {
    partition: GroupPartition,
    matrix: DMatrix<f64>,
}

impl BlockCovariance {
    pub fn new(partition: GroupPartition, matrix: DMatrix<f64>) -> Result<Self> {
        check_shape(&matrix, &partition)?;
        check_symmetric(&matrix)?;
        Ok(Self { partition, matrix })
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Diagonal block `W_g`.
    pub fn within_block(&self, g: usize) -> DMatrix<f64> {
        let r = self.partition.range(g);
        self.matrix.view((r.start, r.start), (r.len(), r.len())).into_owned()
    }
}

fn check_shape(m: &DMatrix<f64>, partition: &GroupPartition) -> Result<()> {
    let l = partition.level_count();
    if m.nrows() != l || m.ncols() != l {
        return domain(format!(
            "matrix is {}x{}, partition covers {l} levels",
            m.nrows(),
            m.ncols()
        ));
    }
    Ok(())
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let asym = max_asymmetry(m);
    if asym > 1e-10 * max_abs(m).max(1.0) {
        return domain(format!("matrix is not symmetric (max |T - Tᵀ| = {asym:e})"));
    }
    Ok(())
}

/// Assembles `T` from its generators. The result is PSD by construction.
pub fn gcs_assemble(params: &GcsParams) -> BlockCovariance {
    let p = &params.partition;
    let g_count = p.group_count();
    let mut t = DMatrix::zeros(p.level_count(), p.level_count());
    for g in 0..g_count {
        for h in 0..g_count {
            let c = params.between[(g, h)];
            for i in p.range(g) {
                for j in p.range(h) {
                    t[(i, j)] = c;
                }
            }
        }
    }
    for g in 0..g_count {
        let n = p.size(g);
        if n < 2 {
            continue;
        }
        let a = helmert_basis(n).expect("n >= 2");
        let a = a.matrix();
        let centered = a * &params.within_reduced[g] * a.transpose();
        let off = p.offset(g);
        for i in 0..n {
            for j in 0..n {
                t[(off + i, off + j)] += centered[(i, j)];
            }
        }
    }
    BlockCovariance { partition: p.clone(), matrix: t }
}

/// `T̃[g,h]` = arithmetic mean of the entries of block `(g,h)`.
pub fn block_average(t: &BlockCovariance) -> DMatrix<f64> {
    block_average_matrix(&t.matrix, &t.partition)
}

pub fn block_average_matrix(t: &DMatrix<f64>, partition: &GroupPartition) -> DMatrix<f64> {
    let g_count = partition.group_count();
    let mut avg = DMatrix::zeros(g_count, g_count);
    for g in 0..g_count {
        for h in 0..g_count {
            let (rg, rh) = (partition.range(g), partition.range(h));
            let block = t.view((rg.start, rh.start), (rg.len(), rh.len()));
            avg[(g, h)] = block.sum() / (rg.len() * rh.len()) as f64;
        }
    }
    avg
}

/// `W_g - mean(W_g) J` for every group.
fn centered_within_blocks(t: &DMatrix<f64>, partition: &GroupPartition) -> Vec<DMatrix<f64>> {
    (0..partition.group_count())
        .map(|g| {
            let r = partition.range(g);
            let w = t.view((r.start, r.start), (r.len(), r.len())).into_owned();
            let m = mean(&w);
            w.map(|v| v - m)
        })
        .collect()
}

/// A labeled failed check in a [`ValidationReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub check: String,
    /// 1-based group numbers the check refers to (empty for whole-matrix checks).
    pub groups: Vec<usize>,
    pub value: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub is_gcs: bool,
    pub is_psd: bool,
    pub is_pd: bool,
    /// Row-major block-average matrix.
    pub t_tilde: Vec<Vec<f64>>,
    pub min_eigenvalue_t_tilde: f64,
    /// `max(diag T) - min(diag T)`; zero for homoscedastic matrices.
    pub diagonal_spread: f64,
    pub tolerance: f64,
    pub failing_checks: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn t_tilde_matrix(&self) -> DMatrix<f64> {
        let g = self.t_tilde.len();
        DMatrix::from_fn(g, g, |i, j| self.t_tilde[i][j])
    }

    pub fn has_check(&self, check: &str) -> bool {
        self.failing_checks.iter().any(|d| d.check == check)
    }
}

/// Checks the GCS structure of `t` and decides PSD/PD-ness from the block averages.
///
/// PSD tests use `λ_min ≥ -tol`, PD tests `λ_min > tol`, with
/// `tol = 1e-10 · max(1, trace T)`. If `t` is not GCS the block-average criterion does not
/// apply and definiteness is decided on the full matrix instead.
pub fn gcs_validate(t: &DMatrix<f64>, partition: &GroupPartition) -> Result<ValidationReport> {
    check_shape(t, partition)?;
    check_symmetric(t)?;
    let tol = eigen_tolerance(t.trace());
    let const_tol = 1e-10 * max_abs(t).max(1.0);
    let g_count = partition.group_count();
    let mut failing = Vec::new();

    for g in 0..g_count {
        for h in (g + 1)..g_count {
            let (rg, rh) = (partition.range(g), partition.range(h));
            let block = t.view((rg.start, rh.start), (rg.len(), rh.len()));
            let lo = block.min();
            let hi = block.max();
            if hi - lo > const_tol {
                failing.push(Diagnostic {
                    check: "between-block-constant".into(),
                    groups: vec![g + 1, h + 1],
                    value: hi - lo,
                    message: format!(
                        "block ({}, {}) is not constant: entries span {:e}",
                        g + 1,
                        h + 1,
                        hi - lo
                    ),
                });
            }
        }
    }
    let centered = centered_within_blocks(t, partition);
    for (g, sigma) in centered.iter().enumerate() {
        let lo = min_eigenvalue(sigma);
        if lo < -tol {
            failing.push(Diagnostic {
                check: "centered-within-psd".into(),
                groups: vec![g + 1],
                value: lo,
                message: format!(
                    "W_{0} - mean(W_{0}) J has eigenvalue {lo:e} below -{tol:e}",
                    g + 1
                ),
            });
        }
    }
    let is_gcs = failing.is_empty();

    let t_tilde = block_average_matrix(t, partition);
    let lo_tilde = min_eigenvalue(&t_tilde);
    let (is_psd, is_pd) = if is_gcs {
        let mut within_pd = true;
        for g in 0..g_count {
            let r = partition.range(g);
            let w = t.view((r.start, r.start), (r.len(), r.len())).into_owned();
            let lo = min_eigenvalue(&w);
            if lo <= tol {
                within_pd = false;
                failing.push(Diagnostic {
                    check: "within-block-pd".into(),
                    groups: vec![g + 1],
                    value: lo,
                    message: format!("W_{} has eigenvalue {lo:e}, not above {tol:e}", g + 1),
                });
            }
        }
        let psd = lo_tilde >= -tol;
        if !psd {
            failing.push(Diagnostic {
                check: "block-average-psd".into(),
                groups: vec![],
                value: lo_tilde,
                message: format!("block-average matrix has eigenvalue {lo_tilde:e}"),
            });
        } else if lo_tilde <= tol {
            failing.push(Diagnostic {
                check: "block-average-pd".into(),
                groups: vec![],
                value: lo_tilde,
                message: format!("block-average matrix is singular (eigenvalue {lo_tilde:e})"),
            });
        }
        (psd, psd && lo_tilde > tol && within_pd)
    } else {
        let lo = min_eigenvalue(t);
        if lo < -tol {
            failing.push(Diagnostic {
                check: "full-matrix-psd".into(),
                groups: vec![],
                value: lo,
                message: format!("not GCS; full matrix has eigenvalue {lo:e}"),
            });
        }
        (lo >= -tol, lo > tol)
    };

    let diag: Vec<f64> = t.diagonal().iter().copied().collect();
    let spread = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - diag.iter().copied().fold(f64::INFINITY, f64::min);

    Ok(ValidationReport {
        is_gcs,
        is_psd,
        is_pd,
        t_tilde: (0..g_count).map(|i| t_tilde.row(i).iter().copied().collect()).collect(),
        min_eigenvalue_t_tilde: lo_tilde,
        diagonal_spread: if diag.is_empty() { 0.0 } else { spread },
        tolerance: tol,
        failing_checks: failing,
    })
}

/// Recovers generators from a PSD GCS matrix: `B★ = T̃`, `M_g = A_gᵀ (W_g - mean(W_g) J) A_g`
/// with the normalized Helmert basis.
pub fn gcs_decompose(t: &BlockCovariance) -> Result<GcsParams> {
    let report = gcs_validate(&t.matrix, &t.partition)?;
    if !report.is_gcs || !report.is_psd {
        let why: Vec<&str> = report.failing_checks.iter().map(|d| d.check.as_str()).collect();
        return domain(format!("matrix is not a PSD GCS matrix: {}", why.join(", ")));
    }
    let partition = t.partition.clone();
    let centered = centered_within_blocks(&t.matrix, &partition);
    let within = centered
        .iter()
        .map(|sigma| {
            let n = sigma.nrows();
            if n < 2 {
                DMatrix::zeros(0, 0)
            } else {
                let a = helmert_basis(n).expect("n >= 2");
                let a = a.matrix();
                let m = a.transpose() * sigma * a;
                (&m + m.transpose()) * 0.5
            }
        })
        .collect();
    let between = report.t_tilde_matrix();
    GcsParams::new(partition, (&between + between.transpose()) * 0.5, within)
}

/// Max-abs residual of `T - [X T̃ Xᵀ + diag(W_g - mean(W_g) J)]` on the assembled matrix.
/// Expected to stay below `1e-12 · max|T|`.
pub fn gcs_identity_check(params: &GcsParams) -> f64 {
    gcs_identity_residual(&gcs_assemble(params))
}

pub fn gcs_identity_residual(t: &BlockCovariance) -> f64 {
    let p = &t.partition;
    let x = p.membership();
    let mut rebuilt = &x * block_average(t) * x.transpose();
    for (g, sigma) in centered_within_blocks(&t.matrix, p).iter().enumerate() {
        let off = p.offset(g);
        let n = p.size(g);
        for i in 0..n {
            for j in 0..n {
                rebuilt[(off + i, off + j)] += sigma[(i, j)];
            }
        }
    }
    max_abs(&(&t.matrix - rebuilt))
}

/// `T` is invertible iff `B★` and every `M_g` are.
pub fn gcs_is_invertible(params: &GcsParams) -> bool {
    let nonsingular = |m: &DMatrix<f64>| m.is_empty() || min_eigenvalue(m) > eigen_tolerance(m.trace());
    nonsingular(&params.between) && params.within_reduced.iter().all(nonsingular)
}

/// Helmert bases for each group of size ≥ 2 (`None` for singletons).
pub fn group_bases(partition: &GroupPartition) -> Vec<Option<ContrastBasis>> {
    partition.sizes().iter().map(|&n| helmert_basis(n).ok()).collect()
}
