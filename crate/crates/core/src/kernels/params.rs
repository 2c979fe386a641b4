//! Mapping between kernels and unconstrained real vectors for the optimizer.
//!
//! Parameters are laid out depth-first over the expression tree, preceded by the log root
//! variance when it is free. Unpacking needs a template kernel that fixes the structure.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::categorical::{CategoricalForm, CategoricalKernel};
use super::continuous::ContinuousKernel1D;
use super::expr::{Kernel, KernelExpr};
use super::warping::Warping;
use crate::covariance::{
    cs_from_hierarchical, hierarchical_from_cs, BlockForm, CsSpec,
    GcsParams,
};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_from_log_diag, log_diag_from_spd};

/// Role of one packed coordinate; drives the random-start ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    LogVariance,
    LogLengthscale,
    CholeskyLogDiag,
    CholeskyOffDiag,
    /// Spherical angle `θ = π / (1 + e^{-z})`.
    Angle,
    /// CS correlation through `t = ((L-1)c + 1)/L = 1/(1 + e^{-z})`.
    CorrelationLogit,
    /// Stick-breaking share of a cosine range.
    WarpShare,
    LogIncrement,
    Location,
    LogScale,
    LogSpan,
    LogNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub kind: ParamKind,
    pub label: String,
}

struct Packer {
    values: Vec<f64>,
    specs: Vec<ParamSpec>,
}

impl Packer {
    fn push(&mut self, kind: ParamKind, label: String, value: f64) {
        self.values.push(value);
        self.specs.push(ParamSpec { kind, label });
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Packs the free parameters of `kernel`.
pub fn pack(kernel: &Kernel) -> Result<Vec<f64>> {
    Ok(pack_with_specs(kernel)?.0)
}

/// Descriptions of each packed coordinate, in order.
pub fn param_specs(kernel: &Kernel) -> Result<Vec<ParamSpec>> {
    Ok(pack_with_specs(kernel)?.1)
}

pub fn pack_with_specs(kernel: &Kernel) -> Result<(Vec<f64>, Vec<ParamSpec>)> {
    let mut p = Packer { values: Vec::new(), specs: Vec::new() };
    if kernel.variance_free {
        p.push(ParamKind::LogVariance, "sigma2".into(), kernel.variance.ln());
    }
    pack_expr(&kernel.expr, &mut p)?;
    if let Some(v) = p.values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParams(format!("packed parameter is not finite: {v}")));
    }
    Ok((p.values, p.specs))
}

fn pack_expr(e: &KernelExpr, p: &mut Packer) -> Result<()> {
    match e {
        KernelExpr::Constant { .. } => {}
        KernelExpr::Continuous { input, kernel } => {
            if let Some(l) = kernel.lengthscale() {
                p.push(ParamKind::LogLengthscale, format!("x{input}.lengthscale"), l.ln());
            }
        }
        KernelExpr::Categorical { input, kernel } => pack_categorical(*input, kernel, p)?,
        KernelExpr::Combine { terms, .. } => {
            for t in terms {
                pack_expr(t, p)?;
            }
        }
    }
    Ok(())
}

fn push_cholesky(p: &mut Packer, label: &str, m: &DMatrix<f64>) -> Result<()> {
    let packed = log_diag_from_spd(m).ok_or_else(|| {
        Error::InvalidParams(format!("{label} is not positive definite and cannot be packed"))
    })?;
    let k = m.nrows();
    let mut idx = 0;
    for i in 0..k {
        for j in 0..=i {
            let kind = if i == j { ParamKind::CholeskyLogDiag } else { ParamKind::CholeskyOffDiag };
            p.push(kind, format!("{label}.chol[{},{}]", i + 1, j + 1), packed[idx]);
            idx += 1;
        }
    }
    Ok(())
}

/// `(v, c)` of a matrix that must be compound symmetric.
fn cs_of(m: &DMatrix<f64>, label: &str) -> Result<(f64, f64)> {
    let n = m.nrows();
    let v = m[(0, 0)];
    let c = if n > 1 { m[(1, 0)] } else { 0.0 };
    let tol = 1e-9 * v.abs().max(1.0);
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { v } else { c };
            if (m[(i, j)] - want).abs() > tol {
                return Err(Error::InvalidParams(format!("{label} is not compound symmetric")));
            }
        }
    }
    Ok((v, c))
}

fn pack_categorical(input: usize, k: &CategoricalKernel, p: &mut Packer) -> Result<()> {
    let tag = format!("u{input}");
    let carries = k.carries_variance();
    match k.form() {
        CategoricalForm::Cs(s) => {
            if carries {
                if s.size >= 2 {
                    let (vm, vl) = hierarchical_from_cs(s)?;
                    p.push(ParamKind::LogVariance, format!("{tag}.v_mu"), vm.ln());
                    p.push(ParamKind::LogVariance, format!("{tag}.v_lambda"), vl.ln());
                } else {
                    p.push(ParamKind::LogVariance, format!("{tag}.variance"), s.variance.ln());
                }
            } else if s.size >= 2 {
                let l = s.size as f64;
                let t = ((l - 1.0) * s.covariance / s.variance + 1.0) / l;
                p.push(ParamKind::CorrelationLogit, format!("{tag}.rho"), logit(t));
            }
        }
        CategoricalForm::Gcs { params, between, within, .. } => {
            let b = params.between();
            match between {
                BlockForm::General => push_cholesky(p, &format!("{tag}.between"), b)?,
                BlockForm::Cs => {
                    let (v, c) = cs_of(b, &format!("{tag}.between"))?;
                    if b.nrows() >= 2 {
                        let (vm, vl) = hierarchical_from_cs(&CsSpec::new(b.nrows(), v, c))?;
                        p.push(ParamKind::LogVariance, format!("{tag}.between.v_mu"), vm.ln());
                        p.push(ParamKind::LogVariance, format!("{tag}.between.v_lambda"), vl.ln());
                    } else {
                        p.push(ParamKind::LogVariance, format!("{tag}.between.v"), v.ln());
                    }
                }
            }
            for (g, (m, form)) in params.within_reduced().iter().zip(within).enumerate() {
                if m.nrows() == 0 {
                    continue;
                }
                let label = format!("{tag}.within{}", g + 1);
                match form {
                    BlockForm::General => push_cholesky(p, &label, m)?,
                    BlockForm::Cs => {
                        // A CS within-block has a scaled-identity reduced generator.
                        let (v, c) = cs_of(m, &label)?;
                        if c.abs() > 1e-9 * v.abs().max(1.0) {
                            return Err(Error::InvalidParams(format!(
                                "{label}: reduced generator of a CS block must be diagonal"
                            )));
                        }
                        p.push(ParamKind::LogVariance, format!("{label}.v_lambda"), v.ln());
                    }
                }
            }
        }
        CategoricalForm::Spherical { variances, angles, .. } => {
            if carries {
                for (i, v) in variances.iter().enumerate() {
                    p.push(ParamKind::LogVariance, format!("{tag}.variance{}", i + 1), v.ln());
                }
            }
            for (i, a) in angles.iter().enumerate() {
                p.push(ParamKind::Angle, format!("{tag}.angle{}", i + 1), logit(a / PI));
            }
        }
        CategoricalForm::Ordinal { warping, base, variance } => {
            if carries {
                p.push(ParamKind::LogVariance, format!("{tag}.variance"), variance.ln());
            }
            match (warping, base) {
                (Warping::PiecewiseLinear { increments }, ContinuousKernel1D::Cosine { alpha }) => {
                    let slack = alpha - increments.iter().sum::<f64>();
                    if !(slack > 0.0) {
                        return Err(Error::InvalidParams(format!(
                            "{tag}: warped range must stay strictly below the cosine bound"
                        )));
                    }
                    for (i, d) in increments.iter().enumerate() {
                        p.push(ParamKind::WarpShare, format!("{tag}.share{}", i + 1), (d / slack).ln());
                    }
                }
                (Warping::PiecewiseLinear { increments }, _) => {
                    for (i, d) in increments.iter().enumerate() {
                        p.push(ParamKind::LogIncrement, format!("{tag}.increment{}", i + 1), d.ln());
                    }
                }
                (Warping::NormalCdf { location, scale, span, .. }, b) => {
                    p.push(ParamKind::Location, format!("{tag}.location"), *location);
                    p.push(ParamKind::LogScale, format!("{tag}.scale"), scale.ln());
                    if !b.is_cosine() {
                        p.push(ParamKind::LogSpan, format!("{tag}.span"), span.ln());
                    }
                }
            }
        }
    }
    Ok(())
}

struct Cursor<'a> {
    data: &'a [f64],
    pos: usize,
}

impl Cursor<'_> {
    fn next(&mut self) -> Result<f64> {
        let v = *self.data.get(self.pos).ok_or_else(|| {
            Error::InvalidParams(format!("parameter vector too short at index {}", self.pos))
        })?;
        self.pos += 1;
        Ok(v)
    }

    fn exp(&mut self) -> Result<f64> {
        let v = self.next()?.exp();
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidParams(format!("parameter {} out of range", self.pos - 1)))
        }
    }

    fn take(&mut self, n: usize) -> Result<&[f64]> {
        if self.pos + n > self.data.len() {
            return Err(Error::InvalidParams("parameter vector too short".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

/// Rebuilds a kernel with the structure of `template` from packed values.
pub fn unpack(values: &[f64], template: &Kernel) -> Result<Kernel> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParams(format!("non-finite parameter {v}")));
    }
    let mut c = Cursor { data: values, pos: 0 };
    let variance = if template.variance_free { c.exp()? } else { template.variance };
    let expr = unpack_expr(&template.expr, &mut c)?;
    if c.pos != values.len() {
        return Err(Error::InvalidParams(format!(
            "parameter vector has {} entries, kernel uses {}",
            values.len(),
            c.pos
        )));
    }
    Ok(Kernel { variance, variance_free: template.variance_free, expr })
}

fn unpack_expr(e: &KernelExpr, c: &mut Cursor) -> Result<KernelExpr> {
    Ok(match e {
        KernelExpr::Constant { .. } => e.clone(),
        KernelExpr::Continuous { input, kernel } => {
            let kernel = match kernel.lengthscale() {
                Some(_) => kernel.with_lengthscale(c.exp()?),
                None => *kernel,
            };
            KernelExpr::Continuous { input: *input, kernel }
        }
        KernelExpr::Categorical { input, kernel } => {
            KernelExpr::Categorical { input: *input, kernel: unpack_categorical(kernel, c)? }
        }
        KernelExpr::Combine { op, terms } => KernelExpr::Combine {
            op: *op,
            terms: terms.iter().map(|t| unpack_expr(t, c)).collect::<Result<_>>()?,
        },
    })
}

fn cs_block(n: usize, vm: f64, vl: f64) -> Result<DMatrix<f64>> {
    if n == 1 {
        return Ok(DMatrix::from_element(1, 1, vm));
    }
    let s = cs_from_hierarchical(n, vm, vl)?;
    Ok(crate::covariance::cs_matrix(&s))
}

fn unpack_categorical(k: &CategoricalKernel, c: &mut Cursor) -> Result<CategoricalKernel> {
    let carries = k.carries_variance();
    let form = match k.form() {
        CategoricalForm::Cs(s) => {
            let spec = if carries {
                if s.size >= 2 {
                    let (vm, vl) = (c.exp()?, c.exp()?);
                    cs_from_hierarchical(s.size, vm, vl)?
                } else {
                    CsSpec::new(1, c.exp()?, 0.0)
                }
            } else if s.size >= 2 {
                let l = s.size as f64;
                let t = sigmoid(c.next()?);
                CsSpec::new(s.size, 1.0, (l * t - 1.0) / (l - 1.0))
            } else {
                *s
            };
            CategoricalForm::Cs(spec)
        }
        CategoricalForm::Gcs { params, between, within, relabel } => {
            let part = params.partition().clone();
            let g = part.group_count();
            let b = match between {
                BlockForm::General => {
                    cholesky_product(g, c.take(cholesky_log_diag_len(g))?)
                }
                BlockForm::Cs => {
                    if g >= 2 {
                        let (vm, vl) = (c.exp()?, c.exp()?);
                        cs_block(g, vm, vl)?
                    } else {
                        DMatrix::from_element(1, 1, c.exp()?)
                    }
                }
            };
            let mut w = Vec::with_capacity(g);
            for (gi, form) in within.iter().enumerate() {
                let n = part.size(gi) - 1;
                w.push(if n == 0 {
                    DMatrix::zeros(0, 0)
                } else {
                    match form {
                        BlockForm::General => cholesky_product(n, c.take(cholesky_log_diag_len(n))?),
                        BlockForm::Cs => DMatrix::identity(n, n) * c.exp()?,
                    }
                });
            }
            CategoricalForm::Gcs {
                params: GcsParams::new(part, b, w)?,
                between: *between,
                within: within.clone(),
                relabel: relabel.clone(),
            }
        }
        CategoricalForm::Spherical { level_count, variances, angles } => {
            let variances = if carries {
                (0..variances.len()).map(|_| c.exp()).collect::<Result<Vec<_>>>()?
            } else {
                variances.clone()
            };
            let angles = (0..angles.len())
                .map(|_| c.next().map(|z| PI * sigmoid(z)))
                .collect::<Result<Vec<_>>>()?;
            CategoricalForm::Spherical { level_count: *level_count, variances, angles }
        }
        CategoricalForm::Ordinal { warping, base, variance } => {
            let variance = if carries { c.exp()? } else { *variance };
            let warping = match (warping, base) {
                (Warping::PiecewiseLinear { increments }, ContinuousKernel1D::Cosine { alpha }) => {
                    let e: Vec<f64> = (0..increments.len())
                        .map(|_| c.next().map(f64::exp))
                        .collect::<Result<_>>()?;
                    let denom = 1.0 + e.iter().sum::<f64>();
                    if !denom.is_finite() {
                        return Err(Error::InvalidParams("warping shares overflow".into()));
                    }
                    Warping::PiecewiseLinear { increments: e.iter().map(|x| alpha * x / denom).collect() }
                }
                (Warping::PiecewiseLinear { increments }, _) => Warping::PiecewiseLinear {
                    increments: (0..increments.len()).map(|_| c.exp()).collect::<Result<_>>()?,
                },
                (Warping::NormalCdf { level_count, span, .. }, b) => {
                    let location = c.next()?;
                    let scale = c.exp()?;
                    let span = match b {
                        ContinuousKernel1D::Cosine { alpha } => alpha.min(*span),
                        _ => c.exp()?,
                    };
                    Warping::NormalCdf { level_count: *level_count, location, scale, span }
                }
            };
            CategoricalForm::Ordinal { warping, base: *base, variance }
        }
    };
    k.rebuild(form)
}

fn cholesky_log_diag_len(k: usize) -> usize {
    k * (k + 1) / 2
}

fn cholesky_product(k: usize, packed: &[f64]) -> DMatrix<f64> {
    let l = cholesky_from_log_diag(k, packed);
    &l * l.transpose()
}

/// Number of packed coordinates; equal to `pack(kernel)?.len()`.
pub fn param_count(kernel: &Kernel) -> Result<usize> {
    Ok(pack(kernel)?.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::GroupPartition;
    use crate::kernels::expr::{combine, CombineOp};
    use proptest::prelude::*;

    fn matern() -> KernelExpr {
        KernelExpr::continuous(0, ContinuousKernel1D::matern52(0.3))
    }

    fn kernels() -> Vec<Kernel> {
        let part = GroupPartition::new(vec![3, 1, 4]).unwrap();
        let gcs_gen = CategoricalKernel::gcs_default(
            part.clone(),
            BlockForm::General,
            vec![BlockForm::Cs, BlockForm::Cs, BlockForm::General],
        )
        .unwrap();
        let gcs_cs = CategoricalKernel::gcs_default(part, BlockForm::Cs, vec![BlockForm::Cs; 3])
            .unwrap();
        let cats = vec![
            (CategoricalKernel::cs(5, 1.0, 0.3, true).unwrap(), false),
            (CategoricalKernel::cs(5, 1.0, 0.3, false).unwrap(), true),
            (gcs_gen, false),
            (gcs_cs, false),
            (CategoricalKernel::spherical_default(4, 1.5, true).unwrap(), false),
            (CategoricalKernel::spherical_default(4, 1.0, false).unwrap(), true),
            (
                CategoricalKernel::ordinal(
                    Warping::equally_spaced(5, 2.0),
                    ContinuousKernel1D::cosine(),
                    1.0,
                    true,
                )
                .unwrap(),
                false,
            ),
            (
                CategoricalKernel::ordinal(
                    Warping::NormalCdf { level_count: 6, location: 3.0, scale: 1.5, span: 1.0 },
                    ContinuousKernel1D::matern52(0.5),
                    1.0,
                    false,
                )
                .unwrap(),
                true,
            ),
        ];
        cats.into_iter()
            .map(|(k, free)| {
                let e = combine(CombineOp::Product, matern(), KernelExpr::categorical(0, k))
                    .unwrap();
                Kernel::new(e, 1.0, free).unwrap()
            })
            .collect()
    }

    #[test]
    fn round_trip_is_identity() {
        for k in kernels() {
            let v = pack(&k).unwrap();
            let k2 = unpack(&v, &k).unwrap();
            let v2 = pack(&k2).unwrap();
            assert_eq!(v.len(), param_specs(&k).unwrap().len());
            for (a, b) in v.iter().zip(&v2) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b} for {:?}", k.expr);
            }
            let (ca, cb) = (k.expr.categorical_leaves(), k2.expr.categorical_leaves());
            assert!((ca[0].1.matrix() - cb[0].1.matrix()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn parameter_free_kernel_packs_empty() {
        let k = Kernel::new(KernelExpr::continuous(0, ContinuousKernel1D::cosine()), 1.0, false)
            .unwrap();
        assert!(pack(&k).unwrap().is_empty());
        assert_eq!(unpack(&[], &k).unwrap(), k);
    }

    #[test]
    fn negative_cs_covariance_reachable() {
        let k = CategoricalKernel::cs(4, 1.0, 0.5, true).unwrap();
        let t = Kernel::with_fixed_scale(KernelExpr::categorical(0, k)).unwrap();
        let u = unpack(&[(0.01f64).ln(), (2.0f64).ln()], &t).unwrap();
        let m = u.expr.categorical_leaves()[0].1.matrix().clone();
        assert!(m[(0, 1)] < 0.0);
    }

    #[test]
    fn wrong_length_rejected() {
        let k = &kernels()[0];
        let mut v = pack(k).unwrap();
        v.push(0.0);
        assert!(unpack(&v, k).is_err());
        v.truncate(1);
        assert!(unpack(&v, k).is_err());
    }

    #[test]
    fn counts_match_generator_dimension() {
        let k = &kernels()[2];
        // lengthscale + between Cholesky (6) + within: CS(1) + singleton(0) + General 3×3 (6)
        assert_eq!(pack(k).unwrap().len(), 1 + 6 + 1 + 6);
        let k = &kernels()[3];
        assert_eq!(pack(k).unwrap().len(), 1 + 2 + 1 + 1);
    }

    proptest! {
        #[test]
        fn any_vector_gives_psd_matrix(seed in proptest::collection::vec(-3.0f64..3.0, 64)) {
            for k in kernels() {
                let n = pack(&k).unwrap().len();
                let k2 = unpack(&seed[..n], &k).unwrap();
                let m = k2.expr.categorical_leaves()[0].1.matrix().clone();
                let scale = m.diagonal().iter().cloned().fold(1.0f64, f64::max);
                prop_assert!(crate::linalg::min_eigenvalue(&m) > -1e-9 * scale);
                let back = pack(&k2).unwrap();
                let k3 = unpack(&back, &k).unwrap();
                let m3 = k3.expr.categorical_leaves()[0].1.matrix();
                prop_assert!((&m - m3).abs().max() < 1e-7 * scale);
            }
        }
    }
}
