//! Multi-start maximum-likelihood fitting, prediction and persistence.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::likelihood::{Factorization, Objective, DEFAULT_NUGGET, MAX_NUGGET};
use super::optim::{bfgs_fd, nelder_mead, Optimizer, Tolerances};
use crate::error::{domain, Error, Result};
use crate::kernels::{cross_gram, pack_with_specs, InputSchema, Kernel, MixedPoint, ParamKind, ParamSpec};
use crate::linalg::solve_lower;

/// Sampling intervals for random starts, per parameter kind, in the packed space.
///
/// Variance-like kinds are shifted by the log sample variance of the response
/// (`log_variance`, `log_noise`) or half of it (`cholesky_log_diag`);
/// `cholesky_off_diag` is multiplied by the response standard deviation and `location`
/// is an offset from the template value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StartRanges {
    pub log_variance: (f64, f64),
    pub log_lengthscale: (f64, f64),
    pub cholesky_log_diag: (f64, f64),
    pub cholesky_off_diag: (f64, f64),
    pub angle: (f64, f64),
    pub correlation_logit: (f64, f64),
    pub warp_share: (f64, f64),
    pub log_increment: (f64, f64),
    pub location: (f64, f64),
    pub log_scale: (f64, f64),
    pub log_span: (f64, f64),
    pub log_noise: (f64, f64),
}

impl Default for StartRanges {
    fn default() -> Self {
        Self {
            log_variance: (-2.0, 1.0),
            log_lengthscale: (-3.0, 0.7),
            cholesky_log_diag: (-1.5, 0.5),
            cholesky_off_diag: (-1.0, 1.0),
            angle: (-2.0, 2.0),
            correlation_logit: (-3.0, 3.0),
            warp_share: (-1.5, 1.5),
            log_increment: (-3.0, 1.0),
            location: (-2.0, 2.0),
            log_scale: (-1.0, 2.0),
            log_span: (-2.0, 1.5),
            log_noise: (-16.0, -6.0),
        }
    }
}

impl StartRanges {
    /// Interval for one coordinate given the response variance and template value.
    pub fn interval(&self, kind: ParamKind, y_var: f64, template: f64) -> (f64, f64) {
        let lv = y_var.ln();
        let shift = |(a, b): (f64, f64), s: f64| (a + s, b + s);
        match kind {
            ParamKind::LogVariance => shift(self.log_variance, lv),
            ParamKind::LogLengthscale => self.log_lengthscale,
            ParamKind::CholeskyLogDiag => shift(self.cholesky_log_diag, 0.5 * lv),
            ParamKind::CholeskyOffDiag => {
                let s = y_var.sqrt();
                (self.cholesky_off_diag.0 * s, self.cholesky_off_diag.1 * s)
            }
            ParamKind::Angle => self.angle,
            ParamKind::CorrelationLogit => self.correlation_logit,
            ParamKind::WarpShare => self.warp_share,
            ParamKind::LogIncrement => self.log_increment,
            ParamKind::Location => shift(self.location, template),
            ParamKind::LogScale => self.log_scale,
            ParamKind::LogSpan => self.log_span,
            ParamKind::LogNoise => shift(self.log_noise, lv),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub n_starts: usize,
    pub optimizer: Optimizer,
    /// Objective evaluations per restart; `None` means `250·(d+1)` for `d` parameters.
    pub max_evals: Option<usize>,
    pub seed: u64,
    /// Fit the noise variance τ² (log scale, floored at 1e-12).
    pub fit_noise: bool,
    /// Noise variance when it is not fitted.
    pub noise: f64,
    /// Initial relative nugget.
    pub nugget: f64,
    /// Largest relative nugget tried before giving up on a parameter vector.
    pub max_nugget: f64,
    pub start_ranges: StartRanges,
    /// Run restarts on the rayon pool.
    pub parallel: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_starts: 5,
            optimizer: Optimizer::NelderMead,
            max_evals: None,
            seed: 0,
            fit_noise: true,
            noise: 0.0,
            nugget: DEFAULT_NUGGET,
            max_nugget: MAX_NUGGET,
            start_ranges: StartRanges::default(),
            parallel: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == 0 {
            return domain("n_starts must be at least 1");
        }
        if !(self.nugget >= 0.0) || !(self.max_nugget >= self.nugget) {
            return domain("nugget settings must satisfy 0 <= nugget <= max_nugget");
        }
        if !(self.noise >= 0.0) {
            return domain("fixed noise must be >= 0");
        }
        if self.max_evals == Some(0) {
            return domain("max_evals must be positive");
        }
        Ok(())
    }
}

/// Outcome of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub index: usize,
    pub start: Vec<f64>,
    /// NLL at the starting point (`None` when infinite).
    pub start_nll: Option<f64>,
    /// Best NLL reached (`None` when every evaluation failed).
    pub nll: Option<f64>,
    pub evals: usize,
    pub converged: bool,
}

/// A fitted GP: constant trend, kernel with estimated hyperparameters, noise.
#[derive(Debug, Clone)]
pub struct GpModel {
    dataset: Dataset,
    template: Kernel,
    fit_noise: bool,
    fixed_noise: f64,
    params: Vec<f64>,
    specs: Vec<ParamSpec>,
    kernel: Kernel,
    noise_variance: f64,
    fact: Factorization,
    restarts: Vec<RestartRecord>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn sample_variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let v = y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0).max(1.0);
    if v > 0.0 && v.is_finite() {
        v
    } else {
        1.0
    }
}

/// Parameter descriptions of the fit vector (kernel, then noise when fitted).
pub fn fit_param_specs(template: &Kernel, fit_noise: bool) -> Result<(Vec<f64>, Vec<ParamSpec>)> {
    let (mut values, mut specs) = pack_with_specs(template)?;
    if fit_noise {
        values.push(f64::NAN);
        specs.push(ParamSpec { kind: ParamKind::LogNoise, label: "noise".into() });
    }
    Ok((values, specs))
}

/// Maximum-likelihood fit with `config.n_starts` random restarts.
///
/// Restart `i` draws its start from the ChaCha stream `i` of `config.seed`, so results do
/// not depend on scheduling. The best restart has the lowest NLL; ties go to the lowest
/// index.
pub fn fit(dataset: &Dataset, template: &Kernel, config: &FitConfig) -> Result<GpModel> {
    config.validate()?;
    if dataset.len() < 2 {
        return domain(format!("fitting needs at least 2 observations, got {}", dataset.len()));
    }
    template.check_schema(dataset.schema())?;
    let (tvals, specs) = fit_param_specs(template, config.fit_noise)?;
    let mut obj = Objective::new(dataset, template, config.fit_noise);
    obj.fixed_noise = config.noise;
    obj.nugget = config.nugget;
    obj.max_nugget = config.max_nugget;

    if specs.is_empty() {
        return GpModel::from_params(dataset.clone(), template.clone(), false, config.noise, vec![], config.nugget, config.max_nugget, vec![]);
    }

    let d = specs.len();
    let max_evals = config.max_evals.unwrap_or(250 * (d + 1));
    let y_var = sample_variance(dataset.y());
    let intervals: Vec<(f64, f64)> = specs
        .iter()
        .zip(&tvals)
        .map(|(s, &t)| config.start_ranges.interval(s.kind, y_var, t))
        .collect();

    let run = |i: usize| -> (RestartRecord, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        let x0: Vec<f64> = intervals
            .iter()
            .map(|&(a, b)| if b > a { rng.random_range(a..b) } else { a })
            .collect();
        let step: Vec<f64> = intervals.iter().map(|&(a, b)| (0.25 * (b - a)).max(0.05)).collect();
        let f = |x: &[f64]| obj.value(x);
        let r = match config.optimizer {
            Optimizer::NelderMead => nelder_mead(f, &x0, &step, max_evals, Tolerances::default()),
            Optimizer::GradientFd => bfgs_fd(f, &x0, max_evals, Tolerances::default()),
        };
        let rec = RestartRecord {
            index: i,
            start_nll: finite(obj.value(&x0)),
            start: x0,
            nll: finite(r.f),
            evals: r.evals,
            converged: r.converged,
        };
        (rec, r.x)
    };
    let results: Vec<(RestartRecord, Vec<f64>)> = if config.parallel {
        (0..config.n_starts).into_par_iter().map(run).collect()
    } else {
        (0..config.n_starts).map(run).collect()
    };

    let best = results
        .iter()
        .filter(|(r, _)| r.nll.is_some())
        .min_by(|(a, _), (b, _)| a.nll.unwrap().total_cmp(&b.nll.unwrap()).then(a.index.cmp(&b.index)));
    let Some((_, x)) = best else {
        return Err(Error::Fit(format!(
            "all {} restarts failed: no parameter vector gave a finite likelihood",
            config.n_starts
        )));
    };
    let x = x.clone();
    let records = results.into_iter().map(|(r, _)| r).collect();
    GpModel::from_params(
        dataset.clone(),
        template.clone(),
        config.fit_noise,
        config.noise,
        x,
        config.nugget,
        config.max_nugget,
        records,
    )
}

impl GpModel {
    #[allow(clippy::too_many_arguments)]
    fn from_params(
        dataset: Dataset,
        template: Kernel,
        fit_noise: bool,
        fixed_noise: f64,
        params: Vec<f64>,
        nugget: f64,
        max_nugget: f64,
        restarts: Vec<RestartRecord>,
    ) -> Result<Self> {
        let (_, specs) = fit_param_specs(&template, fit_noise)?;
        let mut obj = Objective::new(&dataset, &template, fit_noise);
        obj.fixed_noise = fixed_noise;
        obj.nugget = nugget;
        obj.max_nugget = max_nugget;
        let (kernel, noise_variance, fact) = obj.factorize(&params)?;
        Ok(Self { dataset, template, fit_noise, fixed_noise, params, specs, kernel, noise_variance, fact, restarts })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn template(&self) -> &Kernel {
        &self.template
    }

    /// Fitted kernel on the natural scale.
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Packed parameter vector (kernel, then `log τ²` when the noise is fitted).
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param_specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn trend(&self) -> f64 {
        self.fact.trend
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn nll(&self) -> f64 {
        self.fact.nll
    }

    /// Relative nugget used in the final factorization.
    pub fn nugget(&self) -> f64 {
        self.fact.nugget
    }

    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.fact.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.fact.alpha
    }

    pub fn restarts(&self) -> &[RestartRecord] {
        &self.restarts
    }

    pub fn fit_noise(&self) -> bool {
        self.fit_noise
    }

    /// Materialized categorical matrices of the fitted kernel, by categorical input.
    pub fn categorical_matrices(&self) -> Vec<(usize, DMatrix<f64>)> {
        self.kernel
            .expr
            .categorical_leaves()
            .into_iter()
            .map(|(i, k)| (i, k.matrix().clone()))
            .collect()
    }

    /// Kriging mean and variance at `points`.
    pub fn predict(&self, points: &[MixedPoint]) -> Result<(Vec<f64>, Vec<f64>)> {
        for (i, p) in points.iter().enumerate() {
            self.dataset
                .schema()
                .check_point(p)
                .map_err(|e| Error::Domain(format!("prediction point {}: {e}", i + 1)))?;
        }
        let kx = cross_gram(&self.kernel, points, self.dataset.points())?;
        let mut means = Vec::with_capacity(points.len());
        let mut vars = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            let k = kx.row(i).transpose();
            means.push(self.fact.trend + k.dot(&self.fact.alpha));
            let v = solve_lower(&self.fact.chol, &k);
            vars.push((self.kernel.eval(p, p) - v.dot(&v)).max(0.0));
        }
        Ok((means, vars))
    }

    /// Kriging mean only.
    pub fn predict_mean(&self, points: &[MixedPoint]) -> Result<Vec<f64>> {
        for (i, p) in points.iter().enumerate() {
            self.dataset
                .schema()
                .check_point(p)
                .map_err(|e| Error::Domain(format!("prediction point {}: {e}", i + 1)))?;
        }
        let kx = cross_gram(&self.kernel, points, self.dataset.points())?;
        Ok((0..points.len()).map(|i| self.fact.trend + kx.row(i).transpose().dot(&self.fact.alpha)).collect())
    }

    pub fn to_document(&self) -> ModelDocument {
        let names: Vec<String> = self.dataset.schema().categorical.iter().map(|c| c.name.clone()).collect();
        ModelDocument {
            format: MODEL_FORMAT.into(),
            schema: self.dataset.schema().clone(),
            template: self.template.clone(),
            fit_noise: self.fit_noise,
            fixed_noise: self.fixed_noise,
            params: self.params.clone(),
            param_labels: self.specs.iter().map(|s| s.label.clone()).collect(),
            kernel: self.kernel.clone(),
            trend: self.fact.trend,
            noise_variance: self.noise_variance,
            nll: self.fact.nll,
            nugget: self.fact.nugget,
            categorical_matrices: self
                .categorical_matrices()
                .into_iter()
                .map(|(i, m)| NamedMatrix {
                    input: names.get(i).cloned().unwrap_or_else(|| format!("u{i}")),
                    data: (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect(),
                })
                .collect(),
            points: self.dataset.points().to_vec(),
            y: self.dataset.y().to_vec(),
            restarts: self.restarts.clone(),
        }
    }

    /// Rebuilds a model from its document by unpacking the stored parameter vector.
    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.format != MODEL_FORMAT {
            return Err(Error::Parse(format!("unknown model format '{}'", doc.format)));
        }
        let dataset = Dataset::new(doc.schema, doc.points, doc.y)?;
        let m = Self::from_params(
            dataset,
            doc.template,
            doc.fit_noise,
            doc.fixed_noise,
            doc.params,
            doc.nugget,
            doc.nugget,
            doc.restarts,
        )?;
        if (m.nll() - doc.nll).abs() > 1e-8 * (1.0 + doc.nll.abs()) {
            return Err(Error::Numerical(format!(
                "stored NLL {} does not match recomputed {}",
                doc.nll,
                m.nll()
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), &self.to_document())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_document(serde_json::from_str(&text)?)
    }
}

pub const MODEL_FORMAT: &str = "gcs-kriging-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMatrix {
    pub input: String,
    pub data: Vec<Vec<f64>>,
}

/// JSON form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub schema: InputSchema,
    pub template: Kernel,
    pub fit_noise: bool,
    pub fixed_noise: f64,
    /// Packed (unconstrained) parameters; the source of truth on reload.
    pub params: Vec<f64>,
    pub param_labels: Vec<String>,
    /// Natural-scale kernel, for inspection.
    pub kernel: Kernel,
    pub trend: f64,
    pub noise_variance: f64,
    pub nll: f64,
    pub nugget: f64,
    pub categorical_matrices: Vec<NamedMatrix>,
    pub points: Vec<MixedPoint>,
    pub y: Vec<f64>,
    pub restarts: Vec<RestartRecord>,
}

/// `1 − Σ(yᵢ−ŷᵢ)² / Σ(yᵢ−ȳ)²`.
pub fn q2(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return domain(format!("{} observations but {} predictions", y_true.len(), y_pred.len()));
    }
    if y_true.len() < 2 {
        return domain("Q² needs at least two test points");
    }
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let sst: f64 = y_true.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return Err(Error::UndefinedMetric("Q² is undefined for a constant test response".into()));
    }
    let sse: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p) * (y - p)).sum();
    Ok(1.0 - sse / sst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{combine, CategoricalKernel, CombineOp, ContinuousKernel1D, KernelExpr};

    fn toy() -> (Dataset, Kernel) {
        let s = InputSchema::one_by_one(3);
        let pts: Vec<MixedPoint> = (0..12)
            .map(|i| MixedPoint::new(vec![i as f64 / 11.0], vec![i % 3 + 1]))
            .collect();
        let y = pts.iter().map(|p| (6.0 * p.x[0]).sin() + 0.3 * p.u[0] as f64).collect();
        let e = combine(
            CombineOp::Product,
            KernelExpr::continuous(0, ContinuousKernel1D::matern52(0.3)),
            KernelExpr::categorical(0, CategoricalKernel::cs(3, 1.0, 0.5, true).unwrap()),
        )
        .unwrap();
        (Dataset::new(s, pts, y).unwrap(), Kernel::with_fixed_scale(e).unwrap())
    }

    #[test]
    fn q2_examples() {
        assert_eq!(q2(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(q2(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!((q2(&[0.0, 1.0, 2.0], &[0.0, 1.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(q2(&[1.0, 1.0], &[0.0, 1.0]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn zero_free_parameters_uses_template() {
        let s = InputSchema::new(vec!["x".into()], vec![]).unwrap();
        let pts = vec![MixedPoint::new(vec![0.0], vec![]), MixedPoint::new(vec![1.0], vec![])];
        let d = Dataset::new(s, pts, vec![1.0, -1.0]).unwrap();
        let k = Kernel::new(KernelExpr::continuous(0, ContinuousKernel1D::cosine()), 1.0, false).unwrap();
        let cfg = FitConfig { fit_noise: false, ..FitConfig::default() };
        let m = fit(&d, &k, &cfg).unwrap();
        assert!(m.params().is_empty());
        assert_eq!(m.kernel(), &k);
    }

    #[test]
    fn two_point_matern_closed_form() {
        let s = InputSchema::new(vec!["x".into()], vec![]).unwrap();
        let pts = vec![MixedPoint::new(vec![0.2], vec![]), MixedPoint::new(vec![0.6], vec![])];
        let y = [1.0, 3.0];
        let d = Dataset::new(s, pts, y.to_vec()).unwrap();
        let k = Kernel::new(KernelExpr::continuous(0, ContinuousKernel1D::matern52(0.5)), 2.0, false).unwrap();
        let m = GpModel::from_params(d, k, false, 0.0, vec![0.5f64.ln()], 0.0, 0.0, vec![]).unwrap();
        let r = 5f64.sqrt() * 0.4 / 0.5;
        let rho = (1.0 + r + r * r / 3.0) * (-r).exp();
        // Symmetric 2×2 system: the profiled trend is the plain mean.
        let mu = 2.0;
        assert!((m.trend() - mu).abs() < 1e-12);
        let x = 0.3;
        let dx = (x - 0.2f64).abs();
        let r1 = 5f64.sqrt() * dx / 0.5;
        let k1 = (1.0 + r1 + r1 * r1 / 3.0) * (-r1).exp();
        let r2 = 5f64.sqrt() * (0.6 - x) / 0.5;
        let k2 = (1.0 + r2 + r2 * r2 / 3.0) * (-r2).exp();
        // K⁻¹ for [[2, 2ρ],[2ρ, 2]] applied to (y − μ) = (−1, 1).
        let det = 4.0 - 4.0 * rho * rho;
        let a0 = (2.0 * -1.0 - 2.0 * rho * 1.0) / det;
        let a1 = (-2.0 * rho * -1.0 + 2.0 * 1.0) / det;
        let want_mean = mu + 2.0 * k1 * a0 + 2.0 * k2 * a1;
        let kv = [2.0 * k1, 2.0 * k2];
        let kinv = [[2.0 / det, -2.0 * rho / det], [-2.0 * rho / det, 2.0 / det]];
        let quad = kv[0] * (kinv[0][0] * kv[0] + kinv[0][1] * kv[1])
            + kv[1] * (kinv[1][0] * kv[0] + kinv[1][1] * kv[1]);
        let (mean, var) = m.predict(&[MixedPoint::new(vec![x], vec![])]).unwrap();
        assert!((mean[0] - want_mean).abs() < 1e-12);
        assert!((var[0] - (2.0 - quad)).abs() < 1e-12);
    }

    #[test]
    fn interpolates_and_far_points_revert_to_trend() {
        let (d, k) = toy();
        let m = fit(&d, &k, &FitConfig { n_starts: 2, ..FitConfig::default() }).unwrap();
        let (mean, var) = m.predict(d.points()).unwrap();
        let range = d.y().iter().cloned().fold(f64::MIN, f64::max) - d.y().iter().cloned().fold(f64::MAX, f64::min);
        for (p, y) in mean.iter().zip(d.y()) {
            assert!((p - y).abs() <= 1e-4 * range, "{p} vs {y}");
        }
        let scale = m.kernel().expr.categorical_leaves()[0].1.matrix().diagonal().max();
        for v in &var {
            assert!(*v <= m.noise_variance() + 1e-4 * scale);
        }
    }

    #[test]
    fn uncorrelated_point_gives_trend() {
        let s = InputSchema::new(vec!["x".into()], vec![]).unwrap();
        let pts = vec![MixedPoint::new(vec![0.0], vec![]), MixedPoint::new(vec![0.01], vec![])];
        let d = Dataset::new(s, pts, vec![1.0, 2.0]).unwrap();
        let k = Kernel::new(KernelExpr::continuous(0, ContinuousKernel1D::squared_exponential(0.01)), 3.0, false).unwrap();
        let cfg = FitConfig { fit_noise: false, ..FitConfig::default() };
        let m = fit(&d, &k, &cfg).unwrap();
        let (mean, var) = m.predict(&[MixedPoint::new(vec![1.0], vec![])]).unwrap();
        assert_eq!(mean[0], m.trend());
        assert_eq!(var[0], 3.0);
    }

    #[test]
    fn fit_is_deterministic_and_monotone_in_starts() {
        let (d, k) = toy();
        let c1 = FitConfig { n_starts: 1, seed: 9, ..FitConfig::default() };
        let c3 = FitConfig { n_starts: 3, ..c1.clone() };
        let a = fit(&d, &k, &c3).unwrap();
        let b = fit(&d, &k, &c3).unwrap();
        assert_eq!(a.params(), b.params());
        let one = fit(&d, &k, &c1).unwrap();
        assert!(a.nll() <= one.nll());
        for r in a.restarts() {
            if let Some(s) = r.start_nll {
                assert!(a.nll() <= s);
            }
        }
    }

    #[test]
    fn persistence_round_trip_is_exact() {
        let (d, k) = toy();
        let m = fit(&d, &k, &FitConfig { n_starts: 2, ..FitConfig::default() }).unwrap();
        let text = serde_json::to_string(&m.to_document()).unwrap();
        let back = GpModel::from_document(serde_json::from_str(&text).unwrap()).unwrap();
        let grid: Vec<MixedPoint> = (0..20).map(|i| MixedPoint::new(vec![i as f64 / 19.0], vec![i % 3 + 1])).collect();
        assert_eq!(m.predict(&grid).unwrap(), back.predict(&grid).unwrap());
    }

    #[test]
    fn gradient_optimizer_also_fits() {
        let (d, k) = toy();
        let cfg = FitConfig { n_starts: 2, optimizer: Optimizer::GradientFd, ..FitConfig::default() };
        let m = fit(&d, &k, &cfg).unwrap();
        let nm = fit(&d, &k, &FitConfig { n_starts: 2, ..FitConfig::default() }).unwrap();
        assert!(m.nll() < nm.nll() + 1.0, "{} vs {}", m.nll(), nm.nll());
    }

    #[test]
    fn fd_gradient_is_step_stable() {
        use crate::gp::optim::{central_gradient, central_gradient_with};
        let (d, k) = toy();
        let obj = Objective::new(&d, &k, true);
        let x = [-1.0, 0.2, -0.5, -9.0];
        let g = central_gradient(|p: &[f64]| obj.value(p), &x);
        let mut f = |p: &[f64]| obj.value(p);
        let g2 = central_gradient_with(&mut f, &x, |v| 1e-4 * v.abs().max(1.0));
        for (a, b) in g.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-4 * a.abs().max(b.abs()).max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn out_of_range_prediction_level() {
        let (d, k) = toy();
        let m = fit(&d, &k, &FitConfig { n_starts: 1, ..FitConfig::default() }).unwrap();
        assert!(m.predict(&[MixedPoint::new(vec![0.5], vec![4])]).is_err());
    }
}
