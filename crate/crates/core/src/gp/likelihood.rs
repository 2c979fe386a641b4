//! Gaussian log-likelihood with a profiled constant trend.

use nalgebra::{DMatrix, DVector};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernels::expr::{add_relative_nugget, gram_unchecked};
use crate::kernels::{unpack, Kernel};
use crate::linalg::{solve_lower, solve_lower_transpose};

/// Lower bound on the fitted noise variance.
pub const NOISE_FLOOR: f64 = 1e-12;
pub const DEFAULT_NUGGET: f64 = 1e-8;
pub const MAX_NUGGET: f64 = 1e-4;

const LOG_2PI: f64 = 1.837_877_066_409_345_5;

/// Factorized Gram matrix and the quantities derived from it.
#[derive(Debug, Clone)]
pub struct Factorization {
    /// Lower Cholesky factor of `K + τ²I + nugget·mean(diag K)·I`.
    pub chol: DMatrix<f64>,
    /// Profiled constant trend.
    pub trend: f64,
    /// `K⁻¹(y − μ̂)`.
    pub alpha: DVector<f64>,
    pub nll: f64,
    /// Relative nugget that made the factorization succeed.
    pub nugget: f64,
}

/// Factorizes `k + noise·I` and evaluates the profiled likelihood, escalating the relative
/// nugget by ×10 from `nugget` up to `max_nugget` when Cholesky breaks down.
pub fn factorize(
    k: &DMatrix<f64>,
    y: &[f64],
    noise: f64,
    nugget: f64,
    max_nugget: f64,
) -> Result<Factorization> {
    let n = y.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::Domain(format!("Gram is {}×{}, data has {n} responses", k.nrows(), k.ncols())));
    }
    let mut nug = nugget;
    let mut last_min_diag = f64::NAN;
    loop {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += noise;
        }
        add_relative_nugget(&mut m, nug);
        if let Some(f) = try_factorize(m, y, nug) {
            return Ok(f);
        }
        last_min_diag = k.diagonal().min().min(last_min_diag);
        if nug <= 0.0 {
            nug = DEFAULT_NUGGET.min(max_nugget);
        } else if nug >= max_nugget {
            break;
        } else {
            nug = (nug * 10.0).min(max_nugget);
        }
    }
    Err(Error::Numerical(format!(
        "Cholesky failed for N = {n} even with relative nugget {max_nugget:e} \
         (noise {noise:e}, smallest Gram diagonal {last_min_diag:e})"
    )))
}

fn try_factorize(m: DMatrix<f64>, y: &[f64], nugget: f64) -> Option<Factorization> {
    let n = y.len();
    let chol = nalgebra::Cholesky::new(m)?.unpack();
    if (0..n).any(|i| !(chol[(i, i)] > 0.0) || !chol[(i, i)].is_finite()) {
        return None;
    }
    let ones = DVector::from_element(n, 1.0);
    let yv = DVector::from_column_slice(y);
    let a = solve_lower(&chol, &ones);
    let b = solve_lower(&chol, &yv);
    let trend = a.dot(&b) / a.dot(&a);
    let r = &b - &a * trend;
    let quad = r.dot(&r);
    let logdet: f64 = 2.0 * (0..n).map(|i| chol[(i, i)].ln()).sum::<f64>();
    let nll = 0.5 * quad + 0.5 * logdet + 0.5 * n as f64 * LOG_2PI;
    if !nll.is_finite() || !trend.is_finite() {
        return None;
    }
    let alpha = solve_lower_transpose(&chol, &r);
    Some(Factorization { chol, trend, alpha, nll, nugget })
}

/// `½(y−μ)ᵀK⁻¹(y−μ) + ½log|K| + (N/2)log 2π` for a given Gram matrix and trend `μ`.
pub fn nll_with_trend(k: &DMatrix<f64>, y: &[f64], trend: f64) -> Result<f64> {
    let n = y.len();
    let chol = nalgebra::Cholesky::new(k.clone())
        .ok_or_else(|| Error::Numerical("Gram matrix is not positive definite".into()))?
        .unpack();
    let r = DVector::from_iterator(n, y.iter().map(|v| v - trend));
    let z = solve_lower(&chol, &r);
    let logdet: f64 = 2.0 * (0..n).map(|i| chol[(i, i)].ln()).sum::<f64>();
    Ok(0.5 * z.dot(&z) + 0.5 * logdet + 0.5 * n as f64 * LOG_2PI)
}

/// Profiled NLL of a Gram matrix (no nugget added).
pub fn nll_from_gram(k: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
    factorize(k, y, 0.0, 0.0, 0.0).map(|f| f.nll)
}

/// Likelihood as a function of the packed parameter vector.
///
/// The vector holds the kernel parameters of `template` followed, when `fit_noise`, by
/// `log τ²`.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub dataset: &'a Dataset,
    pub template: &'a Kernel,
    pub fit_noise: bool,
    /// Noise variance used when it is not fitted.
    pub fixed_noise: f64,
    pub nugget: f64,
    pub max_nugget: f64,
}

impl<'a> Objective<'a> {
    pub fn new(dataset: &'a Dataset, template: &'a Kernel, fit_noise: bool) -> Self {
        Self {
            dataset,
            template,
            fit_noise,
            fixed_noise: 0.0,
            nugget: DEFAULT_NUGGET,
            max_nugget: MAX_NUGGET,
        }
    }

    /// Splits a packed vector into a kernel and a noise variance.
    pub fn decode(&self, params: &[f64]) -> Result<(Kernel, f64)> {
        let (kp, noise) = if self.fit_noise {
            let (last, rest) = params
                .split_last()
                .ok_or_else(|| Error::InvalidParams("missing noise parameter".into()))?;
            if !last.is_finite() {
                return Err(Error::InvalidParams("noise parameter is not finite".into()));
            }
            (rest, last.exp().max(NOISE_FLOOR))
        } else {
            (params, self.fixed_noise)
        };
        let kernel = unpack(kp, self.template)?;
        if !noise.is_finite() {
            return Err(Error::InvalidParams("noise variance overflow".into()));
        }
        Ok((kernel, noise))
    }

    pub fn factorize(&self, params: &[f64]) -> Result<(Kernel, f64, Factorization)> {
        let (kernel, noise) = self.decode(params)?;
        let k = gram_unchecked(&kernel, self.dataset.points());
        let f = factorize(&k, self.dataset.y(), noise, self.nugget, self.max_nugget)?;
        Ok((kernel, noise, f))
    }

    /// Negative log-likelihood; `+∞` when the parameters are unusable or every nugget fails.
    pub fn value(&self, params: &[f64]) -> f64 {
        match self.factorize(params) {
            Ok((_, _, f)) => f.nll,
            Err(_) => f64::INFINITY,
        }
    }
}

/// NLL of packed `params` (kernel parameters, then `log τ²` when `fit_noise`).
pub fn neg_log_likelihood(
    params: &[f64],
    dataset: &Dataset,
    template: &Kernel,
    fit_noise: bool,
) -> Result<f64> {
    Objective::new(dataset, template, fit_noise).factorize(params).map(|(_, _, f)| f.nll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_spd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        &a * a.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn single_point_zero_response() {
        let k = DMatrix::from_element(1, 1, 1.0);
        let v = nll_with_trend(&k, &[0.0], 0.0).unwrap();
        assert!((v - 0.5 * LOG_2PI).abs() < 1e-15);
    }

    #[test]
    fn identity_gram() {
        let y = [0.3, -1.2, 2.0];
        let v = nll_with_trend(&DMatrix::identity(3, 3), &y, 0.5).unwrap();
        let ss: f64 = y.iter().map(|v| (v - 0.5) * (v - 0.5)).sum();
        assert!((v - (0.5 * ss + 1.5 * LOG_2PI)).abs() < 1e-14);
    }

    #[test]
    fn dense_inverse_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let k = random_spd(5, &mut rng);
        let y: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let kinv = k.clone().try_inverse().unwrap();
        let ones = DVector::from_element(5, 1.0);
        let yv = DVector::from_column_slice(&y);
        let mu = (ones.transpose() * &kinv * &yv)[0] / (ones.transpose() * &kinv * &ones)[0];
        let r = &yv - &ones * mu;
        let want = 0.5 * (r.transpose() * &kinv * &r)[0]
            + 0.5 * k.determinant().ln()
            + 2.5 * LOG_2PI;
        let f = factorize(&k, &y, 0.0, 0.0, 0.0).unwrap();
        assert!((f.nll - want).abs() < 1e-10);
        assert!((f.trend - mu).abs() < 1e-10);
        let alpha_want = &kinv * &r;
        assert!((&f.alpha - alpha_want).amax() < 1e-10);
    }

    #[test]
    fn nugget_escalates_on_singular_gram() {
        let k = DMatrix::from_element(3, 3, 1.0);
        let f = factorize(&k, &[1.0, 2.0, 3.0], 0.0, 1e-8, 1e-4).unwrap();
        assert!(f.nugget >= 1e-8 && f.nugget <= 1e-4);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(factorize(&bad, &[0.0, 1.0], 0.0, 1e-8, 1e-4), Err(Error::Numerical(_))));
    }
}
