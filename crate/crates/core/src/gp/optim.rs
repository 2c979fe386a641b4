//! Unconstrained local minimizers used by the likelihood fit.
//!
//! Objectives may return `+∞` (or NaN, treated as `+∞`) for unusable points. Both methods
//! return the best point ever evaluated, not just the final iterate.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    NelderMead,
    /// Quasi-Newton (BFGS) on a central finite-difference gradient.
    GradientFd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

struct Tracked<F> {
    f: F,
    best_x: Vec<f64>,
    best_f: f64,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Tracked<F> {
    fn new(f: F, x0: &[f64]) -> Self {
        Self { f, best_x: x0.to_vec(), best_f: f64::INFINITY, evals: 0 }
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < self.best_f {
            self.best_f = v;
            self.best_x = x.to_vec();
        }
        v
    }

    fn finish(self, converged: bool) -> OptimResult {
        OptimResult { x: self.best_x, f: self.best_f, evals: self.evals, converged }
    }
}

/// Termination tolerances shared by both methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative spread of simplex values, or relative decrease per quasi-Newton step.
    pub f_rel: f64,
    /// Simplex diameter (∞-norm), or gradient ∞-norm for quasi-Newton.
    pub x_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { f_rel: 1e-10, x_abs: 1e-7 }
    }
}

/// Nelder–Mead with dimension-adapted coefficients; `step[i]` sizes the initial simplex.
///
/// After convergence the simplex is rebuilt once around the best vertex; the search stops
/// when that restart brings no improvement.
pub fn nelder_mead(
    f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: &[f64],
    max_evals: usize,
    tol: Tolerances,
) -> OptimResult {
    let n = x0.len();
    let mut t = Tracked::new(f, x0);
    let f0 = t.eval(x0);
    if n == 0 {
        return t.finish(true);
    }
    let (alpha, beta, gamma, delta) = if n <= 2 {
        (1.0, 2.0, 0.5, 0.5)
    } else {
        let nf = n as f64;
        (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf)
    };
    let mut start = (x0.to_vec(), f0);
    let mut polished = false;
    loop {
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![start.clone()];
        for i in 0..n {
            if t.evals >= max_evals {
                return t.finish(false);
            }
            let mut x = start.0.clone();
            x[i] += if step[i] != 0.0 { step[i] } else { 0.1 };
            let v = t.eval(&x);
            simplex.push((x, v));
        }
        let converged = run_simplex(&mut t, &mut simplex, max_evals, tol, (alpha, beta, gamma, delta));
        if !converged {
            return t.finish(false);
        }
        let before = start.1;
        start = (t.best_x.clone(), t.best_f);
        let gain = before - start.1;
        if polished && gain <= tol.f_rel * (1.0 + start.1.abs()) {
            return t.finish(true);
        }
        polished = true;
        if t.evals + n + 1 >= max_evals {
            return t.finish(true);
        }
    }
}

fn run_simplex<F: FnMut(&[f64]) -> f64>(
    t: &mut Tracked<F>,
    s: &mut [(Vec<f64>, f64)],
    max_evals: usize,
    tol: Tolerances,
    (alpha, beta, gamma, delta): (f64, f64, f64, f64),
) -> bool {
    let n = s.len() - 1;
    let point = |c: &[f64], d: &[f64], k: f64| -> Vec<f64> {
        c.iter().zip(d).map(|(ci, di)| ci + k * (di - ci)).collect()
    };
    loop {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        let fb = s[0].1;
        let fw = s[n].1;
        let spread = if fw.is_finite() { fw - fb } else { f64::INFINITY };
        let diam = s[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&s[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= tol.f_rel * (1.0 + fb.abs()) && diam <= tol.x_abs {
            return true;
        }
        if diam == 0.0 && spread.is_finite() {
            return true;
        }
        if t.evals >= max_evals {
            return false;
        }
        let mut c = vec![0.0; n];
        for (x, _) in &s[..n] {
            for (ci, xi) in c.iter_mut().zip(x) {
                *ci += xi / n as f64;
            }
        }
        let worst = s[n].0.clone();
        let xr = point(&c, &worst, -alpha);
        let fr = t.eval(&xr);
        if fr < fb {
            let xe = point(&c, &worst, -alpha * beta);
            let fe = t.eval(&xe);
            s[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < s[n - 1].1 {
            s[n] = (xr, fr);
            continue;
        }
        if fr < fw {
            let xc = point(&c, &worst, -alpha * gamma);
            let fc = t.eval(&xc);
            if fc <= fr {
                s[n] = (xc, fc);
                continue;
            }
        } else {
            let xc = point(&c, &worst, gamma);
            let fc = t.eval(&xc);
            if fc < fw {
                s[n] = (xc, fc);
                continue;
            }
        }
        let best = s[0].0.clone();
        for v in s[1..].iter_mut() {
            if t.evals >= max_evals {
                return false;
            }
            let x = point(&best, &v.0, delta);
            let fx = t.eval(&x);
            *v = (x, fx);
        }
    }
}

/// Step used by [`central_gradient`] for coordinate value `x`.
pub fn fd_step(x: f64) -> f64 {
    6e-6 * x.abs().max(1.0)
}

/// Central finite-difference gradient with steps `h_i = fd_step(x_i)`.
pub fn central_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    central_gradient_with(&mut f, x, fd_step)
}

/// Central differences with a caller-chosen step rule.
pub fn central_gradient_with(
    f: &mut impl FnMut(&[f64]) -> f64,
    x: &[f64],
    step: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = step(x[i]);
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

const MAX_STEP: f64 = 2.0;

/// BFGS on the inverse Hessian with Armijo backtracking and central-difference gradients.
/// Steps are capped in the ∞-norm (1 for the first step, 2 afterwards) since parameters
/// live on log/logit scales.
pub fn bfgs_fd(
    f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    max_evals: usize,
    tol: Tolerances,
) -> OptimResult {
    let n = x0.len();
    let mut t = Tracked::new(f, x0);
    let mut fx = t.eval(x0);
    if n == 0 || !fx.is_finite() {
        return t.finish(n == 0);
    }
    let mut x = x0.to_vec();
    let mut g = tracked_gradient(&mut t, &x);
    let mut h = nalgebra::DMatrix::<f64>::identity(n, n);
    let mut first = true;
    let mut stalls = 0;
    loop {
        if g.iter().any(|v| !v.is_finite()) {
            return t.finish(false);
        }
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= tol.x_abs {
            return t.finish(true);
        }
        if t.evals + 2 * n + 1 > max_evals {
            return t.finish(false);
        }
        let gv = nalgebra::DVector::from_column_slice(&g);
        let mut p = -(&h * &gv);
        let mut slope = p.dot(&gv);
        if !(slope < 0.0) {
            h = nalgebra::DMatrix::identity(n, n);
            p = -gv.clone();
            slope = p.dot(&gv);
        }
        let cap = if first { 1.0 } else { MAX_STEP };
        let pmax = p.amax();
        if pmax > cap {
            p *= cap / pmax;
            slope *= cap / pmax;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + step * b).collect();
            let fnew = t.eval(&xn);
            if fnew <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fnew));
                break;
            }
            step *= 0.5;
            if t.evals >= max_evals {
                break;
            }
        }
        let Some((xn, fnew)) = accepted else {
            return t.finish(true);
        };
        let gn = tracked_gradient(&mut t, &xn);
        let s = nalgebra::DVector::from_iterator(n, xn.iter().zip(&x).map(|(a, b)| a - b));
        let yv = nalgebra::DVector::from_iterator(n, gn.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() && sy.is_finite() {
            if first {
                h *= sy / yv.dot(&yv);
                first = false;
            }
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            h += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        let decrease = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        if decrease <= tol.f_rel * (1.0 + fx.abs()) {
            stalls += 1;
            if stalls >= 3 {
                return t.finish(true);
            }
        } else {
            stalls = 0;
        }
    }
}

fn tracked_gradient<F: FnMut(&[f64]) -> f64>(t: &mut Tracked<F>, x: &[f64]) -> Vec<f64> {
    let mut g = |p: &[f64]| t.eval(p);
    central_gradient_with(&mut g, x, fd_step)
}
