//! Repeated design → fit → Q² comparison of kernel variants.

use std::io::Write;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BenchmarkConfig, DesignKind};
use crate::covariance::write_matrix_csv;
use crate::design::{cross_with_levels, grid, slhd_with, stratified_regular, Design};
use crate::error::Result;
use crate::gp::{fit, fit_param_specs, q2, Dataset, FitConfig, GpModel};
use crate::kernels::{CombineOp, Kernel, MixedPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub repetition: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub name: String,
    /// Optimizer dimension (kernel and noise parameters) plus one for the trend.
    pub parameter_count: usize,
    /// Parameters of the categorical kernel as searched by the optimizer.
    pub categorical_parameters: usize,
    /// Nominal count of the reference setting, when the variant is one of them.
    pub nominal_categorical_count: Option<usize>,
    /// Q² per repetition (`None` when the fit failed).
    pub q2: Vec<Option<f64>>,
    pub median_q2: Option<f64>,
    pub q2_quartiles: Option<(f64, f64)>,
    pub q2_iqr: Option<f64>,
    pub failures: Vec<CellFailure>,
    /// Repetition whose Q² is the (lower) median.
    pub median_repetition: Option<usize>,
    /// Fitted categorical correlation matrix of the median repetition.
    pub median_correlation: Option<Vec<Vec<f64>>>,
    pub median_covariance: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub fit: FitConfig,
    pub design_size: usize,
    pub test_size: usize,
    pub variants: Vec<VariantReport>,
}

impl BenchmarkReport {
    pub fn variant(&self, name: &str) -> Option<&VariantReport> {
        self.variants.iter().find(|v| v.name == name)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

fn make_design(cfg: &BenchmarkConfig, rep: usize) -> Result<Design> {
    let l = cfg.function.level_count();
    let m = cfg.design.points_per_level;
    match cfg.design.kind {
        DesignKind::Slhd => slhd_with(m, l, 1, derive_seed(cfg.seed, rep as u64), cfg.design.placement),
        DesignKind::Stratified => stratified_regular(m, l, 1),
    }
}

fn evaluate(cfg: &BenchmarkConfig, points: &[MixedPoint]) -> Result<Vec<f64>> {
    points.iter().map(|p| cfg.function.eval(p.x[0], p.u[0])).collect()
}

struct Cell {
    q2: Result<f64>,
    model: Option<GpModel>,
}

/// Runs every repetition × variant cell. Fit failures are recorded and do not stop the run.
pub fn run_benchmark(cfg: &BenchmarkConfig, fit_cfg: &FitConfig) -> Result<BenchmarkReport> {
    cfg.validate()?;
    fit_cfg.validate()?;
    let schema = cfg.function.schema();
    let templates: Vec<Kernel> = cfg
        .variants
        .iter()
        .map(|v| v.kernel.build(&schema, CombineOp::Product))
        .collect::<Result<_>>()?;

    let test_points = cross_with_levels(&grid(cfg.test_grid, 1)?, &[cfg.function.level_count()]);
    let truth = evaluate(cfg, &test_points)?;
    let datasets: Vec<Dataset> = (0..cfg.repetitions)
        .map(|r| {
            let d = make_design(cfg, r)?;
            let y = evaluate(cfg, &d.points)?;
            Dataset::new(schema.clone(), d.points, y)
        })
        .collect::<Result<_>>()?;

    let nv = cfg.variants.len();
    let run_cell = |idx: usize| -> Cell {
        let (r, v) = (idx / nv, idx % nv);
        let fc = FitConfig { seed: derive_seed(fit_cfg.seed, (r * nv + v) as u64), ..fit_cfg.clone() };
        let res = fit(&datasets[r], &templates[v], &fc)
            .and_then(|m| m.predict_mean(&test_points).and_then(|p| q2(&truth, &p)).map(|q| (q, m)));
        match res {
            Ok((q, m)) => Cell { q2: Ok(q), model: Some(m) },
            Err(e) => Cell { q2: Err(e), model: None },
        }
    };
    let cells: Vec<Cell> = if cfg.parallel {
        (0..cfg.repetitions * nv).into_par_iter().map(run_cell).collect()
    } else {
        (0..cfg.repetitions * nv).map(run_cell).collect()
    };

    let mut variants = Vec::with_capacity(nv);
    for (v, spec) in cfg.variants.iter().enumerate() {
        let template = &templates[v];
        let (_, specs) = fit_param_specs(template, fit_cfg.fit_noise)?;
        let cat_params = specs.iter().filter(|s| s.label.starts_with('u')).count();
        let level_count = cfg.function.level_count();
        let nominal = spec
            .kernel
            .categorical
            .first()
            .and_then(|c| c.nominal_count(level_count));
        let mut q = Vec::with_capacity(cfg.repetitions);
        let mut failures = Vec::new();
        for r in 0..cfg.repetitions {
            match &cells[r * nv + v].q2 {
                Ok(x) => q.push(Some(*x)),
                Err(e) => {
                    q.push(None);
                    failures.push(CellFailure { repetition: r, error: e.to_string() });
                }
            }
        }
        let mut ok: Vec<(f64, usize)> = q.iter().enumerate().filter_map(|(r, x)| x.map(|x| (x, r))).collect();
        ok.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let sorted: Vec<f64> = ok.iter().map(|p| p.0).collect();
        let (median, quartiles, median_rep) = if sorted.is_empty() {
            (None, None, None)
        } else {
            let qs = (quantile(&sorted, 0.25), quantile(&sorted, 0.75));
            (Some(quantile(&sorted, 0.5)), Some(qs), Some(ok[(ok.len() - 1) / 2].1))
        };
        let (corr, cov) = match median_rep.and_then(|r| cells[r * nv + v].model.as_ref()) {
            Some(m) => {
                let leaves = m.kernel().expr.categorical_leaves();
                let k = leaves.first().map(|(_, k)| *k);
                (
                    k.map(|k| rows(&k.correlation_matrix())),
                    k.map(|k| rows(k.matrix())),
                )
            }
            None => (None, None),
        };
        variants.push(VariantReport {
            name: spec.name.clone(),
            parameter_count: specs.len() + 1,
            categorical_parameters: cat_params,
            nominal_categorical_count: nominal,
            q2: q,
            median_q2: median,
            q2_quartiles: quartiles,
            q2_iqr: quartiles.map(|(a, b)| b - a),
            failures,
            median_repetition: median_rep,
            median_correlation: corr,
            median_covariance: cov,
        });
    }
    Ok(BenchmarkReport {
        config: cfg.clone(),
        fit: fit_cfg.clone(),
        design_size: datasets[0].len(),
        test_size: test_points.len(),
        variants,
    })
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// File-name-safe form of a variant name.
pub fn slug(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

/// Writes `summary.json`, `q2.csv` and one `correlation_<variant>.csv` per variant.
pub fn write_report(report: &BenchmarkReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let f = std::fs::File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), report)?;

    let mut w = csv::Writer::from_path(dir.join("q2.csv"))?;
    let mut header = vec!["repetition".to_string()];
    header.extend(report.variants.iter().map(|v| v.name.clone()));
    w.write_record(&header)?;
    for r in 0..report.config.repetitions {
        let mut row = vec![r.to_string()];
        row.extend(report.variants.iter().map(|v| v.q2[r].map(|x| format!("{x:?}")).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;

    for v in &report.variants {
        if let Some(c) = &v.median_correlation {
            let n = c.len();
            let m = nalgebra::DMatrix::from_fn(n, n, |i, j| c[i][j]);
            let mut f = std::io::BufWriter::new(std::fs::File::create(
                dir.join(format!("correlation_{}.csv", slug(&v.name))),
            )?);
            let labels: Vec<String> = (1..=n).map(|l| format!("u{l}")).collect();
            write_matrix_csv(&mut f, &m, Some(&labels))?;
            f.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&s, 0.5), 2.5);
        assert_eq!(quantile(&s, 0.25), 1.75);
        assert_eq!(quantile(&[5.0], 0.75), 5.0);
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("5 groups (a)"), "5_groups_a");
        assert_eq!(slug("1 group (CS)"), "1_group_cs");
    }
}
