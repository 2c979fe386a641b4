//! `gcs-kriging` command-line interface.
//!
//! Exit codes: 0 success, 1 validation or computation failure, 2 usage or input error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gcs_kriging::covariance::{gcs_validate, read_matrix_csv, write_matrix_csv, GroupPartition, MatrixDocument};
use gcs_kriging::design::{grid, lhs_with, slhd_with, stratified_regular, Design, Placement};
use gcs_kriging::experiments::{example1_config, example2_config, run_benchmark, write_report, Config};
use gcs_kriging::gp::{fit, q2, read_points_csv, Dataset, GpModel};
use gcs_kriging::kernels::{CategoricalInput, InputSchema};
use gcs_kriging::Error;

#[derive(Parser)]
#[command(name = "gcs-kriging", version, about = "GP regression with group kernels for categorical inputs")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a block covariance matrix (CSV or JSON) or a configuration file.
    Validate {
        /// Matrix file: CSV (needs --partition) or JSON matrix document.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Group sizes in level order, e.g. `9,4`.
        #[arg(long, value_delimiter = ',')]
        partition: Option<Vec<usize>>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a model by maximum likelihood and save it as JSON.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Predict mean and variance at the points of a CSV file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output CSV (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a design of experiments as CSV.
    Design {
        #[arg(long, value_enum)]
        kind: DesignArg,
        /// Points per level (slhd, stratified).
        #[arg(long, default_value_t = 3)]
        points_per_level: usize,
        #[arg(long, default_value_t = 1)]
        levels: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Points (lhs) or points per axis (grid).
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        jitter: bool,
        /// Config whose schema names the columns.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the repeated design/fit/Q² comparison.
    Benchmark {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        /// Output directory for summary.json, q2.csv and correlation CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Write the fitted categorical correlation (or covariance) matrix as CSV.
    ExportCorrelation {
        #[arg(long)]
        model: PathBuf,
        /// Categorical input name (default: the first).
        #[arg(long)]
        input: Option<String>,
        #[arg(long)]
        covariance: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignArg {
    Slhd,
    Stratified,
    Lhs,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Example1,
    Example2,
}

enum Failure {
    /// Bad arguments or unreadable/malformed input.
    Usage(String),
    /// The input was read but did not pass a check, or a computation failed.
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => Failure::Usage(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let res = match cli.command {
        Command::Validate { data, partition, config, out } => validate(data, partition, config, out),
        Command::Fit { config, data, out, seed } => fit_cmd(&config, &data, &out, seed),
        Command::Predict { model, data, out } => predict(&model, &data, out),
        Command::Design { kind, points_per_level, levels, dim, n, seed, jitter, config, out } => {
            design(kind, points_per_level, levels, dim, n, seed, jitter, config, out)
        }
        Command::Benchmark { config, preset, out, seed, repetitions } => {
            benchmark(config, preset, out, seed, repetitions)
        }
        Command::ExportCorrelation { model, input, covariance, out } => export(&model, input, covariance, out),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::Usage(format!("cannot open {}: {e}", path.display())))
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn validate(
    data: Option<PathBuf>,
    partition: Option<Vec<usize>>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Outcome {
    match (data, config) {
        (Some(path), None) => {
            let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
            let (matrix, part) = if is_json {
                let doc = MatrixDocument::from_json(&std::fs::read_to_string(&path)?)?;
                let part = match partition {
                    Some(p) => GroupPartition::new(p)?,
                    None => doc.partition()?,
                };
                (doc.matrix()?, part)
            } else {
                let (m, _) = read_matrix_csv(open(&path)?)?;
                let p = partition.ok_or_else(|| Failure::Usage("--partition is required for CSV matrices".into()))?;
                (m, GroupPartition::new(p)?)
            };
            let report = gcs_validate(&matrix, &part)?;
            let mut w = sink(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &report).map_err(Error::from)?;
            writeln!(w)?;
            w.flush()?;
            if !report.is_gcs || !report.is_psd {
                let checks: Vec<String> = report.failing_checks.iter().map(|d| d.check.clone()).collect();
                return Err(Failure::Invalid(format!("matrix failed: {}", checks.join(", "))));
            }
            Ok(())
        }
        (None, Some(path)) => {
            let cfg = Config::load(&path)?;
            cfg.fit.validate()?;
            let kernel = cfg.build_kernel()?;
            if let Some(b) = &cfg.benchmark {
                b.validate()?;
                for v in &b.variants {
                    v.kernel.build(&b.function.schema(), cfg.combination())?;
                }
            }
            let n = gcs_kriging::kernels::param_count(&kernel)?;
            let mut w = sink(out.as_deref())?;
            writeln!(w, "{{\"valid\": true, \"kernel_parameters\": {n}}}")?;
            Ok(())
        }
        _ => Err(Failure::Usage("give exactly one of --data (matrix) or --config".into())),
    }
}

fn fit_cmd(config: &Path, data: &Path, out: &Path, seed: Option<u64>) -> Outcome {
    let cfg = Config::load(config)?;
    let schema = cfg.resolved_schema()?;
    let template = cfg.build_kernel()?;
    let dataset = Dataset::from_csv(open(data)?, &schema)?;
    let mut fc = cfg.fit.clone();
    if let Some(s) = seed {
        fc.seed = s;
    }
    let model = fit(&dataset, &template, &fc)?;
    model.save(out)?;
    eprintln!(
        "fitted {} parameters on {} observations: nll = {:.6}, trend = {:.6}, noise = {:.3e}",
        model.params().len(),
        dataset.len(),
        model.nll(),
        model.trend(),
        model.noise_variance()
    );
    Ok(())
}

fn predict(model: &Path, data: &Path, out: Option<PathBuf>) -> Outcome {
    let m = GpModel::load(model)?;
    let schema = m.dataset().schema().clone();
    let (points, y) = read_points_csv(open(data)?, &schema, false)?;
    let (mean, var) = m.predict(&points)?;
    let mut w = csv::Writer::from_writer(sink(out.as_deref())?);
    let mut header: Vec<String> = schema.continuous.clone();
    header.extend(schema.categorical.iter().map(|c| c.name.clone()));
    header.extend(["mean".to_string(), "variance".to_string()]);
    w.write_record(&header).map_err(Error::from)?;
    for (i, p) in points.iter().enumerate() {
        let mut row: Vec<String> = p.x.iter().map(|v| format!("{v:?}")).collect();
        row.extend(p.u.iter().map(|v| v.to_string()));
        row.push(format!("{:?}", mean[i]));
        row.push(format!("{:?}", var[i]));
        w.write_record(&row).map_err(Error::from)?;
    }
    w.flush()?;
    if let Some(y) = y {
        match q2(&y, &mean) {
            Ok(q) => eprintln!("Q2 = {q:.6}"),
            Err(e) => eprintln!("Q2 not reported: {e}"),
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn design(
    kind: DesignArg,
    m: usize,
    levels: usize,
    dim: usize,
    n: usize,
    seed: u64,
    jitter: bool,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Outcome {
    let placement = if jitter { Placement::Jitter } else { Placement::Center };
    let d: Design = match kind {
        DesignArg::Slhd => slhd_with(m, levels, dim, seed, placement)?,
        DesignArg::Stratified => stratified_regular(m, levels, dim)?,
        DesignArg::Lhs => lhs_with(n, dim, seed, placement)?,
        DesignArg::Grid => grid(n, dim)?,
    };
    let has_levels = matches!(kind, DesignArg::Slhd | DesignArg::Stratified);
    let schema = match config {
        Some(p) => Config::load(p)?.resolved_schema()?,
        None => InputSchema {
            continuous: if dim == 1 { vec!["x".into()] } else { (1..=dim).map(|i| format!("x{i}")).collect() },
            categorical: if has_levels { vec![CategoricalInput { name: "u".into(), levels }] } else { vec![] },
        },
    };
    d.write_csv(sink(out.as_deref())?, &schema)?;
    Ok(())
}

fn benchmark(
    config: Option<PathBuf>,
    preset: Option<PresetArg>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    repetitions: Option<usize>,
) -> Outcome {
    let (mut bench, fit_cfg) = match (config, preset) {
        (Some(p), None) => {
            let cfg = Config::load(&p)?;
            let b = cfg
                .benchmark
                .clone()
                .ok_or_else(|| Failure::Usage(format!("{} has no benchmark section", p.display())))?;
            (b, cfg.fit)
        }
        (None, Some(PresetArg::Example1)) => (example1_config(20, 0), Default::default()),
        (None, Some(PresetArg::Example2)) => (example2_config(1, 0), Default::default()),
        _ => return Err(Failure::Usage("give --config or --preset".into())),
    };
    if let Some(s) = seed {
        bench.seed = s;
    }
    if let Some(r) = repetitions {
        bench.repetitions = r;
    }
    let dir = out
        .or_else(|| bench.output_dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| Failure::Usage("no output directory (--out)".into()))?;
    let report = run_benchmark(&bench, &fit_cfg)?;
    write_report(&report, &dir)?;
    for v in &report.variants {
        eprintln!(
            "{:<20} params {:>3}  median Q2 {}  failures {}",
            v.name,
            v.parameter_count,
            v.median_q2.map(|q| format!("{q:.4}")).unwrap_or_else(|| "n/a".into()),
            v.failures.len()
        );
    }
    Ok(())
}

fn export(model: &Path, input: Option<String>, covariance: bool, out: Option<PathBuf>) -> Outcome {
    let m = GpModel::load(model)?;
    let names: Vec<String> = m.dataset().schema().categorical.iter().map(|c| c.name.clone()).collect();
    let idx = match &input {
        Some(name) => names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Failure::Usage(format!("model has no categorical input '{name}'")))?,
        None => 0,
    };
    let leaves = m.kernel().expr.categorical_leaves();
    let (_, k) = leaves
        .iter()
        .find(|(i, _)| *i == idx)
        .ok_or_else(|| Failure::Usage("model has no categorical kernel".into()))?;
    let mat = if covariance { k.matrix().clone() } else { k.correlation_matrix() };
    let labels: Vec<String> = (1..=mat.nrows()).map(|l| format!("{}{l}", names[idx])).collect();
    write_matrix_csv(sink(out.as_deref())?, &mat, Some(&labels))?;
    Ok(())
}
