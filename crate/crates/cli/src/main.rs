//! `cmdfa`: command-line front end for the star-model CMDFA solver.

mod output;

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cmdfa_core::data::{self, empirical_covariance, estimate_alpha};
use cmdfa_core::info::{mi_report, sweep_row, MiReport, RowStatus};
use cmdfa_core::verify::{
    certificate_for_diagonal, check_certificate, verify_solution, CertTolerances, Certificate,
};
use cmdfa_core::{
    build_covariance, canonicalize, classify, solve, CmdfaError, Matrix, SolveOptions, StarModel,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::output::{fmt_list, fmt_num, round_json};

const DEFAULT_SEED: u64 = 0;

#[derive(Parser)]
#[command(
    name = "cmdfa",
    version,
    about = "Minimum-determinant factor analysis for star-structured Gaussian covariances"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report the solution regime and the dominance margin
    Classify(ModelArgs),
    /// Solve for D and Σt, with the optimality certificate and information report
    Solve(ModelArgs),
    /// Check the optimality certificate of the solved D, or of a supplied one
    Verify(VerifyArgs),
    /// Star, CMDFA and bound-derived mutual information
    Mi(ModelArgs),
    /// Mutual-information report over a grid of theta1 values
    Sweep(SweepArgs),
    /// Draw samples from the latent star model as CSV
    Sample(SampleArgs),
    /// Estimate loadings from a covariance matrix or a sample CSV
    Estimate(EstimateArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct InputArgs {
    /// Loadings, comma-separated (e.g. 0.8,0.3)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    alpha: Option<Vec<f64>>,
    /// Symmetric covariance matrix as CSV rows; loadings are estimated first ("-" reads stdin)
    #[arg(long, value_name = "FILE")]
    matrix: Option<PathBuf>,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Eigenvalue tolerance for certificate checks
    #[arg(long, value_parser = positive_f64)]
    tol_eig: Option<f64>,
    /// Relative tolerance of the X1 root finder
    #[arg(long, value_parser = positive_f64)]
    tol_root: Option<f64>,
    /// Half-width of the boundary band for the dominance margin
    #[arg(long, value_parser = positive_f64)]
    eps_class: Option<f64>,
    /// Report information in bits instead of nats
    #[arg(long)]
    bits: bool,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Diagonal to check instead of the solver's, comma-separated in input order
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    d: Option<Vec<f64>>,
}

#[derive(Args)]
struct SweepArgs {
    /// Fixed SNR square roots of the remaining coordinates
    #[arg(long, value_delimiter = ',', default_value = "0.314485,0.314485")]
    theta_rest: Vec<f64>,
    /// Explicit theta1 grid, comma-separated
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["start", "stop", "points"])]
    theta1: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.8)]
    start: f64,
    #[arg(long, default_value_t = 2.0)]
    stop: f64,
    #[arg(long, default_value_t = 13, value_parser = positive_usize)]
    points: usize,
    /// Worker threads (defaults to the number of CPUs)
    #[arg(long, value_parser = positive_usize)]
    jobs: Option<usize>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of observations
    #[arg(short = 'm', long = "count", default_value_t = 1000)]
    count: usize,
    #[arg(long, env = "CMDFA_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
#[group(id = "estimate_input", required = true, multiple = false, args = ["matrix", "samples"])]
struct EstimateArgs {
    /// Covariance matrix as CSV rows ("-" reads stdin)
    #[arg(long, value_name = "FILE")]
    matrix: Option<PathBuf>,
    /// Samples as CSV with a header row, as written by `sample` ("-" reads stdin)
    #[arg(long, value_name = "FILE")]
    samples: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(_) => Err(format!("{s} is not a positive number")),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        Ok(_) => Err("must be at least 1".into()),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug)]
enum AppError {
    Usage(String),
    Core(CmdfaError),
    Io(String),
}

impl From<CmdfaError> for AppError {
    fn from(e: CmdfaError) -> Self {
        AppError::Core(e)
    }
}

impl From<io::Error> for AppError {
    fn from(e: io::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Core(CmdfaError::Convergence(_)) => 3,
            AppError::Core(_) | AppError::Io(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            AppError::Usage(m) | AppError::Io(m) => m.clone(),
            AppError::Core(e) => e.to_string(),
        }
    }
}

type AppResult<T> = std::result::Result<T, AppError>;

impl CommonArgs {
    fn solve_options(&self) -> SolveOptions {
        let mut opts = SolveOptions {
            eps_class: self.eps_class,
            ..SolveOptions::default()
        };
        if let Some(t) = self.tol_root {
            opts.tol_root = t;
        }
        opts
    }

    fn cert_tolerances(&self) -> CertTolerances {
        let mut tols = CertTolerances::default();
        if let Some(t) = self.tol_eig {
            tols.eig = t;
        }
        tols
    }

    fn format(&self, default: Format, allowed: &[Format], command: &str) -> AppResult<Format> {
        let f = self.format.unwrap_or(default);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(AppError::Usage(format!(
                "{command} does not support --format {}",
                f.to_possible_value()
                    .map(|v| v.get_name().to_string())
                    .unwrap_or_default()
            )))
        }
    }

    fn units(&self) -> &'static str {
        if self.bits {
            "bits"
        } else {
            "nats"
        }
    }

    fn scale(&self, r: MiReport) -> MiReport {
        if self.bits {
            r.to_bits()
        } else {
            r
        }
    }
}

fn open_input(path: &Path) -> AppResult<Box<dyn Read>> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdin()));
    }
    File::open(path)
        .map(|f| Box::new(f) as Box<dyn Read>)
        .map_err(|e| AppError::Io(format!("{}: {e}", path.display())))
}

fn parse_field(field: &str, line: usize) -> AppResult<f64> {
    field.parse().map_err(|_| {
        AppError::Core(CmdfaError::Domain(format!(
            "line {line}: '{field}' is not a number"
        )))
    })
}

fn read_table(path: &Path, headers: bool) -> AppResult<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(headers)
        .trim(csv::Trim::All)
        .from_reader(open_input(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = k + 1 + usize::from(headers);
        let row = record
            .iter()
            .map(|f| parse_field(f, line))
            .collect::<AppResult<Vec<f64>>>()?;
        if rows.first().is_some_and(|r| r.len() != row.len()) {
            return Err(CmdfaError::Domain(format!(
                "line {line}: expected {} fields",
                rows[0].len()
            ))
            .into());
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CmdfaError::Domain(format!("{}: no data rows", path.display())).into());
    }
    Ok(Matrix::from_rows(&rows))
}

fn load_model(input: &InputArgs) -> AppResult<StarModel> {
    match (&input.alpha, &input.matrix) {
        (Some(alpha), _) => Ok(canonicalize(alpha)?),
        (None, Some(path)) => Ok(estimate_alpha(&read_table(path, false)?)?.model),
        (None, None) => Err(AppError::Usage(
            "one of --alpha or --matrix is required".into(),
        )),
    }
}

fn to_json(value: impl serde::Serialize) -> Value {
    serde_json::to_value(value).expect("plain data serializes")
}

fn write_json(out: &mut dyn Write, mut value: Value) -> AppResult<()> {
    round_json(&mut value);
    serde_json::to_writer_pretty(&mut *out, &value).map_err(|e| AppError::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn write_csv_rows(out: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> AppResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn certificate_text(c: &Certificate) -> String {
    format!(
        "certificate: {} (lambda_min={}, max row residual={}, null residual={}, columns={})",
        if c.passed { "passed" } else { "failed" },
        fmt_num(c.lambda_min),
        fmt_num(c.max_row_residual()),
        fmt_num(c.nullspace_residual),
        c.columns
    )
}

fn mi_text(r: &MiReport, units: &str) -> String {
    format!(
        "I_star={} I_cmdfa={} I_up={} I_low={} ({units})",
        fmt_num(r.i_star),
        fmt_num(r.i_cmdfa),
        fmt_num(r.i_up),
        fmt_num(r.i_low)
    )
}

fn mi_row(r: &MiReport) -> Vec<String> {
    [r.i_star, r.i_cmdfa, r.i_up, r.i_low]
        .iter()
        .map(|v| fmt_num(*v))
        .collect()
}

fn cmd_classify(args: &ModelArgs, out: &mut dyn Write) -> AppResult<()> {
    let fmt = args.common.format(
        Format::Text,
        &[Format::Text, Format::Json, Format::Csv],
        "classify",
    )?;
    let model = load_model(&args.input)?;
    let eps = args.common.solve_options().eps_for(&model);
    let class = classify(&model, eps);
    match fmt {
        Format::Text => writeln!(out, "{} (margin={:.6})", class.regime, class.margin)?,
        Format::Json => write_json(
            out,
            json!({
                "regime": class.regime,
                "margin": class.margin,
                "eps_class": eps,
                "theta": model.to_user_vec(&model.theta),
                "perm": model.perm,
            }),
        )?,
        Format::Csv => write_csv_rows(
            out,
            &["regime", "margin"],
            &[vec![class.regime.to_string(), fmt_num(class.margin)]],
        )?,
    }
    Ok(())
}

fn cmd_solve(args: &ModelArgs, out: &mut dyn Write) -> AppResult<()> {
    let common = &args.common;
    let fmt = common.format(
        Format::Json,
        &[Format::Text, Format::Json, Format::Csv],
        "solve",
    )?;
    let model = load_model(&args.input)?;
    let opts = common.solve_options();
    let sol = solve(&model, &opts)?;
    let cert = verify_solution(&sol, &common.cert_tolerances())?;
    let mi = common.scale(mi_report(&model, &opts)?);
    match fmt {
        Format::Json => {
            let obj = json!({
                "regime": sol.regime(),
                "margin": sol.class.margin,
                "near_boundary": sol.near_boundary,
                "alpha": sol.alpha,
                "d": sol.d,
                "x1_star": sol.x1_star(),
                "rank": sol.rank,
                "sigma_t": sol.sigma_t,
                "t": sol.certificate,
                "perm": model.perm,
                "nondominant": sol.nondominant,
                "dominant": sol.dominant,
                "certificate": cert,
                "mi": mi,
                "units": common.units(),
            });
            write_json(out, obj)?;
        }
        Format::Text => {
            writeln!(
                out,
                "{} (margin={})",
                sol.regime(),
                fmt_num(sol.class.margin)
            )?;
            if sol.near_boundary {
                writeln!(out, "near boundary: rank-1 solution used")?;
            }
            writeln!(out, "d: {}", fmt_list(&sol.d))?;
            if let Some(x1) = sol.x1_star() {
                writeln!(out, "x1_star: {}", fmt_num(x1))?;
            }
            writeln!(out, "rank(sigma_t): {}", sol.rank)?;
            writeln!(out, "{}", certificate_text(&cert))?;
            writeln!(out, "{}", mi_text(&mi, common.units()))?;
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = sol
                .alpha
                .iter()
                .zip(&sol.d)
                .enumerate()
                .map(|(i, (a, d))| vec![i.to_string(), fmt_num(*a), fmt_num(*d)])
                .collect();
            write_csv_rows(out, &["index", "alpha", "d"], &rows)?;
        }
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> AppResult<()> {
    let common = &args.model.common;
    let fmt = common.format(
        Format::Json,
        &[Format::Text, Format::Json, Format::Csv],
        "verify",
    )?;
    let model = load_model(&args.model.input)?;
    let tols = common.cert_tolerances();
    let (d, cert) = match &args.d {
        Some(d) => {
            let cov = build_covariance(&model);
            let t = certificate_for_diagonal(&cov, d)?;
            (d.clone(), check_certificate(&cov, d, &t, &tols)?)
        }
        None => {
            let sol = solve(&model, &common.solve_options())?;
            let cert = verify_solution(&sol, &tols)?;
            (sol.d, cert)
        }
    };
    match fmt {
        Format::Json => {
            let mut obj = to_json(&cert);
            if let Some(map) = obj.as_object_mut() {
                map.insert("d".into(), to_json(&d));
            }
            write_json(out, obj)?;
        }
        Format::Text => writeln!(out, "{}", certificate_text(&cert))?,
        Format::Csv => write_csv_rows(
            out,
            &[
                "passed",
                "lambda_min",
                "max_row_residual",
                "nullspace_residual",
                "columns",
            ],
            &[vec![
                cert.passed.to_string(),
                fmt_num(cert.lambda_min),
                fmt_num(cert.max_row_residual()),
                fmt_num(cert.nullspace_residual),
                cert.columns.to_string(),
            ]],
        )?,
    }
    Ok(())
}

fn cmd_mi(args: &ModelArgs, out: &mut dyn Write) -> AppResult<()> {
    let common = &args.common;
    let fmt = common.format(
        Format::Json,
        &[Format::Text, Format::Json, Format::Csv],
        "mi",
    )?;
    let model = load_model(&args.input)?;
    let opts = common.solve_options();
    let regime = classify(&model, opts.eps_for(&model)).regime;
    let report = common.scale(mi_report(&model, &opts)?);
    match fmt {
        Format::Json => {
            let mut obj = to_json(report);
            if let Some(map) = obj.as_object_mut() {
                map.insert("regime".into(), to_json(regime));
                map.insert("units".into(), common.units().into());
            }
            write_json(out, obj)?;
        }
        Format::Text => writeln!(out, "{}", mi_text(&report, common.units()))?,
        Format::Csv => write_csv_rows(
            out,
            &["i_star", "i_cmdfa", "i_up", "i_low"],
            &[mi_row(&report)],
        )?,
    }
    Ok(())
}

fn sweep_grid(args: &SweepArgs) -> AppResult<Vec<f64>> {
    let mut grid = match &args.theta1 {
        Some(g) => g.clone(),
        None if args.points == 1 => vec![args.start],
        None => {
            let step = (args.stop - args.start) / (args.points - 1) as f64;
            (0..args.points)
                .map(|k| args.start + step * k as f64)
                .collect()
        }
    };
    if let Some(bad) = grid.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(CmdfaError::Domain(format!("theta1 = {bad} must be finite and > 0")).into());
    }
    grid.sort_by(f64::total_cmp);
    let before = grid.len();
    grid.dedup();
    if grid.len() < before {
        eprintln!(
            "warning: dropped {} duplicate theta1 values",
            before - grid.len()
        );
    }
    Ok(grid)
}

fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> AppResult<()> {
    let common = &args.common;
    let fmt = common.format(Format::Csv, &[Format::Csv, Format::Json], "sweep")?;
    if let Some(bad) = args
        .theta_rest
        .iter()
        .find(|t| !(t.is_finite() && **t > 0.0))
    {
        return Err(
            CmdfaError::Domain(format!("theta_rest entry {bad} must be finite and > 0")).into(),
        );
    }
    let grid = sweep_grid(args)?;
    let opts = common.solve_options();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| AppError::Io(e.to_string()))?;
    let rows: Vec<_> = pool.install(|| {
        grid.par_iter()
            .map(|&t| sweep_row(t, &args.theta_rest, &opts))
            .collect()
    });

    let mut kept = Vec::with_capacity(rows.len());
    for row in &rows {
        match (row.status, row.report) {
            (RowStatus::Ok, Some(report)) => kept.push((row, common.scale(report))),
            _ => eprintln!(
                "warning: skipping theta1={} ({}): {}",
                fmt_num(row.theta1),
                to_json(row.status).as_str().unwrap_or("failed"),
                row.message.as_deref().unwrap_or("no report")
            ),
        }
    }
    match fmt {
        Format::Json => {
            let items: Vec<Value> = kept
                .iter()
                .map(|(row, r)| json!({"theta1": row.theta1, "margin": row.margin, "report": r}))
                .collect();
            write_json(out, json!({"units": common.units(), "rows": items}))?;
        }
        _ => {
            let table: Vec<Vec<String>> = kept
                .iter()
                .map(|(row, r)| {
                    let mut cells = vec![fmt_num(row.theta1), fmt_num(row.margin)];
                    cells.extend(mi_row(r));
                    cells
                })
                .collect();
            write_csv_rows(
                out,
                &["theta1", "margin", "i_star", "i_cmdfa", "i_up", "i_low"],
                &table,
            )?;
        }
    }
    Ok(())
}

fn cmd_sample(args: &SampleArgs, out: &mut dyn Write) -> AppResult<()> {
    let model = load_model(&args.input)?;
    let batch = data::sample(&model, args.count, args.seed)?;
    batch.write_csv(out)?;
    Ok(())
}

fn cmd_estimate(args: &EstimateArgs, out: &mut dyn Write) -> AppResult<()> {
    let common = &args.common;
    let fmt = common.format(
        Format::Json,
        &[Format::Text, Format::Json, Format::Csv],
        "estimate",
    )?;
    let (cov, m) = match (&args.matrix, &args.samples) {
        (Some(path), _) => (read_table(path, false)?, None),
        (None, Some(path)) => {
            let samples = read_table(path, true)?;
            (empirical_covariance(&samples), Some(samples.rows()))
        }
        (None, None) => {
            return Err(AppError::Usage(
                "one of --matrix or --samples is required".into(),
            ))
        }
    };
    let est = estimate_alpha(&cov)?;
    let class = classify(&est.model, common.solve_options().eps_for(&est.model));
    match fmt {
        Format::Json => write_json(
            out,
            json!({
                "alpha": est.alpha,
                "fit_residual": est.fit_residual,
                "regime": class.regime,
                "margin": class.margin,
                "samples": m,
            }),
        )?,
        Format::Text => {
            writeln!(out, "alpha: {}", fmt_list(&est.alpha))?;
            writeln!(out, "fit residual: {}", fmt_num(est.fit_residual))?;
            writeln!(out, "{} (margin={:.6})", class.regime, class.margin)?;
        }
        Format::Csv => {
            let rows: Vec<Vec<String>> = est
                .alpha
                .iter()
                .enumerate()
                .map(|(i, a)| vec![i.to_string(), fmt_num(*a)])
                .collect();
            write_csv_rows(out, &["index", "alpha"], &rows)?;
        }
    }
    Ok(())
}

fn run(cli: &Cli, out: &mut dyn Write) -> AppResult<()> {
    match &cli.command {
        Command::Classify(a) => cmd_classify(a, out),
        Command::Solve(a) => cmd_solve(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Mi(a) => cmd_mi(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Sample(a) => cmd_sample(a, out),
        Command::Estimate(a) => cmd_estimate(a, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version go to stdout and are not failures
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = run(&cli, &mut out).and_then(|()| out.flush().map_err(AppError::from));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
