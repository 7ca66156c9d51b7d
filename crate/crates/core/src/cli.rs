//! The `lpcop` command-line tool.
//!
//! Every command writes plain files: CSV with a header row and shortest
//! round-trip decimals, JSON carrying the tool version, seed and full
//! configuration, and optionally a static SVG figure. Identical arguments
//! give byte-identical files.
//!
//! Exit codes: 0 on success, 2 on domain or validation errors, 3 on I/O errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::copula::{
    copula_exists, density_variant, lp_norm, rho, CopulaParams, Shape, VariantTag,
};
use crate::energy::{
    coupling_objective, run_conjecture, swap_optimize, PermutationCoupling, SwapOptions, SwapResult,
};
use crate::error::{Error, Result};
use crate::inference::{fit, DEFAULT_P_MAX};
use crate::sampler::{sample_copula, SampleBatch};
use crate::specfun::RngStream;
use crate::stats::pearson;

pub const THREADS_ENV: &str = "LPCOP_THREADS";

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "lpcop",
    version,
    about = "Lp-norm spherical copulas: sampling, densities, correlation, fitting and S_beta optimization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "lowercase")]
pub enum Command {
    /// Draw i.i.d. samples from a copula.
    Sample(SampleArgs),
    /// Evaluate the copula density on a grid (n = 2) or at given points.
    Density(DensityArgs),
    /// Tabulate the bivariate correlation coefficient over a range of p.
    Rho(RhoArgs),
    /// Estimate p from a CSV of positive-variant observations.
    Fit(FitArgs),
    /// Maximize S_beta over permutation couplings by pairwise swaps.
    Optimize(OptimizeArgs),
    /// Compare the swap optimum with the circular L_(3-beta) copula.
    Conjecture(ConjectureArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub n: usize,
    /// Shape parameter; a number >= 1 or `inf`.
    #[arg(long, value_parser = parse_shape)]
    pub p: Shape,
    #[arg(long, default_value_t = 1000)]
    pub m: usize,
    #[arg(long, default_value = "positive", value_parser = parse_variant)]
    pub variant: VariantTag,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix; writes PREFIX.csv and PREFIX.json.
    #[arg(long, default_value = "sample")]
    pub out: PathBuf,
    /// Also write PREFIX.svg (n = 2 only).
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct DensityArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_parser = parse_shape)]
    pub p: Shape,
    #[arg(long, default_value = "positive", value_parser = parse_variant)]
    pub variant: VariantTag,
    /// Cells per axis of the midpoint grid (n = 2).
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// CSV of points (header x1..xn) to evaluate instead of a grid.
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[arg(long, default_value = "density.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RhoArgs {
    #[arg(long, default_value_t = 1.0)]
    pub p_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub p_max: f64,
    /// Number of equally spaced values from p_min to p_max.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value = "rho.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// CSV with header x1..xn, as written by `sample`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_P_MAX)]
    pub p_max: f64,
    /// JSON output path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 1000)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix; writes PREFIX_permutation.csv, PREFIX_trace.csv, PREFIX.json.
    #[arg(long, default_value = "optimize")]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ConjectureArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 1000)]
    pub m: usize,
    /// Monte Carlo sample size for the copula's S_beta.
    #[arg(long, default_value_t = 100_000)]
    pub mc: usize,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix; writes PREFIX_report.json, PREFIX_permutation.csv, PREFIX_trace.csv.
    #[arg(long, default_value = "conjecture")]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: bool,
}

fn parse_shape(s: &str) -> std::result::Result<Shape, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> std::result::Result<VariantTag, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 3,
        _ => 2,
    }
}

/// Caps rayon's worker count from `LPCOP_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            // Fails only if a pool already exists; keep the existing one.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Sample(a) => cmd_sample(cli, a),
        Command::Density(a) => cmd_density(a),
        Command::Rho(a) => cmd_rho(a),
        Command::Fit(a) => cmd_fit(cli, a),
        Command::Optimize(a) => cmd_optimize(cli, a),
        Command::Conjecture(a) => cmd_conjecture(cli, a),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    write_file(path, &text)
}

fn metadata(cli: &Cli) -> serde_json::Value {
    json!({
        "tool": "lpcop",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cli.command,
    })
}

fn check_params(n: usize, p: Shape) -> Result<CopulaParams> {
    if !copula_exists(n, p)? {
        return Err(Error::domain(format!(
            "no Lp-norm spherical copula exists for n = {n}, p = {p}: finite p must satisfy p >= n - 1 = {}",
            n - 1
        )));
    }
    Ok(CopulaParams::new(n, p))
}

fn header(n: usize) -> String {
    (1..=n)
        .map(|i| format!("x{i}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn rows_csv(n: usize, data: &[f64]) -> String {
    let mut out = header(n);
    out.push('\n');
    for row in data.chunks_exact(n) {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Reads a CSV with header `x1,…,xn`.
pub fn read_points_csv(path: &Path) -> Result<(usize, Vec<f64>)> {
    let bytes = fs::read(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let parse_err = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    let header = reader.headers().map_err(parse_err)?.clone();
    if header.is_empty() {
        return Err(Error::domain(format!("{} is empty", path.display())));
    }
    for (i, c) in header.iter().enumerate() {
        if c != format!("x{}", i + 1) {
            return Err(Error::Parse(format!(
                "expected header x1..xn, found `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
    }
    let n = header.len();
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record.map_err(parse_err)?;
        let line = record.position().map_or(0, |p| p.line());
        for f in record.iter() {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::Parse(format!("line {line}: bad number `{f}`")))?;
            data.push(v);
        }
    }
    if data.is_empty() {
        return Err(Error::domain(format!(
            "{} has no observations",
            path.display()
        )));
    }
    Ok((n, data))
}

#[derive(Serialize)]
struct SampleSummary {
    rows: usize,
    coordinate_means: Vec<f64>,
    correlation: Vec<Vec<f64>>,
}

fn summarize(batch: &SampleBatch) -> SampleSummary {
    let n = batch.dim();
    let cols: Vec<Vec<f64>> = (0..n).map(|j| batch.column(j)).collect();
    let coordinate_means = cols
        .iter()
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let correlation = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        pearson(&cols[i], &cols[j])
                    }
                })
                .collect()
        })
        .collect();
    SampleSummary {
        rows: batch.len(),
        coordinate_means,
        correlation,
    }
}

fn cmd_sample(cli: &Cli, a: &SampleArgs) -> Result<()> {
    let params = check_params(a.n, a.p)?;
    let mut rng = RngStream::new(a.seed);
    let batch = sample_copula(&mut rng, &params, a.m, a.variant)?;
    write_file(&with_suffix(&a.out, ".csv"), &rows_csv(a.n, &batch.data))?;
    let mut meta = metadata(cli);
    meta["summary"] = serde_json::to_value(summarize(&batch)).expect("summary serializes");
    if a.n == 2 {
        if let Shape::Finite(p) = a.p {
            meta["rho_theory"] = json!(rho(p)?);
        }
    }
    write_json(&with_suffix(&a.out, ".json"), &meta)?;
    if a.svg {
        if a.n != 2 {
            return Err(Error::domain("SVG scatter is only available for n = 2"));
        }
        let boundary = match (a.p, a.variant) {
            (Shape::Finite(p), VariantTag::Positive) => Some(Boundary::Positive(p)),
            (Shape::Finite(p), VariantTag::Circular) => Some(Boundary::Circular(p)),
            (Shape::Finite(p), VariantTag::Signed) => Some(Boundary::Signed(p)),
            (Shape::Infinite, _) => None,
        };
        let domain = if a.variant == VariantTag::Signed {
            (-1.0, 1.0)
        } else {
            (0.0, 1.0)
        };
        write_file(
            &with_suffix(&a.out, ".svg"),
            &scatter_svg(&batch.data, domain, boundary),
        )?;
    }
    Ok(())
}

fn cmd_density(a: &DensityArgs) -> Result<()> {
    let params = check_params(a.n, a.p)?;
    let eval = |x: &[f64]| density_variant(&params, x, a.variant);
    let mut out = header(a.n);
    out.push_str(",density\n");
    match &a.points {
        Some(path) => {
            let (n, data) = read_points_csv(path)?;
            if n != a.n {
                return Err(Error::domain(format!(
                    "points have dimension {n}, expected {}",
                    a.n
                )));
            }
            for row in data.chunks_exact(n) {
                let d = eval(row)?;
                let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
                let _ = writeln!(out, "{},{d}", line.join(","));
            }
        }
        None => {
            if a.n != 2 {
                return Err(Error::domain(
                    "grid evaluation needs n = 2; pass --points for other dimensions",
                ));
            }
            if a.grid == 0 {
                return Err(Error::domain("grid must be positive"));
            }
            let (lo, hi) = if a.variant == VariantTag::Signed {
                (-1.0, 1.0)
            } else {
                (0.0, 1.0)
            };
            let h = (hi - lo) / a.grid as f64;
            for i in 0..a.grid {
                for j in 0..a.grid {
                    let x = [lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h];
                    let _ = writeln!(out, "{},{},{}", x[0], x[1], eval(&x)?);
                }
            }
        }
    }
    write_file(&a.out, &out)
}

fn cmd_rho(a: &RhoArgs) -> Result<()> {
    if a.count == 0 || !(1.0..).contains(&a.p_min) || !(a.p_min..).contains(&a.p_max) {
        return Err(Error::domain("need count >= 1 and 1 <= p_min <= p_max"));
    }
    let mut out = String::from("p,rho\n");
    for k in 0..a.count {
        let p = if a.count == 1 {
            a.p_min
        } else {
            a.p_min + (a.p_max - a.p_min) * k as f64 / (a.count - 1) as f64
        };
        let _ = writeln!(out, "{p},{}", rho(p)?);
    }
    write_file(&a.out, &out)
}

fn cmd_fit(cli: &Cli, a: &FitArgs) -> Result<()> {
    let (n, data) = read_points_csv(&a.input)?;
    let rows: Vec<Vec<f64>> = data.chunks_exact(n).map(|r| r.to_vec()).collect();
    let batch = SampleBatch::from_rows(
        CopulaParams::new(n, n as f64),
        VariantTag::Positive,
        0,
        &rows,
    )?;
    let result = fit(&batch, a.p_max)?;
    let mut doc = metadata(cli);
    doc["fit"] = serde_json::to_value(&result).expect("fit result serializes");
    doc["boundary_estimator"] = json!(result.method == crate::inference::FitMethod::PStar);
    match &a.out {
        Some(path) => write_json(path, &doc)?,
        None => println!("{}", serde_json::to_string_pretty(&doc).expect("json")),
    }
    Ok(())
}

fn permutation_csv(c: &PermutationCoupling) -> String {
    let mut out = String::from("i,sigma_i\n");
    for (i, s) in c.sigma().iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, s + 1);
    }
    out
}

fn trace_csv(r: &SwapResult) -> String {
    let mut out = String::from("restart,sweep,objective,accepted\n");
    for e in &r.trace {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e.restart, e.sweep, e.objective, e.accepted
        );
    }
    out
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 2.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "beta must lie in the open interval (0, 2), got {beta}"
        )))
    }
}

fn cmd_optimize(cli: &Cli, a: &OptimizeArgs) -> Result<()> {
    check_beta(a.beta)?;
    let mut rng = RngStream::new(a.seed);
    let opts = SwapOptions {
        max_sweeps: a.max_sweeps,
        restarts: a.restarts,
    };
    let result = swap_optimize(&mut rng, a.m, a.beta, opts)?;
    write_file(
        &with_suffix(&a.out, "_permutation.csv"),
        &permutation_csv(&result.coupling),
    )?;
    write_file(&with_suffix(&a.out, "_trace.csv"), &trace_csv(&result))?;
    let mut doc = metadata(cli);
    doc["objective"] = json!(result.objective);
    doc["sweeps_used"] = json!(result.sweeps_used);
    doc["locally_optimal"] = json!(result.locally_optimal);
    doc["identity_objective"] = json!(coupling_objective(
        &PermutationCoupling::identity(a.m)?,
        a.beta
    )?);
    doc["reversal_objective"] = json!(coupling_objective(
        &PermutationCoupling::reversal(a.m)?,
        a.beta
    )?);
    write_json(&with_suffix(&a.out, ".json"), &doc)?;
    if a.svg {
        let svg = scatter_svg(
            &result.coupling.points(),
            (0.0, 1.0),
            Some(Boundary::Circular(3.0 - a.beta)),
        );
        write_file(&with_suffix(&a.out, ".svg"), &svg)?;
    }
    Ok(())
}

fn cmd_conjecture(cli: &Cli, a: &ConjectureArgs) -> Result<()> {
    check_beta(a.beta)?;
    let mut rng = RngStream::new(a.seed);
    let opts = SwapOptions {
        max_sweeps: a.max_sweeps,
        restarts: a.restarts,
    };
    let run = run_conjecture(&mut rng, a.beta, a.m, a.mc, opts)?;
    write_file(
        &with_suffix(&a.out, "_permutation.csv"),
        &permutation_csv(&run.swap.coupling),
    )?;
    write_file(&with_suffix(&a.out, "_trace.csv"), &trace_csv(&run.swap))?;
    let mut doc = metadata(cli);
    doc["report"] = serde_json::to_value(&run.report).expect("report serializes");
    write_json(&with_suffix(&a.out, "_report.json"), &doc)?;
    if a.svg {
        let svg = scatter_svg(
            &run.swap.coupling.points(),
            (0.0, 1.0),
            Some(Boundary::Circular(run.report.p)),
        );
        write_file(&with_suffix(&a.out, ".svg"), &svg)?;
    }
    Ok(())
}

/// Reference curve drawn over a scatter.
#[derive(Clone, Copy, Debug)]
enum Boundary {
    /// `‖x‖ₚ = 1` in the positive quadrant.
    Positive(f64),
    /// `‖2x - 1‖ₚ = 1`.
    Circular(f64),
    /// `‖x‖ₚ = 1`.
    Signed(f64),
}

const SVG_SIZE: f64 = 600.0;
const SVG_SEGMENTS: usize = 256;

fn scatter_svg(points: &[f64], domain: (f64, f64), boundary: Option<Boundary>) -> String {
    let (lo, hi) = domain;
    let sx = |x: f64| (x - lo) / (hi - lo) * SVG_SIZE;
    let sy = |y: f64| SVG_SIZE - (y - lo) / (hi - lo) * SVG_SIZE;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="600" height="600" viewBox="0 0 600 600">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="600" height="600" fill="white" stroke="black"/>"#
    );
    for pt in points.chunks_exact(2) {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.3}" cy="{:.3}" r="1.5" fill="black"/>"#,
            sx(pt[0]),
            sy(pt[1])
        );
    }
    if let Some(b) = boundary {
        let (p, centre, scale, full) = match b {
            Boundary::Positive(p) => (p, 0.0, 1.0, false),
            Boundary::Circular(p) => (p, 0.5, 0.5, true),
            Boundary::Signed(p) => (p, 0.0, 1.0, true),
        };
        let span = if full {
            std::f64::consts::TAU
        } else {
            std::f64::consts::FRAC_PI_2
        };
        let coords: Vec<String> = (0..=SVG_SEGMENTS)
            .map(|k| {
                let t = span * k as f64 / SVG_SEGMENTS as f64;
                let d = [t.cos(), t.sin()];
                let norm = lp_norm(&d, p);
                let (x, y) = (centre + scale * d[0] / norm, centre + scale * d[1] / norm);
                format!("{:.3},{:.3}", sx(x), sy(y))
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="red" stroke-width="2"/>"#,
            coords.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("lpcop").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn nonexistent_copula_is_a_domain_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("s");
        let cli = parse(&[
            "sample",
            "--n",
            "4",
            "--p",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
        let err = run(&cli).unwrap_err();
        assert_eq!(exit_code(&err), 2);
        assert!(err.to_string().contains("p >= n - 1"));
    }

    #[test]
    fn bad_beta_is_a_domain_error() {
        let cli = parse(&["optimize", "--beta", "3"]);
        assert_eq!(exit_code(&run(&cli).unwrap_err()), 2);
    }

    #[test]
    fn missing_input_is_an_io_error() {
        let cli = parse(&["fit", "--input", "/nonexistent/file.csv"]);
        assert_eq!(exit_code(&run(&cli).unwrap_err()), 3);
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let data = vec![0.1, 1.0 / 3.0, 2f64.sqrt() / 7.0, 1e-17];
        fs::write(&path, rows_csv(2, &data)).unwrap();
        let (n, back) = read_points_csv(&path).unwrap();
        assert_eq!(n, 2);
        assert_eq!(back, data);
    }

    #[test]
    fn header_is_validated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        fs::write(&path, "a,b\n0.1,0.2\n").unwrap();
        assert!(read_points_csv(&path).is_err());
        fs::write(&path, "x1,x2\n").unwrap();
        assert_eq!(exit_code(&read_points_csv(&path).unwrap_err()), 2);
    }
}
