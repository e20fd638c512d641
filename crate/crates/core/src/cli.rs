//! The `cbss` command-line driver.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::asymlab::{self, LabError, RateExperimentConfig, RateExperimentReport};
use crate::estimators::{EstimatorError, TimeSeries};
use crate::genproc::{self, ModelSpec};
use crate::imagepipe::{self, ImageError, MixingChoice};
use crate::linalg::{CMat, C64};
use crate::metrics;
use crate::unmixer::{self, UnmixError};

#[derive(Debug, Parser)]
#[command(name = "cbss", version, about = "Complex-valued blind source separation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the unmixing matrix of a CSV time series
    Unmix {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        tau: usize,
        /// Output prefix, or an existing directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte-Carlo convergence-rate experiment
    Rate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mix and unmix three PPM images
    Image {
        #[arg(long, num_args = 3, required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, required_unless_present = "identity_mixing")]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        tau: usize,
        #[arg(long)]
        out: PathBuf,
        /// Skip mixing (A = I)
        #[arg(long)]
        identity_mixing: bool,
    },
    /// MD index of an unmixing estimate against a known mixing matrix
    Md {
        #[arg(long)]
        gamma: PathBuf,
        #[arg(long)]
        mixing: PathBuf,
    },
    /// Draw a series from a model config
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "T")]
        t: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the latent series here
        #[arg(long)]
        latent: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Failures(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Failures(_) => 4,
            CliError::Output(_) => 1,
        }
    }
}

fn input_err(path: &Path, e: impl Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn output_err(path: &Path, e: impl Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| output_err(path, e))
}

fn csv_header(d: usize) -> String {
    (1..=d).map(|k| format!("re_{k},im_{k}")).collect::<Vec<_>>().join(",")
}

fn csv_row(values: &[C64]) -> String {
    values.iter().map(|z| format!("{},{}", z.re, z.im)).collect::<Vec<_>>().join(",")
}

/// Header line plus one `re,im,...` line per row.
pub fn format_complex_rows<'a>(d: usize, rows: impl Iterator<Item = &'a [C64]>) -> String {
    let mut s = csv_header(d);
    s.push('\n');
    for r in rows {
        s.push_str(&csv_row(r));
        s.push('\n');
    }
    s
}

pub fn format_series(x: &TimeSeries) -> String {
    format_complex_rows(x.dim(), x.rows())
}

pub fn format_matrix(m: &CMat) -> String {
    format_complex_rows(m.cols(), (0..m.rows()).map(|r| m.row(r)))
}

/// Parses the `re_1,im_1,...` layout into rows of complex values.
pub fn parse_complex_rows(text: &str) -> Result<Vec<Vec<C64>>, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or("empty file")?;
    let cols = header.split(',').count();
    if cols == 0 || cols % 2 != 0 {
        return Err(format!("header has {cols} columns; expected re/im pairs"));
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols {
            return Err(format!("line {}: {} fields, expected {cols}", n + 1, fields.len()));
        }
        let nums = fields
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| format!("line {}: bad number '{f}'", n + 1)))
            .collect::<Result<Vec<f64>, String>>()?;
        rows.push(nums.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect());
    }
    if rows.is_empty() {
        return Err("no data rows".into());
    }
    Ok(rows)
}

pub fn read_series(path: &Path) -> Result<TimeSeries, CliError> {
    let rows = parse_complex_rows(&read_text(path)?).map_err(|e| input_err(path, e))?;
    TimeSeries::from_rows(&rows).map_err(|e| input_err(path, e))
}

pub fn read_matrix(path: &Path) -> Result<CMat, CliError> {
    let rows = parse_complex_rows(&read_text(path)?).map_err(|e| input_err(path, e))?;
    let m = CMat::from_vec(rows.len(), rows[0].len(), rows.concat()).map_err(|e| input_err(path, e))?;
    if !m.is_finite() {
        return Err(input_err(path, "non-finite entry"));
    }
    Ok(m)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| input_err(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| output_err(path, e))?;
    s.push('\n');
    write_text(path, &s)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| output_err(dir, e))
}

/// `dir/name` when `out` is an existing directory, otherwise `out_name`.
fn prefixed(out: &Path, name: &str) -> PathBuf {
    if out.is_dir() {
        out.join(name)
    } else {
        let mut s = out.as_os_str().to_owned();
        s.push("_");
        s.push(name);
        PathBuf::from(s)
    }
}

fn unmix_error(e: UnmixError) -> CliError {
    match e {
        UnmixError::ZeroLag | UnmixError::Estimator(EstimatorError::LagOutOfRange { .. }) => {
            CliError::Input(e.to_string())
        }
        UnmixError::Estimator(_) | UnmixError::DimensionMismatch(_) => CliError::Input(e.to_string()),
        _ => CliError::Numerical(e.to_string()),
    }
}

fn lab_error(e: LabError) -> CliError {
    match e {
        LabError::Config(_) | LabError::Gen(_) => CliError::Input(e.to_string()),
        LabError::TooManyFailures { .. } => CliError::Failures(e.to_string()),
        _ => CliError::Numerical(e.to_string()),
    }
}

fn image_error(e: ImageError) -> CliError {
    match e {
        ImageError::Unmix(u) => unmix_error(u),
        ImageError::Metrics(m) => CliError::Numerical(m.to_string()),
        ImageError::NorthPole | ImageError::OffSurface(_) => CliError::Numerical(e.to_string()),
        _ => CliError::Input(e.to_string()),
    }
}

pub fn cmd_unmix(input: &Path, tau: usize, out: &Path) -> Result<(), CliError> {
    let x = read_series(input)?;
    let fit = unmixer::unmix(&x, tau).map_err(unmix_error)?;
    let latent = unmixer::apply_unmixing(&fit, &x).map_err(unmix_error)?;
    let mut lambdas = String::from("lambda\n");
    for l in &fit.lambdas {
        lambdas.push_str(&format!("{l}\n"));
    }
    write_text(&prefixed(out, "gamma.csv"), &format_matrix(&fit.gamma))?;
    write_text(&prefixed(out, "lambdas.csv"), &lambdas)?;
    write_text(&prefixed(out, "latent.csv"), &format_series(&latent))?;
    if !fit.is_reliable() {
        eprintln!("warning: eigenvalue gap {:e} is small; components may be mixed", fit.eigen_gap);
    }
    Ok(())
}

pub fn format_report_csv(report: &RateExperimentReport) -> String {
    let mut s = String::from("T,median_error,iqr,diag_median,offdiag_median,failed\n");
    for r in &report.per_t {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.t, r.median_error, r.iqr, r.diag_median, r.offdiag_median, r.failed
        ));
    }
    s
}

#[derive(Debug, Serialize)]
struct RateSummary<'a> {
    fitted_slope: f64,
    slope_se: f64,
    theoretical_exponent: f64,
    diag_slope: f64,
    offdiag_slope: Option<f64>,
    max_ks: f64,
    max_ks_diagonal: f64,
    #[serde(flatten)]
    report: &'a RateExperimentReport,
}

pub fn cmd_rate(config: &Path, out: &Path) -> Result<(), CliError> {
    let cfg: RateExperimentConfig = read_json(config)?;
    cfg.validate().map_err(|e| input_err(config, e))?;
    let report = asymlab::run_rate_experiment(&cfg).map_err(lab_error)?;
    if report.regime.boundary {
        eprintln!("warning: boundary case q2(2H-2) = -1; the power-law fit does not apply");
    }
    ensure_dir(out)?;
    write_text(&out.join("report.csv"), &format_report_csv(&report))?;
    let summary = RateSummary {
        fitted_slope: report.fitted_slope,
        slope_se: report.slope_se,
        theoretical_exponent: report.theoretical_exponent,
        diag_slope: report.diag_fit.slope,
        offdiag_slope: report.offdiag_fit.map(|f| f.slope),
        max_ks: asymlab::max_ks(&report.gaussianity, false),
        max_ks_diagonal: asymlab::max_ks(&report.gaussianity, true),
        report: &report,
    };
    write_json(&out.join("summary.json"), &summary)
}

#[derive(Debug, Serialize)]
struct ImageMetrics {
    md: f64,
    perturbed_pixels: usize,
    tau: usize,
    seed: Option<u64>,
    identity_mixing: bool,
    lambdas: Vec<f64>,
    mixing: CMat,
    unmixing: CMat,
}

pub fn cmd_image(
    inputs: &[PathBuf],
    seed: Option<u64>,
    tau: usize,
    out: &Path,
    identity_mixing: bool,
) -> Result<(), CliError> {
    let imgs = inputs
        .iter()
        .map(|p| imagepipe::load_ppm(p).map_err(|e| input_err(p, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let mixing = match (identity_mixing, seed) {
        (true, _) => MixingChoice::Identity,
        (false, Some(seed)) => MixingChoice::Random { seed },
        (false, None) => return Err(CliError::Input("--seed is required for random mixing".into())),
    };
    let sep = imagepipe::separate_images(&imgs, &mixing, tau).map_err(image_error)?;
    ensure_dir(out)?;
    for (k, (m, u)) in sep.mixed.iter().zip(&sep.unmixed).enumerate() {
        let p = out.join(format!("mixed_{}.ppm", k + 1));
        imagepipe::save_ppm(m, &p).map_err(|e| output_err(&p, e))?;
        let p = out.join(format!("unmixed_{}.ppm", k + 1));
        imagepipe::save_ppm(u, &p).map_err(|e| output_err(&p, e))?;
    }
    let metrics = ImageMetrics {
        md: sep.md,
        perturbed_pixels: sep.perturbed,
        tau,
        seed: if identity_mixing { None } else { seed },
        identity_mixing,
        lambdas: sep.fit.lambdas.clone(),
        mixing: sep.mixing.clone(),
        unmixing: sep.fit.gamma.clone(),
    };
    write_json(&out.join("metrics.json"), &metrics)
}

pub fn cmd_md(gamma: &Path, mixing: &Path) -> Result<f64, CliError> {
    let g = read_matrix(gamma)?;
    let a = read_matrix(mixing)?;
    metrics::md_index(&g, &a).map_err(|e| CliError::Input(e.to_string()))
}

pub fn cmd_simulate(
    config: &Path,
    t: usize,
    seed: u64,
    out: &Path,
    latent: Option<&Path>,
) -> Result<(), CliError> {
    let model: ModelSpec = read_json(config)?;
    let g = genproc::generate(&model, t, seed).map_err(|e| input_err(config, e))?;
    if g.clamped_mass > genproc::CLAMP_REPORT {
        eprintln!("warning: clamped embedding mass {:e}", g.clamped_mass);
    }
    write_text(out, &format_series(&g.x))?;
    if let Some(p) = latent {
        write_text(p, &format_series(&g.z))?;
    }
    Ok(())
}

/// Applies `CBSS_THREADS` (0 or unset = all cores) to the global worker pool.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("CBSS_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| CliError::Input(format!("CBSS_THREADS='{v}' is not a count")))?;
    // a second call (e.g. from tests) finds the pool already built; that is fine
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Unmix { input, tau, out } => cmd_unmix(&input, tau, &out),
        Command::Rate { config, out } => cmd_rate(&config, &out),
        Command::Image { inputs, seed, tau, out, identity_mixing } => {
            cmd_image(&inputs, seed, tau, &out, identity_mixing)
        }
        Command::Md { gamma, mixing } => {
            println!("{}", cmd_md(&gamma, &mixing)?);
            Ok(())
        }
        Command::Simulate { config, t, seed, out, latent } => {
            cmd_simulate(&config, t, seed, &out, latent.as_deref())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_round_trip_is_lossless() {
        let x = TimeSeries::from_rows(&[
            vec![C64::new(0.1, -1e-300), C64::new(1.0 / 3.0, f64::MAX)],
            vec![C64::new(-0.0, 5e-324), C64::new(123456789.123456789, -2.5)],
        ])
        .unwrap();
        let rows = parse_complex_rows(&format_series(&x)).unwrap();
        assert_eq!(TimeSeries::from_rows(&rows).unwrap(), x);
    }

    proptest! {
        #[test]
        fn csv_round_trip_random(v in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 4..40)) {
            let n = v.len() / 4 * 4;
            let rows: Vec<Vec<C64>> = v[..n].chunks(4).map(|c| vec![C64::new(c[0], c[1]), C64::new(c[2], c[3])]).collect();
            prop_assume!(rows.len() >= 2);
            let x = TimeSeries::from_rows(&rows).unwrap();
            let back = TimeSeries::from_rows(&parse_complex_rows(&format_series(&x)).unwrap()).unwrap();
            prop_assert_eq!(back, x);
        }
    }

    #[test]
    fn csv_errors() {
        assert!(parse_complex_rows("").is_err());
        assert!(parse_complex_rows("re_1\n1\n").is_err());
        assert!(parse_complex_rows("re_1,im_1\n1,2,3\n").is_err());
        assert!(parse_complex_rows("re_1,im_1\n1,x\n").is_err());
        assert!(parse_complex_rows("re_1,im_1\n").is_err());
    }

    #[test]
    fn matrix_csv_layout() {
        let m = CMat::from_rows(&[vec![C64::new(1.0, 2.0), C64::new(0.0, -1.0)], vec![C64::new(0.5, 0.0), C64::new(3.0, 0.0)]]);
        assert_eq!(format_matrix(&m), "re_1,im_1,re_2,im_2\n1,2,0,-1\n0.5,0,3,0\n");
    }

    #[test]
    fn prefix_paths() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(prefixed(dir.path(), "gamma.csv"), dir.path().join("gamma.csv"));
        assert_eq!(prefixed(&dir.path().join("run"), "gamma.csv"), dir.path().join("run_gamma.csv"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input(String::new()).exit_code(), 2);
        assert_eq!(CliError::Numerical(String::new()).exit_code(), 3);
        assert_eq!(CliError::Failures(String::new()).exit_code(), 4);
    }
}
