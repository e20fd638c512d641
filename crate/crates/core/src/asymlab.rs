//! Monte-Carlo checks of the estimator's limit behaviour: convergence-rate
//! regressions, Gaussianity diagnostics, the diagonal limit under long-range
//! dependence and the finite-sample expansion residuals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::estimators::{autocov_sym, sample_mean};
use crate::genproc::{self, GenError, ModelSpec, RateRegime};
use crate::linalg::{CMat, LinalgError, C64};
use crate::metrics::{self, MetricsError};
use crate::unmixer::{self, UnmixError};

/// Largest tolerated fraction of failed replications.
pub const MAX_FAILURE_RATE: f64 = 0.01;
pub const MIN_REPLICATIONS: usize = 50;
pub const MIN_KS_SAMPLES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{failed} of {total} replications failed at T = {t}")]
    TooManyFailures { failed: usize, total: usize, t: usize },
    #[error("need at least {MIN_KS_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("samples have zero variance")]
    ZeroVariance,
    #[error("regression needs at least 3 finite positive points")]
    Regression,
}

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    Md,
    #[default]
    FrobeniusAfterAlignment,
    Elementwise,
    /// `‖diag(Ĝ − I)‖_F` only; the part that carries the long-range rate.
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExperimentConfig {
    pub model: ModelSpec,
    pub tau: usize,
    pub t_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub error_metric: ErrorMetric,
}

impl RateExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.tau == 0 {
            return Err(LabError::Config("tau must be at least 1".into()));
        }
        if self.t_grid.len() < 3 {
            return Err(LabError::Config("t_grid needs at least 3 points".into()));
        }
        if self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LabError::Config("t_grid must be strictly increasing".into()));
        }
        if self.t_grid[0] < 16 || self.t_grid[0] < self.tau + 2 {
            return Err(LabError::Config(format!(
                "smallest T = {} too short for tau = {}",
                self.t_grid[0], self.tau
            )));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(LabError::Config(format!(
                "replications = {} below the minimum {MIN_REPLICATIONS}",
                self.replications
            )));
        }
        if self.error_metric == ErrorMetric::Md && self.model.d < 2 {
            return Err(LabError::Config("the MD index needs d >= 2".into()));
        }
        Ok(())
    }
}

/// Population truth shared by all replications of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    /// Γ with rows in decreasing-λ order.
    pub gamma: CMat,
    pub gamma_inv: CMat,
    /// `order[j]` = latent index of row `j`.
    pub order: Vec<usize>,
    /// Population λ in row order.
    pub lambdas: Vec<f64>,
    /// Population `[S_0(z)]_kk` per latent index.
    pub s0: Vec<f64>,
}

impl Truth {
    pub fn new(model: &ModelSpec, tau: usize) -> Result<Self> {
        let (gamma, order) = model.true_unmixing(tau)?;
        let gamma_inv = gamma.inverse()?;
        let pop = model.population_lambdas(tau);
        let lambdas = order.iter().map(|&k| pop[k]).collect();
        Ok(Self { gamma, gamma_inv, order, lambdas, s0: model.population_autocov(0) })
    }
}

/// What one replication hands back to the aggregators.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    /// `J Γ̂` closest to the true Γ in Frobenius norm.
    pub aligned: CMat,
    /// `Ĝ = J Γ̂ Γ⁻¹` with J making its diagonal real and non-negative; the
    /// identity in the limit.
    pub gain: CMat,
    pub md: Option<f64>,
    /// Standardized latent series in row order: its `Ŝ_0`, `Ŝ_τ` and mean.
    pub s0: CMat,
    pub s_tau: CMat,
    pub latent_mean: Vec<C64>,
    pub sample_lambdas: Vec<f64>,
}

/// Per-replication seed for length `t`, replication `rep`.
pub fn replication_seed(base: u64, t: usize, rep: usize) -> u64 {
    genproc::mix_seed(&[base, t as u64, rep as u64])
}

fn one_replicate(model: &ModelSpec, truth: &Truth, tau: usize, t: usize, seed: u64) -> Result<Option<Replicate>> {
    let g = genproc::generate(model, t, seed)?;
    let fit = match unmixer::unmix(&g.x, tau) {
        Ok(f) => f,
        Err(UnmixError::Estimator(e)) => return Err(LabError::Config(e.to_string())),
        Err(_) => return Ok(None),
    };
    // J is fixed on the gain so the result does not depend on A
    let raw_gain = fit.gamma.matmul(&truth.gamma_inv)?;
    let Ok(shift) = unmixer::alignment_shift(&raw_gain, &CMat::identity(model.d)) else {
        return Ok(None);
    };
    let gain = shift.apply(&raw_gain);
    let Ok(aligned) = unmixer::align_phase_to(&fit.gamma, &truth.gamma) else {
        return Ok(None);
    };
    let md = match metrics::md_index(&fit.gamma, &model.mixing) {
        Ok(v) => Some(v),
        Err(MetricsError::TooSmall(_)) => None,
        Err(_) => return Ok(None),
    };
    // latent in row order, scaled to unit population variance
    let d = model.d;
    let scale: Vec<f64> = truth.order.iter().map(|&k| 1.0 / truth.s0[k].sqrt()).collect();
    let permute = |m: &CMat| {
        CMat::from_fn(d, d, |j, k| m[(truth.order[j], truth.order[k])] * scale[j] * scale[k])
    };
    let s0 = permute(&autocov_sym(&g.z, 0).map_err(|e| LabError::Config(e.to_string()))?);
    let s_tau = permute(&autocov_sym(&g.z, tau).map_err(|e| LabError::Config(e.to_string()))?);
    let mean = sample_mean(&g.z);
    let latent_mean = truth.order.iter().zip(&scale).map(|(&k, s)| mean[k] * *s).collect();
    Ok(Some(Replicate { aligned, gain, md, s0, s_tau, latent_mean, sample_lambdas: fit.lambdas }))
}

/// Runs `reps` independent replications at length `t` in parallel. The result
/// order (and content) depends only on the seeds, never on scheduling.
pub fn run_replications(
    model: &ModelSpec,
    truth: &Truth,
    tau: usize,
    t: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<Replicate>> {
    let slots: Vec<Result<Option<Replicate>>> = (0..reps)
        .into_par_iter()
        .map(|rep| one_replicate(model, truth, tau, t, replication_seed(seed, t, rep)))
        .collect();
    let mut out = Vec::with_capacity(reps);
    let mut failed = 0;
    for s in slots {
        match s? {
            Some(r) => out.push(r),
            None => failed += 1,
        }
    }
    if failed as f64 > MAX_FAILURE_RATE * reps as f64 {
        return Err(LabError::TooManyFailures { failed, total: reps, t });
    }
    Ok(out)
}

fn diag_error(gain: &CMat) -> f64 {
    (0..gain.rows()).map(|j| (gain[(j, j)] - 1.0).norm_sqr()).sum::<f64>().sqrt()
}

fn offdiag_error(gain: &CMat) -> f64 {
    let d = gain.rows();
    let mut s = 0.0;
    for j in 0..d {
        for k in 0..d {
            if j != k {
                s += gain[(j, k)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn metric_error(metric: ErrorMetric, r: &Replicate, truth: &Truth) -> f64 {
    match metric {
        ErrorMetric::Md => r.md.unwrap_or(f64::NAN),
        ErrorMetric::FrobeniusAfterAlignment => r.aligned.sub(&truth.gamma).expect("same shape").frobenius_norm(),
        ErrorMetric::Elementwise => r.aligned.max_abs_diff(&truth.gamma),
        ErrorMetric::Diagonal => diag_error(&r.gain),
    }
}

pub fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

/// Linear-interpolation sample quantile.
pub fn quantile(v: &[f64], p: f64) -> f64 {
    let mut s: Vec<f64> = v.iter().copied().filter(|x| !x.is_nan()).collect();
    if s.is_empty() {
        return f64::NAN;
    }
    s.sort_by(f64::total_cmp);
    let pos = p.clamp(0.0, 1.0) * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Least-squares fit of `log y = intercept + slope · log x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
}

impl PowerFit {
    /// `exp(intercept)`, the fitted scale constant.
    pub fn scale(&self) -> f64 {
        self.intercept.exp()
    }
}

pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 3 || pts.len() != x.len() {
        return Err(LabError::Regression);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(LabError::Regression);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_se = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(PowerFit { slope, slope_se, intercept })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSResult {
    pub statistic: f64,
    pub n: usize,
}

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided KS distance of the raw samples from N(0,1).
pub fn ks_against_standard_normal(samples: &[f64]) -> KSResult {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = normal_cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    KSResult { statistic: d.clamp(0.0, 1.0), n: s.len() }
}

/// KS distance from N(0,1) after standardizing by the sample mean and sd.
pub fn normality_diagnostic(samples: &[f64]) -> Result<KSResult> {
    if samples.len() < MIN_KS_SAMPLES {
        return Err(LabError::TooFewSamples(samples.len()));
    }
    let n = samples.len() as f64;
    let m = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 1e-300) {
        return Err(LabError::ZeroVariance);
    }
    let z: Vec<f64> = samples.iter().map(|x| (x - m) / sd).collect();
    Ok(ks_against_standard_normal(&z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Re,
    Im,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementKs {
    pub row: usize,
    pub col: usize,
    pub part: Part,
    pub statistic: f64,
}

/// Elementwise KS statistics of `√T (Ĝ − I)` over replications: real parts of
/// every entry and imaginary parts of the off-diagonal ones (the aligned
/// diagonal is real up to rounding).
pub fn elementwise_ks(gains: &[CMat], t: usize) -> Result<Vec<ElementKs>> {
    let Some(first) = gains.first() else {
        return Err(LabError::TooFewSamples(0));
    };
    let d = first.rows();
    let root = (t as f64).sqrt();
    let mut out = Vec::new();
    for j in 0..d {
        for k in 0..d {
            let target = if j == k { 1.0 } else { 0.0 };
            let parts: &[Part] = if j == k { &[Part::Re] } else { &[Part::Re, Part::Im] };
            for &part in parts {
                let v: Vec<f64> = gains
                    .iter()
                    .map(|g| {
                        let e = g[(j, k)] - target;
                        root * if part == Part::Re { e.re } else { e.im }
                    })
                    .collect();
                let ks = normality_diagnostic(&v)?;
                out.push(ElementKs { row: j, col: k, part, statistic: ks.statistic });
            }
        }
    }
    Ok(out)
}

pub fn max_ks(stats: &[ElementKs], diagonal_only: bool) -> f64 {
    stats
        .iter()
        .filter(|s| !diagonal_only || s.row == s.col)
        .map(|s| s.statistic)
        .fold(0.0, f64::max)
}

/// Aligned gains `Ĝ` for `reps` replications at one length.
pub fn gain_samples(model: &ModelSpec, tau: usize, t: usize, reps: usize, seed: u64) -> Result<Vec<CMat>> {
    let truth = Truth::new(model, tau)?;
    Ok(run_replications(model, &truth, tau, t, reps, seed)?.into_iter().map(|r| r.gain).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerTRow {
    pub t: usize,
    pub median_error: f64,
    pub iqr: f64,
    pub diag_median: f64,
    pub offdiag_median: f64,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExperimentReport {
    pub error_metric: ErrorMetric,
    pub per_t: Vec<PerTRow>,
    pub fitted_slope: f64,
    pub slope_se: f64,
    /// `−½` in the √T regime, `−γ` under long-range dependence.
    pub theoretical_exponent: f64,
    pub regime: RateRegime,
    pub diag_fit: PowerFit,
    pub offdiag_fit: Option<PowerFit>,
    /// `exp(intercept)` of the metric, diagonal and off-diagonal fits.
    pub scale_error: f64,
    pub scale_diag: f64,
    pub scale_offdiag: Option<f64>,
    /// Elementwise KS statistics at the largest T.
    pub gaussianity: Vec<ElementKs>,
}

pub fn run_rate_experiment(cfg: &RateExperimentConfig) -> Result<RateExperimentReport> {
    cfg.validate()?;
    let truth = Truth::new(&cfg.model, cfg.tau)?;
    let regime = genproc::theoretical_gamma(&cfg.model)?;
    let mut per_t = Vec::with_capacity(cfg.t_grid.len());
    let mut last_gains = Vec::new();
    for &t in &cfg.t_grid {
        let reps = run_replications(&cfg.model, &truth, cfg.tau, t, cfg.replications, cfg.seed)?;
        let errs: Vec<f64> = reps.iter().map(|r| metric_error(cfg.error_metric, r, &truth)).collect();
        let diag: Vec<f64> = reps.iter().map(|r| diag_error(&r.gain)).collect();
        let off: Vec<f64> = reps.iter().map(|r| offdiag_error(&r.gain)).collect();
        per_t.push(PerTRow {
            t,
            median_error: median(&errs),
            iqr: quantile(&errs, 0.75) - quantile(&errs, 0.25),
            diag_median: median(&diag),
            offdiag_median: median(&off),
            failed: cfg.replications - reps.len(),
        });
        last_gains = reps.into_iter().map(|r| r.gain).collect();
    }
    let ts: Vec<f64> = per_t.iter().map(|r| r.t as f64).collect();
    let col = |f: fn(&PerTRow) -> f64| per_t.iter().map(f).collect::<Vec<f64>>();
    let fit = fit_power_law(&ts, &col(|r| r.median_error))?;
    let diag_fit = fit_power_law(&ts, &col(|r| r.diag_median))?;
    let offdiag_fit = if cfg.model.d > 1 { Some(fit_power_law(&ts, &col(|r| r.offdiag_median))?) } else { None };
    let gaussianity = if last_gains.len() >= MIN_KS_SAMPLES {
        elementwise_ks(&last_gains, *cfg.t_grid.last().expect("validated"))?
    } else {
        Vec::new()
    };
    Ok(RateExperimentReport {
        error_metric: cfg.error_metric,
        per_t,
        fitted_slope: fit.slope,
        slope_se: fit.slope_se,
        theoretical_exponent: -regime.gamma,
        regime,
        diag_fit,
        offdiag_fit,
        scale_error: fit.scale(),
        scale_diag: diag_fit.scale(),
        scale_offdiag: offdiag_fit.map(|f| f.scale()),
        gaussianity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalLimit {
    pub applicable: bool,
    /// `(T, ρ(T))` with ρ = median off-diagonal error / median diagonal error.
    pub ratios: Vec<(usize, f64)>,
    pub decreasing: bool,
    pub passes: bool,
}

impl DiagonalLimit {
    pub fn from_report(report: &RateExperimentReport, d: usize) -> Self {
        if report.regime.short_range {
            return Self { applicable: false, ratios: Vec::new(), decreasing: false, passes: false };
        }
        if d == 1 {
            return Self { applicable: true, ratios: Vec::new(), decreasing: true, passes: true };
        }
        // the common T^γ factor cancels in the ratio
        let ratios: Vec<(usize, f64)> =
            report.per_t.iter().map(|r| (r.t, r.offdiag_median / r.diag_median)).collect();
        let decreasing = ratios.windows(2).all(|w| w[1].1 < w[0].1);
        let passes = ratios.last().expect("non-empty grid").1 < 0.5 * ratios[0].1;
        Self { applicable: true, ratios, decreasing, passes }
    }
}

pub fn diagonal_limit_check(cfg: &RateExperimentConfig) -> Result<DiagonalLimit> {
    let regime = genproc::theoretical_gamma(&cfg.model)?;
    if regime.short_range {
        cfg.validate()?;
        return Ok(DiagonalLimit { applicable: false, ratios: Vec::new(), decreasing: false, passes: false });
    }
    let report = run_rate_experiment(cfg)?;
    Ok(DiagonalLimit::from_report(&report, cfg.model.d))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSource {
    #[default]
    Population,
    /// Sample eigenvalues of each replication, for when the truth is unknown.
    Sample,
}

/// Maximum diagonal and off-diagonal residual of the first-order expansion
/// for one replication.
pub fn expansion_residuals(gain: &CMat, s0: &CMat, s_tau: &CMat, lambdas: &[f64]) -> (f64, f64) {
    let d = gain.rows();
    let mut diag: f64 = 0.0;
    let mut off: f64 = 0.0;
    for j in 0..d {
        let lead = 0.5 * (1.0 - s0[(j, j)].re);
        diag = diag.max((gain[(j, j)] - 1.0 - lead).norm());
        for k in 0..d {
            if j != k {
                let lhs = gain[(j, k)] * (lambdas[k] - lambdas[j]);
                let rhs = s0[(j, k)] * lambdas[j] - s_tau[(j, k)];
                off = off.max((lhs - rhs).norm());
            }
        }
    }
    (diag, off)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRow {
    pub t: usize,
    pub diag_median: f64,
    pub offdiag_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub per_t: Vec<ExpansionRow>,
    /// Consecutive-grid ratios of the diagonal medians.
    pub diag_ratios: Vec<f64>,
    pub offdiag_ratios: Vec<f64>,
}

pub fn expansion_residual_check(cfg: &RateExperimentConfig, source: LambdaSource) -> Result<ExpansionReport> {
    cfg.validate()?;
    if cfg.model.mixing.max_abs_diff(&CMat::identity(cfg.model.d)) != 0.0 {
        return Err(LabError::Config("the residual check needs trivial mixing A = I".into()));
    }
    let truth = Truth::new(&cfg.model, cfg.tau)?;
    if source == LambdaSource::Population && truth.lambdas.windows(2).any(|w| w[0] <= w[1]) {
        return Err(LabError::Config("population eigenvalues must be distinct".into()));
    }
    let mut per_t = Vec::new();
    for &t in &cfg.t_grid {
        let reps = run_replications(&cfg.model, &truth, cfg.tau, t, cfg.replications, cfg.seed)?;
        let (diag, off): (Vec<f64>, Vec<f64>) = reps
            .iter()
            .map(|r| {
                let l = match source {
                    LambdaSource::Population => &truth.lambdas,
                    LambdaSource::Sample => &r.sample_lambdas,
                };
                expansion_residuals(&r.gain, &r.s0, &r.s_tau, l)
            })
            .unzip();
        per_t.push(ExpansionRow { t, diag_median: median(&diag), offdiag_median: median(&off) });
    }
    let ratios = |f: fn(&ExpansionRow) -> f64| per_t.windows(2).map(|w| f(&w[1]) / f(&w[0])).collect();
    Ok(ExpansionReport {
        diag_ratios: ratios(|r| r.diag_median),
        offdiag_ratios: ratios(|r| r.offdiag_median),
        per_t,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuRow {
    pub t: usize,
    pub offdiag_median: f64,
    /// Reported only; the diagonal feeds the limit and need not vanish.
    pub diag_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuContribution {
    pub gamma: f64,
    pub applicable: bool,
    pub per_t: Vec<MuRow>,
    pub decreasing: bool,
}

/// Medians of `|T^γ (μ̃ μ̃^H)_jk|` where μ̃ is the latent sample mean. With
/// `known_mean` the mean is taken as known (μ̃ = 0).
pub fn mu_contribution_check(cfg: &RateExperimentConfig, known_mean: bool) -> Result<MuContribution> {
    cfg.validate()?;
    let regime = genproc::theoretical_gamma(&cfg.model)?;
    let truth = Truth::new(&cfg.model, cfg.tau)?;
    let d = cfg.model.d;
    let mut per_t = Vec::new();
    for &t in &cfg.t_grid {
        let reps = run_replications(&cfg.model, &truth, cfg.tau, t, cfg.replications, cfg.seed)?;
        let w = (t as f64).powf(regime.gamma);
        let mut off = Vec::new();
        let mut diag = Vec::new();
        for r in &reps {
            let mu: Vec<C64> = if known_mean { vec![C64::new(0.0, 0.0); d] } else { r.latent_mean.clone() };
            let mut o: f64 = 0.0;
            let mut g: f64 = 0.0;
            for j in 0..d {
                for k in 0..d {
                    let v = w * (mu[j] * mu[k].conj()).norm();
                    if j == k {
                        g = g.max(v);
                    } else {
                        o = o.max(v);
                    }
                }
            }
            off.push(o);
            diag.push(g);
        }
        per_t.push(MuRow { t, offdiag_median: median(&off), diag_median: median(&diag) });
    }
    let decreasing = per_t.last().expect("grid").offdiag_median < per_t[0].offdiag_median;
    Ok(MuContribution { gamma: regime.gamma, applicable: !regime.short_range, per_t, decreasing })
}
