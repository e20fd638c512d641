//! Latent process generation by Gaussian subordination.
//!
//! Each real and imaginary part of a latent component is `f(η_t)` for an
//! independent stationary unit-variance Gaussian driver `η`. The observed
//! series is `x_t = A z_t + μ_x`.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{EstimatorError, TimeSeries};
use crate::fft::{self, Spectrum};
use crate::linalg::{self, CMat, LinalgError, C64};

/// Largest Hermite index evaluated by recurrence.
pub const MAX_HERMITE: usize = 60;
/// Coefficients at or below this modulus count as zero for rank detection.
pub const RANK_THRESHOLD: f64 = 1e-9;
/// Clamped embedding mass above this level is reported.
pub const CLAMP_REPORT: f64 = 1e-8;
const QUAD_NODES: usize = 128;
const MIN_LEN: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("Hermite index {0} exceeds the supported maximum {MAX_HERMITE}")]
    HermiteIndex(usize),
    #[error("Hurst index {0} outside [0.5, 1)")]
    Hurst(f64),
    #[error("AR(1) coefficient {0} must satisfy |phi| < 1")]
    Ar1(f64),
    #[error("autocovariance must start with r(0) = 1 (got {0})")]
    NotUnitVariance(f64),
    #[error("autocovariance has {got} lags, need at least {need}")]
    ShortAutocov { got: usize, need: usize },
    #[error("Hermite rank undeterminable: all coefficients up to {MAX_HERMITE} vanish")]
    RankUndeterminable,
    #[error("invalid transform: {0}")]
    Transform(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("series length {0} below the minimum {MIN_LEN}")]
    TooShort(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

pub type Result<T> = std::result::Result<T, GenError>;

/// Probabilists' Hermite polynomial `He_k(x)`.
pub fn hermite_poly(k: usize, x: f64) -> Result<f64> {
    if k > MAX_HERMITE {
        return Err(GenError::HermiteIndex(k));
    }
    Ok(hermite_unchecked(k, x))
}

fn hermite_unchecked(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 0..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `He_0(x), …, He_K(x)` in one pass.
fn hermite_all(kmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(1.0);
    if kmax >= 1 {
        out.push(x);
    }
    for j in 1..kmax {
        out.push(x * out[j] - j as f64 * out[j - 1]);
    }
    out
}

fn check_hurst(h: f64) -> Result<()> {
    if (0.5..1.0).contains(&h) {
        Ok(())
    } else {
        Err(GenError::Hurst(h))
    }
}

/// Autocovariance of unit-variance fractional Gaussian noise at lag `k`.
pub fn fgn_autocov(h: f64, k: usize) -> Result<f64> {
    check_hurst(h)?;
    Ok(fgn_unchecked(h, k))
}

fn fgn_unchecked(h: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let k = k as f64;
    let e = 2.0 * h;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).powf(e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDraw {
    pub values: Vec<f64>,
    /// Σ|negative eigenvalues| / M of the circulant embedding.
    pub clamped_mass: f64,
}

impl GaussianDraw {
    pub fn clamp_reportable(&self) -> bool {
        self.clamped_mass > CLAMP_REPORT
    }
}

/// Circulant-embedding draw of a stationary Gaussian sequence with the
/// given autocovariance `r(0), r(1), …`.
///
/// The embedding has size `M`, the smallest power of two ≥ `2(n−1)`, so
/// `autocov` must supply lags `0..=M/2`.
pub fn sample_stationary_gaussian<R: Rng + ?Sized>(
    autocov: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<GaussianDraw> {
    let r0 = autocov.first().copied().unwrap_or(f64::NAN);
    if (r0 - 1.0).abs() > 1e-12 {
        return Err(GenError::NotUnitVariance(r0));
    }
    if n <= 1 {
        let values = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        return Ok(GaussianDraw { values, clamped_mass: 0.0 });
    }
    let m = embedding_size(n);
    let need = m / 2 + 1;
    if autocov.len() < need {
        return Err(GenError::ShortAutocov { got: autocov.len(), need });
    }
    let row: Vec<C64> = (0..m)
        .map(|j| C64::new(autocov[if j <= m / 2 { j } else { m - j }], 0.0))
        .collect();
    let eig = fft::fft(&row).expect("non-empty embedding");
    let mut clamped = 0.0;
    let mut spectrum = Vec::with_capacity(m);
    for lam in eig.bins() {
        let mut l = lam.re;
        if l < 0.0 {
            clamped += -l;
            l = 0.0;
        }
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        spectrum.push(C64::new(a, b) * (l * m as f64).sqrt());
    }
    // E[Y_j conj(Y_l)] = r(j−l) and the pseudo-covariance vanishes, so the
    // real part carries exactly the target covariance.
    let out = fft::ifft(&Spectrum::new(spectrum).expect("non-empty")).expect("non-empty");
    let values = out.iter().take(n).map(|z| z.re).collect();
    Ok(GaussianDraw { values, clamped_mass: clamped / m as f64 })
}

fn embedding_size(n: usize) -> usize {
    (2 * (n - 1)).next_power_of_two().max(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Driver {
    Iid,
    Ar1 { phi: f64 },
    Fgn { hurst: f64 },
}

impl Driver {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Driver::Iid => Ok(()),
            Driver::Ar1 { phi } if phi.is_finite() && phi.abs() < 1.0 => Ok(()),
            Driver::Ar1 { phi } => Err(GenError::Ar1(phi)),
            Driver::Fgn { hurst } => check_hurst(hurst),
        }
    }

    pub fn autocov(&self, k: usize) -> f64 {
        match *self {
            Driver::Iid => f64::from(k == 0),
            Driver::Ar1 { phi } => phi.powi(k as i32),
            Driver::Fgn { hurst } => fgn_unchecked(hurst, k),
        }
    }

    pub fn is_long_range(&self) -> bool {
        matches!(*self, Driver::Fgn { hurst } if hurst > 0.5)
    }

    /// Returns the path and the clamped embedding mass (zero for exact recursions).
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<(Vec<f64>, f64)> {
        self.validate()?;
        match *self {
            Driver::Iid => Ok(((0..n).map(|_| rng.sample(StandardNormal)).collect(), 0.0)),
            Driver::Ar1 { phi } => {
                let innov = (1.0 - phi * phi).sqrt();
                let mut out = Vec::with_capacity(n);
                let mut prev: f64 = rng.sample(StandardNormal);
                for t in 0..n {
                    if t > 0 {
                        let e: f64 = rng.sample(StandardNormal);
                        prev = phi * prev + innov * e;
                    }
                    out.push(prev);
                }
                Ok((out, 0.0))
            }
            Driver::Fgn { hurst } => {
                let lags = if n <= 1 { 1 } else { embedding_size(n) / 2 + 1 };
                let r: Vec<f64> = (0..lags).map(|k| fgn_unchecked(hurst, k)).collect();
                let draw = sample_stationary_gaussian(&r, n, rng)?;
                Ok((draw.values, draw.clamped_mass))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Hermite { k: usize },
    /// `x² − 1`
    SquareCentered,
    /// `Σ a_k He_k(x)`
    Coefficients { coeffs: Vec<f64> },
}

impl Transform {
    pub fn validate(&self) -> Result<()> {
        match self {
            Transform::Hermite { k } if *k > MAX_HERMITE => Err(GenError::HermiteIndex(*k)),
            Transform::Coefficients { coeffs } => {
                if coeffs.is_empty() || coeffs.len() > MAX_HERMITE + 1 {
                    Err(GenError::Transform(format!(
                        "coefficient list needs 1..={} entries, got {}",
                        MAX_HERMITE + 1,
                        coeffs.len()
                    )))
                } else if coeffs.iter().any(|c| !c.is_finite()) {
                    Err(GenError::Transform("non-finite coefficient".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Hermite { k } => hermite_unchecked(*k, x),
            Transform::SquareCentered => x * x - 1.0,
            Transform::Coefficients { coeffs } => {
                hermite_all(coeffs.len() - 1, x).iter().zip(coeffs).map(|(h, a)| h * a).sum()
            }
        }
    }

    /// Hermite coefficients `a_0..a_60`; exact for the tagged forms.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut a = vec![0.0; MAX_HERMITE + 1];
        match self {
            Transform::Identity => a[1] = 1.0,
            Transform::Hermite { k } => a[*k] = 1.0,
            Transform::SquareCentered => a[2] = 1.0,
            Transform::Coefficients { coeffs } => a[..coeffs.len()].copy_from_slice(coeffs),
        }
        a
    }

    /// `(q1, q2)` for this transform.
    pub fn hermite_rank(&self) -> Result<(u32, u32)> {
        self.validate()?;
        hermite_rank_fn(|x| self.eval(x))
    }

    /// Population mean `E f(η)` and variance `Σ_{k≥1} a_k² k!`.
    pub fn moments(&self) -> (f64, f64) {
        let a = self.coefficients();
        let mut var = 0.0;
        let mut fact = 1.0;
        for (k, ak) in a.iter().enumerate().skip(1) {
            fact *= k as f64;
            var += ak * ak * fact;
        }
        (a[0], var)
    }

    /// Autocovariance of `f(η)` given the driver correlation `r`.
    pub fn subordinated_autocov(&self, r: f64) -> f64 {
        let a = self.coefficients();
        let mut acc = 0.0;
        let mut fact = 1.0;
        let mut rk = 1.0;
        for (k, ak) in a.iter().enumerate().skip(1) {
            fact *= k as f64;
            rk *= r;
            acc += ak * ak * fact * rk;
        }
        acc
    }
}

/// Probabilists' Gauss–Hermite rule: `Σ w_i g(x_i) ≈ E g(X)`, `X ~ N(0,1)`.
pub fn gauss_hermite() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = gauher(QUAD_NODES);
        let s2 = std::f64::consts::SQRT_2;
        let sqrt_pi = std::f64::consts::PI.sqrt();
        (x.iter().map(|v| v * s2).collect(), w.iter().map(|v| v / sqrt_pi).collect())
    })
}

/// Physicists' nodes and weights (weight `e^{−x²}`) by Newton iteration on
/// the orthonormal recurrence.
fn gauher(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (PIM4, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Hermite coefficients `a_k = E[f(X) He_k(X)] / k!` for `k ≤ kmax`, by quadrature.
pub fn hermite_coefficients(f: impl Fn(f64) -> f64, kmax: usize) -> Result<Vec<f64>> {
    if kmax > MAX_HERMITE {
        return Err(GenError::HermiteIndex(kmax));
    }
    let (nodes, weights) = gauss_hermite();
    let mut a = vec![0.0; kmax + 1];
    for (&x, &w) in nodes.iter().zip(weights) {
        let fx = f(x);
        for (ak, hk) in a.iter_mut().zip(hermite_all(kmax, x)) {
            *ak += w * fx * hk;
        }
    }
    let mut fact = 1.0;
    for (k, ak) in a.iter_mut().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        *ak /= fact;
    }
    Ok(a)
}

fn first_nonzero(a: &[f64]) -> Option<u32> {
    a.iter().enumerate().skip(1).find(|(_, v)| v.abs() > RANK_THRESHOLD).map(|(k, _)| k as u32)
}

/// `(q1, q2)`: Hermite ranks of `f` and of `(f − E f)²`.
pub fn hermite_rank_fn(f: impl Fn(f64) -> f64) -> Result<(u32, u32)> {
    let a = hermite_coefficients(&f, MAX_HERMITE)?;
    let q1 = first_nonzero(&a).ok_or(GenError::RankUndeterminable)?;
    let mean = a[0];
    let b = hermite_coefficients(|x| (f(x) - mean).powi(2), MAX_HERMITE)?;
    let q2 = first_nonzero(&b).ok_or(GenError::RankUndeterminable)?;
    Ok((q1, q2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub driver: Driver,
    pub transform: Transform,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_ranks: Option<(u32, u32)>,
}

/// Alias kept for the per-part specification of a latent component.
pub type LatentComponentSpec = PartSpec;

impl PartSpec {
    pub fn new(driver: Driver, transform: Transform) -> Self {
        Self { driver, transform, declared_ranks: None }
    }

    pub fn validate(&self) -> Result<()> {
        self.driver.validate()?;
        self.transform.validate()
    }

    pub fn ranks(&self) -> Result<(u32, u32)> {
        match self.declared_ranks {
            Some(r) => Ok(r),
            None => self.transform.hermite_rank(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Subtract the population mean `a_0` of each transform.
    #[default]
    Population,
    /// Subtract the sample mean of each generated part.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub d: usize,
    /// `2d` part specs: real parts of components `1..d`, then imaginary parts.
    pub components: Vec<PartSpec>,
    pub mixing: CMat,
    pub location: Vec<C64>,
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub centering: Centering,
}

fn default_true() -> bool {
    true
}

impl ModelSpec {
    /// Trivial mixing, zero location, normalized.
    pub fn unmixed(real: Vec<PartSpec>, imag: Vec<PartSpec>) -> Result<Self> {
        let d = real.len();
        let model = Self {
            d,
            components: real.into_iter().chain(imag).collect(),
            mixing: CMat::identity(d),
            location: vec![C64::new(0.0, 0.0); d],
            normalize: true,
            centering: Centering::Population,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(GenError::Model("dimension must be positive".into()));
        }
        if self.components.len() != 2 * self.d {
            return Err(GenError::Model(format!(
                "expected {} part specs, got {}",
                2 * self.d,
                self.components.len()
            )));
        }
        if self.mixing.rows() != self.d || self.mixing.cols() != self.d {
            return Err(GenError::Model(format!(
                "mixing is {}x{}, expected {d}x{d}",
                self.mixing.rows(),
                self.mixing.cols(),
                d = self.d
            )));
        }
        if self.location.len() != self.d {
            return Err(GenError::Model(format!(
                "location has {} entries, expected {}",
                self.location.len(),
                self.d
            )));
        }
        if !self.mixing.is_finite() || self.location.iter().any(|z| !z.is_finite()) {
            return Err(GenError::Model("non-finite mixing or location".into()));
        }
        for p in &self.components {
            p.validate()?;
            if self.normalize && p.transform.moments().1 <= 0.0 {
                return Err(GenError::Transform("constant transform cannot be normalized".into()));
            }
        }
        linalg::inverse(&self.mixing)?;
        Ok(())
    }

    pub fn real_part(&self, k: usize) -> &PartSpec {
        &self.components[k]
    }

    pub fn imag_part(&self, k: usize) -> &PartSpec {
        &self.components[self.d + k]
    }

    fn part_scale(&self, p: &PartSpec) -> f64 {
        if self.normalize {
            1.0 / (2.0 * p.transform.moments().1).sqrt()
        } else {
            1.0
        }
    }

    /// Population `[S_τ(z)]_kk` per latent component (unsorted).
    pub fn population_autocov(&self, tau: usize) -> Vec<f64> {
        (0..self.d)
            .map(|k| {
                [self.real_part(k), self.imag_part(k)]
                    .iter()
                    .map(|p| {
                        let s = self.part_scale(p);
                        s * s * p.transform.subordinated_autocov(p.driver.autocov(tau))
                    })
                    .sum()
            })
            .collect()
    }

    /// Population eigenvalues `λ_k = [S_τ]_kk / [S_0]_kk` per latent component (unsorted).
    pub fn population_lambdas(&self, tau: usize) -> Vec<f64> {
        let s0 = self.population_autocov(0);
        self.population_autocov(tau).iter().zip(&s0).map(|(a, b)| a / b).collect()
    }

    /// Population unmixing matrix `P diag(S_0)^{-1/2} A^{-1}` with rows ordered
    /// by decreasing λ, together with the order (`order[j]` = latent index).
    pub fn true_unmixing(&self, tau: usize) -> Result<(CMat, Vec<usize>)> {
        let s0 = self.population_autocov(0);
        let lambdas = self.population_lambdas(tau);
        let mut order: Vec<usize> = (0..self.d).collect();
        order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]).then(a.cmp(&b)));
        let ainv = linalg::inverse(&self.mixing)?;
        let gamma = CMat::from_fn(self.d, self.d, |j, c| {
            let k = order[j];
            ainv[(k, c)] / s0[k].sqrt()
        });
        Ok((gamma, order))
    }

    pub fn long_range_parts(&self) -> impl Iterator<Item = &PartSpec> {
        self.components.iter().filter(|p| p.driver.is_long_range())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub x: TimeSeries,
    pub z: TimeSeries,
    /// Largest clamped embedding mass over all parts.
    pub clamped_mass: f64,
}

/// SplitMix64 finalizer, used to derive independent per-task seeds.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p;
        h = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Draws `(x, z)` of length `t`. Part `k` (real parts first) uses stream `k`
/// of a ChaCha8 generator keyed by `seed`.
pub fn generate(model: &ModelSpec, t: usize, seed: u64) -> Result<Generated> {
    model.validate()?;
    if t < MIN_LEN {
        return Err(GenError::TooShort(t));
    }
    let d = model.d;
    let mut z_cols = vec![vec![C64::new(0.0, 0.0); t]; d];
    let mut clamped: f64 = 0.0;
    for (idx, part) in model.components.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(idx as u64);
        let (eta, mass) = part.driver.sample(t, &mut rng)?;
        clamped = clamped.max(mass);
        let mut vals: Vec<f64> = eta.iter().map(|&e| part.transform.eval(e)).collect();
        let center = match model.centering {
            Centering::Population => part.transform.moments().0,
            Centering::Empirical => vals.iter().sum::<f64>() / t as f64,
        };
        let scale = model.part_scale(part);
        vals.iter_mut().for_each(|v| *v = (*v - center) * scale);
        let (k, imag) = if idx < d { (idx, false) } else { (idx - d, true) };
        for (zc, v) in z_cols[k].iter_mut().zip(vals) {
            if imag {
                zc.im = v;
            } else {
                zc.re = v;
            }
        }
    }
    let z = TimeSeries::from_columns(&z_cols)?;
    let x = z.affine(&model.mixing, &model.location)?;
    Ok(Generated { x, z, clamped_mass: clamped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRegime {
    /// Rate exponent: 0.5 in the √T regime, otherwise γ.
    pub gamma: f64,
    pub short_range: bool,
    /// Some `q₂(2H−2)` equals −1 (√(T/log T) regime, not covered by the slope checks).
    pub boundary: bool,
    /// `M > max{q₁ₖ(2Hₖ−2) + q₁ⱼ(2Hⱼ−2), −1}` with `M = −2γ`.
    pub maximum_ok: bool,
    /// `M ≥ q₁ₖ(4Hₖ−4)` for every long-range part.
    pub maximum2_ok: bool,
}

/// Rate exponent `γ = −½ max_{i∈I} q₂ᵢ(2Hᵢ−2)` over long-range parts `I`.
pub fn theoretical_gamma(model: &ModelSpec) -> Result<RateRegime> {
    let mut terms = Vec::new();
    for p in model.long_range_parts() {
        let Driver::Fgn { hurst } = p.driver else { unreachable!() };
        let (q1, q2) = p.ranks()?;
        terms.push((q1 as f64 * (2.0 * hurst - 2.0), q2 as f64 * (2.0 * hurst - 2.0)));
    }
    if terms.is_empty() {
        return Ok(RateRegime {
            gamma: 0.5,
            short_range: true,
            boundary: false,
            maximum_ok: true,
            maximum2_ok: true,
        });
    }
    let m = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let boundary = terms.iter().any(|t| (t.1 + 1.0).abs() < 1e-12);
    let mut bound = -1.0f64;
    for (i, a) in terms.iter().enumerate() {
        for b in terms.iter().skip(i + 1) {
            bound = bound.max(a.0 + b.0);
        }
    }
    let maximum_ok = m > bound;
    let maximum2_ok = terms.iter().all(|t| m >= 2.0 * t.0 - 1e-12);
    Ok(RateRegime { gamma: -0.5 * m, short_range: false, boundary, maximum_ok, maximum2_ok })
}
