//! Location and (auto)covariance estimators for complex multivariate series.

use thiserror::Error;

use crate::linalg::{CMat, LinalgError, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("time series needs at least 2 observations and 1 dimension (got T={t}, d={d})")]
    TooShort { t: usize, d: usize },
    #[error("time series has {got} values, expected T*d = {expected}")]
    BadShape { got: usize, expected: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("lag {tau} out of range for T = {t} (need tau <= T - 2)")]
    LagOutOfRange { tau: usize, t: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

/// A T×d complex observation matrix; row `t` is the observation at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    len: usize,
    dim: usize,
    values: Vec<C64>,
}

impl TimeSeries {
    pub fn new(len: usize, dim: usize, values: Vec<C64>) -> Result<Self> {
        if len < 2 || dim < 1 {
            return Err(EstimatorError::TooShort { t: len, d: dim });
        }
        if values.len() != len * dim {
            return Err(EstimatorError::BadShape { got: values.len(), expected: len * dim });
        }
        if let Some(i) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(EstimatorError::NonFinite { row: i / dim, col: i % dim });
        }
        Ok(Self { len, dim, values })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(EstimatorError::BadShape {
                got: rows.iter().map(Vec::len).sum(),
                expected: rows.len() * dim,
            });
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    /// Builds a series from per-component columns.
    pub fn from_columns(cols: &[Vec<C64>]) -> Result<Self> {
        let dim = cols.len();
        let len = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != len) {
            return Err(EstimatorError::BadShape {
                got: cols.iter().map(Vec::len).sum(),
                expected: len * dim,
            });
        }
        let mut values = Vec::with_capacity(len * dim);
        for t in 0..len {
            values.extend(cols.iter().map(|c| c[t]));
        }
        Self::new(len, dim, values)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[C64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[C64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn column(&self, k: usize) -> Vec<C64> {
        self.rows().map(|r| r[k]).collect()
    }

    /// Row-wise affine map `x_t ↦ B x_t + b`, i.e. `X Bᵀ + 1 bᵀ`.
    pub fn affine(&self, b_mat: &CMat, shift: &[C64]) -> Result<TimeSeries> {
        if b_mat.cols() != self.dim || shift.len() != b_mat.rows() {
            return Err(LinalgError::DimensionMismatch(format!(
                "affine map {}x{} with shift {} on dimension {}",
                b_mat.rows(),
                b_mat.cols(),
                shift.len(),
                self.dim
            ))
            .into());
        }
        let mut values = Vec::with_capacity(self.len * b_mat.rows());
        for row in self.rows() {
            let y = b_mat.mul_vec(row)?;
            values.extend(y.iter().zip(shift).map(|(a, s)| a + s));
        }
        TimeSeries::new(self.len, b_mat.rows(), values)
    }
}

pub fn sample_mean(x: &TimeSeries) -> Vec<C64> {
    let mut mu = vec![C64::new(0.0, 0.0); x.dim];
    for row in x.rows() {
        for (m, v) in mu.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = x.len as f64;
    mu.iter_mut().for_each(|m| *m /= n);
    mu
}

fn check_lag(x: &TimeSeries, tau: usize) -> Result<()> {
    if tau + 2 > x.len {
        return Err(EstimatorError::LagOutOfRange { tau, t: x.len });
    }
    Ok(())
}

/// Lag-τ cross-product matrix centered at the full-sample mean:
/// `1/(T-τ) Σ_t (x_t - μ̂)(x_{t+τ} - μ̂)^H`, with divisor `T-1` at lag zero.
pub fn autocov_unsym(x: &TimeSeries, tau: usize) -> Result<CMat> {
    check_lag(x, tau)?;
    let d = x.dim;
    let mu = sample_mean(x);
    let centered: Vec<C64> =
        x.values.iter().enumerate().map(|(i, v)| v - mu[i % d]).collect();
    let mut s = CMat::zeros(d, d);
    for t in 0..x.len - tau {
        let a = &centered[t * d..(t + 1) * d];
        let b = &centered[(t + tau) * d..(t + tau + 1) * d];
        for j in 0..d {
            let aj = a[j];
            for k in 0..d {
                s[(j, k)] += aj * b[k].conj();
            }
        }
    }
    let div = if tau == 0 { x.len - 1 } else { x.len - tau } as f64;
    Ok(s.scale(C64::new(1.0 / div, 0.0)))
}

/// ½(S̃_τ + S̃_τ^H); always Hermitian.
pub fn autocov_sym(x: &TimeSeries, tau: usize) -> Result<CMat> {
    Ok(autocov_unsym(x, tau)?.hermitian_part())
}

/// Mean, covariance and relation matrix of a complex sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mu: Vec<C64>,
    pub sigma: CMat,
    pub relation: CMat,
}

/// Sample mean, Hermitian covariance `E[(y-μ)(y-μ)^H]` and relation matrix
/// `E[(y-μ)(y-μ)ᵀ]`, both with divisor T-1.
pub fn gaussian_params(samples: &TimeSeries) -> GaussianParams {
    let d = samples.dim;
    let mu = sample_mean(samples);
    let mut sigma = CMat::zeros(d, d);
    let mut relation = CMat::zeros(d, d);
    for row in samples.rows() {
        let c: Vec<C64> = row.iter().zip(&mu).map(|(v, m)| v - m).collect();
        for j in 0..d {
            for k in 0..d {
                sigma[(j, k)] += c[j] * c[k].conj();
                relation[(j, k)] += c[j] * c[k];
            }
        }
    }
    let s = C64::new(1.0 / (samples.len - 1) as f64, 0.0);
    GaussianParams { mu, sigma: sigma.scale(s), relation: relation.scale(s) }
}

/// Complex covariance and relation matrix of `z = x + iy` from the real
/// blocks `Σx`, `Σy` and the cross-covariance `Σxy`:
///
/// `Σz = Σx + Σy + i(Σxyᵀ - Σxy)`, `Pz = Σx - Σy + i(Σxyᵀ + Σxy)`.
pub fn realblock_to_complex(
    sigma_x: &CMat,
    sigma_y: &CMat,
    sigma_xy: &CMat,
) -> Result<(CMat, CMat)> {
    let d = sigma_x.rows();
    for (name, m) in [("sigma_x", sigma_x), ("sigma_y", sigma_y), ("sigma_xy", sigma_xy)] {
        if m.rows() != d || m.cols() != d {
            return Err(LinalgError::DimensionMismatch(format!(
                "{name} is {}x{}, expected {d}x{d}",
                m.rows(),
                m.cols()
            ))
            .into());
        }
    }
    let i = C64::new(0.0, 1.0);
    let xy_t = sigma_xy.transpose();
    let sigma = sigma_x.add(sigma_y)?.add(&xy_t.sub(sigma_xy)?.scale(i))?;
    let relation = sigma_x.sub(sigma_y)?.add(&xy_t.add(sigma_xy)?.scale(i))?;
    Ok((sigma, relation))
}
