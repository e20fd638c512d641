//! Finite-sample unmixing by simultaneous diagonalization of the covariance
//! matrix and one symmetrized autocovariance matrix.
//!
//! The estimate satisfies `Γ̂ Ŝ₀ Γ̂^H = I` and `Γ̂ Ŝ_τ Γ̂^H = diag(λ̂)` with
//! `λ̂` non-increasing. It is unique only up to a diagonal phase-shift
//! matrix `J`; the canonical representative returned here has a real,
//! non-negative diagonal.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::estimators::{self, EstimatorError, TimeSeries};
use crate::linalg::{self, CMat, LinalgError, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnmixError {
    #[error("lag 0 carries no separation information; use tau >= 1")]
    ZeroLag,
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("covariance matrix is degenerate: {0}")]
    DegenerateCovariance(LinalgError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("diagonal entry {index} has modulus {modulus:e}; its phase is undefined")]
    ZeroDiagonal { index: usize, modulus: f64 },
    #[error("row {index} is orthogonal to the reference row; phase alignment undefined")]
    OrthogonalRows { index: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, UnmixError>;

/// Components whose eigenvalue gap falls below this fraction of the
/// eigenvalue spread are considered unreliable.
pub const RELIABLE_GAP_FRACTION: f64 = 1e-3;

const PHASE_EPS: f64 = 1e-14;

/// Diagonal unitary `J = diag(e^{iθ_1}, …, e^{iθ_d})` stored as phases in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShift {
    pub phases: Vec<f64>,
}

impl PhaseShift {
    pub fn identity(d: usize) -> Self {
        Self { phases: vec![0.0; d] }
    }

    pub fn from_phases(phases: impl IntoIterator<Item = f64>) -> Self {
        Self { phases: phases.into_iter().map(|p| p.rem_euclid(TAU)).collect() }
    }

    pub fn factors(&self) -> Vec<C64> {
        self.phases.iter().map(|&t| C64::from_polar(1.0, t)).collect()
    }

    pub fn to_matrix(&self) -> CMat {
        CMat::from_diag(&self.factors())
    }

    /// `J M`: row `j` of `m` multiplied by `e^{iθ_j}`.
    pub fn apply(&self, m: &CMat) -> CMat {
        let f = self.factors();
        CMat::from_fn(m.rows(), m.cols(), |r, c| f[r] * m[(r, c)])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnmixingResult {
    /// Γ̂, phase-standardized.
    pub gamma: CMat,
    /// Diagonal of Λ̂_τ, non-increasing.
    pub lambdas: Vec<f64>,
    /// Sample mean μ̂ used for centering.
    pub mu: Vec<C64>,
    pub tau: usize,
    /// Smallest gap between consecutive λ̂ (infinite when d = 1).
    pub eigen_gap: f64,
    /// Phase shift applied to the raw `V̂^H Σ̂₀` to standardize it.
    pub phase: PhaseShift,
}

impl UnmixingResult {
    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    /// False when two eigenvalues are too close for their components to be
    /// told apart (gap below `RELIABLE_GAP_FRACTION` × spread).
    pub fn is_reliable(&self) -> bool {
        if self.lambdas.len() < 2 {
            return true;
        }
        let spread = self.lambdas[0] - self.lambdas[self.lambdas.len() - 1];
        self.eigen_gap >= RELIABLE_GAP_FRACTION * spread && spread > 0.0
    }
}

/// Smallest consecutive difference of a non-increasing sequence.
fn min_gap(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[0] - w[1]).abs()).fold(f64::INFINITY, f64::min)
}

/// Unmixing estimate for lag `tau`: `Γ̂ = V̂^H Ŝ₀^{-1/2}` where `V̂`
/// diagonalizes the whitened lag-τ autocovariance.
pub fn unmix(x: &TimeSeries, tau: usize) -> Result<UnmixingResult> {
    if tau == 0 {
        return Err(UnmixError::ZeroLag);
    }
    let s_tau = estimators::autocov_sym(x, tau)?;
    let s0 = estimators::autocov_sym(x, 0)?;
    let whitener = linalg::herm_inv_sqrt(&s0).map_err(UnmixError::DegenerateCovariance)?;
    let whitened = whitener.matmul(&s_tau)?.matmul(&whitener)?.hermitian_part();
    let eig = linalg::hermitian_eig(&whitened)?;
    let raw = eig.vectors.conj_transpose().matmul(&whitener)?;
    let (gamma, phase) = standardize_phase(&raw)?;
    let eigen_gap = min_gap(&eig.values);
    Ok(UnmixingResult {
        gamma,
        lambdas: eig.values,
        mu: estimators::sample_mean(x),
        tau,
        eigen_gap,
        phase,
    })
}

/// Rows `Γ̂ (x_t - μ̂)`.
pub fn apply_unmixing(result: &UnmixingResult, x: &TimeSeries) -> Result<TimeSeries> {
    let d = result.gamma.rows();
    if x.dim() != result.gamma.cols() {
        return Err(UnmixError::DimensionMismatch(format!(
            "unmixing matrix has {} columns, series has dimension {}",
            result.gamma.cols(),
            x.dim()
        )));
    }
    let shift: Vec<C64> = result.gamma.mul_vec(&result.mu)?.into_iter().map(|v| -v).collect();
    let out = x.affine(&result.gamma, &shift)?;
    debug_assert_eq!(out.dim(), d);
    Ok(out)
}

/// Rotates each row so its diagonal entry lands on the non-negative real axis.
pub fn standardize_phase(gamma: &CMat) -> Result<(CMat, PhaseShift)> {
    if !gamma.is_square() {
        return Err(UnmixError::DimensionMismatch(format!(
            "phase standardization needs a square matrix, got {}x{}",
            gamma.rows(),
            gamma.cols()
        )));
    }
    let n = gamma.rows();
    let mut phases = Vec::with_capacity(n);
    for j in 0..n {
        let g = gamma[(j, j)];
        let modulus = g.norm();
        if modulus <= PHASE_EPS {
            return Err(UnmixError::ZeroDiagonal { index: j, modulus });
        }
        phases.push(-g.arg());
    }
    let shift = PhaseShift::from_phases(phases);
    let mut out = shift.apply(gamma);
    for j in 0..n {
        out[(j, j)] = C64::new(gamma[(j, j)].norm(), 0.0);
    }
    Ok((out, shift))
}

/// The member `J Γ̂` of Γ̂'s phase class closest to `gamma_ref` in Frobenius norm.
pub fn align_phase_to(gamma_hat: &CMat, gamma_ref: &CMat) -> Result<CMat> {
    Ok(alignment_shift(gamma_hat, gamma_ref)?.apply(gamma_hat))
}

/// Phase shift used by [`align_phase_to`].
pub fn alignment_shift(gamma_hat: &CMat, gamma_ref: &CMat) -> Result<PhaseShift> {
    if (gamma_hat.rows(), gamma_hat.cols()) != (gamma_ref.rows(), gamma_ref.cols()) {
        return Err(UnmixError::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            gamma_hat.rows(),
            gamma_hat.cols(),
            gamma_ref.rows(),
            gamma_ref.cols()
        )));
    }
    let mut phases = Vec::with_capacity(gamma_hat.rows());
    for j in 0..gamma_hat.rows() {
        let u: C64 =
            gamma_hat.row(j).iter().zip(gamma_ref.row(j)).map(|(h, r)| h * r.conj()).sum();
        if u.norm() <= PHASE_EPS {
            return Err(UnmixError::OrthogonalRows { index: j });
        }
        phases.push(-u.arg());
    }
    Ok(PhaseShift::from_phases(phases))
}

/// One row of a lag sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct LagSummary {
    pub tau: usize,
    pub lambdas: Vec<f64>,
    pub eigen_gap: f64,
}

/// Unmixes at every lag and ranks the lags by eigenvalue separation (best first).
pub fn lag_sweep(x: &TimeSeries, taus: &[usize]) -> Result<Vec<LagSummary>> {
    let mut table = taus
        .iter()
        .map(|&tau| {
            unmix(x, tau).map(|r| LagSummary { tau, lambdas: r.lambdas, eigen_gap: r.eigen_gap })
        })
        .collect::<Result<Vec<_>>>()?;
    table.sort_by(|a, b| b.eigen_gap.partial_cmp(&a.eigen_gap).expect("finite gaps"));
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::autocov_sym;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn example() -> TimeSeries {
        TimeSeries::from_rows(&[vec![c(1.0, 0.0)], vec![c(0.0, 1.0)], vec![c(-1.0, 0.0)]]).unwrap()
    }

    fn ar1_series(phis: &[f64], t: usize, seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<C64>> = phis
            .iter()
            .map(|&phi| {
                let innov = (1.0 - phi * phi).sqrt();
                let mut re: f64 = rng.sample(StandardNormal);
                let mut im: f64 = rng.sample(StandardNormal);
                (0..t)
                    .map(|_| {
                        let z = c(re, im) / 2f64.sqrt();
                        re = phi * re + innov * rng.sample::<f64, _>(StandardNormal);
                        im = phi * im + innov * rng.sample::<f64, _>(StandardNormal);
                        z
                    })
                    .collect()
            })
            .collect();
        TimeSeries::from_columns(&cols).unwrap()
    }

    #[test]
    fn one_dimensional_hand_example() {
        let r = unmix(&example(), 1).unwrap();
        assert!((r.gamma[(0, 0)] - c(3f64.sqrt() / 2.0, 0.0)).norm() < 1e-15);
        assert!((r.lambdas[0] + 1.0 / 6.0).abs() < 1e-15);
        assert!(r.eigen_gap.is_infinite());
        assert!(r.is_reliable());
    }

    #[test]
    fn zero_lag_rejected() {
        assert_eq!(unmix(&example(), 0).unwrap_err(), UnmixError::ZeroLag);
        assert!(matches!(unmix(&example(), 2), Err(UnmixError::Estimator(_))));
    }

    #[test]
    fn degenerate_covariance_rejected() {
        let x = TimeSeries::from_rows(&[
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(3.0, 0.0), c(6.0, 0.0)],
        ])
        .unwrap();
        assert!(matches!(unmix(&x, 1), Err(UnmixError::DegenerateCovariance(_))));
    }

    #[test]
    fn defining_equations_hold() {
        let z = ar1_series(&[0.8, 0.3, -0.4], 2000, 1);
        let a = CMat::from_rows(&[
            vec![c(1.0, 0.2), c(0.3, -0.5), c(0.1, 0.0)],
            vec![c(-0.4, 0.1), c(1.2, 0.0), c(0.2, 0.3)],
            vec![c(0.0, 0.6), c(0.1, 0.1), c(0.9, -0.2)],
        ]);
        let x = z.affine(&a, &[c(1.0, 2.0), c(-3.0, 0.0), c(0.0, 0.5)]).unwrap();
        let r = unmix(&x, 1).unwrap();
        let g = &r.gamma;
        let gh = g.conj_transpose();
        let w = g.matmul(&autocov_sym(&x, 0).unwrap()).unwrap().matmul(&gh).unwrap();
        assert!(w.max_abs_diff(&CMat::identity(3)) < 1e-8);
        let l = g.matmul(&autocov_sym(&x, 1).unwrap()).unwrap().matmul(&gh).unwrap();
        assert!(l.max_abs_diff(&CMat::from_real_diag(&r.lambdas)) < 1e-8);
        assert!(r.lambdas.windows(2).all(|p| p[0] >= p[1]));
        for j in 0..3 {
            assert_eq!(g[(j, j)].im, 0.0);
            assert!(g[(j, j)].re > 0.0);
        }
        let out = apply_unmixing(&r, &x).unwrap();
        assert!(autocov_sym(&out, 0).unwrap().max_abs_diff(&CMat::identity(3)) < 1e-8);
        let lag = autocov_sym(&out, 1).unwrap();
        assert!(lag.max_abs_diff(&CMat::from_real_diag(&r.lambdas)) < 1e-8);
    }

    #[test]
    fn fixed_point_gives_identity() {
        // Whiten, then rotate so the lag-1 matrix is diagonal: the result is
        // its own unmixing solution.
        let z = ar1_series(&[0.7, 0.1], 500, 3);
        let r = unmix(&z, 1).unwrap();
        let y = apply_unmixing(&r, &z).unwrap();
        let again = unmix(&y, 1).unwrap();
        assert!(again.gamma.max_abs_diff(&CMat::identity(2)) < 1e-8);
    }

    #[test]
    fn apply_with_identity_gamma_centers() {
        let x = example();
        let r = UnmixingResult {
            gamma: CMat::identity(1),
            lambdas: vec![0.0],
            mu: vec![c(0.5, 0.5)],
            tau: 1,
            eigen_gap: f64::INFINITY,
            phase: PhaseShift::identity(1),
        };
        let y = apply_unmixing(&r, &x).unwrap();
        for (a, b) in y.values().iter().zip(x.values()) {
            assert_eq!(*a, b - c(0.5, 0.5));
        }
        assert!(apply_unmixing(&r, &ar1_series(&[0.1, 0.2], 10, 0)).is_err());
    }

    #[test]
    fn standardize_phase_examples() {
        let g = CMat::from_diag(&[C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)]);
        let (out, j) = standardize_phase(&g).unwrap();
        assert!((out[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        let expected = (-std::f64::consts::FRAC_PI_4).rem_euclid(TAU);
        assert!((j.phases[0] - expected).abs() < 1e-15);

        let pos = CMat::from_rows(&[vec![c(2.0, 0.0), c(0.0, 1.0)], vec![c(1.0, 1.0), c(0.5, 0.0)]]);
        let (out, j) = standardize_phase(&pos).unwrap();
        assert_eq!(j, PhaseShift::identity(2));
        assert_eq!(out, pos);

        let rotated = PhaseShift::from_phases([1.1, -2.5]).apply(&pos);
        let (out2, _) = standardize_phase(&rotated).unwrap();
        assert!(out2.max_abs_diff(&pos) < 1e-15);

        let bad = CMat::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(standardize_phase(&bad), Err(UnmixError::ZeroDiagonal { index: 0, .. })));
    }

    #[test]
    fn align_phase_examples() {
        let r = CMat::from_rows(&[vec![c(1.0, 0.5), c(-0.2, 0.3)], vec![c(0.0, 1.0), c(2.0, -1.0)]]);
        let h = PhaseShift::from_phases([0.4, 2.9]).apply(&r);
        assert!(align_phase_to(&h, &r).unwrap().max_abs_diff(&r) < 1e-15);
        assert!(align_phase_to(&r, &r).unwrap().max_abs_diff(&r) < 1e-15);
        let out =
            align_phase_to(&CMat::from_diag(&[c(0.0, 1.0)]), &CMat::identity(1)).unwrap();
        assert!((out[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        let orth = align_phase_to(
            &CMat::from_real_rows(&[vec![1.0, 0.0]]),
            &CMat::from_real_rows(&[vec![0.0, 1.0]]),
        );
        assert!(matches!(orth, Err(UnmixError::OrthogonalRows { index: 0 })));
    }

    #[test]
    fn affine_invariance() {
        let z = ar1_series(&[0.9, 0.4, -0.5], 1500, 11);
        let base = unmix(&z, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let b = CMat::from_fn(3, 3, |r, k| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    + if r == k { c(2.0, 0.0) } else { c(0.0, 0.0) }
            });
            let shift: Vec<C64> =
                (0..3).map(|_| c(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0))).collect();
            let moved = unmix(&z.affine(&b, &shift).unwrap(), 1).unwrap();
            let expected = base.gamma.matmul(&b.inverse().unwrap()).unwrap();
            let aligned = align_phase_to(&moved.gamma, &expected).unwrap();
            assert!(aligned.max_abs_diff(&expected) < 1e-6);
        }
    }

    #[test]
    fn lag_sweep_ranks_by_gap() {
        let z = ar1_series(&[0.9, 0.5, 0.1], 4000, 2);
        let table = lag_sweep(&z, &[1, 5, 30]).unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(table[0].tau, 1);
        assert!(table.windows(2).all(|w| w[0].eigen_gap >= w[1].eigen_gap));
        assert_eq!(lag_sweep(&z, &[2]).unwrap().len(), 1);
    }

    #[test]
    fn lag_sweep_on_white_noise_has_small_eigenvalues() {
        let z = ar1_series(&[0.0, 0.0, 0.0], 4000, 9);
        for row in lag_sweep(&z, &[1, 2, 3]).unwrap() {
            assert!(row.lambdas.iter().all(|l| l.abs() < 0.1));
            assert!(row.eigen_gap < 0.05);
        }
    }
}
