//! Minimum-distance (MD) index for complex unmixing estimates.
//!
//! `MD(Ĝ) = (d-1)^{-1/2} inf_C ‖C Ĝ - I‖_F` over matrices `C` with exactly one
//! non-zero complex entry per row and column, `Ĝ = Γ̂ A`. For a fixed
//! placement the optimal entries have a closed form, leaving a linear
//! assignment problem over `cost_jk = 1 - |Ĝ_jk|² / ‖row_j(Ĝ)‖²`.

use thiserror::Error;

use crate::linalg::{CMat, LinalgError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("MD index needs d >= 2 (got {0})")]
    TooSmall(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mixing matrix is singular: {0}")]
    SingularMixing(LinalgError),
    #[error("gain matrix row {0} is zero")]
    ZeroRow(usize),
    #[error("non-finite gain matrix")]
    NonFinite,
}

/// Optimal assignment: `perm[row] = column`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub perm: Vec<usize>,
    pub total: f64,
}

/// Minimum-cost perfect assignment (Hungarian algorithm, O(d³)).
///
/// Among optimal assignments the lexicographically smallest permutation is
/// returned, found by fixing rows in order and re-solving the remainder.
pub fn solve_assignment(cost: &[Vec<f64>]) -> Assignment {
    let n = cost.len();
    assert!(cost.iter().all(|r| r.len() == n), "cost matrix must be square");
    if n == 0 {
        return Assignment { perm: vec![], total: 0.0 };
    }
    let optimum = hungarian(cost).1;
    let scale = cost.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale * n as f64;

    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut fixed_cost = 0.0;
    for row in 0..n {
        let rest_rows: Vec<usize> = (row + 1..n).collect();
        for col in 0..n {
            if used[col] {
                continue;
            }
            used[col] = true;
            let rest_cols: Vec<usize> = (0..n).filter(|&c| !used[c]).collect();
            let sub: Vec<Vec<f64>> = rest_rows
                .iter()
                .map(|&r| rest_cols.iter().map(|&c| cost[r][c]).collect())
                .collect();
            let rest = if sub.is_empty() { 0.0 } else { hungarian(&sub).1 };
            if fixed_cost + cost[row][col] + rest <= optimum + tol {
                perm[row] = col;
                fixed_cost += cost[row][col];
                break;
            }
            used[col] = false;
        }
        debug_assert!(perm[row] != usize::MAX);
    }
    let total = perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
    Assignment { perm, total }
}

/// Shortest augmenting path Hungarian method with row/column potentials.
fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    // 1-based internals; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[matched_row[j] - 1] = j - 1;
    }
    let total = perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
    (perm, total)
}

/// Row-normalized assignment costs of a gain matrix.
pub fn md_costs(gain: &CMat) -> Result<Vec<Vec<f64>>, MetricsError> {
    if !gain.is_finite() {
        return Err(MetricsError::NonFinite);
    }
    (0..gain.rows())
        .map(|j| {
            let row = gain.row(j);
            let norm2: f64 = row.iter().map(|z| z.norm_sqr()).sum();
            if norm2.sqrt() <= 1e-14 {
                return Err(MetricsError::ZeroRow(j));
            }
            Ok(row.iter().map(|z| 1.0 - z.norm_sqr() / norm2).collect())
        })
        .collect()
}

/// MD index of a gain matrix `Ĝ = Γ̂ A`.
pub fn md_index_of_gain(gain: &CMat) -> Result<f64, MetricsError> {
    let d = gain.rows();
    if !gain.is_square() {
        return Err(MetricsError::DimensionMismatch(format!(
            "gain matrix is {}x{}",
            gain.rows(),
            gain.cols()
        )));
    }
    if d < 2 {
        return Err(MetricsError::TooSmall(d));
    }
    let cost = md_costs(gain)?;
    let best = solve_assignment(&cost);
    let raw = (best.total.max(0.0) / (d - 1) as f64).sqrt();
    debug_assert!(raw <= 1.0 + 1e-9, "MD index {raw} exceeds 1");
    Ok(raw.clamp(0.0, 1.0))
}

/// MD index of the unmixing estimate `gamma_hat` against the true mixing matrix.
pub fn md_index(gamma_hat: &CMat, mixing: &CMat) -> Result<f64, MetricsError> {
    let d = gamma_hat.rows();
    if !gamma_hat.is_square() || !mixing.is_square() || mixing.rows() != d {
        return Err(MetricsError::DimensionMismatch(format!(
            "gamma {}x{}, mixing {}x{}",
            gamma_hat.rows(),
            gamma_hat.cols(),
            mixing.rows(),
            mixing.cols()
        )));
    }
    if d < 2 {
        return Err(MetricsError::TooSmall(d));
    }
    mixing.inverse().map_err(MetricsError::SingularMixing)?;
    let gain = gamma_hat.matmul(mixing).expect("dimensions checked");
    md_index_of_gain(&gain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::unmixer::PhaseShift;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        permutations(cost.len())
            .iter()
            .map(|p| p.iter().enumerate().map(|(r, &c)| cost[r][c]).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn assignment_examples() {
        let a = solve_assignment(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(a.perm, vec![0, 1]);
        assert_eq!(a.total, 0.0);

        let a = solve_assignment(&[vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert_eq!(a.perm, vec![0, 1]);
        assert_eq!(a.total, 0.5);

        let a = solve_assignment(&vec![vec![0.3; 4]; 4]);
        assert_eq!(a.perm, vec![0, 1, 2, 3]);
        assert!((a.total - 1.2).abs() < 1e-15);
    }

    #[test]
    fn lexicographic_tie_break() {
        // [1, 0, 2] and [2, 0, 1] are both optimal
        let cost = vec![vec![5.0, 1.0, 1.0], vec![1.0, 5.0, 5.0], vec![5.0, 1.0, 1.0]];
        let a = solve_assignment(&cost);
        assert_eq!(a.perm, vec![1, 0, 2]);
        assert_eq!(a.total, 3.0);
    }

    #[test]
    fn md_examples() {
        assert_eq!(md_index(&CMat::identity(3), &CMat::identity(3)).unwrap(), 0.0);
        let g = CMat::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        let md = md_index(&g, &CMat::identity(2)).unwrap();
        assert!((md - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((md - 0.70711).abs() < 1e-5);

        let p = CMat::from_real_rows(&[vec![0.0, 0.0, 2.0], vec![0.0, 0.5, 0.0], vec![3.0, 0.0, 0.0]]);
        let j = PhaseShift::from_phases([0.3, 4.0, 1.7]).apply(&p);
        assert!(md_index_of_gain(&j).unwrap() < 1e-15);
    }

    #[test]
    fn md_errors() {
        assert_eq!(md_index(&CMat::identity(1), &CMat::identity(1)), Err(MetricsError::TooSmall(1)));
        let singular = CMat::from_real_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(md_index(&CMat::identity(2), &singular), Err(MetricsError::SingularMixing(_))));
        let zero_row = CMat::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(md_index_of_gain(&zero_row), Err(MetricsError::ZeroRow(1)));
    }

    fn cost_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..=6).prop_flat_map(|n| {
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, n), n)
        })
    }

    fn gain(max_d: usize) -> impl Strategy<Value = CMat> {
        (2usize..=max_d).prop_flat_map(|d| {
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d).prop_map(move |v| {
                CMat::from_fn(d, d, |r, k| {
                    let (a, b) = v[r * d + k];
                    c(a, b) + if r == k { c(0.1, 0.0) } else { c(0.0, 0.0) }
                })
            })
        })
    }

    proptest! {
        #[test]
        fn hungarian_matches_brute_force(cost in cost_matrix()) {
            let a = solve_assignment(&cost);
            prop_assert!((a.total - brute_force(&cost)).abs() < 1e-12);
            let mut seen = a.perm.clone();
            seen.sort();
            prop_assert_eq!(seen, (0..cost.len()).collect::<Vec<_>>());
        }

        #[test]
        fn coarse_ties_match_brute_force(cost in (1usize..=6).prop_flat_map(|n|
            prop::collection::vec(prop::collection::vec(0u8..3, n), n))) {
            let cost: Vec<Vec<f64>> = cost.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
            let a = solve_assignment(&cost);
            prop_assert_eq!(a.total, brute_force(&cost));
            // lexicographically smallest optimal permutation
            let best = permutations(cost.len())
                .into_iter()
                .filter(|p| p.iter().enumerate().map(|(r, &c)| cost[r][c]).sum::<f64>() == a.total)
                .min()
                .unwrap();
            prop_assert_eq!(a.perm, best);
        }

        #[test]
        fn md_in_unit_interval(g in gain(6)) {
            let md = md_index_of_gain(&g).unwrap();
            prop_assert!((0.0..=1.0).contains(&md));
        }

        #[test]
        fn md_matches_enumeration(g in gain(6)) {
            let d = g.rows();
            let cost = md_costs(&g).unwrap();
            let expected = (brute_force(&cost).max(0.0) / (d - 1) as f64).sqrt();
            prop_assert!((md_index_of_gain(&g).unwrap() - expected).abs() < 1e-12);
        }

        #[test]
        fn md_phase_scale_permutation_invariant(
            g in gain(5),
            phases in prop::collection::vec(0.0f64..6.3, 5),
            scales in prop::collection::vec(0.1f64..10.0, 5),
            rot in 0usize..5,
        ) {
            let d = g.rows();
            let base = md_index_of_gain(&g).unwrap();
            let j = PhaseShift::from_phases(phases[..d].iter().copied());
            prop_assert!((md_index_of_gain(&j.apply(&g)).unwrap() - base).abs() < 1e-12);
            let pd = CMat::from_fn(d, d, |r, k| {
                if k == (r + rot) % d { c(scales[r], -scales[k] * 0.3) } else { c(0.0, 0.0) }
            });
            let moved = pd.matmul(&g).unwrap();
            prop_assert!((md_index_of_gain(&moved).unwrap() - base).abs() < 1e-12);
        }
    }
}
