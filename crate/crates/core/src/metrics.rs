//! Separation and tracking metrics: SNR, SI-SNR, projection SDR, angular
//! error, energy-weighted RMS angular error and exhaustive permutation
//! assignment. All dB values are capped at ±100 so reports stay finite.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::db;
use crate::envelope::SampleEnvelope;
use crate::trajectory::Trajectory;
use crate::vec3::{self, Vec3};

pub use crate::db::CAP_DB;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("signals have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("target signal has zero energy")]
    ZeroEnergyTarget,
    #[error("estimate signal has zero energy")]
    ZeroEnergyEstimate,
    #[error("signal of {n} samples is shorter than the {filter_len}-tap filter")]
    TooShortForFilter { n: usize, filter_len: usize },
    #[error("filter length must be at least 1")]
    EmptyFilter,
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("envelope is all zero; the weighted error is undefined")]
    ZeroEnvelope,
    #[error("cost matrix is not square: row {row} has {got} entries, expected {expected}")]
    NotSquare { row: usize, got: usize, expected: usize },
    #[error("cost matrix of size {0} exceeds the exhaustive-search cap of 8")]
    TooLarge(usize),
    #[error("cost matrix is empty")]
    EmptyCost,
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `10·log10(Σtrg² / Σ(est-trg)²)`, capped at ±100 dB.
pub fn snr_db(est: &[f64], trg: &[f64]) -> Result<f64, MetricsError> {
    if est.len() != trg.len() {
        return Err(MetricsError::LengthMismatch(est.len(), trg.len()));
    }
    let e_trg = energy(trg);
    if e_trg <= 0.0 {
        return Err(MetricsError::ZeroEnergyTarget);
    }
    let e_err: f64 = est
        .iter()
        .zip(trg)
        .map(|(e, t)| (e - t) * (e - t))
        .sum();
    Ok(db::ratio_db(e_trg, e_err))
}

/// Scale-invariant SNR: energy of the optimal scalar projection of `est`
/// onto `trg` against the residual energy, in dB capped at ±100. Implemented
/// as the 1-tap case of the projection SDR so the two agree exactly.
pub fn si_snr_db(est: &[f64], trg: &[f64]) -> Result<f64, MetricsError> {
    if est.len() != trg.len() {
        return Err(MetricsError::LengthMismatch(est.len(), trg.len()));
    }
    if energy(est) <= 0.0 {
        return Err(MetricsError::ZeroEnergyEstimate);
    }
    Ok(sdr_projection(est, trg, 1)?.db)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdrOutcome {
    pub db: f64,
    /// True when the normal equations needed ridge regularization.
    pub ridged: bool,
}

/// Distortion ratio after least-squares projection of `est` onto the span of
/// `trg` delayed by `0..filter_len` taps (all truncated to the signal
/// support, so an in-span delayed copy projects perfectly). A singular
/// system falls back to a ridge-regularized solve (ε = 1e-8) and reports it.
pub fn sdr_projection(
    est: &[f64],
    trg: &[f64],
    filter_len: usize,
) -> Result<SdrOutcome, MetricsError> {
    if filter_len == 0 {
        return Err(MetricsError::EmptyFilter);
    }
    if est.len() != trg.len() {
        return Err(MetricsError::LengthMismatch(est.len(), trg.len()));
    }
    let n = trg.len();
    if n < filter_len {
        return Err(MetricsError::TooShortForFilter { n, filter_len });
    }
    if energy(trg) <= 0.0 {
        return Err(MetricsError::ZeroEnergyTarget);
    }

    // Normal equations R a = p with R[i][j] = Σ_n trg[n-i]·trg[n-j] over the
    // signal support. With d = |i-j| and s = max(i,j) the entry is the lag-d
    // correlation truncated at N-1-s, so prefix sums over each lag give all
    // entries in O(filter_len·n).
    let mut prefix: Vec<Vec<f64>> = Vec::with_capacity(filter_len);
    for d in 0..filter_len {
        let mut acc = 0.0;
        let row: Vec<f64> = (0..n - d)
            .map(|m| {
                acc += trg[m] * trg[m + d];
                acc
            })
            .collect();
        prefix.push(row);
    }
    let mut r = vec![vec![0.0f64; filter_len]; filter_len];
    for i in 0..filter_len {
        for j in 0..filter_len {
            let d = i.abs_diff(j);
            let terms = n - i.max(j); // m = 0 .. N-1-max(i,j)
            r[i][j] = prefix[d][terms - 1];
        }
    }
    let mut p = vec![0.0f64; filter_len];
    for (k, pk) in p.iter_mut().enumerate() {
        *pk = (k..n).map(|i| est[i] * trg[i - k]).sum();
    }

    let (coeffs, ridged) = match solve_spd(&r, &p) {
        Some(c) => (c, false),
        None => {
            let eps = 1e-8 * r[0][0].max(1.0);
            let mut ridged_r = r.clone();
            for (i, row) in ridged_r.iter_mut().enumerate() {
                row[i] += eps;
            }
            let c = solve_spd(&ridged_r, &p).ok_or(MetricsError::ZeroEnergyTarget)?;
            (c, true)
        }
    };

    let mut e_proj = 0.0;
    let mut e_res = 0.0;
    for i in 0..n {
        let mut proj = 0.0;
        for (k, &a) in coeffs.iter().enumerate() {
            if i >= k {
                proj += a * trg[i - k];
            }
        }
        e_proj += proj * proj;
        let res = est[i] - proj;
        e_res += res * res;
    }
    Ok(SdrOutcome { db: db::ratio_db(e_proj, e_res), ridged })
}

/// [`sdr_projection`] returning only the level.
pub fn sdr_db(est: &[f64], trg: &[f64], filter_len: usize) -> Result<f64, MetricsError> {
    Ok(sdr_projection(est, trg, filter_len)?.db)
}

/// Cholesky solve of a symmetric positive-definite system; `None` when the
/// factorization breaks down (semi-definite or indefinite input).
fn solve_spd(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let tol = 1e-12 * a.iter().enumerate().map(|(i, r)| r[i].abs()).fold(0.0, f64::max);
    let mut l = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= tol {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Absolute angle between two nonzero vectors in degrees, in [0, 180].
pub fn angular_error_deg(u: Vec3, v: Vec3) -> Result<f64, MetricsError> {
    let nu = vec3::norm(u);
    let nv = vec3::norm(v);
    if nu < 1e-12 || nv < 1e-12 {
        return Err(MetricsError::ZeroVector);
    }
    let cos = (vec3::dot(u, v) / (nu * nv)).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees())
}

/// Energy-weighted RMS angular error in degrees:
/// `sqrt(Σ env(n)²·AE(n)² / Σ env(n)²)` over samples.
pub fn ewrmsae_deg(
    est: &Trajectory,
    trg: &Trajectory,
    trg_env: &SampleEnvelope,
) -> Result<f64, MetricsError> {
    if est.len() != trg.len() {
        return Err(MetricsError::LengthMismatch(est.len(), trg.len()));
    }
    if trg_env.len() != est.len() {
        return Err(MetricsError::LengthMismatch(trg_env.len(), est.len()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ((e, t), &w) in est.dirs().iter().zip(trg.dirs()).zip(&trg_env.values) {
        let w2 = w * w;
        den += w2;
        if w2 > 0.0 {
            let ae = angular_error_deg(*e, *t)?;
            num += w2 * ae * ae;
        }
    }
    if den <= 0.0 {
        return Err(MetricsError::ZeroEnvelope);
    }
    Ok((num / den).sqrt())
}

/// Exhaustive minimum-cost assignment over all permutations, rows to columns:
/// returns `perm` with `perm[row] = column` and the total cost. Ties break to
/// the lexicographically smallest permutation. Limited to 8×8.
pub fn upit_assign(cost: &[Vec<f64>]) -> Result<(Vec<usize>, f64), MetricsError> {
    let c = cost.len();
    if c == 0 {
        return Err(MetricsError::EmptyCost);
    }
    if c > 8 {
        return Err(MetricsError::TooLarge(c));
    }
    for (row, r) in cost.iter().enumerate() {
        if r.len() != c {
            return Err(MetricsError::NotSquare { row, got: r.len(), expected: c });
        }
    }
    Ok(min_cost_permutation(cost))
}

/// Shared exhaustive search; `cost` must be square. Permutations are visited
/// in lexicographic order and replaced only on strict improvement, which
/// yields the lexicographically smallest minimizer.
pub(crate) fn min_cost_permutation(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let c = cost.len();
    let mut perm: Vec<usize> = (0..c).collect();
    let mut best_perm = perm.clone();
    let mut best = total_cost(cost, &perm);
    while next_permutation(&mut perm) {
        let t = total_cost(cost, &perm);
        if t < best {
            best = t;
            best_perm = perm.clone();
        }
    }
    (best_perm, best)
}

fn total_cost(cost: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}

/// Standard lexicographic next-permutation; false once the last one is done.
fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| perm[i] < perm[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
    perm.swap(i, j);
    perm[i + 1..].reverse();
    true
}

/// Per-source evaluation under the chosen assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEval {
    /// Groundtruth source index.
    pub target: usize,
    /// Estimated slot assigned to it.
    pub estimate: usize,
    pub snr_db: f64,
    pub si_snr_db: f64,
    pub sdr_db: f64,
    pub ewrmsae_deg: f64,
    /// EWRMSAE of the trajectory after initial tracking and after each
    /// mutual-facilitation round (length rounds + 1).
    pub ewrmsae_rounds_deg: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVerdict {
    pub true_count: usize,
    pub estimated_count: usize,
}

/// Evaluation of one scene: per-source metrics under the minimizing
/// permutation plus the source-count verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_source: Vec<SourceEval>,
    /// `permutation[estimate] = target` over the assigned set.
    pub permutation: Vec<usize>,
    pub count_verdict: CountVerdict,
    /// Estimate slots with no groundtruth partner (count overshoot).
    pub unassigned_estimates: Vec<usize>,
    /// Groundtruth sources with no estimate (count undershoot).
    pub unmatched_targets: Vec<usize>,
    /// The cap applied to all dB values in this report.
    pub db_cap: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_cases() {
        let t = vec![1.0, -0.5, 0.25, 0.8];
        assert_eq!(snr_db(&t, &t).unwrap(), 100.0);
        assert_eq!(snr_db(&vec![0.0; 4], &t).unwrap(), 0.0);
        assert!(snr_db(&t, &vec![0.0; 4]).is_err());

        // Noise at a tenth of the target power: 10 dB.
        let n = 16_000;
        let trg: Vec<f64> = (0..n).map(|i| (0.01 * i as f64).sin()).collect();
        let p_trg = trg.iter().map(|v| v * v).sum::<f64>();
        let mut noise: Vec<f64> = (0..n).map(|i| ((0.37 * i as f64).sin() * 2.1).cos()).collect();
        let p_noise = noise.iter().map(|v| v * v).sum::<f64>();
        let s = (p_trg / (10.0 * p_noise)).sqrt();
        noise.iter_mut().for_each(|v| *v *= s);
        let est: Vec<f64> = trg.iter().zip(&noise).map(|(t, n)| t + n).collect();
        let got = snr_db(&est, &trg).unwrap();
        assert!((got - 10.0).abs() < 0.01, "{got}");
    }

    #[test]
    fn si_snr_is_scale_invariant() {
        let trg = vec![1.0, 0.0];
        let est = vec![1.0, 1.0];
        let got = si_snr_db(&est, &trg).unwrap();
        assert!(got.abs() < 1e-9, "projection (1,0) vs residual (0,1): {got}");

        let scaled: Vec<f64> = trg.iter().map(|v| 2.0 * v).collect();
        assert_eq!(si_snr_db(&scaled, &trg).unwrap(), 100.0);

        let t: Vec<f64> = (0..64).map(|i| (0.3 * i as f64).sin()).collect();
        let e: Vec<f64> = (0..64).map(|i| (0.3 * i as f64).sin() + 0.1 * (0.9 * i as f64).cos()).collect();
        let a = si_snr_db(&e, &t).unwrap();
        let e5: Vec<f64> = e.iter().map(|v| 5.0 * v).collect();
        let b = si_snr_db(&e5, &t).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn sdr_with_one_tap_equals_si_snr_exactly() {
        let t: Vec<f64> = (0..128).map(|i| (0.21 * i as f64).sin()).collect();
        let e: Vec<f64> = (0..128).map(|i| (0.21 * i as f64 + 0.4).sin()).collect();
        assert_eq!(sdr_db(&e, &t, 1).unwrap(), si_snr_db(&e, &t).unwrap());
    }

    #[test]
    fn sdr_absorbs_delays_within_the_filter_span() {
        let n = 512;
        let mut state = 99u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let trg: Vec<f64> = (0..n).map(|_| next()).collect();
        let mut est = vec![0.0; n];
        for i in 3..n {
            est[i] = trg[i - 3];
        }
        let got = sdr_db(&est, &trg, 8).unwrap();
        assert!(got >= 60.0, "delayed copy must lie in the projection span: {got}");
        // And SI-SNR on the same pair is poor, so the subspace ordering shows.
        assert!(sdr_db(&est, &trg, 8).unwrap() >= si_snr_db(&est, &trg).unwrap());
    }

    #[test]
    fn sdr_never_falls_below_si_snr() {
        let mut state = 7u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..20 {
            let trg: Vec<f64> = (0..300).map(|_| next()).collect();
            let est: Vec<f64> = trg.iter().map(|v| v + 0.3 * next()).collect();
            let si = si_snr_db(&est, &trg).unwrap();
            let sdr = sdr_db(&est, &trg, 16).unwrap();
            assert!(sdr >= si - 1e-9, "sdr {sdr} < si {si}");
        }
    }

    #[test]
    fn cholesky_matches_dense_gaussian_elimination() {
        let mut state = 11u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..50 {
            let l = 6;
            // Positive-definite Gram matrix from random vectors.
            let vs: Vec<Vec<f64>> = (0..l).map(|_| (0..32).map(|_| next()).collect()).collect();
            let mut g = vec![vec![0.0; l]; l];
            for i in 0..l {
                for j in 0..l {
                    g[i][j] = vs[i].iter().zip(&vs[j]).map(|(a, b)| a * b).sum();
                }
                g[i][i] += 0.5;
            }
            let y: Vec<f64> = (0..l).map(|_| next()).collect();
            let x = solve_spd(&g, &y).expect("well-conditioned");
            // Dense Gauss-Jordan solve.
            let mut a = vec![vec![0.0; l + 1]; l];
            for i in 0..l {
                a[i][..l].copy_from_slice(&g[i]);
                a[i][l] = y[i];
            }
            for col in 0..l {
                let piv = (col..l).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
                a.swap(col, piv);
                for row in 0..l {
                    if row != col {
                        let f = a[row][col] / a[col][col];
                        for j in col..=l {
                            a[row][j] -= f * a[col][j];
                        }
                    }
                }
            }
            for i in 0..l {
                let dense = a[i][l] / a[i][i];
                assert!((x[i] - dense).abs() < 1e-8 * (1.0 + dense.abs()), "{} vs {}", x[i], dense);
            }
        }
    }

    #[test]
    fn angular_error_basic_directions() {
        assert_eq!(angular_error_deg([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!((angular_error_deg([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]).unwrap() - 90.0).abs() < 1e-12);
        assert!((angular_error_deg([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]).unwrap() - 180.0).abs() < 1e-12);
        assert!(angular_error_deg([0.0; 3], [1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn ewrmsae_hand_cases() {
        let e1 = Trajectory::from_dirs(vec![
            [10f64.to_radians().cos(), 10f64.to_radians().sin(), 0.0],
            [20f64.to_radians().cos(), 20f64.to_radians().sin(), 0.0],
        ])
        .unwrap();
        let t = Trajectory::from_dirs(vec![[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        let env = SampleEnvelope { values: vec![1.0, 1.0], sample_rate: 16_000 };
        let got = ewrmsae_deg(&e1, &t, &env).unwrap();
        assert!((got - 250f64.sqrt()).abs() < 1e-9, "{got}");

        // Zero-weight samples are ignored entirely.
        let e2 = Trajectory::from_dirs(vec![
            [10f64.to_radians().cos(), 10f64.to_radians().sin(), 0.0],
            [77f64.to_radians().cos(), 77f64.to_radians().sin(), 0.0],
        ])
        .unwrap();
        let env10 = SampleEnvelope { values: vec![1.0, 0.0], sample_rate: 16_000 };
        let got = ewrmsae_deg(&e2, &t, &env10).unwrap();
        assert!((got - 10.0).abs() < 1e-9, "{got}");

        assert_eq!(ewrmsae_deg(&t, &t, &env).unwrap(), 0.0);
        let zero_env = SampleEnvelope { values: vec![0.0, 0.0], sample_rate: 16_000 };
        assert!(ewrmsae_deg(&e1, &t, &zero_env).is_err());
    }

    #[test]
    fn ewrmsae_reduces_to_rms_for_constant_envelopes() {
        let mut state = 5u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let n = 200;
        let mk = |next: &mut dyn FnMut() -> f64| {
            Trajectory::from_dirs(
                (0..n)
                    .map(|_| {
                        let v = [next(), next(), next()];
                        vec3::normalize(v).unwrap_or([1.0, 0.0, 0.0])
                    })
                    .collect(),
            )
            .unwrap()
        };
        let est = mk(&mut next);
        let trg = mk(&mut next);
        let env = SampleEnvelope { values: vec![0.42; n], sample_rate: 16_000 };
        let weighted = ewrmsae_deg(&est, &trg, &env).unwrap();
        let mut rms = 0.0;
        for (e, t) in est.dirs().iter().zip(trg.dirs()) {
            let ae = angular_error_deg(*e, *t).unwrap();
            rms += ae * ae;
        }
        let rms = (rms / n as f64).sqrt();
        assert!((weighted - rms).abs() < 1e-9);
    }

    #[test]
    fn upit_enumerates_exactly() {
        let cost = vec![vec![1.0, 2.0], vec![3.0, 0.0]];
        let (perm, total) = upit_assign(&cost).unwrap();
        assert_eq!(perm, vec![0, 1]);
        assert_eq!(total, 1.0);

        let diag = vec![
            vec![-5.0, 1.0, 1.0],
            vec![1.0, -5.0, 1.0],
            vec![1.0, 1.0, -5.0],
        ];
        assert_eq!(upit_assign(&diag).unwrap().0, vec![0, 1, 2]);

        // Two equally optimal permutations: lexicographically smaller wins.
        let tie = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(upit_assign(&tie).unwrap().0, vec![0, 1]);

        let bad = vec![vec![1.0], vec![2.0]];
        assert!(upit_assign(&bad).is_err());
    }

    #[test]
    fn upit_matches_bruteforce_on_random_matrices() {
        let mut state = 3u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for case in 0..200 {
            let c = 2 + case % 4;
            let cost: Vec<Vec<f64>> =
                (0..c).map(|_| (0..c).map(|_| next()).collect()).collect();
            let (perm, total) = upit_assign(&cost).unwrap();
            // Independent recursive enumeration.
            fn recurse(
                cost: &[Vec<f64>],
                row: usize,
                used: &mut Vec<bool>,
                cur: &mut Vec<usize>,
                acc: f64,
                best: &mut (Vec<usize>, f64),
            ) {
                if row == cost.len() {
                    if acc < best.1 {
                        *best = (cur.clone(), acc);
                    }
                    return;
                }
                for col in 0..cost.len() {
                    if !used[col] {
                        used[col] = true;
                        cur.push(col);
                        recurse(cost, row + 1, used, cur, acc + cost[row][col], best);
                        cur.pop();
                        used[col] = false;
                    }
                }
            }
            let mut best = (vec![], f64::INFINITY);
            recurse(&cost, 0, &mut vec![false; c], &mut vec![], 0.0, &mut best);
            assert_eq!(perm, best.0, "case {case}");
            assert!((total - best.1).abs() < 1e-12);
        }
    }
}
