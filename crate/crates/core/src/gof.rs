//! Goodness-of-fit statistics and p-values.
//!
//! One-sample Kolmogorov–Smirnov against U(0, 1), a chi-squared test on
//! normal scores of PIT values, a discrete-uniform test for rank statistics,
//! and a kernel two-sample permutation test (MMD).

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::rng::RngStream;
use crate::special::{chi2_cdf_sf, norm_quantile};
use crate::types::ParamPoint;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub sample_size: usize,
}

impl GofResult {
    fn new(test_name: &str, statistic: f64, p_value: f64, sample_size: usize) -> Self {
        GofResult {
            test_name: test_name.to_string(),
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            sample_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankHistogram {
    pub counts: Vec<usize>,
    /// Ensemble size; ranks take values in `0..=ensemble_size`.
    pub ensemble_size: usize,
    pub bins: usize,
}

/// Equal-width histogram of values in `[0, 1]`.
pub fn unit_histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0usize; bins.max(1)];
    for &v in values {
        let b = ((v * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[b] += 1;
    }
    counts
}

/// `D_n = sup_x |F_n(x) - x|` for values in `[0, 1]`.
pub fn ks_statistic(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(CalibError::EmptyInput("ks sample"));
    }
    if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(CalibError::invalid("ks values must lie in [0, 1]"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let i = i as f64;
            ((i + 1.0) / n - u).max(u - i / n)
        })
        .fold(0.0, f64::max))
}

/// Upper-tail p-value `P(D_n >= d)` under the null.
///
/// Exact (Marsaglia–Tsang–Wang) for `n <= 100`, asymptotic Kolmogorov series
/// with Stephens' finite-sample correction above.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    if n == 0 || d <= 0.0 {
        return 1.0;
    }
    if d >= 1.0 {
        return 0.0;
    }
    if n <= 100 {
        (1.0 - kolmogorov_exact_cdf(n, d)).clamp(0.0, 1.0)
    } else {
        let sn = (n as f64).sqrt();
        kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d)
    }
}

/// Limiting Kolmogorov survival function `1 - K(λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form converges fast for small λ.
        let pi2 = std::f64::consts::PI.powi(2);
        let w = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let mut k = 0.0;
        for j in 1..=20 {
            let odd = (2 * j - 1) as f64;
            k += (-odd * odd * pi2 / (8.0 * lambda * lambda)).exp();
        }
        (1.0 - w * k).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for j in 1..=100 {
            let j = j as f64;
            let term = (-2.0 * j * j * lambda * lambda).exp();
            s += if j as u64 % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// `P(D_n < d)` by the Marsaglia–Tsang–Wang (2003) matrix method.
fn kolmogorov_exact_cdf(n: usize, d: f64) -> f64 {
    let nd = n as f64 * d;
    if nd <= 0.5 {
        return 0.0;
    }
    let k = nd.floor() as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nd;

    let mut hm = vec![0.0f64; m * m];
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                hm[i * m + j] = 1.0;
            }
        }
    }
    for i in 0..m {
        hm[i * m] -= h.powi(i as i32 + 1);
        hm[(m - 1) * m + i] -= h.powi((m - i) as i32);
    }
    if 2.0 * h - 1.0 > 0.0 {
        hm[(m - 1) * m] += (2.0 * h - 1.0).powi(m as i32);
    }
    for i in 0..m {
        for j in 0..m {
            if i + 1 > j {
                for g in 1..=(i + 1 - j) {
                    hm[i * m + j] /= g as f64;
                }
            }
        }
    }

    let (q, mut eq) = matrix_power_scaled(&hm, m, n);
    let mut s = q[(k - 1) * m + (k - 1)];
    for i in 1..=n {
        s = s * i as f64 / n as f64;
        if s < 1e-140 {
            s *= 1e140;
            eq -= 140;
        }
    }
    s * 10f64.powi(eq)
}

fn matmul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i * m + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i * m + j] += aik * b[k * m + j];
            }
        }
    }
    c
}

/// `a^n` returned as `(matrix, decimal exponent)` to avoid overflow.
fn matrix_power_scaled(a: &[f64], m: usize, n: usize) -> (Vec<f64>, i32) {
    if n == 1 {
        return (a.to_vec(), 0);
    }
    let (half, e_half) = matrix_power_scaled(a, m, n / 2);
    let mut v = matmul(&half, &half, m);
    let mut e = 2 * e_half;
    if n % 2 == 1 {
        v = matmul(a, &v, m);
    }
    if v[(m / 2) * m + m / 2] > 1e140 {
        for x in v.iter_mut() {
            *x *= 1e-140;
        }
        e += 140;
    }
    (v, e)
}

/// One-sample KS test of values against U(0, 1).
pub fn ks_uniform_test(values: &[f64]) -> Result<GofResult> {
    let d = ks_statistic(values)?;
    Ok(GofResult::new(
        "ks",
        d,
        ks_p_value(d, values.len()),
        values.len(),
    ))
}

/// `T = Σ Φ^{-1}(pit_i)^2` with a two-sided χ²_n p-value.
pub fn chi2_pit_test(pits: &[f64]) -> Result<GofResult> {
    if pits.is_empty() {
        return Err(CalibError::EmptyInput("pit values"));
    }
    let mut t = 0.0;
    for &p in pits {
        if !(p > 0.0 && p < 1.0) {
            return Err(CalibError::ProbabilityOutOfRange(p));
        }
        let z = norm_quantile(p);
        t += z * z;
    }
    let (f, sf) = chi2_cdf_sf(t, pits.len() as f64);
    Ok(GofResult::new("chi2-pit", t, 2.0 * f.min(sf), pits.len()))
}

/// Number of ensemble members strictly below `value`.
pub fn rank_statistic(ensemble: &[f64], value: f64) -> usize {
    ensemble.iter().filter(|&&e| e < value).count()
}

/// Pearson χ² test that ranks in `0..=m` are discrete-uniform, after
/// pooling into `bins` equal groups.
pub fn rank_uniformity_test(
    ranks: &[usize],
    ensemble_size: usize,
    bins: usize,
) -> Result<(RankHistogram, GofResult)> {
    if bins < 2 || !(ensemble_size + 1).is_multiple_of(bins) {
        return Err(CalibError::invalid(format!(
            "bin count {bins} must be at least 2 and divide ensemble size + 1 = {}",
            ensemble_size + 1
        )));
    }
    if ranks.len() < 5 * bins {
        return Err(CalibError::InsufficientData {
            needed: 5 * bins,
            got: ranks.len(),
        });
    }
    let mut counts = vec![0usize; bins];
    for &r in ranks {
        if r > ensemble_size {
            return Err(CalibError::invalid(format!(
                "rank {r} exceeds ensemble size {ensemble_size}"
            )));
        }
        counts[r * bins / (ensemble_size + 1)] += 1;
    }
    let expected = ranks.len() as f64 / bins as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let (_, p) = chi2_cdf_sf(stat, (bins - 1) as f64);
    Ok((
        RankHistogram {
            counts,
            ensemble_size,
            bins,
        },
        GofResult::new("rank-chi2", stat, p, ranks.len()),
    ))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Median of pairwise Euclidean distances.
pub fn median_pairwise_distance(points: &[&[f64]]) -> f64 {
    let mut d = Vec::with_capacity(points.len() * (points.len().saturating_sub(1)) / 2);
    for i in 0..points.len() {
        for j in 0..i {
            d.push(sq_dist(points[i], points[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Biased MMD² between the groups `mask == true` and `mask == false`.
fn mmd2_from_gram(gram: &[f64], n: usize, mask: &[bool]) -> f64 {
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let row = &gram[i * n..(i + 1) * n];
        for (j, &k) in row.iter().enumerate() {
            match (mask[i], mask[j]) {
                (true, true) => sxx += k,
                (false, false) => syy += k,
                _ => sxy += k,
            }
        }
    }
    let nx = mask.iter().filter(|&&b| b).count() as f64;
    let ny = n as f64 - nx;
    sxx / (nx * nx) + syy / (ny * ny) - sxy / (nx * ny)
}

/// Kernel two-sample test with a Gaussian kernel and the biased MMD²
/// estimator; `bandwidth == 0` selects the median heuristic.
///
/// The pooled sample is put in a canonical (lexicographic) order before
/// permuting and the smaller group always takes the leading permuted
/// indices, so exchanging `x` and `y` reproduces the same p-value.
pub fn mmd_permutation_test(
    x: &[ParamPoint],
    y: &[ParamPoint],
    bandwidth: f64,
    n_perm: usize,
    rng: &mut RngStream,
) -> Result<GofResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(CalibError::InsufficientData {
            needed: 2,
            got: x.len().min(y.len()),
        });
    }
    let d = x[0].dim();
    if let Some(bad) = x.iter().chain(y).find(|p| p.dim() != d) {
        return Err(CalibError::DimensionMismatch {
            expected: d,
            got: bad.dim(),
        });
    }
    if !(bandwidth >= 0.0 && bandwidth.is_finite()) {
        return Err(CalibError::invalid("bandwidth must be non-negative"));
    }

    let mut pooled: Vec<(&[f64], bool)> = x
        .iter()
        .map(|p| (&p[..], true))
        .chain(y.iter().map(|p| (&p[..], false)))
        .collect();
    pooled.sort_by(|a, b| {
        a.0.iter()
            .zip(b.0)
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let n = pooled.len();
    let pts: Vec<&[f64]> = pooled.iter().map(|p| p.0).collect();

    let bw = if bandwidth > 0.0 {
        bandwidth
    } else {
        let m = median_pairwise_distance(&pts);
        if m > 0.0 {
            m
        } else {
            1.0
        }
    };
    let inv = 1.0 / (2.0 * bw * bw);
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        gram[i * n + i] = 1.0;
        for j in 0..i {
            let k = (-sq_dist(pts[i], pts[j]) * inv).exp();
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }

    let observed_mask: Vec<bool> = pooled.iter().map(|p| p.1).collect();
    let observed = mmd2_from_gram(&gram, n, &observed_mask).max(0.0);

    let small = x.len().min(y.len());
    let perm_seed = rng.next_u64();
    let tol = 1e-12 * observed.abs().max(1e-300);
    let exceed: usize = (0..n_perm)
        .into_par_iter()
        .map(|p| {
            let mut r = RngStream::new(perm_seed, p as u64);
            let mut idx: Vec<usize> = (0..n).collect();
            for i in 0..small {
                let j = i + r.below((n - i) as u64) as usize;
                idx.swap(i, j);
            }
            let mut mask = vec![false; n];
            for &i in &idx[..small] {
                mask[i] = true;
            }
            let stat = mmd2_from_gram(&gram, n, &mask);
            usize::from(stat >= observed - tol)
        })
        .sum();

    let p = (1 + exceed) as f64 / (n_perm + 1) as f64;
    Ok(GofResult::new("mmd", observed, p, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::ScalarDistribution;
    use proptest::prelude::*;

    /// Brute-force sup over a fine grid plus the jump points, independent of
    /// the order-statistic formula.
    fn ks_brute(values: &[f64]) -> f64 {
        let n = values.len() as f64;
        let mut best: f64 = 0.0;
        let ecdf = |x: f64, strict: bool| {
            values
                .iter()
                .filter(|&&v| if strict { v < x } else { v <= x })
                .count() as f64
                / n
        };
        for &v in values.iter().chain(&[0.0, 1.0]) {
            best = best.max((ecdf(v, false) - v).abs());
            best = best.max((ecdf(v, true) - v).abs());
        }
        best
    }

    #[test]
    fn ks_statistic_examples() {
        assert_eq!(ks_statistic(&[0.5]).unwrap(), 0.5);
        let n = 10;
        let grid: Vec<f64> = (1..=n)
            .map(|i| (2 * i - 1) as f64 / (2 * n) as f64)
            .collect();
        assert!((ks_statistic(&grid).unwrap() - 0.05).abs() < 1e-15);
        assert!((ks_brute(&grid) - 0.05).abs() < 1e-15);
        assert_eq!(ks_statistic(&[0.0; 4]).unwrap(), 1.0);
        assert!(ks_statistic(&[]).is_err());
        assert!(ks_statistic(&[1.2]).is_err());
    }

    #[test]
    fn ks_statistic_matches_brute_force() {
        let mut rng = RngStream::new(1000, 0);
        for case in 0..1000 {
            let n = 1 + (case % 12);
            let vals: Vec<f64> = (0..n).map(|_| rng.uniform_open().powf(1.5)).collect();
            let d = ks_statistic(&vals).unwrap();
            assert!((d - ks_brute(&vals)).abs() < 1e-14);
        }
    }

    #[test]
    fn ks_p_value_examples() {
        assert_eq!(ks_p_value(0.0, 17), 1.0);
        assert!(ks_p_value(1.0, 100) < 1e-12);
        let n = 1_000_000usize;
        let p = ks_p_value(1.3581 / (n as f64).sqrt(), n);
        assert!((p - 0.05).abs() < 0.002, "p={p}");
        // direct summation of the alternating series at λ = 1.3581
        let mut s = 0.0;
        for k in 1..200 {
            let k = k as f64;
            s += (-1f64).powf(k - 1.0) * (-2.0 * k * k * 1.3581f64.powi(2)).exp();
        }
        assert!((kolmogorov_sf(1.3581) - 2.0 * s).abs() < 1e-14);
    }

    #[test]
    fn kolmogorov_branches_agree() {
        for &l in &[1.1, 1.15, 1.18, 1.2, 1.25] {
            let mut s = 0.0;
            for k in 1..400 {
                let k = k as f64;
                s += (-1f64).powf(k - 1.0) * (-2.0 * k * k * l * l).exp();
            }
            assert!((kolmogorov_sf(l) - 2.0 * s).abs() < 1e-12, "λ={l}");
        }
    }

    #[test]
    fn exact_ks_small_n() {
        // n = 1: P(D_1 >= d) = 2(1 - d) for d in [1/2, 1]
        for &d in &[0.5, 0.6, 0.9] {
            assert!((ks_p_value(d, 1) - 2.0 * (1.0 - d)).abs() < 1e-12);
        }
        // Monte Carlo check at n = 10
        let mut rng = RngStream::new(55, 0);
        let reps = 40_000;
        let crit = 0.3;
        let mut hits = 0;
        for _ in 0..reps {
            let v: Vec<f64> = (0..10).map(|_| rng.uniform_open()).collect();
            if ks_statistic(&v).unwrap() >= crit {
                hits += 1;
            }
        }
        let mc = hits as f64 / reps as f64;
        let p = ks_p_value(crit, 10);
        assert!(
            (mc - p).abs() < 4.0 * (p * (1.0 - p) / reps as f64).sqrt(),
            "{mc} vs {p}"
        );
    }

    #[test]
    fn ks_p_value_monotone_in_d() {
        for &n in &[5usize, 50, 100, 101, 5000] {
            let mut last = 1.0;
            for i in 0..=100 {
                let p = ks_p_value(i as f64 / 100.0, n);
                assert!(p <= last + 1e-12, "n={n} d={}", i as f64 / 100.0);
                last = p;
            }
        }
    }

    #[test]
    fn chi2_pit_examples() {
        let r = chi2_pit_test(&[0.5; 7]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value < 1e-12);
        let r = chi2_pit_test(&[crate::special::norm_cdf(1.0)]).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert!(chi2_pit_test(&[0.0]).is_err());
        assert!(chi2_pit_test(&[1.0]).is_err());
        assert!(chi2_pit_test(&[]).is_err());
    }

    #[test]
    fn chi2_pit_null_moments() {
        let mut rng = RngStream::new(321, 0);
        let reps = 10_000;
        let ts: Vec<f64> = (0..reps)
            .map(|_| {
                let pits: Vec<f64> = (0..50).map(|_| rng.uniform_open()).collect();
                chi2_pit_test(&pits).unwrap().statistic
            })
            .collect();
        let mean = ts.iter().sum::<f64>() / reps as f64;
        let var = ts.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!((mean - 50.0).abs() < 1.0, "mean={mean}");
        assert!((var - 100.0).abs() < 10.0, "var={var}");
    }

    #[test]
    fn rank_statistic_examples() {
        assert_eq!(rank_statistic(&[5.0, 6.0, 7.0], 1.0), 0);
        assert_eq!(rank_statistic(&[5.0, 6.0, 7.0], 10.0), 3);
        assert_eq!(rank_statistic(&[1.0, 3.0, 5.0], 4.0), 2);
        // ties count as not-less
        assert_eq!(rank_statistic(&[1.0, 4.0, 4.0], 4.0), 1);
    }

    #[test]
    fn rank_uniformity_examples() {
        let balanced: Vec<usize> = (0..100).collect();
        let (h, r) = rank_uniformity_test(&balanced, 99, 10).unwrap();
        assert_eq!(h.counts, vec![10; 10]);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);

        let (h, r) = rank_uniformity_test(&[0; 100], 99, 10).unwrap();
        assert_eq!(h.counts[0], 100);
        // (100-10)^2/10 + 9 * (0-10)^2/10
        assert!((r.statistic - 900.0).abs() < 1e-12);

        assert!(rank_uniformity_test(&[0; 100], 100, 10).is_err());
        assert!(rank_uniformity_test(&[0; 49], 99, 10).is_err());
        assert!(rank_uniformity_test(&[100; 60], 99, 10).is_err());
    }

    #[test]
    fn rank_test_p_values_uniform_under_exact_sampling() {
        let mut p = Vec::new();
        for rep in 0..200u64 {
            let mut rng = RngStream::new(9000 + rep, 0);
            let ranks: Vec<usize> = (0..10_000).map(|_| rng.below(100) as usize).collect();
            p.push(rank_uniformity_test(&ranks, 99, 20).unwrap().1.p_value);
        }
        let d = ks_statistic(&p).unwrap();
        assert!(ks_p_value(d, p.len()) > 0.01);
    }

    fn normal_points(mean: f64, n: usize, rng: &mut RngStream) -> Vec<ParamPoint> {
        let d = ScalarDistribution::normal(mean, 1.0).unwrap();
        (0..n).map(|_| ParamPoint::scalar(d.sample(rng))).collect()
    }

    #[test]
    fn mmd_identical_samples() {
        let mut rng = RngStream::new(1, 0);
        let x = normal_points(0.0, 30, &mut rng);
        let r = mmd_permutation_test(&x, &x, 0.0, 199, &mut rng).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn mmd_detects_mean_shift() {
        let mut rng = RngStream::new(2, 0);
        let x = normal_points(0.0, 500, &mut rng);
        let y = normal_points(3.0, 500, &mut rng);
        let r = mmd_permutation_test(&x, &y, 0.0, 999, &mut rng).unwrap();
        assert!(r.p_value <= 1.0 / 1000.0 + 1e-15);
    }

    #[test]
    fn mmd_rejects_dimension_mismatch() {
        let x = vec![ParamPoint::scalar(0.0), ParamPoint::scalar(1.0)];
        let y = vec![
            ParamPoint::new(vec![0.0, 1.0]).unwrap(),
            ParamPoint::new(vec![1.0, 1.0]).unwrap(),
        ];
        let mut rng = RngStream::new(3, 0);
        assert!(matches!(
            mmd_permutation_test(&x, &y, 1.0, 10, &mut rng),
            Err(CalibError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mmd_symmetric_under_exchange() {
        let mut rng = RngStream::new(4, 0);
        let x = normal_points(0.0, 40, &mut rng);
        let y = normal_points(0.4, 25, &mut rng);
        let a = mmd_permutation_test(&x, &y, 0.0, 299, &mut RngStream::new(10, 0)).unwrap();
        let b = mmd_permutation_test(&y, &x, 0.0, 299, &mut RngStream::new(10, 0)).unwrap();
        assert!((a.statistic - b.statistic).abs() < 1e-14);
        assert!((a.p_value - b.p_value).abs() <= 2.0 / 300.0);
    }

    proptest! {
        #[test]
        fn ks_statistic_permutation_invariant(
            mut v in prop::collection::vec(0.0f64..=1.0, 1..40),
            seed in 0u64..1000,
        ) {
            let d = ks_statistic(&v).unwrap();
            let mut rng = RngStream::new(seed, 0);
            for i in (1..v.len()).rev() {
                let j = rng.below(i as u64 + 1) as usize;
                v.swap(i, j);
            }
            prop_assert_eq!(d, ks_statistic(&v).unwrap());
        }

        #[test]
        fn chi2_statistic_reflection_invariant(v in prop::collection::vec(0.001f64..0.999, 1..30)) {
            let a = chi2_pit_test(&v).unwrap().statistic;
            let flipped: Vec<f64> = v.iter().map(|p| 1.0 - p).collect();
            let b = chi2_pit_test(&flipped).unwrap().statistic;
            prop_assert!((a - b).abs() < 1e-9 * a.max(1.0));
        }

        #[test]
        fn rank_reflection_sums_to_m(v in prop::collection::vec(-10.0f64..10.0, 1..30), x in -10.0f64..10.0) {
            prop_assume!(!v.contains(&x));
            let neg: Vec<f64> = v.iter().map(|e| -e).collect();
            prop_assert_eq!(rank_statistic(&v, x) + rank_statistic(&neg, -x), v.len());
        }
    }
}
