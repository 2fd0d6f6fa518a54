//! Small statistics toolbox: moments, bootstrap confidence intervals,
//! Welch's statistic, Kolmogorov–Smirnov distance to the standard normal,
//! and weighted least squares for the finite-size extrapolations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Sample mean and standard error.
pub fn mean_se(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::Stats(format!("need >= 2 samples, got {}", xs.len())));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Percentile bootstrap CI for the difference of means, mean(a) - mean(b).
pub fn bootstrap_mean_diff_ci(
    a: &[f64],
    b: &[f64],
    resamples: usize,
    confidence: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Stats("bootstrap needs >= 2 samples per arm".into()));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::Stats(format!("confidence in (0,1) required, got {confidence}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut diffs = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let ma = resample_mean(a, &mut rng);
        let mb = resample_mean(b, &mut rng);
        diffs.push(ma - mb);
    }
    diffs.sort_by(|x, y| x.total_cmp(y));
    let alpha = (1.0 - confidence) / 2.0;
    let lo = diffs[((resamples as f64 * alpha) as usize).min(resamples - 1)];
    let hi = diffs[((resamples as f64 * (1.0 - alpha)) as usize).min(resamples - 1)];
    Ok((lo, hi))
}

fn resample_mean(xs: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let n = xs.len();
    (0..n).map(|_| xs[rng.gen_range(0..n)]).sum::<f64>() / n as f64
}

/// Welch's t statistic for the difference of means (unequal variances).
pub fn welch_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    let (ma, sa) = mean_se(a)?;
    let (mb, sb) = mean_se(b)?;
    let denom = (sa * sa + sb * sb).sqrt();
    if denom == 0.0 {
        return Err(Error::Stats("zero pooled variance".into()));
    }
    Ok((ma - mb) / denom)
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `xs` and the
/// standard normal CDF.
pub fn ks_distance_normal(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Stats("KS distance of empty sample".into()));
    }
    let normal = Normal::new(0.0, 1.0).expect("valid parameters");
    let mut sorted = xs.to_vec();
    sorted.sort_by(|x, y| x.total_cmp(y));
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal.cdf(x);
        d = d.max((cdf - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - cdf).abs());
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Stats("KS distance of empty sample".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.total_cmp(y));
    sb.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0_f64;
    while i < sa.len() && j < sb.len() {
        if sa[i] <= sb[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Weighted least squares fit y = intercept + slope·x.
/// Returns (intercept, slope, se_intercept).
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() != w.len() {
        return Err(Error::Dimension { expected: x.len(), got: y.len().min(w.len()) });
    }
    if x.len() < 2 {
        return Err(Error::Stats("linear fit needs >= 2 points".into()));
    }
    let sw: f64 = w.iter().sum();
    let sx: f64 = x.iter().zip(w).map(|(x, w)| w * x).sum();
    let sy: f64 = y.iter().zip(w).map(|(y, w)| w * y).sum();
    let sxx: f64 = x.iter().zip(w).map(|(x, w)| w * x * x).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((x, y), w)| w * x * y).sum();
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return Err(Error::Stats("degenerate design matrix".into()));
    }
    let intercept = (sxx * sy - sx * sxy) / det;
    let slope = (sw * sxy - sx * sy) / det;
    // with w_i = 1/se_i², Var(intercept) = sxx/det
    let se_intercept = (sxx / det).sqrt();
    Ok((intercept, slope, se_intercept))
}

/// Weighted least squares fit y = intercept + b·x + c·x².
/// Returns (intercept, b, c, se_intercept). With exactly three points this
/// is the interpolating parabola; the intercept SE still propagates the
/// per-point weights w_i = 1/se_i².
pub fn weighted_quadratic_fit(x: &[f64], y: &[f64], w: &[f64]) -> Result<(f64, f64, f64, f64)> {
    if x.len() != y.len() || x.len() != w.len() {
        return Err(Error::Dimension { expected: x.len(), got: y.len().min(w.len()) });
    }
    if x.len() < 3 {
        return Err(Error::Stats("quadratic fit needs >= 3 points".into()));
    }
    // normal equations A beta = rhs with A = X^T W X (moments of x up to 4)
    let mut m = [0.0_f64; 5];
    let mut rhs = [0.0_f64; 3];
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
        let mut p = wi;
        for mk in m.iter_mut() {
            *mk += p;
            p *= xi;
        }
        rhs[0] += wi * yi;
        rhs[1] += wi * xi * yi;
        rhs[2] += wi * xi * xi * yi;
    }
    let a = [[m[0], m[1], m[2]], [m[1], m[2], m[3]], [m[2], m[3], m[4]]];
    let det = det3(&a);
    if det.abs() < 1e-300 {
        return Err(Error::Stats("degenerate design matrix".into()));
    }
    // Cramer's rule for the coefficients; cofactor expansion gives the
    // (0,0) entry of A^{-1} = Var(intercept) when w_i = 1/se_i²
    let mut coef = [0.0_f64; 3];
    for (k, ck) in coef.iter_mut().enumerate() {
        let mut ak = a;
        for row in 0..3 {
            ak[row][k] = rhs[row];
        }
        *ck = det3(&ak) / det;
    }
    let var00 = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
    Ok((coef[0], coef[1], coef[2], var00.max(0.0).sqrt()))
}

fn det3(a: &[[f64; 3]; 3]) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn mean_se_matches_closed_form() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let (m, se) = mean_se(&xs).unwrap();
        assert!((m - 2.5).abs() < 1e-15);
        // var = 5/3, se = sqrt(5/12)
        assert!((se - (5.0_f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(mean_se(&[1.0]).is_err());
    }

    #[test]
    fn ks_accepts_normal_rejects_uniform() {
        let xs = normal_sample(4000, 1);
        assert!(ks_distance_normal(&xs).unwrap() < 0.03);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let us: Vec<f64> = (0..4000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        assert!(ks_distance_normal(&us).unwrap() > 0.1);
    }

    #[test]
    fn two_sample_ks_same_law_is_small() {
        let a = normal_sample(3000, 3);
        let b = normal_sample(3000, 4);
        assert!(ks_distance_two_sample(&a, &b).unwrap() < 0.05);
        let shifted: Vec<f64> = a.iter().map(|x| x + 2.0).collect();
        assert!(ks_distance_two_sample(&a, &shifted).unwrap() > 0.5);
    }

    #[test]
    fn bootstrap_ci_covers_zero_for_identical_laws() {
        let a = normal_sample(400, 5);
        let b = normal_sample(400, 6);
        let (lo, hi) = bootstrap_mean_diff_ci(&a, &b, 2000, 0.95, 7).unwrap();
        assert!(lo < 0.0 && 0.0 < hi, "CI ({lo}, {hi})");
        // a wider confidence level widens the interval
        let (lo2, hi2) = bootstrap_mean_diff_ci(&a, &b, 2000, 0.99, 7).unwrap();
        assert!(lo2 <= lo && hi2 >= hi);
    }

    #[test]
    fn bootstrap_ci_excludes_zero_for_shifted_laws() {
        let a = normal_sample(400, 8);
        let b: Vec<f64> = normal_sample(400, 9).iter().map(|x| x + 1.0).collect();
        let (lo, hi) = bootstrap_mean_diff_ci(&a, &b, 2000, 0.95, 10).unwrap();
        assert!(hi < 0.0, "CI ({lo}, {hi})");
    }

    #[test]
    fn welch_statistic_detects_shift() {
        let a = normal_sample(500, 11);
        let b: Vec<f64> = normal_sample(500, 12).iter().map(|x| x + 0.5).collect();
        assert!(welch_statistic(&a, &a.to_vec()).unwrap().abs() < 1e-12);
        assert!(welch_statistic(&a, &b).unwrap().abs() > 3.0);
    }

    #[test]
    fn weighted_fit_recovers_exact_line() {
        let x = [0.1, 0.2, 0.5, 1.0];
        let y: Vec<f64> = x.iter().map(|x| 3.0 - 2.0 * x).collect();
        let w = [1.0, 4.0, 2.0, 1.0];
        let (a, b, se) = weighted_linear_fit(&x, &y, &w).unwrap();
        assert!((a - 3.0).abs() < 1e-12);
        assert!((b + 2.0).abs() < 1e-12);
        assert!(se > 0.0);
        assert!(weighted_linear_fit(&x, &y[..3], &w).is_err());
    }

    #[test]
    fn quadratic_fit_recovers_exact_parabola() {
        let x = [0.05, 0.1, 0.2, 0.4];
        let y: Vec<f64> = x.iter().map(|x| 0.06 - 0.5 * x + 1.2 * x * x).collect();
        let w = [4.0, 1.0, 2.0, 1.0];
        let (a, b, c, se) = weighted_quadratic_fit(&x, &y, &w).unwrap();
        assert!((a - 0.06).abs() < 1e-12);
        assert!((b + 0.5).abs() < 1e-12);
        assert!((c - 1.2).abs() < 1e-12);
        assert!(se > 0.0);
        assert!(weighted_quadratic_fit(&x[..2], &y[..2], &w[..2]).is_err());
    }

    #[test]
    fn quadratic_fit_three_points_interpolates_with_lagrange_variance() {
        // exact interpolation through three points; intercept variance must
        // match the Lagrange-weight propagation sum w_i(0)² se_i²
        let x = [0.2, 0.1, 0.05];
        let y = [0.0032, 0.0204, 0.0374];
        let se = [0.00225, 0.00238, 0.00208];
        let w: Vec<f64> = se.iter().map(|s| 1.0 / (s * s)).collect();
        let (a, _, _, se_a) = weighted_quadratic_fit(&x, &y, &w).unwrap();
        let mut lagrange = 0.0;
        let mut expect_a = 0.0;
        for i in 0..3 {
            let mut l = 1.0;
            for j in 0..3 {
                if j != i {
                    l *= x[j] / (x[j] - x[i]);
                }
            }
            expect_a += l * y[i];
            lagrange += l * l * se[i] * se[i];
        }
        assert!((a - expect_a).abs() < 1e-10, "a {a}, lagrange {expect_a}");
        assert!((se_a - lagrange.sqrt()).abs() < 1e-10);
    }
}
