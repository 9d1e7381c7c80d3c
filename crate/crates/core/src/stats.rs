//! Small statistics toolkit: Kolmogorov-Smirnov distances, Wilson score
//! intervals, and least-squares line fits for the log-log estimators.

use crate::error::{Error, Result};

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    assert!(!xs.is_empty());
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Median of a sample; averages the central pair for even sizes.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    let n = s.len();
    if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    assert!(n > 0 && successes <= n);
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// z for a two-sided 95% interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    assert!(!sample.is_empty());
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        let hi = (i as f64 + 1.0) / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).expect("NaN in sample"));
    ys.sort_by(|p, q| p.partial_cmp(q).expect("NaN in sample"));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        if xs[i] <= ys[j] {
            i += 1;
        } else {
            j += 1;
        }
        let diff = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(diff);
    }
    d
}

/// Asymptotic Kolmogorov critical coefficient: P(sup > c) = level.
fn ks_coefficient(level: f64) -> f64 {
    assert!(level > 0.0 && level < 1.0);
    (-(level / 2.0).ln() / 2.0).sqrt()
}

/// Critical value for the one-sample statistic at the given level.
pub fn ks_one_sample_critical(n: usize, level: f64) -> f64 {
    ks_coefficient(level) / (n as f64).sqrt()
}

/// Critical value for the two-sample statistic at the given level.
pub fn ks_two_sample_critical(n: usize, m: usize, level: f64) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    ks_coefficient(level) * ((nf + mf) / (nf * mf)).sqrt()
}

/// Least-squares line y = slope * x + intercept.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DegenerateFit("need at least two paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("no spread in x".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(LineFit { slope, intercept: my - slope * mx, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::PathRng;

    #[test]
    fn wilson_brackets_the_point_estimate() {
        let (lo, hi) = wilson_interval(80, 100, Z_95);
        assert!(lo < 0.8 && 0.8 < hi);
        assert!(lo > 0.70 && hi < 0.88);
    }

    #[test]
    fn ks_one_sample_accepts_uniform_draws() {
        let mut rng = PathRng::new(5, 0);
        let xs: Vec<f64> = (0..10_000).map(|_| rng.uniform()).collect();
        let d = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0));
        assert!(d < ks_one_sample_critical(xs.len(), 0.01), "d = {d}");
    }

    #[test]
    fn ks_two_sample_separates_shifted_samples() {
        let mut rng = PathRng::new(6, 0);
        let a: Vec<f64> = (0..4000).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..4000).map(|_| rng.normal() + 0.5).collect();
        let crit = ks_two_sample_critical(a.len(), b.len(), 0.01);
        let same: Vec<f64> = (0..4000).map(|_| rng.normal()).collect();
        assert!(ks_two_sample(&a, &b) > crit);
        assert!(ks_two_sample(&a, &same) < crit);
    }

    #[test]
    fn exact_line_fits_with_unit_r2() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let fit = least_squares(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_handles_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
