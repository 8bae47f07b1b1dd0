//! Distribution tails, power-law regression and linear autocorrelation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{insufficient, invalid, Result};
use crate::stats::{linear_fit, mean_std};

/// Bins per decade used by the log-binned CCDF.
pub const CCDF_BINS_PER_DECADE: usize = 32;
/// Log-binned CCDF points backed by fewer exceedances than this are dropped.
pub const MIN_BIN_EXCEEDANCES: usize = 10;
/// Minimum number of samples in the tail region.
pub const MIN_TAIL_SAMPLES: usize = 100;

/// Empirical survival function `P(X > x)` at each distinct sample value.
///
/// The last point (the sample maximum) carries probability zero.
pub fn empirical_ccdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return insufficient("empty sample");
    }
    if values.iter().any(|v| !(*v >= 0.0)) {
        return invalid("CCDF input must be nonnegative");
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        out.push((x, (sorted.len() - j) as f64 / n));
        i = j;
    }
    Ok(out)
}

/// Result of [`powerlaw_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub stderr: f64,
    /// Intercept of the fit in natural-log coordinates.
    pub intercept: f64,
    pub n_points: usize,
    pub range: (f64, f64),
}

/// Least squares on `(ln x, ln y)` for the points with `lo <= x <= hi`.
pub fn powerlaw_fit(x: &[f64], y: &[f64], range: (f64, f64)) -> Result<PowerLawFit> {
    if x.len() != y.len() {
        return invalid("x and y differ in length");
    }
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (&a, &b) in x.iter().zip(y) {
        if a < range.0 || a > range.1 {
            continue;
        }
        if !(a > 0.0) || !(b > 0.0) {
            return invalid(format!("nonpositive value in fit range: ({a}, {b})"));
        }
        lx.push(a.ln());
        ly.push(b.ln());
    }
    if lx.len() < 3 {
        return insufficient(format!("{} points in fit range, need 3", lx.len()));
    }
    let fit = linear_fit(&lx, &ly).ok_or_else(|| crate::Error::InsufficientData("degenerate abscissae".into()))?;
    Ok(PowerLawFit {
        exponent: fit.slope,
        stderr: fit.slope_stderr,
        intercept: fit.intercept,
        n_points: fit.n,
        range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailMethod {
    /// Hill estimator on the top order statistics.
    Hill,
    /// Regression of the log-binned CCDF in log-log coordinates.
    LogLog,
}

/// Tail exponent of `P(X > x) ~ x^-gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub gamma: f64,
    /// Estimator standard error (`gamma / sqrt(k)` for Hill, regression stderr for log-log).
    pub stderr: f64,
    pub tail_fraction: f64,
    pub n_tail: usize,
    /// Bootstrap standard error, when requested via [`tail_exponent_bootstrap`].
    pub bootstrap_stderr: Option<f64>,
}

/// Estimates the tail exponent from the top `tail_fraction` of the sample.
pub fn tail_exponent(values: &[f64], tail_fraction: f64, method: TailMethod) -> Result<TailFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return invalid(format!("tail fraction must lie in (0, 1], got {tail_fraction}"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ((sorted.len() as f64) * tail_fraction).floor() as usize;
    let k = k.min(sorted.len().saturating_sub(1));
    if k < MIN_TAIL_SAMPLES {
        return insufficient(format!("{k} tail samples, need {MIN_TAIL_SAMPLES}"));
    }
    // threshold is the largest value outside the tail
    let threshold = sorted[k];
    if !(threshold > 0.0) {
        return invalid("tail contains zero or negative values");
    }
    match method {
        TailMethod::Hill => {
            let s: f64 = sorted[..k].iter().map(|v| (v / threshold).ln()).sum();
            if !(s > 0.0) {
                return invalid("degenerate tail (all samples equal)");
            }
            let gamma = k as f64 / s;
            Ok(TailFit {
                gamma,
                stderr: gamma / (k as f64).sqrt(),
                tail_fraction,
                n_tail: k,
                bootstrap_stderr: None,
            })
        }
        TailMethod::LogLog => {
            let n = sorted.len() as f64;
            let max = sorted[0];
            let step = 10f64.powf(1.0 / CCDF_BINS_PER_DECADE as f64);
            let mut points = Vec::new();
            let mut edge = threshold;
            while edge < max {
                // sorted descending: exceedances of `edge` form a prefix
                let count = sorted.partition_point(|v| *v > edge);
                if count < MIN_BIN_EXCEEDANCES {
                    break;
                }
                points.push((edge, count as f64 / n));
                edge *= step;
            }
            let fit = ccdf_power_law(&points)?;
            Ok(TailFit {
                gamma: fit.exponent,
                stderr: fit.stderr,
                tail_fraction,
                n_tail: k,
                bootstrap_stderr: None,
            })
        }
    }
}

/// Log-log regression of CCDF points, returning the negated slope as exponent.
pub fn ccdf_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let mut fit = powerlaw_fit(&x, &y, (f64::MIN_POSITIVE, f64::INFINITY))?;
    fit.exponent = -fit.exponent;
    Ok(fit)
}

/// Tail fit with an additional bootstrap standard error from `resamples`
/// resamplings with replacement (ChaCha20 generator seeded by `seed`).
pub fn tail_exponent_bootstrap(
    values: &[f64],
    tail_fraction: f64,
    method: TailMethod,
    resamples: usize,
    seed: u64,
) -> Result<TailFit> {
    let mut fit = tail_exponent(values, tail_fraction, method)?;
    if resamples >= 2 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut draws = Vec::with_capacity(resamples);
        let mut buf = vec![0.0; values.len()];
        for _ in 0..resamples {
            for b in buf.iter_mut() {
                *b = values[rng.random_range(0..values.len())];
            }
            if let Ok(f) = tail_exponent(&buf, tail_fraction, method) {
                draws.push(f.gamma);
            }
        }
        if draws.len() >= 2 {
            fit.bootstrap_stderr = Some(mean_std(&draws).1);
        }
    }
    Ok(fit)
}

/// Normalizer applied to the lagged cross-products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AcfNormalizer {
    /// Divide the lag-τ sum by N (positive semidefinite).
    #[default]
    Biased,
    /// Divide the lag-τ sum by N - τ.
    Unbiased,
}

/// Autocorrelation values for lags `1..=max_lag`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfResult {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
}

/// Autocorrelation of a series; the series is standardized internally.
pub fn acf(series: &[f64], max_lag: usize, normalizer: AcfNormalizer) -> Result<AcfResult> {
    let n = series.len();
    if max_lag == 0 || 2 * max_lag >= n {
        return invalid(format!("max_lag must be in 1..{}", n.div_ceil(2)));
    }
    let (m, s) = mean_std(series);
    if !(s > 0.0) {
        return invalid("constant series has no autocorrelation");
    }
    let z: Vec<f64> = series.iter().map(|v| (v - m) / s).collect();
    let lags: Vec<usize> = (1..=max_lag).collect();
    let values = lags
        .iter()
        .map(|&tau| {
            let sum: f64 = z[tau..].iter().zip(&z[..n - tau]).map(|(a, b)| a * b).sum();
            let denom = match normalizer {
                AcfNormalizer::Biased => n,
                AcfNormalizer::Unbiased => n - tau,
            };
            sum / denom as f64
        })
        .collect();
    Ok(AcfResult { lags, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ccdf_ranks() {
        let c = empirical_ccdf(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c[0], (1.0, 2.0 / 3.0));
        assert_eq!(c[1], (2.0, 1.0 / 3.0));
        assert_eq!(c[2], (3.0, 0.0));
    }

    #[test]
    fn ccdf_all_equal() {
        assert_eq!(empirical_ccdf(&[5.0; 4]).unwrap(), vec![(5.0, 0.0)]);
        assert!(empirical_ccdf(&[]).is_err());
        assert!(empirical_ccdf(&[-1.0]).is_err());
    }

    #[test]
    fn powerlaw_exact() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let f = powerlaw_fit(&x, &y, (0.0, 100.0)).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!(f.stderr < 1e-7);
        let y: Vec<f64> = x.iter().map(|v| 5.0 * v.sqrt()).collect();
        let f = powerlaw_fit(&x, &y, (0.0, 100.0)).unwrap();
        assert!((f.exponent - 0.5).abs() < 1e-12);
        assert!((f.intercept - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn powerlaw_errors() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!(powerlaw_fit(&x, &[1.0, 2.0, 3.0, 4.0], (3.0, 4.0)).is_err());
        assert!(powerlaw_fit(&x, &[1.0, -2.0, 3.0, 4.0], (0.0, 10.0)).is_err());
    }

    #[test]
    fn loglog_noiseless() {
        let pts: Vec<(f64, f64)> = (0..50).map(|i| {
            let x = 1.0 + i as f64 * 0.37;
            (x, x.powf(-2.7))
        }).collect();
        let f = ccdf_power_law(&pts).unwrap();
        assert!((f.exponent - 2.7).abs() < 1e-10);
    }

    #[test]
    fn periodic_acf() {
        let x: Vec<f64> = (0..100).map(|i| if (i / 2) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let a = acf(&x, 10, AcfNormalizer::Unbiased).unwrap();
        assert!((a.values[3] - 1.0).abs() < 1e-12);
        let b = acf(&x, 10, AcfNormalizer::Biased).unwrap();
        assert!((b.values[3] - 0.96).abs() < 1e-12);
    }

    #[test]
    fn acf_errors() {
        assert!(acf(&[1.0; 10], 2, AcfNormalizer::Biased).is_err());
        assert!(acf(&[1.0, 2.0, 3.0, 4.0], 2, AcfNormalizer::Biased).is_err());
    }

    #[test]
    fn too_few_tail_samples() {
        let x: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert!(tail_exponent(&x, 0.01, TailMethod::Hill).is_err());
        assert!(tail_exponent(&x, 0.2, TailMethod::Hill).is_ok());
    }
}
