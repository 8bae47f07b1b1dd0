//! Seeded synthetic series and markets with known statistical structure.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};
use crate::surrogates::rng;

/// i.i.d. standard Gaussian samples.
pub fn gaussian_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
}

/// Autocovariance of unit-variance fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(hurst: f64, k: usize) -> f64 {
    let k = k as f64;
    let e = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
}

/// Fractional Gaussian noise by circulant embedding (Davies–Harte).
pub fn fgn(n: usize, hurst: f64, seed: u64) -> Result<Vec<f64>> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return invalid("Hurst exponent must lie in (0, 1)");
    }
    if n < 2 {
        return invalid("fGn length must be at least 2");
    }
    let m = 2 * n;
    let mut c: Vec<Complex64> = (0..m)
        .map(|j| {
            let k = if j <= n { j } else { m - j };
            Complex64::new(fgn_autocovariance(hurst, k), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut c);
    let mut r = rng(seed);
    let mut w: Vec<Complex64> = c
        .iter()
        .map(|l| {
            let a = (l.re.max(0.0) / m as f64).sqrt();
            Complex64::new(a * r.sample::<f64, _>(StandardNormal), a * r.sample::<f64, _>(StandardNormal))
        })
        .collect();
    fft.process(&mut w);
    Ok(w[..n].iter().map(|z| z.re).collect())
}

/// Deterministic binomial multiplicative cascade with `2^levels` cells: each
/// cell hands a fraction `p` of its mass to the left child and `1 - p` to the
/// right child.
pub fn binomial_cascade(levels: u32, p: f64) -> Vec<f64> {
    let mut x = vec![1.0];
    for _ in 0..levels {
        x = x.iter().flat_map(|v| [v * p, v * (1.0 - p)]).collect();
    }
    x
}

/// Stationary AR(1) process with unit innovation variance.
pub fn ar1(n: usize, phi: f64, seed: u64) -> Result<Vec<f64>> {
    if phi.abs() >= 1.0 {
        return invalid("AR(1) coefficient must satisfy |phi| < 1");
    }
    let mut r = rng(seed);
    let mut x = Vec::with_capacity(n);
    let mut prev = r.sample::<f64, _>(StandardNormal) / (1.0 - phi * phi).sqrt();
    for _ in 0..n {
        x.push(prev);
        prev = phi * prev + r.sample::<f64, _>(StandardNormal);
    }
    Ok(x)
}

/// Pareto samples with `P(X > x) = x^{-gamma}` for `x ≥ 1`.
pub fn pareto(n: usize, gamma: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| (1.0 - r.random::<f64>()).powf(-1.0 / gamma)).collect()
}

/// `r_i = β_i f + ε_i` with unit-variance factor and noise, `β_i ~ U[beta_lo, beta_hi]`.
pub fn one_factor_market(assets: usize, len: usize, beta: (f64, f64), seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let betas: Vec<f64> = {
        let u = Uniform::new_inclusive(beta.0, beta.1).expect("valid beta range");
        (0..assets).map(|_| u.sample(&mut r)).collect()
    };
    let f: Vec<f64> = (0..len).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    betas
        .iter()
        .map(|b| f.iter().map(|fv| b * fv + r.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

/// Market of one dominant asset (index 0) and `peripherals` assets that follow
/// it with loadings in `[0.8, 1.2]` plus idiosyncratic noise of std
/// `noise_std`. Returns quote-currency log-returns.
pub fn dominant_market(peripherals: usize, len: usize, noise_std: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let d: Vec<f64> = (0..len).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    let u = Uniform::new_inclusive(0.8, 1.2).expect("valid range");
    let mut out = vec![d.clone()];
    for _ in 0..peripherals {
        let b = u.sample(&mut r);
        out.push(d.iter().map(|v| b * v + noise_std * r.sample::<f64, _>(StandardNormal)).collect());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, variance};

    #[test]
    fn cascade_conserves_mass() {
        let c = binomial_cascade(10, 0.3);
        assert_eq!(c.len(), 1024);
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((c[0] - 0.3f64.powi(10)).abs() < 1e-18);
    }

    #[test]
    fn fgn_lag_one_covariance() {
        let h = 0.7;
        let mut acc = 0.0;
        let mut var = 0.0;
        for seed in 0..20 {
            let x = fgn(4096, h, seed).unwrap();
            acc += x.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / 4095.0;
            var += variance(&x);
        }
        assert!((var / 20.0 - 1.0).abs() < 0.05);
        assert!((acc / 20.0 - fgn_autocovariance(h, 1)).abs() < 0.03);
    }

    #[test]
    fn noise_is_seeded() {
        assert_eq!(gaussian_noise(10, 5), gaussian_noise(10, 5));
        assert_ne!(gaussian_noise(10, 5), gaussian_noise(10, 6));
        let x = gaussian_noise(100_000, 1);
        assert!(mean(&x).abs() < 0.02);
        assert!((variance(&x) - 1.0).abs() < 0.02);
    }
}
