//! Surrogate series: Fourier phase randomization and shuffling.
//!
//! All randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! a 64-bit seed through `SeedableRng::seed_from_u64`, so a given seed gives the
//! same surrogate on every platform. Realization `k` of a batch uses seed
//! `seed + k`.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{insufficient, invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurrogateKind {
    Fourier,
    Shuffle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    pub seed: u64,
    pub realizations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub values: Vec<f64>,
    /// Final sample dropped because the Fourier input had odd length.
    pub truncated: bool,
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Keeps every Fourier amplitude and draws new uniform phases with conjugate
/// symmetry. The zero-frequency and Nyquist bins keep their values.
pub fn fourier_surrogate(series: &[f64], seed: u64) -> Result<Surrogate> {
    if series.len() < 8 {
        return insufficient("Fourier surrogate needs at least 8 samples");
    }
    let truncated = series.len() % 2 == 1;
    let n = series.len() - truncated as usize;
    let mut buf: Vec<Complex64> = series[..n].iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);

    let mut r = rng(seed);
    for k in 1..n / 2 {
        let phase = r.random::<f64>() * 2.0 * PI;
        let z = Complex64::from_polar(buf[k].norm(), phase);
        buf[k] = z;
        buf[n - k] = z.conj();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(Surrogate {
        values: buf.iter().map(|z| z.re * scale).collect(),
        truncated,
    })
}

/// Uniformly random permutation (Fisher–Yates).
pub fn shuffle_surrogate(series: &[f64], seed: u64) -> Result<Surrogate> {
    if series.len() < 2 {
        return insufficient("shuffle surrogate needs at least 2 samples");
    }
    let mut values = series.to_vec();
    values.shuffle(&mut rng(seed));
    Ok(Surrogate {
        values,
        truncated: false,
    })
}

pub fn surrogate(series: &[f64], kind: SurrogateKind, seed: u64) -> Result<Surrogate> {
    match kind {
        SurrogateKind::Fourier => fourier_surrogate(series, seed),
        SurrogateKind::Shuffle => shuffle_surrogate(series, seed),
    }
}

/// `spec.realizations` surrogates, realization `k` seeded with `seed + k`.
pub fn realizations(series: &[f64], spec: SurrogateSpec) -> Result<Vec<Surrogate>> {
    if spec.realizations == 0 {
        return invalid("realizations must be at least 1");
    }
    (0..spec.realizations as u64)
        .into_par_iter()
        .map(|k| surrogate(series, spec.kind, spec.seed.wrapping_add(k)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shuffle_small_is_reproducible() {
        let a = shuffle_surrogate(&[1.0, 2.0, 3.0], 7).unwrap();
        let b = shuffle_surrogate(&[1.0, 2.0, 3.0], 7).unwrap();
        assert_eq!(a, b);
        let mut s = a.values.clone();
        s.sort_by(f64::total_cmp);
        assert_eq!(s, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn fourier_odd_length_truncates() {
        let x: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
        let s = fourier_surrogate(&x, 1).unwrap();
        assert!(s.truncated);
        assert_eq!(s.values.len(), 8);
        assert!(fourier_surrogate(&x[..7], 1).is_err());
    }

    #[test]
    fn sinusoid_stays_a_sinusoid() {
        let n = 64;
        let x: Vec<f64> = (0..n).map(|i| 2.0 * (2.0 * PI * 5.0 * i as f64 / n as f64).cos()).collect();
        let s = fourier_surrogate(&x, 3).unwrap().values;
        // least-squares fit of a cos + b sin at the same frequency reproduces s
        let w = 2.0 * PI * 5.0 / n as f64;
        let a: f64 = s.iter().enumerate().map(|(i, v)| v * (w * i as f64).cos()).sum::<f64>() * 2.0 / n as f64;
        let b: f64 = s.iter().enumerate().map(|(i, v)| v * (w * i as f64).sin()).sum::<f64>() * 2.0 / n as f64;
        assert!(((a * a + b * b).sqrt() - 2.0).abs() < 1e-10);
        for (i, v) in s.iter().enumerate() {
            let fit = a * (w * i as f64).cos() + b * (w * i as f64).sin();
            assert!((v - fit).abs() < 1e-10);
        }
    }

    #[test]
    fn realizations_use_offset_seeds() {
        let x: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let spec = SurrogateSpec {
            kind: SurrogateKind::Shuffle,
            seed: 10,
            realizations: 3,
        };
        let r = realizations(&x, spec).unwrap();
        assert_eq!(r[2], shuffle_surrogate(&x, 12).unwrap());
    }
}
