use fractalis::surrogates::{fourier_surrogate, realizations, shuffle_surrogate, SurrogateKind, SurrogateSpec};
use proptest::prelude::*;

/// Power spectrum by direct O(n^2) DFT.
fn power(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            re * re + im * im
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn fourier_surrogate_keeps_the_power_spectrum(x in prop::collection::vec(-5.0f64..5.0, 16..160), seed in any::<u64>()) {
        let s = fourier_surrogate(&x, seed).unwrap();
        let n = x.len() - x.len() % 2;
        prop_assert_eq!(s.values.len(), n);
        prop_assert_eq!(s.truncated, x.len() % 2 == 1);
        let (p, ps) = (power(&x[..n]), power(&s.values));
        let scale = p.iter().cloned().fold(1e-12, f64::max);
        for (a, b) in p.iter().zip(&ps) {
            prop_assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn shuffle_is_a_permutation(x in prop::collection::vec(-5.0f64..5.0, 2..200), seed in any::<u64>()) {
        let mut a = x.clone();
        let mut b = shuffle_surrogate(&x, seed).unwrap().values;
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }
}

#[test]
fn realizations_are_seeded_per_index() {
    let x: Vec<f64> = (0..64).map(|i| ((i * 7919) % 101) as f64).collect();
    let spec = SurrogateSpec {
        kind: SurrogateKind::Fourier,
        seed: 10,
        realizations: 3,
    };
    let r = realizations(&x, spec).unwrap();
    assert_eq!(r, realizations(&x, spec).unwrap());
    assert_eq!(r[2], fourier_surrogate(&x, 12).unwrap());
    assert_ne!(r[0].values, r[1].values);
}
