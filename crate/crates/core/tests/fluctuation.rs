use fractalis::detrended::{q_grid, surface, surface_triple, FluctuationSurface, SurfaceConfig};
use fractalis::scaling::{
    cascade_hurst, fit_exponents, hxy_and_dxy, rho, rho_bar, rho_of, rho_trend, spectrum, spectrum_from, FitRange,
};
use fractalis::surrogates::{fourier_surrogate, shuffle_surrogate};
use fractalis::synthetic;
use proptest::prelude::*;

fn small_config() -> SurfaceConfig {
    SurfaceConfig {
        q_grid: q_grid(-3.0, 3.0, 1.0),
        s_grid: vec![8, 12, 20, 32],
        poly_order: 2,
    }
}

fn series(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rho_is_bounded_and_symmetric(x in series(300), y in series(300)) {
        let cfg = small_config();
        let a = rho_of(&x, &y, &cfg).unwrap();
        let b = rho_of(&y, &x, &cfg).unwrap();
        for i in 0..a.values.len() {
            prop_assert_eq!(a.defined[i], b.defined[i]);
            if a.defined[i] {
                prop_assert!(a.values[i].abs() <= 1.0 + 1e-12);
                prop_assert!((a.values[i] - b.values[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rho_is_affine_invariant(x in series(300), y in series(300), a in 0.1f64..5.0, b in -3.0f64..3.0, neg in any::<bool>()) {
        let cfg = small_config();
        let sign = if neg { -1.0 } else { 1.0 };
        let y2: Vec<f64> = y.iter().map(|v| sign * a * v + b).collect();
        let r = rho_of(&x, &y, &cfg).unwrap();
        let r2 = rho_of(&x, &y2, &cfg).unwrap();
        for i in 0..r.values.len() {
            if r.defined[i] && r2.defined[i] {
                prop_assert!((r2.values[i] - sign * r.values[i]).abs() <= 1e-9);
            }
        }
        let lin: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let one = rho_of(&x, &lin, &cfg).unwrap();
        for (v, d) in one.values.iter().zip(&one.defined) {
            prop_assert!(*d && (v - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn fluctuation_scales_with_amplitude(x in series(256), a in 0.01f64..100.0, shift in -50.0f64..50.0) {
        let cfg = small_config();
        let f = surface(&x, None, &cfg).unwrap();
        let y: Vec<f64> = x.iter().map(|v| a * v + shift).collect();
        let g = surface(&y, None, &cfg).unwrap();
        for i in 0..f.values.len() {
            if f.defined[i] && g.defined[i] {
                prop_assert!((g.values[i] / (a * f.values[i]) - 1.0).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn cross_moments_obey_cauchy_schwarz(x in series(240), y in series(240)) {
        let cfg = small_config();
        let t = surface_triple(&x, &y, &cfg).unwrap();
        for (qi, q) in cfg.q_grid.iter().enumerate() {
            if *q > 0.0 {
                for si in 0..cfg.s_grid.len() {
                    let bound = (t.xx.moment(qi, si) * t.yy.moment(qi, si)).sqrt();
                    prop_assert!(t.xy.moment(qi, si).abs() <= bound * (1.0 + 1e-9));
                }
            }
        }
    }

    #[test]
    fn binary_cache_roundtrips(x in series(200)) {
        let f = surface(&x, None, &small_config()).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        let g = FluctuationSurface::read_binary(buf.as_slice()).unwrap();
        prop_assert_eq!(f, g);
    }

    #[test]
    fn constant_h_gives_a_point_spectrum(a in 0.1f64..0.9) {
        let q = q_grid(-4.0, 4.0, 0.5);
        let h = vec![a; q.len()];
        let sp = spectrum_from(&q, &h, vec![]).unwrap();
        prop_assert!(sp.width < 1e-12);
        prop_assert!(sp.alpha.iter().all(|x| (x - a).abs() < 1e-12));
        prop_assert_eq!(sp.asymmetry, 0.0);
    }
}

#[test]
fn cross_surface_of_identical_inputs_is_the_auto_surface() {
    let x = synthetic::fgn(3000, 0.65, 4).unwrap();
    let cfg = SurfaceConfig::defaults(x.len());
    let a = surface(&x, None, &cfg).unwrap();
    let c = surface(&x, Some(&x), &cfg).unwrap();
    assert_eq!(a.values, c.values);
    assert_eq!(a.defined, c.defined);
}

#[test]
fn shuffling_destroys_persistence() {
    let n = 1 << 15;
    let x = synthetic::fgn(n, 0.8, 1).unwrap();
    let cfg = SurfaceConfig::defaults(n);
    let fr = FitRange::middle(&cfg.s_grid);
    let h = fit_exponents(&surface(&x, None, &cfg).unwrap(), fr).unwrap().at(2.0).unwrap();
    let xs = shuffle_surrogate(&x, 2).unwrap().values;
    let hs = fit_exponents(&surface(&xs, None, &cfg).unwrap(), fr).unwrap().at(2.0).unwrap();
    assert!((h - 0.8).abs() < 0.04, "h = {h}");
    assert!((hs - 0.5).abs() < 0.04, "shuffled h = {hs}");
}

#[test]
fn fourier_surrogate_keeps_linear_persistence() {
    let n = 1 << 15;
    let x = synthetic::fgn(n, 0.75, 8).unwrap();
    let cfg = SurfaceConfig::defaults(n);
    let fr = FitRange::middle(&cfg.s_grid);
    let h = fit_exponents(&surface(&x, None, &cfg).unwrap(), fr).unwrap().at(2.0).unwrap();
    let xf = fourier_surrogate(&x, 3).unwrap().values;
    let hf = fit_exponents(&surface(&xf, None, &cfg).unwrap(), fr).unwrap().at(2.0).unwrap();
    assert!((h - hf).abs() < 0.04, "h = {h}, surrogate h = {hf}");
}

#[test]
fn cascade_surrogates_narrow_the_spectrum() {
    let x = synthetic::binomial_cascade(14, 0.3);
    let cfg = SurfaceConfig {
        q_grid: q_grid(-4.0, 4.0, 0.2),
        s_grid: (4..=11).map(|k| 1usize << k).collect(),
        poly_order: 2,
    };
    let fr = FitRange::new(64, 2048);
    let width = |v: &[f64]| spectrum(&fit_exponents(&surface(v, None, &cfg).unwrap(), fr).unwrap()).unwrap().width;
    let w = width(&x);
    assert!(w > 0.9, "cascade width {w}");
    // Shuffling keeps the heavy-tailed marginal, which alone broadens the
    // finite-size spectrum; only the linear surrogate collapses it.
    for seed in 0..3 {
        let wf = width(&fourier_surrogate(&x, seed).unwrap().values);
        let ws = width(&shuffle_surrogate(&x, seed).unwrap().values);
        assert!(wf < 0.3 * w, "Fourier surrogate width {wf} vs {w}");
        assert!(ws < w, "shuffled width {ws} vs {w}");
    }
}

#[test]
fn cascade_exponents_follow_the_analytic_form() {
    assert!((cascade_hurst(0.5, 2.0) - 1.0).abs() < 1e-15);
    let p: f64 = 0.3;
    let expected = 0.5 - (p * p + (1.0 - p) * (1.0 - p)).log2() / 2.0;
    assert!((cascade_hurst(p, 2.0) - expected).abs() < 1e-15);
}

/// Common component whose weight grows with scale: rho rises with s and the
/// cross exponent exceeds the mean of the auto exponents.
#[test]
fn positive_deficit_goes_with_rising_rho() {
    let n = 1 << 15;
    let common = synthetic::fgn(n, 0.9, 21).unwrap();
    let a = synthetic::gaussian_noise(n, 22);
    let b = synthetic::gaussian_noise(n, 23);
    let x: Vec<f64> = common.iter().zip(&a).map(|(c, e)| 0.3 * c + e).collect();
    let y: Vec<f64> = common.iter().zip(&b).map(|(c, e)| 0.3 * c + e).collect();
    let cfg = SurfaceConfig {
        q_grid: vec![1.0, 2.0, 3.0],
        s_grid: fractalis::detrended::default_s_grid(n, 2),
        poly_order: 2,
    };
    let fr = FitRange::middle(&cfg.s_grid);
    let t = surface_triple(&x, &y, &cfg).unwrap();
    let d = hxy_and_dxy(
        &fit_exponents(&t.xx, fr).unwrap(),
        &fit_exponents(&t.yy, fr).unwrap(),
        &fit_exponents(&t.xy, fr).unwrap(),
    )
    .unwrap();
    let r = rho(&t.xy, &t.xx, &t.yy).unwrap();
    let qi = r.q_index(2.0).unwrap();
    let trend = rho_trend(&r, qi, fr).unwrap();
    assert!(d.d_xy[1] > 0.0 && trend > 0.0, "d_xy = {}, trend = {trend}", d.d_xy[1]);
    let bar = rho_bar(&r).unwrap();
    assert!(bar.iter().all(|b| b.unwrap() > 0.0 && b.unwrap() <= 1.0));
}
