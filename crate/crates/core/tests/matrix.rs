use fractalis::matrix::{
    base_ladder, correlation_matrix, eigen, mp_bounds, mp_pdf, normalized_panel, quasi_idempotence_of, rebase,
    remove_market_factor, residual_matrix, AssetPanel, Base, CorrelationMatrix,
};
use fractalis::synthetic;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn panel(series: Vec<Vec<f64>>) -> AssetPanel {
    let labels = (0..series.len()).map(|i| format!("A{i}")).collect();
    AssetPanel::new("USD", labels, series).unwrap()
}

fn quote(p: &AssetPanel) -> CorrelationMatrix {
    correlation_matrix(&rebase(p, &Base::Quote).unwrap()).unwrap()
}

fn off_diagonal(c: &CorrelationMatrix) -> Vec<f64> {
    let n = c.dim();
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| c.get(i, j)).collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn mp_density_integrates_to_one() {
    for q in [2.0, 4.0, 20.0] {
        let (lo, hi) = mp_bounds(q, 1.3);
        let k = 200_000;
        let h = (hi - lo) / k as f64;
        let total: f64 = (0..k).map(|i| mp_pdf(lo + (i as f64 + 0.5) * h, q, 1.3) * h).sum();
        assert!((total - 1.0).abs() < 1e-4, "Q = {q}: {total}");
        assert_eq!(mp_pdf(hi + 0.01, q, 1.3), 0.0);
        assert_eq!(mp_pdf(lo - 0.01, q, 1.3), 0.0);
    }
    let (lo, hi) = mp_bounds(4.0, 1.0);
    assert!((lo - 0.25).abs() < 1e-15 && (hi - 2.25).abs() < 1e-15);
}

#[test]
fn rebasing_subtracts_the_base_and_adds_the_quote() {
    let p = panel(vec![vec![0.1, -0.2, 0.3], vec![0.05, 0.0, -0.1], vec![0.2, 0.2, 0.0]]);
    let r = rebase(&p, &Base::Asset("A1".into())).unwrap();
    assert_eq!(r.base, "A1");
    assert_eq!(r.labels, ["A0", "A2", "USD"]);
    assert_eq!(r.series[0], [0.1 - 0.05, -0.2, 0.3 + 0.1]);
    assert_eq!(r.series[2], [-0.05, -0.0, 0.1]);
    let f = rebase(&p, &Base::Fictitious { sigma: 0.01, seed: 1 }).unwrap();
    assert_eq!(f.labels.len(), 4);
    assert_eq!(f, rebase(&p, &Base::Fictitious { sigma: 0.01, seed: 1 }).unwrap());
}

#[test]
fn regressor_orthogonal_to_the_panel_leaves_the_matrix_unchanged() {
    let (n, t) = (6, 400);
    let p = panel(synthetic::one_factor_market(n, t, (0.5, 1.0), 3));
    let r = rebase(&p, &Base::Quote).unwrap();
    let g = normalized_panel(&r);
    let design = DMatrix::from_fn(t, n + 1, |i, k| if k == 0 { 1.0 } else { g[k - 1][i] });
    let q = design.qr().q();
    let z0 = DVector::from_vec(synthetic::gaussian_noise(t, 9));
    let z = &z0 - &q * (q.transpose() * &z0);
    let res = residual_matrix(&r, z.as_slice()).unwrap();
    let orig = quote(&p);
    for (a, b) in res.entries.iter().zip(&orig.entries) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn factor_removal_on_a_one_factor_market() {
    let (n, t) = (20, 10_000);
    let p = panel(synthetic::one_factor_market(n, t, (0.5, 1.0), 1));
    let fr = remove_market_factor(&rebase(&p, &Base::Quote).unwrap()).unwrap();
    assert!(fr.residual_eigen.lambda_max() < 0.3 * fr.original_eigen.lambda_max());
    // The eigensignal is a combination of the series, so one residual
    // direction vanishes and residual correlations settle near -1/(N - 1).
    assert!(fr.residual_eigen.eigenvalues[0].abs() < 1e-8);
    let off = off_diagonal(&fr.residual);
    let mean = off.iter().sum::<f64>() / off.len() as f64;
    assert!((mean + 1.0 / (n as f64 - 1.0)).abs() < 0.01, "mean residual correlation {mean}");
    assert!(off.iter().all(|c| c.abs() < 0.1));
}

#[test]
fn ladder_is_sorted_and_led_by_the_dominant_asset() {
    let p = panel(synthetic::dominant_market(6, 1500, 0.5, 2));
    let mut bases = vec![Base::Quote];
    bases.extend(p.labels.iter().map(|l| Base::Asset(l.clone())));
    let rows = base_ladder(&p, &bases).unwrap();
    assert!(rows.windows(2).all(|w| w[0].lambda_max <= w[1].lambda_max));
    assert_eq!(rows[0].base, "A0");
}

fn qi_oracle(n: usize, m0: &[f64], steps: usize) -> f64 {
    let a = DMatrix::from_row_slice(n, n, m0).map(|v| v.max(0.0));
    let mut m = a.clone();
    for _ in 0..steps {
        let sq = &m * &m;
        m = &sq / sq.norm();
    }
    let up = |x: &DMatrix<f64>| -> Vec<f64> { (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| x[(i, j)]).collect() };
    pearson(&up(&a), &up(&m))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn eigen_reconstructs_and_preserves_trace(seed in 0u64..1000, n in 2usize..12) {
        let p = panel((0..n).map(|i| synthetic::gaussian_noise(60, seed * 100 + i as u64)).collect());
        let c = quote(&p);
        let e = eigen(&c).unwrap();
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((e.eigenvalues.iter().sum::<f64>() - n as f64).abs() < 1e-9);
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| e.eigenvectors[k][i] * e.eigenvalues[k] * e.eigenvectors[k][j]).sum();
                prop_assert!((v - c.get(i, j)).abs() < 1e-10);
            }
        }
        for v in &e.eigenvectors {
            let s: f64 = v.iter().sum();
            let lead = v.iter().find(|x| x.abs() > 1e-12).unwrap();
            prop_assert!(s > 1e-12 || (s.abs() <= 1e-12 && *lead > 0.0));
        }
    }

    #[test]
    fn quasi_idempotence_matches_repeated_squaring(w in prop::collection::vec(0.05f64..1.0, 45)) {
        let n = 10;
        let mut m = vec![1.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                m[i * n + j] = w[k];
                m[j * n + i] = w[k];
                k += 1;
            }
        }
        let q = quasi_idempotence_of(n, &m).unwrap();
        prop_assert!(q.converged);
        prop_assert!((q.iota - qi_oracle(n, &m, 60)).abs() < 1e-8);
    }

    #[test]
    fn correlation_entries_are_pearson(seed in 0u64..1000) {
        let s: Vec<Vec<f64>> = (0..3).map(|i| synthetic::gaussian_noise(50, seed * 7 + i)).collect();
        let c = quote(&panel(s.clone()));
        prop_assert!((c.get(0, 1) - pearson(&s[0], &s[1])).abs() < 1e-12);
        prop_assert!((c.get(1, 2) - pearson(&s[1], &s[2])).abs() < 1e-12);
        prop_assert_eq!(c.get(2, 2), 1.0);
    }
}
