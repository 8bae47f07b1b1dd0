use fractalis::network::{degree_cdf, dendrogram, distances, mst, tree_from_edges, DistanceMatrix, Edge, Linkage, Provenance};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("L{i}")).collect()
}

fn symmetric(n: usize, w: &[f64]) -> DistanceMatrix {
    let mut e = vec![0.0; n * n];
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            e[i * n + j] = w[k];
            e[j * n + i] = w[k];
            k += 1;
        }
    }
    DistanceMatrix::from_entries(labels(n), e).unwrap()
}

/// Coarse weights, so ties are common.
fn distance_matrix() -> impl Strategy<Value = DistanceMatrix> {
    (3usize..7).prop_flat_map(|n| {
        prop::collection::vec(0u8..8, n * (n - 1) / 2)
            .prop_map(move |w| symmetric(n, &w.iter().map(|v| 0.25 * *v as f64 + 0.1).collect::<Vec<_>>()))
    })
}

/// Continuous weights: merge order does not hinge on rounding of exact ties.
fn generic_distance_matrix() -> impl Strategy<Value = DistanceMatrix> {
    (3usize..9).prop_flat_map(|n| prop::collection::vec(0.01f64..2.0, n * (n - 1) / 2).prop_map(move |w| symmetric(n, &w)))
}

/// Minimum sorted-sum weight over all labelled trees (Prüfer decoding).
fn brute_force(d: &DistanceMatrix) -> f64 {
    let n = d.dim();
    let mut best = f64::INFINITY;
    for code in 0..n.pow(n as u32 - 2) {
        let mut c = code;
        let seq: Vec<usize> = (0..n - 2)
            .map(|_| {
                let v = c % n;
                c /= n;
                v
            })
            .collect();
        let mut deg = vec![1; n];
        seq.iter().for_each(|&s| deg[s] += 1);
        let mut w = Vec::new();
        for &s in &seq {
            let leaf = (0..n).find(|&i| deg[i] == 1).unwrap();
            w.push(d.get(leaf, s));
            deg[leaf] -= 1;
            deg[s] -= 1;
        }
        let last: Vec<usize> = (0..n).filter(|&i| deg[i] == 1).collect();
        w.push(d.get(last[0], last[1]));
        w.sort_by(f64::total_cmp);
        best = best.min(w.iter().sum());
    }
    best
}

/// Average linkage by recomputing every cluster distance from the leaves.
/// Cluster ids follow the leaves-then-merges numbering; ties go to the
/// smallest id pair.
fn naive_average(d: &DistanceMatrix) -> Vec<f64> {
    let n = d.dim();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut heights = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut s = 0.0;
                for &i in &clusters[a].1 {
                    for &j in &clusters[b].1 {
                        s += d.get(i, j);
                    }
                }
                let v = s / (clusters[a].1.len() * clusters[b].1.len()) as f64;
                let ids = (clusters[a].0.min(clusters[b].0), clusters[a].0.max(clusters[b].0));
                let better = match best {
                    None => true,
                    Some((bv, bids, _, _)) => v < bv || (v == bv && ids < bids),
                };
                if better {
                    best = Some((v, ids, a, b));
                }
            }
        }
        let (v, _, a, b) = best.unwrap();
        heights.push(v);
        let (_, merged) = clusters.remove(b);
        let mut leaves = clusters.remove(a).1;
        leaves.extend(merged);
        clusters.push((n + heights.len() - 1, leaves));
    }
    heights
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn mst_matches_enumeration(d in distance_matrix()) {
        let t = mst(&d).unwrap();
        prop_assert_eq!(t.edges.len(), d.dim() - 1);
        prop_assert_eq!(t.stats.total_weight, brute_force(&d));
    }

    #[test]
    fn single_linkage_heights_are_mst_weights(d in distance_matrix()) {
        let mut w: Vec<f64> = mst(&d).unwrap().edges.iter().map(|e| e.weight).collect();
        w.sort_by(f64::total_cmp);
        let h: Vec<f64> = dendrogram(&d, Linkage::Single).unwrap().merges.iter().map(|m| m.height).collect();
        prop_assert_eq!(h, w);
    }

    #[test]
    fn average_linkage_matches_naive_recomputation(d in generic_distance_matrix()) {
        let h: Vec<f64> = dendrogram(&d, Linkage::Average).unwrap().merges.iter().map(|m| m.height).collect();
        let oracle = naive_average(&d);
        for (a, b) in h.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn complete_linkage_heights_are_monotone(d in distance_matrix()) {
        let g = dendrogram(&d, Linkage::Complete).unwrap();
        prop_assert!(g.merges.windows(2).all(|w| w[0].height <= w[1].height));
        prop_assert_eq!(g.merges.last().unwrap().size, d.dim());
    }

    #[test]
    fn distances_form_a_metric_range(c in prop::collection::vec(-1.0f64..1.0, 6)) {
        let n = 4;
        let mut corr = vec![1.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                corr[i * n + j] = c[k];
                corr[j * n + i] = c[k];
                k += 1;
            }
        }
        let d = distances(labels(n), &corr, Provenance::Pearson).unwrap();
        for i in 0..n {
            for j in 0..n {
                let v = d.get(i, j);
                prop_assert!((0.0..=2.0).contains(&v));
                if i != j {
                    prop_assert!((v * v / 2.0 - (1.0 - corr[i * n + j])).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn star_and_chain_statistics() {
    let e = |u: &str, v: &str| Edge { u: u.into(), v: v.into(), weight: 1.0 };
    let n = labels(5);
    let star = tree_from_edges(n.clone(), vec![e("L0", "L1"), e("L0", "L2"), e("L0", "L3"), e("L0", "L4")]).unwrap();
    assert_eq!(star.stats.k_max, 4);
    assert!((star.stats.mean_path_length - 1.6).abs() < 1e-12);
    let chain = tree_from_edges(n.clone(), vec![e("L0", "L1"), e("L1", "L2"), e("L2", "L3"), e("L3", "L4")]).unwrap();
    assert!((chain.stats.mean_path_length - 2.0).abs() < 1e-12);
    assert!(tree_from_edges(n, vec![e("L0", "L1"), e("L1", "L0"), e("L2", "L3"), e("L3", "L4")]).is_err());
}

/// Preferential-attachment trees have P(k) ~ k^-3, so P(X >= k) ~ k^-2.
#[test]
fn preferential_attachment_degree_exponent() {
    let n = 20_000;
    let mut r = ChaCha20Rng::seed_from_u64(5);
    let mut ends: Vec<usize> = vec![0, 1];
    let mut edges = vec![(0usize, 1usize)];
    for v in 2..n {
        let u = ends[r.random_range(0..ends.len())];
        edges.push((u, v));
        ends.extend([u, v]);
    }
    let names: Vec<String> = (0..n).map(|i| format!("N{i:05}")).collect();
    let edges = edges
        .into_iter()
        .map(|(a, b)| Edge { u: names[a].clone(), v: names[b].clone(), weight: 1.0 })
        .collect();
    let t = tree_from_edges(names, edges).unwrap();
    let cdf = degree_cdf(&t, 2);
    let g = cdf.fit.unwrap().exponent;
    assert!((g - 2.0).abs() < 0.35, "gamma = {g}");
}

#[test]
fn small_trees_refuse_degree_fits() {
    let d = DistanceMatrix::from_entries(labels(3), vec![0.0, 1.0, 2.0, 1.0, 0.0, 1.5, 2.0, 1.5, 0.0]).unwrap();
    let c = degree_cdf(&mst(&d).unwrap(), 2);
    assert!(c.fit.is_none() && c.refusal.is_some());
}
