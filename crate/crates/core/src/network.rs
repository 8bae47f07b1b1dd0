//! Correlation networks: metric distances, minimum spanning trees (Prim),
//! tree statistics, degree distributions and agglomerative dendrograms.
//!
//! Ties are broken deterministically. Prim's algorithm starts from the
//! lexicographically first label and, among equally light candidate edges,
//! takes the one whose `(smaller label, larger label)` pair sorts first.
//! Agglomeration merges the closest cluster pair, ties going to the pair with
//! the smallest cluster ids.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detrended::SurfaceConfig;
use crate::distributions::{powerlaw_fit, PowerLawFit};
use crate::error::{insufficient, invalid, Error, Result};
use crate::scaling::{rho_bar, rho_of, RhoSurface};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    /// `√(2(1 − C))`.
    Pearson,
    /// `√(2(1 − |ρ̄(q)|))`.
    RhoBar { q: f64 },
    /// `√(2(1 − ρ(q, s)))`.
    RhoQs { q: f64, s: usize },
    /// Distances supplied directly.
    Given,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    pub entries: Vec<f64>,
    pub provenance: Provenance,
}

impl DistanceMatrix {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim() + j]
    }

    pub fn from_entries(labels: Vec<String>, entries: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if entries.len() != n * n {
            return invalid("distance matrix size does not match label count");
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return invalid(format!("diagonal entry {i} is not zero"));
            }
            for j in 0..n {
                let v = entries[i * n + j];
                if !v.is_finite() || v < 0.0 || v != entries[j * n + i] {
                    return invalid(format!("entry ({i},{j}) is not a finite symmetric distance"));
                }
            }
        }
        Ok(Self {
            labels,
            entries,
            provenance: Provenance::Given,
        })
    }

    /// Mean over all off-diagonal entries.
    pub fn mean_distance(&self) -> f64 {
        let n = self.dim();
        let s: f64 = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.get(i, j)).sum();
        2.0 * s / (n * (n - 1)) as f64
    }
}

/// Converts correlation-like values (row-major, `[-1, 1]`) into distances.
pub fn distances(labels: Vec<String>, corr: &[f64], provenance: Provenance) -> Result<DistanceMatrix> {
    let n = labels.len();
    if corr.len() != n * n {
        return invalid("correlation matrix size does not match label count");
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let c = corr[i * n + j];
            if !c.is_finite() || c.abs() > 1.0 + 1e-9 {
                return invalid(format!("correlation ({i},{j}) = {c} outside [-1, 1]"));
            }
            let c = c.clamp(-1.0, 1.0);
            let c = match provenance {
                Provenance::RhoBar { .. } => c.abs(),
                _ => c,
            };
            entries[i * n + j] = (2.0 * (1.0 - c)).max(0.0).sqrt();
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (entries[i * n + j] + entries[j * n + i]);
            entries[i * n + j] = m;
            entries[j * n + i] = m;
        }
    }
    Ok(DistanceMatrix {
        labels,
        entries,
        provenance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Lexicographically smaller endpoint.
    pub u: String,
    pub v: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeStats {
    pub k_max: usize,
    /// Mean hop count over unordered node pairs.
    pub mean_path_length: f64,
    pub mean_edge_weight: f64,
    /// Mean of all off-diagonal entries of the source distance matrix.
    pub mean_distance: f64,
    /// Sum of edge weights, added in ascending order.
    pub total_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningTree {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    pub stats: TreeStats,
}

impl SpanningTree {
    pub fn degrees(&self) -> Vec<usize> {
        let idx: BTreeMap<&str, usize> = self.nodes.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let mut d = vec![0; self.nodes.len()];
        for e in &self.edges {
            d[idx[e.u.as_str()]] += 1;
            d[idx[e.v.as_str()]] += 1;
        }
        d
    }

    pub fn write_edges_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "u,v,weight")?;
        for e in &self.edges {
            writeln!(w, "{},{},{}", e.u, e.v, e.weight)?;
        }
        Ok(())
    }

    pub fn write_dot<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "graph mst {{")?;
        for n in &self.nodes {
            writeln!(w, "  \"{n}\";")?;
        }
        for e in &self.edges {
            writeln!(w, "  \"{}\" -- \"{}\" [weight={}];", e.u, e.v, e.weight)?;
        }
        writeln!(w, "}}")?;
        Ok(())
    }
}

/// Sum of weights taken in ascending order.
pub fn ordered_sum(weights: &[f64]) -> f64 {
    let mut w = weights.to_vec();
    w.sort_by(f64::total_cmp);
    w.iter().sum()
}

/// Minimum spanning tree by Prim's algorithm with deterministic tie-breaking.
pub fn mst(d: &DistanceMatrix) -> Result<SpanningTree> {
    let n = d.dim();
    if n < 2 {
        return insufficient("a spanning tree needs at least two nodes");
    }
    if d.entries.iter().any(|v| !v.is_finite()) {
        return invalid("distance matrix has non-finite entries");
    }
    let lab = &d.labels;
    let key = |w: f64, a: usize, b: usize| {
        let (x, y) = if lab[a] <= lab[b] { (a, b) } else { (b, a) };
        (w, x, y)
    };
    let less = |p: (f64, usize, usize), q: (f64, usize, usize)| {
        p.0 < q.0 || (p.0 == q.0 && (lab[p.1].as_str(), lab[p.2].as_str()) < (lab[q.1].as_str(), lab[q.2].as_str()))
    };
    let start = (0..n).min_by(|&a, &b| lab[a].cmp(&lab[b])).unwrap();
    let mut in_tree = vec![false; n];
    in_tree[start] = true;
    let mut best: Vec<Option<(f64, usize, usize)>> = (0..n)
        .map(|v| (!in_tree[v]).then(|| key(d.get(start, v), start, v)))
        .collect();
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let mut pick: Option<(usize, (f64, usize, usize))> = None;
        for v in 0..n {
            if let Some(k) = best[v] {
                if pick.is_none_or(|(_, p)| less(k, p)) {
                    pick = Some((v, k));
                }
            }
        }
        let (v, (w, a, b)) = pick.expect("graph is complete");
        in_tree[v] = true;
        best[v] = None;
        edges.push(Edge {
            u: lab[a].clone(),
            v: lab[b].clone(),
            weight: w,
        });
        for x in 0..n {
            if !in_tree[x] {
                let k = key(d.get(v, x), v, x);
                if best[x].is_none_or(|cur| less(k, cur)) {
                    best[x] = Some(k);
                }
            }
        }
    }
    let nodes = d.labels.clone();
    let stats = tree_stats(&nodes, &edges, d.mean_distance());
    Ok(SpanningTree { nodes, edges, stats })
}

fn tree_stats(nodes: &[String], edges: &[Edge], mean_distance: f64) -> TreeStats {
    let n = nodes.len();
    let idx: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        let (a, b) = (idx[e.u.as_str()], idx[e.v.as_str()]);
        adj[a].push(b);
        adj[b].push(a);
    }
    let k_max = adj.iter().map(Vec::len).max().unwrap_or(0);
    let mut hops = 0usize;
    for s in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        hops += dist.iter().filter(|d| **d != usize::MAX).sum::<usize>();
    }
    let weights: Vec<f64> = edges.iter().map(|e| e.weight).collect();
    let total_weight = ordered_sum(&weights);
    TreeStats {
        k_max,
        mean_path_length: hops as f64 / (n * (n - 1)) as f64,
        mean_edge_weight: total_weight / edges.len().max(1) as f64,
        mean_distance,
        total_weight,
    }
}

/// Tree given by an explicit edge list (statistics without a distance matrix).
pub fn tree_from_edges(nodes: Vec<String>, edges: Vec<Edge>) -> Result<SpanningTree> {
    if edges.len() + 1 != nodes.len() {
        return invalid("a tree on N nodes has N - 1 edges");
    }
    let idx: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    if idx.len() != nodes.len() {
        return invalid("duplicate node labels");
    }
    // N - 1 edges form a tree exactly when they never close a cycle.
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn root(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    for e in &edges {
        let (Some(&a), Some(&b)) = (idx.get(e.u.as_str()), idx.get(e.v.as_str())) else {
            return invalid(format!("edge {}-{} names an unknown node", e.u, e.v));
        };
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        if ra == rb {
            return invalid("edge list is not a tree");
        }
        parent[ra] = rb;
    }
    let stats = tree_stats(&nodes, &edges, f64::NAN);
    Ok(SpanningTree { nodes, edges, stats })
}

/// ρ(q, s) surfaces for every unordered pair of a labeled panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoStack {
    pub labels: Vec<String>,
    pub pairs: BTreeMap<(usize, usize), RhoSurface>,
}

impl RhoStack {
    pub fn compute(labels: Vec<String>, series: &[Vec<f64>], cfg: &SurfaceConfig) -> Result<Self> {
        if labels.len() != series.len() || labels.len() < 2 {
            return invalid("need at least two labeled series");
        }
        let n = labels.len();
        let idx: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let surfaces: Vec<RhoSurface> = idx
            .par_iter()
            .map(|&(i, j)| rho_of(&series[i], &series[j], cfg))
            .collect::<Result<_>>()?;
        Ok(Self {
            labels,
            pairs: idx.into_iter().zip(surfaces).collect(),
        })
    }

    fn pair(&self, i: usize, j: usize) -> Result<&RhoSurface> {
        let k = if i < j { (i, j) } else { (j, i) };
        self.pairs
            .get(&k)
            .ok_or_else(|| Error::InvalidInput(format!("missing pair {} / {}", self.labels[k.0], self.labels[k.1])))
    }

    fn matrix(&self, cell: impl Fn(&RhoSurface) -> Result<f64>) -> Result<Vec<f64>> {
        let n = self.labels.len();
        let mut m = vec![1.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = cell(self.pair(i, j)?)?;
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        Ok(m)
    }

    /// ρ(q, s) for all pairs; unit diagonal.
    pub fn rho_matrix(&self, q: f64, s: usize) -> Result<Vec<f64>> {
        self.matrix(|r| {
            let qi = r.q_index(q).ok_or_else(|| Error::InvalidInput(format!("q = {q} not in grid")))?;
            let si = r
                .s_grid
                .iter()
                .position(|v| *v == s)
                .ok_or_else(|| Error::InvalidInput(format!("s = {s} not in grid")))?;
            if !r.is_defined(qi, si) {
                return Err(Error::Numerical(format!("rho undefined at q = {q}, s = {s}")));
            }
            Ok(r.value(qi, si))
        })
    }

    /// ρ̄(q) for all pairs; unit diagonal.
    pub fn rho_bar_matrix(&self, q: f64) -> Result<Vec<f64>> {
        self.matrix(|r| {
            let qi = r.q_index(q).ok_or_else(|| Error::InvalidInput(format!("q = {q} not in grid")))?;
            rho_bar(r)?[qi].ok_or_else(|| Error::Numerical(format!("rho_bar undefined at q = {q}")))
        })
    }
}

/// Spanning tree over `√(2(1 − ρ(q, s)))` distances.
pub fn qmst(stack: &RhoStack, q: f64, s: usize) -> Result<SpanningTree> {
    if q <= 0.0 {
        return invalid("qMST needs q > 0");
    }
    let m = stack.rho_matrix(q, s)?;
    mst(&distances(stack.labels.clone(), &m, Provenance::RhoQs { q, s })?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeCdf {
    /// `(k, P(X ≥ k))` for every distinct degree.
    pub points: Vec<(usize, f64)>,
    /// `γ` of `P(X ≥ k) ∼ k^{−γ}` (sign already flipped).
    pub fit: Option<PowerLawFit>,
    pub refusal: Option<String>,
}

pub const MIN_DISTINCT_DEGREES: usize = 4;
pub const MIN_FIT_NODES: usize = 10;

/// Exceedance distribution of node degrees and a power-law fit over `k ≥ k_min`.
pub fn degree_cdf(tree: &SpanningTree, k_min: usize) -> DegreeCdf {
    let deg = tree.degrees();
    let n = deg.len() as f64;
    let mut distinct = deg.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let points: Vec<(usize, f64)> = distinct
        .iter()
        .map(|&k| (k, deg.iter().filter(|d| **d >= k).count() as f64 / n))
        .collect();
    let refusal = if deg.len() < MIN_FIT_NODES {
        Some(format!("{} nodes, need {MIN_FIT_NODES} for a fit", deg.len()))
    } else if distinct.len() < MIN_DISTINCT_DEGREES {
        Some(format!("{} distinct degrees, need {MIN_DISTINCT_DEGREES}", distinct.len()))
    } else {
        None
    };
    let (fit, refusal) = match refusal {
        Some(r) => (None, Some(r)),
        None => {
            let k_max = *distinct.last().unwrap();
            let (x, y): (Vec<f64>, Vec<f64>) = points.iter().map(|(k, p)| (*k as f64, *p)).unzip();
            match powerlaw_fit(&x, &y, (k_min as f64, k_max as f64)) {
                Ok(mut f) => {
                    f.exponent = -f.exponent;
                    (Some(f), None)
                }
                Err(e) => (None, Some(e.to_string())),
            }
        }
    };
    DegreeCdf { points, fit, refusal }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Linkage {
    Single,
    Average,
    Complete,
}

/// Clusters `0..N` are the leaves in label order; merge `k` creates cluster `N + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub labels: Vec<String>,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    fn name(&self, id: usize) -> String {
        if id < self.labels.len() {
            self.labels[id].clone()
        } else {
            format!("#{}", id - self.labels.len() + 1)
        }
    }

    /// `step,a,b,height`; leaves by label, merged clusters as `#step`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,a,b,height")?;
        for (k, m) in self.merges.iter().enumerate() {
            writeln!(w, "{},{},{},{}", k + 1, self.name(m.a), self.name(m.b), m.height)?;
        }
        Ok(())
    }
}

/// Agglomerative clustering with Lance–Williams updates.
pub fn dendrogram(d: &DistanceMatrix, linkage: Linkage) -> Result<Dendrogram> {
    let n = d.dim();
    if n < 2 {
        return insufficient("clustering needs at least two nodes");
    }
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut dist: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| d.get(i, j)).collect()).collect();
    let mut active: Vec<bool> = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if !active[j] {
                    continue;
                }
                let (lo, hi) = (ids[i].min(ids[j]), ids[i].max(ids[j]));
                let cand = (dist[i][j], lo, hi, i, j);
                let better = match best {
                    None => true,
                    Some(b) => cand.0 < b.0 || (cand.0 == b.0 && (cand.1, cand.2) < (b.1, b.2)),
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (h, lo, hi, i, j) = best.expect("two active clusters");
        let (ni, nj) = (sizes[i] as f64, sizes[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let v = match linkage {
                Linkage::Single => dist[i][k].min(dist[j][k]),
                Linkage::Complete => dist[i][k].max(dist[j][k]),
                Linkage::Average => (ni * dist[i][k] + nj * dist[j][k]) / (ni + nj),
            };
            dist[i][k] = v;
            dist[k][i] = v;
        }
        active[j] = false;
        sizes[i] += sizes[j];
        ids[i] = n + step;
        merges.push(Merge {
            a: lo,
            b: hi,
            height: h,
            size: sizes[i],
        });
    }
    Ok(Dendrogram {
        labels: d.labels.clone(),
        linkage,
        merges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(labels: &[&str], e: Vec<f64>) -> DistanceMatrix {
        DistanceMatrix::from_entries(labels.iter().map(|s| s.to_string()).collect(), e).unwrap()
    }

    #[test]
    fn distance_examples() {
        let l = vec!["a".to_string(), "b".to_string()];
        let d = |c: f64, p| distances(l.clone(), &[1.0, c, c, 1.0], p).unwrap().get(0, 1);
        assert_eq!(d(1.0, Provenance::Pearson), 0.0);
        assert!((d(0.0, Provenance::Pearson) - 2f64.sqrt()).abs() < 1e-15);
        assert!((d(0.5, Provenance::Pearson) - 1.0).abs() < 1e-15);
        assert!((d(-1.0, Provenance::Pearson) - 2.0).abs() < 1e-15);
        assert_eq!(d(-1.0, Provenance::RhoBar { q: 2.0 }), 0.0);
        assert!(distances(l, &[1.0, 1.5, 1.5, 1.0], Provenance::Pearson).is_err());
    }

    #[test]
    fn three_node_tree() {
        let d = dm(&["A", "B", "C"], vec![0., 1., 2., 1., 0., 3., 2., 3., 0.]);
        let t = mst(&d).unwrap();
        let pairs: Vec<(&str, &str)> = t.edges.iter().map(|e| (e.u.as_str(), e.v.as_str())).collect();
        assert_eq!(pairs, vec![("A", "B"), ("A", "C")]);
        assert_eq!(t.stats.total_weight, 3.0);
    }

    #[test]
    fn equal_distances_give_star_at_first_label() {
        let n = 5;
        let mut e = vec![1.0; n * n];
        for i in 0..n {
            e[i * n + i] = 0.0;
        }
        let t = mst(&dm(&["e", "b", "a", "d", "c"], e)).unwrap();
        assert!(t.edges.iter().all(|e| e.u == "a"));
        assert_eq!(t.stats.k_max, 4);
    }

    #[test]
    fn path_graph_mean_path() {
        let n = 6;
        let nodes: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        let edges = (0..n - 1)
            .map(|i| Edge { u: nodes[i].clone(), v: nodes[i + 1].clone(), weight: 1.0 })
            .collect();
        let t = tree_from_edges(nodes, edges).unwrap();
        assert!((t.stats.mean_path_length - (n as f64 + 1.0) / 3.0).abs() < 1e-15);
        let c = degree_cdf(&t, 2);
        assert_eq!(c.points[1], (2, (n as f64 - 2.0) / n as f64));
        assert!(c.fit.is_none() && c.refusal.is_some());
    }

    #[test]
    fn two_tight_pairs() {
        let d = dm(
            &["a", "b", "c", "d"],
            vec![0., 0.1, 5., 5., 0.1, 0., 5., 5., 5., 5., 0., 0.2, 5., 5., 0.2, 0.],
        );
        for l in [Linkage::Single, Linkage::Average, Linkage::Complete] {
            let g = dendrogram(&d, l).unwrap();
            assert_eq!((g.merges[0].a, g.merges[0].b), (0, 1));
            assert_eq!((g.merges[1].a, g.merges[1].b), (2, 3));
            assert_eq!(g.merges[2].height, 5.0);
            assert_eq!(g.merges[2].size, 4);
        }
    }

    #[test]
    fn dot_and_csv_exports() {
        let t = mst(&dm(&["A", "B"], vec![0., 0.5, 0.5, 0.])).unwrap();
        let mut buf = Vec::new();
        t.write_dot(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("\"A\" -- \"B\" [weight=0.5];"));
        let mut buf = Vec::new();
        t.write_edges_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "u,v,weight\nA,B,0.5\n");
    }
}
