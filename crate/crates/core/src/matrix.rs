//! Correlation matrices of multi-asset return panels: base-currency rebasing,
//! eigenanalysis against the Marchenko–Pastur law, market-factor removal and
//! quasi-idempotence.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{insufficient, invalid, Error, Result};
use crate::stats::{mean_std, pearson};
use crate::surrogates::rng;

/// Equal-length log-return series of several assets, all quoted in `quote`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetPanel {
    pub quote: String,
    pub labels: Vec<String>,
    pub series: Vec<Vec<f64>>,
}

impl AssetPanel {
    pub fn new(quote: impl Into<String>, labels: Vec<String>, series: Vec<Vec<f64>>) -> Result<Self> {
        let quote = quote.into();
        if labels.len() != series.len() {
            return invalid("label count differs from series count");
        }
        if series.is_empty() {
            return insufficient("panel has no assets");
        }
        let t = series[0].len();
        if series.iter().any(|s| s.len() != t) {
            return invalid("panel series differ in length");
        }
        let mut sorted = labels.clone();
        sorted.push(quote.clone());
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return invalid("duplicate asset label");
        }
        Ok(Self { quote, labels, series })
    }

    pub fn len(&self) -> usize {
        self.series.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn assets(&self) -> usize {
        self.labels.len()
    }

    /// Comma-separated table: header of labels, one row of returns per timestamp.
    pub fn read_csv<R: BufRead>(reader: R, quote: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let labels: Vec<String> = loop {
            match lines.next() {
                Some((_, l)) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        break l.split(',').map(|s| s.trim().to_string()).collect();
                    }
                }
                None => return insufficient("empty panel file"),
            }
        };
        let mut series = vec![Vec::new(); labels.len()];
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != labels.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected {} fields, found {}", labels.len(), fields.len()),
                });
            }
            for (s, f) in series.iter_mut().zip(fields) {
                s.push(f.trim().parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    msg: format!("bad number {f:?}"),
                })?);
            }
        }
        Self::new(quote, labels, series)
    }

    pub fn window(&self, start: usize, len: usize) -> Self {
        Self {
            quote: self.quote.clone(),
            labels: self.labels.clone(),
            series: self.series.iter().map(|s| s[start..start + len].to_vec()).collect(),
        }
    }
}

/// Currency in which all assets are re-expressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Base {
    /// Keep the panel's own quote currency.
    Quote,
    Asset(String),
    /// Artificial currency whose log-returns against the quote are i.i.d.
    /// Gaussian with per-sample std `sigma` and mean `-sigma²/2`.
    Fictitious { sigma: f64, seed: u64 },
}

impl Base {
    pub fn label(&self, panel: &AssetPanel) -> String {
        match self {
            Base::Quote => panel.quote.clone(),
            Base::Asset(l) => l.clone(),
            Base::Fictitious { sigma, .. } => format!("fict(sigma={sigma})"),
        }
    }
}

/// Panel re-expressed in a new base currency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rebased {
    pub base: String,
    pub labels: Vec<String>,
    pub series: Vec<Vec<f64>>,
}

/// `R(K/X) = R(K/quote) − R(X/quote)`. For an asset or fictitious base the old
/// quote currency joins the panel as `R(quote/X) = −R(X/quote)` and the base's
/// own row is dropped, so every base sees the same number of assets.
pub fn rebase(panel: &AssetPanel, base: &Base) -> Result<Rebased> {
    let base_returns: Vec<f64> = match base {
        Base::Quote => {
            return Ok(Rebased {
                base: panel.quote.clone(),
                labels: panel.labels.clone(),
                series: panel.series.clone(),
            })
        }
        Base::Asset(label) => {
            let i = panel
                .labels
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| Error::InvalidInput(format!("base {label} not in panel")))?;
            panel.series[i].clone()
        }
        Base::Fictitious { sigma, seed } => {
            if !(*sigma > 0.0) {
                return invalid("fictitious base needs sigma > 0");
            }
            let mut r = rng(*seed);
            (0..panel.len())
                .map(|_| sigma * r.sample::<f64, _>(StandardNormal) - 0.5 * sigma * sigma)
                .collect()
        }
    };
    let base_label = base.label(panel);
    let mut labels = Vec::with_capacity(panel.assets());
    let mut series = Vec::with_capacity(panel.assets());
    for (l, s) in panel.labels.iter().zip(&panel.series) {
        if *l == base_label {
            continue;
        }
        labels.push(l.clone());
        series.push(s.iter().zip(&base_returns).map(|(a, b)| a - b).collect());
    }
    labels.push(panel.quote.clone());
    series.push(base_returns.iter().map(|b| -b).collect());
    Ok(Rebased {
        base: base_label,
        labels,
        series,
    })
}

/// Symmetric matrix with unit diagonal stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub base: String,
    pub entries: Vec<f64>,
    /// Zero-variance assets left out of the matrix.
    pub excluded: Vec<String>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim() + j]
    }

    /// Validates and wraps an explicit matrix.
    pub fn from_entries(labels: Vec<String>, base: impl Into<String>, entries: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if entries.len() != n * n {
            return invalid("matrix size does not match label count");
        }
        for i in 0..n {
            if (entries[i * n + i] - 1.0).abs() > 1e-9 {
                return invalid(format!("diagonal entry {i} is not 1"));
            }
            for j in 0..n {
                let v = entries[i * n + j];
                if !v.is_finite() || v.abs() > 1.0 + 1e-9 || (v - entries[j * n + i]).abs() > 1e-12 {
                    return invalid(format!("entry ({i},{j}) breaks symmetry or range"));
                }
            }
        }
        Ok(Self {
            labels,
            base: base.into(),
            entries,
            excluded: vec![],
        })
    }

    /// Labeled square table: header `,A,B,…`, then `A,c11,c12,…`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write_labeled(&mut w, &self.labels, &self.entries)
    }

    pub fn mean_off_diagonal(&self) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += self.get(i, j);
                }
            }
        }
        s / (n * (n - 1)) as f64
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_row_slice(n, n, &self.entries)
    }
}

pub(crate) fn write_labeled<W: Write>(w: &mut W, labels: &[String], entries: &[f64]) -> Result<()> {
    let n = labels.len();
    writeln!(w, ",{}", labels.join(","))?;
    for i in 0..n {
        let row: Vec<String> = entries[i * n..(i + 1) * n].iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{}", labels[i], row.join(","))?;
    }
    Ok(())
}

/// Reads a labeled square table written by [`CorrelationMatrix::write_csv`].
pub fn read_labeled_matrix<R: BufRead>(reader: R) -> Result<(Vec<String>, Vec<f64>)> {
    let mut labels = Vec::new();
    let mut entries = Vec::new();
    let mut rows = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if labels.is_empty() {
            labels = fields[1..].iter().map(|s| s.to_string()).collect();
            continue;
        }
        if fields.len() != labels.len() + 1 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected {} fields", labels.len() + 1),
            });
        }
        if fields[0] != labels[rows] {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("row label {:?} does not match column {:?}", fields[0], labels[rows]),
            });
        }
        for f in &fields[1..] {
            entries.push(f.parse::<f64>().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad number {f:?}"),
            })?);
        }
        rows += 1;
    }
    if rows != labels.len() || rows == 0 {
        return invalid("matrix file is not square");
    }
    Ok((labels, entries))
}

/// Columns standardized to zero mean and unit population variance.
/// Constant columns are returned separately by index.
fn standardize_all(series: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut out = Vec::new();
    let mut constant = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let (m, sd) = mean_std(s);
        if !(sd > 0.0) || sd < 1e-300 {
            constant.push(i);
            continue;
        }
        out.push(s.iter().map(|v| (v - m) / sd).collect());
    }
    (out, constant)
}

fn gram(g: &[Vec<f64>]) -> Vec<f64> {
    let n = g.len();
    let t = g[0].len() as f64;
    let mut e = vec![0.0; n * n];
    for i in 0..n {
        e[i * n + i] = 1.0;
        for j in i + 1..n {
            let c = (g[i].iter().zip(&g[j]).map(|(a, b)| a * b).sum::<f64>() / t).clamp(-1.0, 1.0);
            e[i * n + j] = c;
            e[j * n + i] = c;
        }
    }
    e
}

/// `C = (1/T) G Gᵀ` of the standardized returns (the Pearson matrix).
pub fn correlation_matrix(panel: &Rebased) -> Result<CorrelationMatrix> {
    let (g, constant) = standardize_all(&panel.series);
    if g.len() < 2 {
        return insufficient("fewer than two assets with nonzero variance");
    }
    if g[0].len() < g.len() {
        return insufficient(format!("{} samples for {} assets", g[0].len(), g.len()));
    }
    let labels = panel
        .labels
        .iter()
        .enumerate()
        .filter(|(i, _)| !constant.contains(i))
        .map(|(_, l)| l.clone())
        .collect();
    Ok(CorrelationMatrix {
        labels,
        base: panel.base.clone(),
        entries: gram(&g),
        excluded: constant.iter().map(|i| panel.labels[*i].clone()).collect(),
    })
}

/// Standardized series of the assets kept in `correlation_matrix`.
pub fn normalized_panel(panel: &Rebased) -> Vec<Vec<f64>> {
    standardize_all(&panel.series).0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[i]` belongs to `eigenvalues[i]`; components sum to a
    /// nonnegative value.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty decomposition")
    }

    pub fn v_max(&self) -> &[f64] {
        self.eigenvectors.last().expect("nonempty decomposition")
    }

    /// `index,lambda` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,lambda")?;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, l)?;
        }
        Ok(())
    }

    /// Rows are asset labels, columns are eigenvector indices.
    pub fn write_vectors_csv<W: Write>(&self, mut w: W, labels: &[String]) -> Result<()> {
        let n = self.eigenvalues.len();
        let head: Vec<String> = (1..=n).map(|i| format!("v{i}")).collect();
        writeln!(w, "label,{}", head.join(","))?;
        for (r, l) in labels.iter().enumerate() {
            let row: Vec<String> = self.eigenvectors.iter().map(|v| v[r].to_string()).collect();
            writeln!(w, "{l},{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Symmetric eigendecomposition (nalgebra's symmetric QR iteration).
pub fn eigen(c: &CorrelationMatrix) -> Result<EigenDecomposition> {
    eigen_symmetric(c.to_dmatrix())
}

pub(crate) fn eigen_symmetric(m: DMatrix<f64>) -> Result<EigenDecomposition> {
    let n = m.nrows();
    let se = nalgebra::SymmetricEigen::try_new(m, 1e-15, 100_000)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = se.eigenvectors.column(i).iter().cloned().collect();
            let s: f64 = v.iter().sum();
            let flip = if s.abs() > 1e-12 {
                s < 0.0
            } else {
                v.iter().find(|x| x.abs() > 1e-12).is_some_and(|x| *x < 0.0)
            };
            if flip {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Support `(λ−, λ+)` of the Marchenko–Pastur law with `Q = T/N`.
pub fn mp_bounds(q: f64, sigma: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    let r = (1.0 / q).sqrt();
    (s2 * (1.0 + 1.0 / q - 2.0 * r), s2 * (1.0 + 1.0 / q + 2.0 * r))
}

pub fn mp_pdf(lambda: f64, q: f64, sigma: f64) -> f64 {
    let (lo, hi) = mp_bounds(q, sigma);
    if lambda <= lo || lambda >= hi || lambda <= 0.0 {
        return 0.0;
    }
    q / (2.0 * std::f64::consts::PI * sigma * sigma) * ((hi - lambda) * (lambda - lo)).sqrt() / lambda
}

/// `z(t) = Σ_j v_j g_j(t)`.
pub fn eigensignal(normalized: &[Vec<f64>], v: &[f64]) -> Result<Vec<f64>> {
    if normalized.len() != v.len() || normalized.is_empty() {
        return invalid("eigenvector length differs from asset count");
    }
    let t = normalized[0].len();
    let mut z = vec![0.0; t];
    for (g, w) in normalized.iter().zip(v) {
        for (zi, gi) in z.iter_mut().zip(g) {
            *zi += w * gi;
        }
    }
    Ok(z)
}

/// Correlation matrix of the residuals `ε_i` of `g_i = a_i + b_i z + ε_i`.
pub fn residual_matrix(panel: &Rebased, z: &[f64]) -> Result<CorrelationMatrix> {
    let (zm, zs) = mean_std(z);
    if !(zs > 0.0) {
        return invalid("regressor is constant");
    }
    let (g, constant) = standardize_all(&panel.series);
    if g.first().is_some_and(|s| s.len() != z.len()) {
        return invalid("regressor length differs from the panel");
    }
    let zc: Vec<f64> = z.iter().map(|v| v - zm).collect();
    let szz: f64 = zc.iter().map(|v| v * v).sum();
    let residuals: Vec<Vec<f64>> = g
        .iter()
        .map(|gi| {
            let b = gi.iter().zip(&zc).map(|(a, c)| a * c).sum::<f64>() / szz;
            let a = gi.iter().sum::<f64>() / gi.len() as f64;
            gi.iter().zip(&zc).map(|(y, c)| y - a - b * c).collect()
        })
        .collect();
    let kept: Vec<String> = panel
        .labels
        .iter()
        .enumerate()
        .filter(|(i, _)| !constant.contains(i))
        .map(|(_, l)| l.clone())
        .collect();
    let mut c = correlation_matrix(&Rebased {
        base: panel.base.clone(),
        labels: kept,
        series: residuals,
    })?;
    c.excluded.extend(constant.iter().map(|i| panel.labels[*i].clone()));
    Ok(c)
}

/// Original matrix, its decomposition, the largest eigensignal and the
/// residual matrix after regressing that signal out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRemoval {
    pub original: CorrelationMatrix,
    pub original_eigen: EigenDecomposition,
    pub z_max: Vec<f64>,
    pub residual: CorrelationMatrix,
    pub residual_eigen: EigenDecomposition,
}

pub fn remove_market_factor(panel: &Rebased) -> Result<FactorRemoval> {
    let original = correlation_matrix(panel)?;
    let original_eigen = eigen(&original)?;
    let z_max = eigensignal(&normalized_panel(panel), original_eigen.v_max())?;
    let residual = residual_matrix(panel, &z_max)?;
    let residual_eigen = eigen(&residual)?;
    Ok(FactorRemoval {
        original,
        original_eigen,
        z_max,
        residual,
        residual_eigen,
    })
}

pub const QI_TOLERANCE: f64 = 1e-10;
pub const QI_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiIdempotence {
    pub iota: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn upper(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
}

/// Negative entries clipped to zero, then `C ← C²/‖C²‖_F` until the
/// off-diagonal entries move less than [`QI_TOLERANCE`]; returns the Pearson
/// correlation of initial and limiting upper-triangle entries.
pub fn quasi_idempotence(c: &CorrelationMatrix) -> Result<QuasiIdempotence> {
    quasi_idempotence_of(c.dim(), &c.entries)
}

/// [`quasi_idempotence`] for any symmetric `n × n` row-major matrix.
pub fn quasi_idempotence_of(n: usize, entries: &[f64]) -> Result<QuasiIdempotence> {
    if entries.len() != n * n {
        return invalid("matrix size does not match dimension");
    }
    let m0 = DMatrix::from_row_slice(n, n, entries).map(|v| v.max(0.0));
    let off0 = upper(&m0);
    if off0.is_empty() {
        return invalid("quasi-idempotence needs at least two assets");
    }
    let mut m = m0.clone();
    let mut off = off0.clone();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < QI_MAX_ITERATIONS {
        let sq = &m * &m;
        let norm = sq.norm();
        if !(norm > 0.0) {
            return Err(Error::Numerical("matrix power vanished".into()));
        }
        m = sq / norm;
        iterations += 1;
        let next = upper(&m);
        let delta = next.iter().zip(&off).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        off = next;
        if delta < QI_TOLERANCE {
            converged = true;
            break;
        }
    }
    let iota = pearson(&off0, &off).ok_or_else(|| {
        Error::Numerical("off-diagonal entries are constant; quasi-idempotence undefined".into())
    })?;
    Ok(QuasiIdempotence {
        iota,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollingLambda {
    pub start: usize,
    pub lambda_max: f64,
    /// `T/N` of the window.
    pub q: f64,
}

/// λ_max of the rebased correlation matrix in each window `start, start + step, …`.
pub fn rolling_lambda_max(panel: &AssetPanel, base: &Base, window: usize, step: usize) -> Result<Vec<RollingLambda>> {
    if step == 0 {
        return invalid("step must be positive");
    }
    if window > panel.len() {
        return invalid(format!("window {window} exceeds series length {}", panel.len()));
    }
    let rebased = rebase(panel, base)?;
    let n = rebased.labels.len();
    if window < n {
        return invalid(format!("window {window} shorter than asset count {n}"));
    }
    let starts: Vec<usize> = (0..=panel.len() - window).step_by(step).collect();
    starts
        .par_iter()
        .map(|&st| {
            let w = Rebased {
                base: rebased.base.clone(),
                labels: rebased.labels.clone(),
                series: rebased.series.iter().map(|s| s[st..st + window].to_vec()).collect(),
            };
            let c = correlation_matrix(&w)?;
            Ok(RollingLambda {
                start: st,
                lambda_max: eigen(&c)?.lambda_max(),
                q: window as f64 / c.dim() as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub base: String,
    pub lambda_max: f64,
    pub iota: Option<f64>,
}

/// λ_max and ι(∞) for every candidate base, sorted by λ_max ascending.
pub fn base_ladder(panel: &AssetPanel, bases: &[Base]) -> Result<Vec<LadderRow>> {
    let mut rows: Vec<LadderRow> = bases
        .par_iter()
        .map(|b| {
            let c = correlation_matrix(&rebase(panel, b)?)?;
            Ok(LadderRow {
                base: c.base.clone(),
                lambda_max: eigen(&c)?.lambda_max(),
                iota: quasi_idempotence(&c).ok().map(|q| q.iota),
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.lambda_max.total_cmp(&b.lambda_max).then_with(|| a.base.cmp(&b.base)));
    Ok(rows)
}

pub fn write_ladder_csv<W: Write>(rows: &[LadderRow], mut w: W) -> Result<()> {
    writeln!(w, "base,lambda_max,iota")?;
    for r in rows {
        match r.iota {
            Some(i) => writeln!(w, "{},{},{}", r.base, r.lambda_max, i)?,
            None => writeln!(w, "{},{},", r.base, r.lambda_max)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("A{i}")).collect()
    }

    #[test]
    fn mp_bound_examples() {
        let (lo, hi) = mp_bounds(4.0, 1.0);
        assert!((lo - 0.25).abs() < 1e-15 && (hi - 2.25).abs() < 1e-15);
        let (lo, hi) = mp_bounds(1.0, 1.0);
        assert!(lo.abs() < 1e-15 && (hi - 4.0).abs() < 1e-15);
        assert_eq!(mp_pdf(3.0, 4.0, 1.0), 0.0);
    }

    #[test]
    fn small_eigen_examples() {
        let id = CorrelationMatrix::from_entries(labels(3), "USD", vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        let e = eigen(&id).unwrap();
        assert!(e.eigenvalues.iter().all(|l| (l - 1.0).abs() < 1e-12));
        let ones = CorrelationMatrix::from_entries(labels(3), "USD", vec![1.0; 9]).unwrap();
        let e = eigen(&ones).unwrap();
        assert!(e.eigenvalues[0].abs() < 1e-12 && e.eigenvalues[1].abs() < 1e-12);
        assert!((e.eigenvalues[2] - 3.0).abs() < 1e-12);
        assert!(e.v_max().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn rebase_examples() {
        let p = AssetPanel::new("USD", labels(2), vec![vec![0.1, -0.2, 0.3], vec![0.1, -0.2, 0.3]]).unwrap();
        let r = rebase(&p, &Base::Quote).unwrap();
        assert_eq!(r.series, p.series);
        let r = rebase(&p, &Base::Asset("A0".into())).unwrap();
        assert_eq!(r.labels, vec!["A1".to_string(), "USD".to_string()]);
        assert_eq!(r.series[0], vec![0.0; 3]);
        assert_eq!(r.series[1], vec![-0.1, 0.2, -0.3]);
        assert!(rebase(&p, &Base::Asset("ZZZ".into())).is_err());
    }

    #[test]
    fn constant_asset_is_excluded() {
        let r = Rebased {
            base: "USD".into(),
            labels: labels(3),
            series: vec![vec![1.0, 2.0, 3.0, 5.0], vec![0.5; 4], vec![2.0, 1.0, 0.0, 1.0]],
        };
        let c = correlation_matrix(&r).unwrap();
        assert_eq!(c.excluded, vec!["A1".to_string()]);
        assert_eq!(c.dim(), 2);
    }

    #[test]
    fn identity_quasi_idempotence_is_undefined() {
        let id = CorrelationMatrix::from_entries(labels(3), "USD", vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        assert!(quasi_idempotence(&id).is_err());
    }

    #[test]
    fn labeled_matrix_roundtrip() {
        let c = CorrelationMatrix::from_entries(labels(2), "USD", vec![1.0, 0.25, 0.25, 1.0]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let (l, e) = read_labeled_matrix(buf.as_slice()).unwrap();
        assert_eq!(l, c.labels);
        assert_eq!(e, c.entries);
    }
}
