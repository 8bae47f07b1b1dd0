//! Scaling exponents, singularity spectra and q-dependent detrended
//! correlation coefficients derived from fluctuation surfaces.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detrended::{surface_triple, FluctuationSurface, SurfaceConfig, SurfaceKind};
use crate::distributions::powerlaw_fit;
use crate::error::{insufficient, invalid, Result};
use crate::stats::linear_fit;

/// Inclusive scale interval used for log-log fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitRange {
    pub s_lo: usize,
    pub s_hi: usize,
}

impl FitRange {
    pub fn new(s_lo: usize, s_hi: usize) -> Self {
        Self { s_lo, s_hi }
    }

    /// Middle 60% of a scale grid by index.
    pub fn middle(s_grid: &[usize]) -> Self {
        let n = s_grid.len();
        if n == 0 {
            return Self { s_lo: 0, s_hi: 0 };
        }
        let lo = (0.2 * (n - 1) as f64).round() as usize;
        let hi = (0.8 * (n - 1) as f64).round() as usize;
        Self {
            s_lo: s_grid[lo],
            s_hi: s_grid[hi],
        }
    }

    pub fn contains(&self, s: usize) -> bool {
        s >= self.s_lo && s <= self.s_hi
    }
}

/// Per-q power-law exponents: h(q) for auto surfaces, λ(q) for cross surfaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingExponents {
    pub q_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub defined: Vec<bool>,
    pub fit_range: FitRange,
}

impl ScalingExponents {
    pub fn at(&self, q: f64) -> Option<f64> {
        let i = self.q_grid.iter().position(|v| (v - q).abs() < 1e-9)?;
        self.defined[i].then_some(self.values[i])
    }

    /// `q,<name>,stderr` rows; undefined exponents are left blank.
    pub fn write_csv<W: Write>(&self, mut w: W, name: &str) -> Result<()> {
        writeln!(w, "q,{name},stderr")?;
        for i in 0..self.q_grid.len() {
            if self.defined[i] {
                writeln!(w, "{},{},{}", self.q_grid[i], self.values[i], self.stderrs[i])?;
            } else {
                writeln!(w, "{},,", self.q_grid[i])?;
            }
        }
        Ok(())
    }
}

pub fn fit_exponents(surface: &FluctuationSurface, range: FitRange) -> Result<ScalingExponents> {
    if range.s_lo > range.s_hi {
        return invalid("fit range is reversed");
    }
    if !surface.s_grid.iter().any(|s| range.contains(*s)) {
        return invalid(format!("fit range [{}, {}] holds no grid scale", range.s_lo, range.s_hi));
    }
    let nq = surface.q_grid.len();
    let mut values = vec![f64::NAN; nq];
    let mut stderrs = vec![f64::NAN; nq];
    let mut defined = vec![false; nq];
    for qi in 0..nq {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (si, &s) in surface.s_grid.iter().enumerate() {
            let f = surface.value(qi, si);
            if range.contains(s) && surface.is_defined(qi, si) && f > 0.0 {
                xs.push(s as f64);
                ys.push(f);
            }
        }
        if let Ok(fit) = powerlaw_fit(&xs, &ys, (range.s_lo as f64, range.s_hi as f64)) {
            values[qi] = fit.exponent;
            stderrs[qi] = fit.stderr;
            defined[qi] = true;
        }
    }
    Ok(ScalingExponents {
        q_grid: surface.q_grid.clone(),
        values,
        stderrs,
        defined,
        fit_range: range,
    })
}

/// Mean generalized Hurst exponent of a pair and the deficit of λ(q) from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossDeficit {
    pub q_grid: Vec<f64>,
    pub h_xy: Vec<f64>,
    pub d_xy: Vec<f64>,
    pub defined: Vec<bool>,
}

fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

pub fn hxy_and_dxy(
    h_x: &ScalingExponents,
    h_y: &ScalingExponents,
    lambda: &ScalingExponents,
) -> Result<CrossDeficit> {
    if !same_grid(&h_x.q_grid, &h_y.q_grid) || !same_grid(&h_x.q_grid, &lambda.q_grid) {
        return invalid("q grids differ");
    }
    let n = h_x.q_grid.len();
    let mut h_xy = Vec::with_capacity(n);
    let mut d_xy = Vec::with_capacity(n);
    let mut defined = Vec::with_capacity(n);
    for i in 0..n {
        let h = 0.5 * (h_x.values[i] + h_y.values[i]);
        h_xy.push(h);
        d_xy.push(lambda.values[i] - h);
        defined.push(h_x.defined[i] && h_y.defined[i] && lambda.defined[i]);
    }
    Ok(CrossDeficit {
        q_grid: h_x.q_grid.clone(),
        h_xy,
        d_xy,
        defined,
    })
}

/// ρ(q, s) over positive q. Matrices are row-major by q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSurface {
    pub q_grid: Vec<f64>,
    pub s_grid: Vec<usize>,
    pub values: Vec<f64>,
    pub defined: Vec<bool>,
    /// Lag in samples; positive means x leads.
    pub lag: Option<i64>,
}

impl RhoSurface {
    pub fn value(&self, qi: usize, si: usize) -> f64 {
        self.values[qi * self.s_grid.len() + si]
    }

    pub fn is_defined(&self, qi: usize, si: usize) -> bool {
        self.defined[qi * self.s_grid.len() + si]
    }

    pub fn q_index(&self, q: f64) -> Option<usize> {
        self.q_grid.iter().position(|v| (v - q).abs() < 1e-9)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "q,s,rho,defined")?;
        for (qi, q) in self.q_grid.iter().enumerate() {
            for (si, s) in self.s_grid.iter().enumerate() {
                if self.is_defined(qi, si) {
                    writeln!(w, "{},{},{},1", q, s, self.value(qi, si))?;
                } else {
                    writeln!(w, "{},{},,0", q, s)?;
                }
            }
        }
        Ok(())
    }
}

/// `ρ(q,s) = F^q_xy / sqrt(F^q_xx F^q_yy)` from the moments before the root.
/// Negative-q rows of the inputs are dropped.
pub fn rho(xy: &FluctuationSurface, xx: &FluctuationSurface, yy: &FluctuationSurface) -> Result<RhoSurface> {
    if xy.kind != SurfaceKind::Cross || xx.kind != SurfaceKind::Auto || yy.kind != SurfaceKind::Auto {
        return invalid("rho needs one cross surface and two auto surfaces");
    }
    if !same_grid(&xy.q_grid, &xx.q_grid) || !same_grid(&xy.q_grid, &yy.q_grid) || xy.s_grid != xx.s_grid || xy.s_grid != yy.s_grid {
        return invalid("surface grids differ");
    }
    let mut q_grid = Vec::new();
    let mut values = Vec::new();
    let mut defined = Vec::new();
    for (qi, &q) in xy.q_grid.iter().enumerate() {
        if q <= 0.0 {
            continue;
        }
        q_grid.push(q);
        for si in 0..xy.s_grid.len() {
            let (mxy, mxx, myy) = (xy.moment(qi, si), xx.moment(qi, si), yy.moment(qi, si));
            let den = (mxx * myy).sqrt();
            if mxy.is_finite() && den.is_finite() && den > 0.0 {
                values.push(mxy / den);
                defined.push(true);
            } else {
                values.push(f64::NAN);
                defined.push(false);
            }
        }
    }
    if q_grid.is_empty() {
        return invalid("q grid has no positive values");
    }
    Ok(RhoSurface {
        q_grid,
        s_grid: xy.s_grid.clone(),
        values,
        defined,
        lag: None,
    })
}

/// ρ(q, s) of a pair of equal-length series.
pub fn rho_of(x: &[f64], y: &[f64], cfg: &SurfaceConfig) -> Result<RhoSurface> {
    let t = surface_triple(x, y, cfg)?;
    rho(&t.xy, &t.xx, &t.yy)
}

/// Overlapping parts of `x` and `y` after shifting by `tau`: pairs
/// `(x[t], y[t + tau])`.
pub fn lag_align<'a>(x: &'a [f64], y: &'a [f64], tau: i64) -> (&'a [f64], &'a [f64]) {
    let n = x.len().min(y.len());
    let k = tau.unsigned_abs() as usize;
    if tau >= 0 {
        (&x[..n - k], &y[k..n])
    } else {
        (&x[k..n], &y[..n - k])
    }
}

/// ρ(q, s, τ); positive `tau` means x leads y by `tau` samples.
pub fn rho_lagged(x: &[f64], y: &[f64], tau: i64, cfg: &SurfaceConfig) -> Result<RhoSurface> {
    if x.len() != y.len() {
        return invalid("series lengths differ");
    }
    if tau.unsigned_abs() as usize * 10 >= x.len() {
        return invalid(format!("lag {tau} must be below a tenth of the series length"));
    }
    let (a, b) = lag_align(x, y, tau);
    let mut r = rho_of(a, b, cfg)?;
    r.lag = Some(tau);
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollingRho {
    pub start: usize,
    pub rho: Option<f64>,
    /// More than half of the window's samples are gaps.
    pub gap_flagged: bool,
}

/// Parameters of a moving-window ρ(q, s) evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollingSpec {
    pub window: usize,
    pub step: usize,
    pub q: f64,
    pub s: usize,
    pub poly_order: usize,
}

/// One ρ(q, s) per window start `0, step, 2·step, …`. A sample counts as a
/// gap if either series marks it as one.
pub fn rho_rolling(
    x: &[f64],
    y: &[f64],
    gaps: Option<(&[bool], &[bool])>,
    spec: RollingSpec,
) -> Result<Vec<RollingRho>> {
    let RollingSpec { window, step, q, s, poly_order } = spec;
    if x.len() != y.len() {
        return invalid("series lengths differ");
    }
    if step == 0 {
        return invalid("step must be positive");
    }
    if q <= 0.0 {
        return invalid("rolling rho needs q > 0");
    }
    if window < 20 * s {
        return invalid(format!("window {window} shorter than 20 scales ({})", 20 * s));
    }
    if window > x.len() {
        return invalid(format!("window {window} exceeds series length {}", x.len()));
    }
    if let Some((gx, gy)) = gaps {
        if gx.len() != x.len() || gy.len() != y.len() {
            return invalid("gap masks differ in length from the series");
        }
    }
    let cfg = SurfaceConfig {
        q_grid: vec![q],
        s_grid: vec![s],
        poly_order,
    };
    let starts: Vec<usize> = (0..=x.len() - window).step_by(step).collect();
    starts
        .par_iter()
        .map(|&st| {
            let r = rho_of(&x[st..st + window], &y[st..st + window], &cfg)?;
            let gap_count = gaps.map_or(0, |(gx, gy)| {
                (st..st + window).filter(|&i| gx[i] || gy[i]).count()
            });
            Ok(RollingRho {
                start: st,
                rho: r.is_defined(0, 0).then(|| r.value(0, 0)),
                gap_flagged: 2 * gap_count > window,
            })
        })
        .collect()
}

/// `|mean_s ρ(q, s)|` over defined cells, per q; `None` where no cell is defined.
pub fn rho_bar(rho: &RhoSurface) -> Result<Vec<Option<f64>>> {
    let ns = rho.s_grid.len();
    let out: Vec<Option<f64>> = (0..rho.q_grid.len())
        .map(|qi| {
            let vals: Vec<f64> = (0..ns)
                .filter(|&si| rho.is_defined(qi, si))
                .map(|si| rho.value(qi, si))
                .collect();
            (!vals.is_empty()).then(|| (vals.iter().sum::<f64>() / vals.len() as f64).abs())
        })
        .collect();
    if out.iter().all(Option::is_none) {
        return insufficient("rho surface has no defined cells");
    }
    Ok(out)
}

/// Least-squares slope of ρ(q, s) against ln s over the fit range.
pub fn rho_trend(rho: &RhoSurface, qi: usize, range: FitRange) -> Option<f64> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (si, &s) in rho.s_grid.iter().enumerate() {
        if range.contains(s) && rho.is_defined(qi, si) {
            xs.push((s as f64).ln());
            ys.push(rho.value(qi, si));
        }
    }
    linear_fit(&xs, &ys).map(|f| f.slope)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumDiagnostic {
    /// α(q) is not monotonically non-increasing in q.
    NonMonotoneAlpha,
    /// h(q) has a positive discrete second derivative somewhere.
    NonConcave,
    /// Undefined exponents split the q grid; only the longest defined run was used.
    TruncatedQRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularitySpectrum {
    pub q: Vec<f64>,
    pub alpha: Vec<f64>,
    pub f_alpha: Vec<f64>,
    pub width: f64,
    pub asymmetry: f64,
    pub alpha0: f64,
    /// `α₀ − α_min`.
    pub left_width: f64,
    /// `α_max − α₀`.
    pub right_width: f64,
    pub diagnostics: Vec<SpectrumDiagnostic>,
}

impl SingularitySpectrum {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "alpha,f")?;
        for (a, f) in self.alpha.iter().zip(&self.f_alpha) {
            writeln!(w, "{a},{f}")?;
        }
        Ok(())
    }
}

/// Longest run of consecutive defined indices.
fn longest_run(defined: &[bool]) -> (usize, usize) {
    let (mut best, mut cur_start, mut best_len) = (0, 0, 0);
    for (i, &d) in defined.iter().enumerate() {
        if !d {
            cur_start = i + 1;
            continue;
        }
        if i + 1 - cur_start > best_len {
            best_len = i + 1 - cur_start;
            best = cur_start;
        }
    }
    (best, best + best_len)
}

/// Legendre transform of h(q): `α = h + q h'`, `f = q(α − h) + 1`.
pub fn spectrum(h: &ScalingExponents) -> Result<SingularitySpectrum> {
    let (lo, hi) = longest_run(&h.defined);
    if hi - lo < 5 {
        return insufficient(format!("{} consecutive defined exponents, need 5", hi - lo));
    }
    let mut diagnostics = Vec::new();
    if hi - lo < h.defined.iter().filter(|d| **d).count() {
        diagnostics.push(SpectrumDiagnostic::TruncatedQRange);
    }
    let q = &h.q_grid[lo..hi];
    let hv = &h.values[lo..hi];
    if q.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("q grid must be strictly increasing");
    }
    spectrum_from(q, hv, diagnostics)
}

/// Legendre transform of h sampled on an increasing q grid.
pub fn spectrum_from(q: &[f64], hv: &[f64], mut diagnostics: Vec<SpectrumDiagnostic>) -> Result<SingularitySpectrum> {
    let n = q.len();
    if n < 5 || hv.len() != n {
        return insufficient("spectrum needs at least five points");
    }
    let dh: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (hv[b] - hv[a]) / (q[b] - q[a])
        })
        .collect();
    let alpha: Vec<f64> = (0..n).map(|i| hv[i] + q[i] * dh[i]).collect();
    let f_alpha: Vec<f64> = (0..n).map(|i| q[i] * (alpha[i] - hv[i]) + 1.0).collect();
    let amin = alpha.iter().cloned().fold(f64::INFINITY, f64::min);
    let amax = alpha.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = amax - amin;

    let neg = q.iter().rposition(|v| *v < 0.0);
    let pos = q.iter().position(|v| *v > 0.0);
    let alpha0 = match (neg, pos) {
        (Some(a), Some(b)) => 0.5 * (alpha[a] + alpha[b]),
        (Some(a), None) => alpha[a],
        (None, Some(b)) => alpha[b],
        (None, None) => unreachable!("q grid excludes zero"),
    };
    let left_width = alpha0 - amin;
    let right_width = amax - alpha0;
    let asymmetry = if left_width + right_width > 1e-12 {
        ((left_width - right_width) / (left_width + right_width)).clamp(-1.0, 1.0)
    } else {
        0.0
    };

    let slack = 1e-12 * width.max(1e-300);
    if alpha.windows(2).any(|w| w[1] > w[0] + slack) {
        diagnostics.push(SpectrumDiagnostic::NonMonotoneAlpha);
    }
    let concave = (1..n - 1).all(|i| {
        let l = (hv[i] - hv[i - 1]) / (q[i] - q[i - 1]);
        let r = (hv[i + 1] - hv[i]) / (q[i + 1] - q[i]);
        r <= l + 1e-12
    });
    if !concave {
        diagnostics.push(SpectrumDiagnostic::NonConcave);
    }
    Ok(SingularitySpectrum {
        q: q.to_vec(),
        alpha,
        f_alpha,
        width,
        asymmetry,
        alpha0,
        left_width,
        right_width,
        diagnostics,
    })
}

/// Exact generalized Hurst exponent of a binomial cascade with weight `p`.
pub fn cascade_hurst(p: f64, q: f64) -> f64 {
    1.0 / q - (p.powf(q) + (1.0 - p).powf(q)).log2() / q
}
