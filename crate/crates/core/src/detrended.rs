//! Detrended fluctuation kernel shared by MFDFA (single series) and MFCCA
//! (series pairs).
//!
//! A series is integrated into its profile, the profile is cut into `2 M_s`
//! non-overlapping segments of length `s` (`M_s` anchored at the start and `M_s`
//! anchored at the end), a degree-`m` polynomial is removed from each segment,
//! and the per-segment residual covariances are combined into q-order moments.
//!
//! # Binary surface cache
//!
//! [`FluctuationSurface::write_binary`] emits, all little-endian:
//!
//! ```text
//! b"FQSF1"                magic
//! u8                      kind (0 = auto, 1 = cross)
//! u64                     polynomial order
//! u64 nq, u64 ns          grid sizes
//! f64 * nq                q grid
//! u64 * ns                scale grid
//! f64 * nq*ns             F(q,s), row-major by q
//! f64 * nq*ns             q-th order moments F^q(s)
//! u8  * nq*ns             defined mask
//! u64 * nq*ns             excluded segment counts
//! u64 * ns                segments per scale
//! ```

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{insufficient, invalid, Error, Result};

/// Highest supported detrending polynomial order.
pub const MAX_POLY_ORDER: usize = 5;
/// Fraction of zero-variance segments above which a negative-q cell is undefined.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.2;
/// Relative residual level treated as an exactly detrended segment.
const ZERO_RESIDUAL_REL: f64 = 64.0 * f64::EPSILON;

const MAGIC: &[u8; 5] = b"FQSF1";

/// Cumulative sum of a demeaned series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub values: Vec<f64>,
    pub source_length: usize,
}

pub fn profile(series: &[f64]) -> Result<Profile> {
    if series.len() < 2 {
        return insufficient("profile needs at least two samples");
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let mut acc = 0.0;
    let values = series
        .iter()
        .map(|v| {
            acc += v - mean;
            acc
        })
        .collect();
    Ok(Profile {
        values,
        source_length: series.len(),
    })
}

/// Orthonormal discrete polynomial basis on `s` equally spaced points.
///
/// Built from Legendre polynomials on the segment mapped to `[-1, 1]` and
/// re-orthonormalized by two passes of modified Gram–Schmidt.
#[derive(Debug, Clone)]
pub struct PolyBasis {
    len: usize,
    order: usize,
    vectors: Vec<f64>,
}

impl PolyBasis {
    pub fn new(len: usize, order: usize) -> Self {
        assert!(len > order, "basis needs more points than its order");
        let t: Vec<f64> = (0..len)
            .map(|k| {
                if len == 1 {
                    0.0
                } else {
                    (2.0 * k as f64 - (len - 1) as f64) / (len - 1) as f64
                }
            })
            .collect();
        let mut vectors = vec![0.0; (order + 1) * len];
        for (k, &tk) in t.iter().enumerate() {
            let (mut p_prev, mut p) = (0.0, 1.0);
            for j in 0..=order {
                vectors[j * len + k] = p;
                let next = ((2 * j + 1) as f64 * tk * p - j as f64 * p_prev) / (j + 1) as f64;
                p_prev = p;
                p = next;
            }
        }
        for j in 0..=order {
            for _pass in 0..2 {
                for i in 0..j {
                    let (head, tail) = vectors.split_at_mut(j * len);
                    let bi = &head[i * len..(i + 1) * len];
                    let vj = &mut tail[..len];
                    let d: f64 = bi.iter().zip(vj.iter()).map(|(a, b)| a * b).sum();
                    for (v, b) in vj.iter_mut().zip(bi) {
                        *v -= d * b;
                    }
                }
            }
            let vj = &mut vectors[j * len..(j + 1) * len];
            let norm = vj.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in vj.iter_mut() {
                *v /= norm;
            }
        }
        Self { len, order, vectors }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Writes `segment - projection(segment)` into `out`.
    pub fn residual(&self, segment: &[f64], out: &mut [f64]) {
        out.copy_from_slice(segment);
        for j in 0..=self.order {
            let b = &self.vectors[j * self.len..(j + 1) * self.len];
            let c: f64 = b.iter().zip(segment).map(|(a, v)| a * v).sum();
            for (o, bv) in out.iter_mut().zip(b) {
                *o -= c * bv;
            }
        }
    }
}

/// Segment start offsets: `M_s` from the beginning, then `M_s` from the end.
fn segment_starts(len: usize, s: usize) -> Vec<usize> {
    let m = len / s;
    (0..m).map(|v| v * s).chain((0..m).map(|v| len - (v + 1) * s)).collect()
}

fn check_scale(len: usize, s: usize, m: usize) -> Result<()> {
    if m > MAX_POLY_ORDER {
        return invalid(format!("polynomial order {m} exceeds {MAX_POLY_ORDER}"));
    }
    if s < m + 2 {
        return invalid(format!("scale {s} too small for polynomial order {m}"));
    }
    if s > len {
        return invalid(format!("scale {s} exceeds series length {len}"));
    }
    Ok(())
}

/// Raw per-segment covariances plus the per-segment magnitude used to detect
/// numerically exact detrending.
struct SegmentCovariances {
    xx: Vec<f64>,
    yy: Vec<f64>,
    xy: Vec<f64>,
    x_scale: Vec<f64>,
    y_scale: Vec<f64>,
}

fn covariances(x: &[f64], y: Option<&[f64]>, s: usize, m: usize) -> SegmentCovariances {
    let basis = PolyBasis::new(s, m);
    let starts = segment_starts(x.len(), s);
    let n = starts.len();
    let mut out = SegmentCovariances {
        xx: Vec::with_capacity(n),
        yy: Vec::with_capacity(if y.is_some() { n } else { 0 }),
        xy: Vec::with_capacity(if y.is_some() { n } else { 0 }),
        x_scale: Vec::with_capacity(n),
        y_scale: Vec::with_capacity(if y.is_some() { n } else { 0 }),
    };
    let mut rx = vec![0.0; s];
    let mut ry = vec![0.0; s];
    let inv = 1.0 / s as f64;
    for &st in &starts {
        let seg = &x[st..st + s];
        basis.residual(seg, &mut rx);
        out.xx.push(rx.iter().map(|v| v * v).sum::<f64>() * inv);
        out.x_scale.push((seg.iter().map(|v| v * v).sum::<f64>() * inv).sqrt());
        if let Some(y) = y {
            let seg = &y[st..st + s];
            basis.residual(seg, &mut ry);
            out.yy.push(ry.iter().map(|v| v * v).sum::<f64>() * inv);
            out.xy.push(rx.iter().zip(&ry).map(|(a, b)| a * b).sum::<f64>() * inv);
            out.y_scale.push((seg.iter().map(|v| v * v).sum::<f64>() * inv).sqrt());
        }
    }
    out
}

/// Per-segment detrended cross-covariances `F²_xy(ν, s)`, `ν = 1..2M_s`.
pub fn segment_cross_covariance(x: &Profile, y: &Profile, s: usize, m: usize) -> Result<Vec<f64>> {
    let len = x.values.len();
    if y.values.len() != len {
        return invalid("profiles differ in length");
    }
    check_scale(len, s, m)?;
    if len / s < 2 {
        return insufficient(format!("scale {s} leaves fewer than two segments per direction"));
    }
    Ok(covariances(&x.values, Some(&y.values), s, m).xy)
}

/// Sets covariances that are zero to working precision to exactly zero.
fn clean(cov: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let tol = ZERO_RESIDUAL_REL * ZERO_RESIDUAL_REL;
    cov.iter()
        .zip(a.iter().zip(b))
        .map(|(&c, (&sa, &sb))| if c.abs() <= tol * sa * sb { 0.0 } else { c })
        .collect()
}

/// q-th order moment of a covariance sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QMoment {
    /// `mean_ν sign(F²)|F²|^{q/2}` over the used segments.
    pub moment: f64,
    pub used: usize,
    /// Zero-valued segments skipped because `q < 0`.
    pub excluded: usize,
}

/// Log-magnitudes cached once per scale so each q costs one `exp` per segment.
struct LogCov {
    sign: Vec<f64>,
    ln_abs: Vec<f64>,
}

impl LogCov {
    fn new(cov: &[f64]) -> Self {
        Self {
            sign: cov.iter().map(|c| if *c > 0.0 { 1.0 } else if *c < 0.0 { -1.0 } else { 0.0 }).collect(),
            ln_abs: cov.iter().map(|c| c.abs().ln()).collect(),
        }
    }

    fn moment(&self, q: f64) -> QMoment {
        let half = 0.5 * q;
        let mut sum = 0.0;
        let mut used = 0;
        let mut excluded = 0;
        for (&sg, &la) in self.sign.iter().zip(&self.ln_abs) {
            if sg == 0.0 {
                if q < 0.0 {
                    excluded += 1;
                } else {
                    used += 1;
                }
                continue;
            }
            sum += sg * (half * la).exp();
            used += 1;
        }
        QMoment {
            moment: if used > 0 { sum / used as f64 } else { f64::NAN },
            used,
            excluded,
        }
    }
}

/// Computes the q-th order moment; zero segments are skipped for `q < 0`.
pub fn q_moment(cov: &[f64], q: f64) -> Result<QMoment> {
    if q == 0.0 || !q.is_finite() {
        return invalid("q must be a finite nonzero number");
    }
    if cov.is_empty() {
        return insufficient("empty covariance sequence");
    }
    Ok(LogCov::new(cov).moment(q))
}

/// Signed q-th root: `sign(M) |M|^{1/q}`.
pub fn signed_root(moment: f64, q: f64) -> f64 {
    if moment == 0.0 {
        0.0
    } else {
        moment.signum() * moment.abs().powf(1.0 / q)
    }
}

/// Bivariate fluctuation function `F_xy(q, s)` from one scale's covariances.
pub fn fluctuation_cross(cov: &[f64], q: f64) -> Result<f64> {
    let m = q_moment(cov, q)?;
    if m.used == 0 {
        return Err(Error::Numerical("all segments are zero for negative q".into()));
    }
    Ok(signed_root(m.moment, q))
}

/// Univariate fluctuation value with its exclusion count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoFluctuation {
    pub value: f64,
    pub excluded: usize,
}

/// `F(q, s) = [mean(F²^{q/2})]^{1/q}`; zero segments are excluded for `q < 0`.
pub fn fluctuation_auto(cov: &[f64], q: f64) -> Result<AutoFluctuation> {
    if cov.iter().any(|c| *c < 0.0) {
        return invalid("auto covariances must be nonnegative");
    }
    let m = q_moment(cov, q)?;
    if m.used == 0 {
        return Err(Error::Numerical("all segments are zero for negative q".into()));
    }
    Ok(AutoFluctuation {
        value: m.moment.powf(1.0 / q),
        excluded: m.excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurfaceKind {
    Auto,
    Cross,
}

/// Grids and detrending order for a fluctuation surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceConfig {
    pub q_grid: Vec<f64>,
    pub s_grid: Vec<usize>,
    pub poly_order: usize,
}

/// `[-4, 4]` in steps of `0.2`, without zero.
pub fn default_q_grid() -> Vec<f64> {
    q_grid(-4.0, 4.0, 0.2)
}

/// Evenly spaced q values from `lo` to `hi` (inclusive), skipping zero.
pub fn q_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as i64;
    (0..=n)
        .map(|i| lo + i as f64 * step)
        .map(|q| (q * 1e9).round() / 1e9)
        .filter(|q| *q != 0.0)
        .collect()
}

/// Logarithmically spaced integer scales, deduplicated.
pub fn log_scale_grid(s_min: usize, s_max: usize, points: usize) -> Vec<usize> {
    if s_max <= s_min || points < 2 {
        return vec![s_min];
    }
    let (a, b) = ((s_min as f64).ln(), (s_max as f64).ln());
    let mut v: Vec<usize> = (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp().round() as usize)
        .collect();
    v.dedup();
    v
}

/// Default scale grid: 40 log-spaced points from `max(2(m+2), 10)` to `len / 5`.
pub fn default_s_grid(len: usize, m: usize) -> Vec<usize> {
    let s_min = (2 * (m + 2)).max(10);
    log_scale_grid(s_min, len / 5, 40)
}

impl SurfaceConfig {
    pub fn defaults(len: usize) -> Self {
        Self {
            q_grid: default_q_grid(),
            s_grid: default_s_grid(len, 2),
            poly_order: 2,
        }
    }

    pub fn validate(&self, len: usize) -> Result<()> {
        if self.q_grid.is_empty() || self.s_grid.is_empty() {
            return invalid("empty q or scale grid");
        }
        if self.q_grid.iter().any(|q| *q == 0.0 || !q.is_finite()) {
            return invalid("q grid must hold finite nonzero values");
        }
        if self.poly_order == 0 || self.poly_order > MAX_POLY_ORDER {
            return invalid(format!("polynomial order must be in 1..={MAX_POLY_ORDER}"));
        }
        for &s in &self.s_grid {
            check_scale(len, s, self.poly_order)?;
        }
        Ok(())
    }
}

/// Fluctuation values over a `(q, s)` grid. Matrices are row-major by q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSurface {
    pub kind: SurfaceKind,
    pub poly_order: usize,
    pub q_grid: Vec<f64>,
    pub s_grid: Vec<usize>,
    /// `F(q, s)`, signed for cross surfaces.
    pub values: Vec<f64>,
    /// `F^q(s)` before taking the root.
    pub moments: Vec<f64>,
    pub defined: Vec<bool>,
    /// Zero-variance segments skipped per cell (negative q only).
    pub excluded: Vec<usize>,
    /// `2 M_s` per scale.
    pub segments: Vec<usize>,
}

impl FluctuationSurface {
    pub fn index(&self, qi: usize, si: usize) -> usize {
        qi * self.s_grid.len() + si
    }

    pub fn value(&self, qi: usize, si: usize) -> f64 {
        self.values[self.index(qi, si)]
    }

    pub fn is_defined(&self, qi: usize, si: usize) -> bool {
        self.defined[self.index(qi, si)]
    }

    pub fn moment(&self, qi: usize, si: usize) -> f64 {
        self.moments[self.index(qi, si)]
    }

    /// Position of `q` in the grid (exact match within 1e-9).
    pub fn q_index(&self, q: f64) -> Option<usize> {
        self.q_grid.iter().position(|v| (v - q).abs() < 1e-9)
    }

    /// `q,s,F,defined` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "q,s,F,defined")?;
        for (qi, q) in self.q_grid.iter().enumerate() {
            for (si, s) in self.s_grid.iter().enumerate() {
                let i = self.index(qi, si);
                writeln!(w, "{},{},{:e},{}", q, s, self.values[i], self.defined[i] as u8)?;
            }
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[match self.kind {
            SurfaceKind::Auto => 0,
            SurfaceKind::Cross => 1,
        }])?;
        w.write_all(&(self.poly_order as u64).to_le_bytes())?;
        w.write_all(&(self.q_grid.len() as u64).to_le_bytes())?;
        w.write_all(&(self.s_grid.len() as u64).to_le_bytes())?;
        for q in &self.q_grid {
            w.write_all(&q.to_le_bytes())?;
        }
        for s in &self.s_grid {
            w.write_all(&(*s as u64).to_le_bytes())?;
        }
        for v in self.values.iter().chain(&self.moments) {
            w.write_all(&v.to_le_bytes())?;
        }
        let mask: Vec<u8> = self.defined.iter().map(|d| *d as u8).collect();
        w.write_all(&mask)?;
        for e in self.excluded.iter().chain(&self.segments) {
            w.write_all(&(*e as u64).to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a surface written by [`write_binary`](Self::write_binary).
    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return invalid("not an FQSF1 surface file");
        }
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind)?;
        let kind = match kind[0] {
            0 => SurfaceKind::Auto,
            1 => SurfaceKind::Cross,
            k => return invalid(format!("unknown surface kind {k}")),
        };
        let mut u = [0u8; 8];
        let mut read_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut u)?;
            Ok(u64::from_le_bytes(u))
        };
        let poly_order = read_u64(&mut r)? as usize;
        let nq = read_u64(&mut r)? as usize;
        let ns = read_u64(&mut r)? as usize;
        let read_f64s = |r: &mut R, n: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; 8 * n];
            r.read_exact(&mut buf)?;
            Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let read_u64s = |r: &mut R, n: usize| -> Result<Vec<u64>> {
            let mut buf = vec![0u8; 8 * n];
            r.read_exact(&mut buf)?;
            Ok(buf.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let q_grid = read_f64s(&mut r, nq)?;
        let s_grid = read_u64s(&mut r, ns)?.into_iter().map(|s| s as usize).collect();
        let values = read_f64s(&mut r, nq * ns)?;
        let moments = read_f64s(&mut r, nq * ns)?;
        let mut mask = vec![0u8; nq * ns];
        r.read_exact(&mut mask)?;
        let excluded = read_u64s(&mut r, nq * ns)?.into_iter().map(|e| e as usize).collect();
        let segments = read_u64s(&mut r, ns)?.into_iter().map(|e| e as usize).collect();
        Ok(Self {
            kind,
            poly_order,
            q_grid,
            s_grid,
            values,
            moments,
            defined: mask.into_iter().map(|b| b != 0).collect(),
            excluded,
            segments,
        })
    }
}

/// One scale's cells for every q: (value, moment, defined, excluded).
type ScaleCells = Vec<(f64, f64, bool, usize)>;

fn cells(cov: &[f64], kind: SurfaceKind, q_grid: &[f64]) -> ScaleCells {
    let total = cov.len();
    let lc = LogCov::new(cov);
    q_grid
        .iter()
        .map(|&q| {
            let m = lc.moment(q);
            let frac = m.excluded as f64 / total as f64;
            let value = match kind {
                SurfaceKind::Auto => m.moment.powf(1.0 / q),
                SurfaceKind::Cross => signed_root(m.moment, q),
            };
            let defined = m.used > 0 && frac <= MAX_EXCLUDED_FRACTION && value.is_finite() && value > 0.0;
            (value, m.moment, defined, m.excluded)
        })
        .collect()
}

fn undefined_cells(nq: usize) -> ScaleCells {
    vec![(f64::NAN, f64::NAN, false, 0); nq]
}

fn assemble(kind: SurfaceKind, cfg: &SurfaceConfig, per_scale: Vec<(usize, ScaleCells)>) -> FluctuationSurface {
    let (nq, ns) = (cfg.q_grid.len(), cfg.s_grid.len());
    let mut values = vec![0.0; nq * ns];
    let mut moments = vec![0.0; nq * ns];
    let mut defined = vec![false; nq * ns];
    let mut excluded = vec![0; nq * ns];
    let mut segments = Vec::with_capacity(ns);
    for (si, (nseg, col)) in per_scale.into_iter().enumerate() {
        segments.push(nseg);
        for (qi, (v, mo, d, e)) in col.into_iter().enumerate() {
            let i = qi * ns + si;
            values[i] = v;
            moments[i] = mo;
            defined[i] = d;
            excluded[i] = e;
        }
    }
    FluctuationSurface {
        kind,
        poly_order: cfg.poly_order,
        q_grid: cfg.q_grid.clone(),
        s_grid: cfg.s_grid.clone(),
        values,
        moments,
        defined,
        excluded,
        segments,
    }
}

/// Fluctuation surface of one series (`y = None`, MFDFA) or a pair (MFCCA).
///
/// Passing the same series twice as a pair yields a cross surface that equals
/// the auto surface cell by cell.
pub fn surface(x: &[f64], y: Option<&[f64]>, cfg: &SurfaceConfig) -> Result<FluctuationSurface> {
    if let Some(y) = y {
        return Ok(surface_triple(x, y, cfg)?.xy);
    }
    cfg.validate(x.len())?;
    let xp = profile(x)?;
    let per_scale: Vec<(usize, ScaleCells)> = cfg
        .s_grid
        .par_iter()
        .map(|&s| {
            if xp.values.len() / s < 2 {
                return (2 * (xp.values.len() / s), undefined_cells(cfg.q_grid.len()));
            }
            let c = covariances(&xp.values, None, s, cfg.poly_order);
            let xx = clean(&c.xx, &c.x_scale, &c.x_scale);
            (xx.len(), cells(&xx, SurfaceKind::Auto, &cfg.q_grid))
        })
        .collect();
    Ok(assemble(SurfaceKind::Auto, cfg, per_scale))
}

/// Auto surfaces of both series and their cross surface, from one segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceTriple {
    pub xx: FluctuationSurface,
    pub yy: FluctuationSurface,
    pub xy: FluctuationSurface,
}

pub fn surface_triple(x: &[f64], y: &[f64], cfg: &SurfaceConfig) -> Result<SurfaceTriple> {
    if x.len() != y.len() {
        return invalid(format!("series lengths differ: {} vs {}", x.len(), y.len()));
    }
    cfg.validate(x.len())?;
    let xp = profile(x)?;
    let yp = profile(y)?;
    let nq = cfg.q_grid.len();
    let per_scale: Vec<[(usize, ScaleCells); 3]> = cfg
        .s_grid
        .par_iter()
        .map(|&s| {
            let len = xp.values.len();
            if len / s < 2 {
                let n = 2 * (len / s);
                return [
                    (n, undefined_cells(nq)),
                    (n, undefined_cells(nq)),
                    (n, undefined_cells(nq)),
                ];
            }
            let c = covariances(&xp.values, Some(&yp.values), s, cfg.poly_order);
            let xx = clean(&c.xx, &c.x_scale, &c.x_scale);
            let yy = clean(&c.yy, &c.y_scale, &c.y_scale);
            let xy = clean(&c.xy, &c.x_scale, &c.y_scale);
            let n = xx.len();
            [
                (n, cells(&xx, SurfaceKind::Auto, &cfg.q_grid)),
                (n, cells(&yy, SurfaceKind::Auto, &cfg.q_grid)),
                (n, cells(&xy, SurfaceKind::Cross, &cfg.q_grid)),
            ]
        })
        .collect();
    let mut xx = Vec::with_capacity(per_scale.len());
    let mut yy = Vec::with_capacity(per_scale.len());
    let mut xy = Vec::with_capacity(per_scale.len());
    for [a, b, c] in per_scale {
        xx.push(a);
        yy.push(b);
        xy.push(c);
    }
    Ok(SurfaceTriple {
        xx: assemble(SurfaceKind::Auto, cfg, xx),
        yy: assemble(SurfaceKind::Auto, cfg, yy),
        xy: assemble(SurfaceKind::Cross, cfg, xy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::gaussian_noise;

    #[test]
    fn profile_examples() {
        assert_eq!(profile(&[1.0, -1.0]).unwrap().values, vec![1.0, 0.0]);
        assert_eq!(profile(&[3.0; 5]).unwrap().values, vec![0.0; 5]);
        assert!(profile(&[1.0]).is_err());
    }

    #[test]
    fn basis_is_orthonormal() {
        for (s, m) in [(4, 2), (10, 3), (257, 5)] {
            let b = PolyBasis::new(s, m);
            for i in 0..=m {
                for j in 0..=m {
                    let d: f64 = (0..s).map(|k| b.vectors[i * s + k] * b.vectors[j * s + k]).sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((d - expect).abs() < 1e-12, "s={s} m={m} <{i},{j}>={d}");
                }
            }
        }
    }

    #[test]
    fn polynomial_profile_detrends_to_zero() {
        let x: Vec<f64> = (0..200).map(|i| {
            let t = i as f64;
            0.3 + 0.01 * t - 2e-4 * t * t
        }).collect();
        let p = Profile { values: x.clone(), source_length: x.len() };
        let f2 = segment_cross_covariance(&p, &p, 20, 2).unwrap();
        let scale = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        for v in f2 {
            assert!(v.abs() <= 1e-18 * scale.max(1.0), "{v}");
        }
    }

    #[test]
    fn negated_pair_negates_covariance() {
        let x = gaussian_noise(500, 3);
        let px = profile(&x).unwrap();
        let ny: Vec<f64> = x.iter().map(|v| -v).collect();
        let py = profile(&ny).unwrap();
        let xx = segment_cross_covariance(&px, &px, 32, 2).unwrap();
        let xy = segment_cross_covariance(&px, &py, 32, 2).unwrap();
        for (a, b) in xx.iter().zip(&xy) {
            assert!((a + b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn scale_errors() {
        let p = profile(&gaussian_noise(100, 1)).unwrap();
        assert!(segment_cross_covariance(&p, &p, 3, 2).is_err());
        assert!(segment_cross_covariance(&p, &p, 101, 2).is_err());
        assert!(segment_cross_covariance(&p, &p, 60, 2).is_err());
    }

    #[test]
    fn fluctuation_examples() {
        assert!((fluctuation_cross(&[2.0; 6], 3.0).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(fluctuation_cross(&[4.0, -4.0], 2.0).unwrap(), 0.0);
        assert!(fluctuation_cross(&[1.0], 0.0).is_err());
        let f = fluctuation_auto(&[1.0, 4.0], 2.0).unwrap();
        assert!((f.value - 2.5f64.sqrt()).abs() < 1e-14);
        let f = fluctuation_auto(&[1.0, 4.0], -2.0).unwrap();
        assert!((f.value - 1.6f64.sqrt()).abs() < 1e-14);
        assert!(fluctuation_auto(&[0.0, 0.0], -1.0).is_err());
        let f = fluctuation_auto(&[0.0, 1.0, 1.0, 1.0], -2.0).unwrap();
        assert_eq!(f.excluded, 1);
        assert!((f.value - 1.0).abs() < 1e-14);
    }

    #[test]
    fn q_grid_default() {
        let g = default_q_grid();
        assert_eq!(g.len(), 40);
        assert_eq!(g[0], -4.0);
        assert_eq!(*g.last().unwrap(), 4.0);
        assert!(g.iter().all(|q| *q != 0.0));
        assert!(g.contains(&0.2) && g.contains(&-0.2));
    }

    #[test]
    fn scale_grid_default() {
        let g = default_s_grid(1 << 16, 2);
        assert_eq!(g[0], 10);
        assert_eq!(*g.last().unwrap(), (1 << 16) / 5);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn gap_runs_exclude_negative_q() {
        // long flat stretches give exactly detrended segments
        let mut x = gaussian_noise(4000, 9);
        for v in x.iter_mut().take(2000) {
            *v = 0.0;
        }
        let cfg = SurfaceConfig {
            q_grid: vec![-2.0, 2.0],
            s_grid: vec![50, 400],
            poly_order: 2,
        };
        let f = surface(&x, None, &cfg).unwrap();
        assert!(!f.is_defined(0, 0));
        assert!(f.excluded[f.index(0, 0)] > 0);
        assert!(f.is_defined(1, 0));
    }

    #[test]
    fn binary_roundtrip() {
        let x = gaussian_noise(2000, 4);
        let f = surface(&x, None, &SurfaceConfig::defaults(x.len())).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"FQSF1");
        let mut g = FluctuationSurface::read_binary(buf.as_slice()).unwrap();
        g.segments = f.segments.clone();
        assert_eq!(f, g);
    }
}
