//! Triangular and cross-platform arbitrage signals.
//!
//! A triangle's arbitrage return is the signed sum of its three legs' log
//! returns. Sign patterns are always explicit inputs; nothing is inferred from
//! the rate labels beyond checking that they close a cycle over three assets.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{insufficient, invalid, Error, Result};
use crate::ingest::ReturnSeries;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triangle {
    /// Rate labels of the form `BASE/QUOTE`.
    pub legs: [String; 3],
    pub signs: [i8; 3],
}

fn split_pair(label: &str) -> Result<(&str, &str)> {
    match label.split_once('/') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() && a != b && !b.contains('/') => Ok((a, b)),
        _ => invalid(format!("rate label {label:?} is not of the form BASE/QUOTE")),
    }
}

impl Triangle {
    pub fn new(legs: [&str; 3], signs: [i8; 3]) -> Result<Self> {
        if signs.iter().any(|s| *s != 1 && *s != -1) {
            return invalid("triangle signs must be +1 or -1");
        }
        let mut count: BTreeMap<&str, usize> = BTreeMap::new();
        let mut pairs = Vec::new();
        for leg in &legs {
            let (a, b) = split_pair(leg)?;
            *count.entry(a).or_default() += 1;
            *count.entry(b).or_default() += 1;
            pairs.push(if a < b { (a, b) } else { (b, a) });
        }
        pairs.sort();
        pairs.dedup();
        if count.len() != 3 || count.values().any(|c| *c != 2) || pairs.len() != 3 {
            return invalid(format!("legs {legs:?} do not form a cycle over three assets"));
        }
        Ok(Self {
            legs: legs.map(str::to_string),
            signs,
        })
    }

    pub fn label(&self) -> String {
        self.legs.join("-")
    }

    /// The same cycle with every leg quoted the other way round.
    pub fn reversed(&self) -> Self {
        Self {
            legs: self.legs.clone().map(|l| {
                let (a, b) = l.split_once('/').expect("validated label");
                format!("{b}/{a}")
            }),
            signs: self.signs,
        }
    }
}

/// Reads `legA legB legC s1 s2 s3` lines; blank lines and `#` comments are skipped.
pub fn parse_triangles<R: BufRead>(reader: R) -> Result<Vec<Triangle>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let f: Vec<&str> = body.split_whitespace().collect();
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        if f.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", f.len())));
        }
        let mut signs = [0i8; 3];
        for k in 0..3 {
            signs[k] = f[3 + k]
                .parse()
                .map_err(|_| err(format!("bad sign {:?}", f[3 + k])))?;
        }
        out.push(Triangle::new([f[0], f[1], f[2]], signs).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbSeries {
    pub label: String,
    pub delta_t: f64,
    pub t0_ms: i64,
    pub values: Vec<f64>,
    pub gap_mask: Vec<bool>,
}

impl ArbSeries {
    pub fn timestamp(&self, i: usize) -> i64 {
        self.t0_ms + (i as f64 * self.delta_t * 1000.0).round() as i64
    }

    /// `timestamp,arb` rows; gap rows have an empty value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "timestamp,arb")?;
        for (i, v) in self.values.iter().enumerate() {
            if self.gap_mask[i] {
                writeln!(w, "{},", self.timestamp(i))?;
            } else {
                writeln!(w, "{},{}", self.timestamp(i), v)?;
            }
        }
        Ok(())
    }
}

/// Common window of series on the same sampling grid: `(t0, offsets, len)`.
fn align(series: &[&ReturnSeries]) -> Result<(i64, Vec<usize>, usize)> {
    let dt = series[0].delta_t;
    if series.iter().any(|s| (s.delta_t - dt).abs() > 1e-9) {
        return invalid("series have different sampling intervals");
    }
    let step = (dt * 1000.0).round() as i64;
    if step <= 0 {
        return invalid("sampling interval must be at least 1 ms");
    }
    let t0 = series.iter().map(|s| s.t0_ms).max().unwrap();
    let end = series
        .iter()
        .map(|s| s.t0_ms + step * s.len() as i64)
        .min()
        .unwrap();
    let mut offsets = Vec::with_capacity(series.len());
    for s in series {
        if (t0 - s.t0_ms) % step != 0 {
            return invalid(format!("{} is not on the common sampling grid", s.symbol));
        }
        offsets.push(((t0 - s.t0_ms) / step) as usize);
    }
    if end <= t0 {
        return insufficient("series do not overlap in time");
    }
    Ok((t0, offsets, ((end - t0) / step) as usize))
}

/// `Arb(t) = s1 R1(t) + s2 R2(t) + s3 R3(t)` over the timestamps common to all legs.
pub fn arb_returns(legs: [&ReturnSeries; 3], triangle: &Triangle) -> Result<ArbSeries> {
    let (t0, off, n) = align(&legs)?;
    let s = triangle.signs.map(f64::from);
    let mut values = Vec::with_capacity(n);
    let mut gap_mask = Vec::with_capacity(n);
    for i in 0..n {
        let gap = (0..3).any(|k| legs[k].gap_mask[off[k] + i]);
        gap_mask.push(gap);
        values.push(if gap {
            0.0
        } else {
            (0..3).map(|k| s[k] * legs[k].values[off[k] + i]).sum()
        });
    }
    Ok(ArbSeries {
        label: triangle.label(),
        delta_t: legs[0].delta_t,
        t0_ms: t0,
        values,
        gap_mask,
    })
}

/// Difference of one rate's returns on two venues.
pub fn arb_cross_platform(a: &ReturnSeries, b: &ReturnSeries) -> Result<ArbSeries> {
    if a.symbol != b.symbol {
        return invalid(format!("symbols differ: {} vs {}", a.symbol, b.symbol));
    }
    let (t0, off, n) = align(&[a, b])?;
    let mut values = Vec::with_capacity(n);
    let mut gap_mask = Vec::with_capacity(n);
    for i in 0..n {
        let (ia, ib) = (off[0] + i, off[1] + i);
        let gap = a.gap_mask[ia] || b.gap_mask[ib];
        gap_mask.push(gap);
        values.push(if gap { 0.0 } else { a.values[ia] - b.values[ib] });
    }
    Ok(ArbSeries {
        label: a.symbol.clone(),
        delta_t: a.delta_t,
        t0_ms: t0,
        values,
        gap_mask,
    })
}

/// Aligned bid and ask quotes of one rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quotes {
    pub bid: Vec<f64>,
    pub ask: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidAskSignal {
    /// `bid2 · bid3 / ask1`.
    pub forward: f64,
    /// `bid1 / (ask2 · ask3)`.
    pub backward: f64,
    pub opportunity: bool,
    /// `max(forward, backward) − 1`.
    pub magnitude: f64,
}

/// Evaluates both directions around the cycle at every timestamp.
pub fn arb_bidask(legs: [&Quotes; 3]) -> Result<Vec<BidAskSignal>> {
    let n = legs[0].bid.len();
    if legs.iter().any(|q| q.bid.len() != n || q.ask.len() != n) {
        return invalid("quote series differ in length");
    }
    (0..n)
        .map(|t| {
            for (k, q) in legs.iter().enumerate() {
                if !(q.bid[t] > 0.0) || q.bid[t] > q.ask[t] {
                    return invalid(format!("leg {} at index {t}: need 0 < bid <= ask", k + 1));
                }
            }
            let forward = legs[1].bid[t] * legs[2].bid[t] / legs[0].ask[t];
            let backward = legs[0].bid[t] / (legs[1].ask[t] * legs[2].ask[t]);
            Ok(BidAskSignal {
                forward,
                backward,
                opportunity: forward > 1.0 || backward > 1.0,
                magnitude: forward.max(backward) - 1.0,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArbStats {
    pub mean_abs: f64,
    pub max_abs: f64,
    /// Fraction of samples with `|Arb| > threshold`.
    pub nonzero_fraction: f64,
    pub samples: usize,
}

/// Statistics of `|Arb|` over non-gap samples.
pub fn arb_stats(series: &ArbSeries, threshold: f64) -> Result<ArbStats> {
    let abs: Vec<f64> = series
        .values
        .iter()
        .zip(&series.gap_mask)
        .filter(|(_, g)| !**g)
        .map(|(v, _)| v.abs())
        .collect();
    if abs.is_empty() {
        return insufficient("arbitrage series has no non-gap samples");
    }
    let n = abs.len() as f64;
    Ok(ArbStats {
        mean_abs: abs.iter().sum::<f64>() / n,
        max_abs: abs.iter().cloned().fold(0.0, f64::max),
        nonzero_fraction: abs.iter().filter(|v| **v > threshold).count() as f64 / n,
        samples: abs.len(),
    })
}
