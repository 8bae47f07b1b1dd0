//! Market-data ingestion: tick parsing, forward-fill resampling, log-returns and
//! trading-activity statistics.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{insufficient, invalid, Error, Result};
use crate::stats::mean_std;

/// One trade or quote observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tick {
    /// Milliseconds since the Unix epoch, UTC.
    pub timestamp_ms: i64,
    pub price: f64,
    pub volume: f64,
}

/// Irregularly spaced ticks of one exchange rate on one venue.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TickSeries {
    pub symbol: String,
    pub venue: String,
    pub ticks: Vec<Tick>,
}

impl TickSeries {
    /// Builds a series, checking ordering and price positivity.
    pub fn new(symbol: impl Into<String>, venue: impl Into<String>, ticks: Vec<Tick>) -> Result<Self> {
        for (i, t) in ticks.iter().enumerate() {
            if !(t.price > 0.0) || !t.price.is_finite() {
                return invalid(format!("tick {i}: price must be positive, got {}", t.price));
            }
            if !(t.volume >= 0.0) {
                return invalid(format!("tick {i}: volume must be nonnegative"));
            }
            if i > 0 && t.timestamp_ms < ticks[i - 1].timestamp_ms {
                return invalid(format!("tick {i}: decreasing timestamp"));
            }
        }
        Ok(Self {
            symbol: symbol.into(),
            venue: venue.into(),
            ticks,
        })
    }

    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }
}

/// Column layout of an input CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TickFormat {
    /// `timestamp_ms,price[,volume]`
    Tick,
    /// `timestamp_ms,price` or `timestamp_ms,open,high,low,close,volume` (close used).
    Bar,
}

/// Parses a tick or bar CSV stream.
///
/// A header is accepted on the first line only (detected by a non-numeric first
/// field). Blank lines are skipped. Rows must be ordered by timestamp.
pub fn parse_ticks<R: BufRead>(
    reader: R,
    format: TickFormat,
    symbol: &str,
    venue: &str,
) -> Result<TickSeries> {
    let mut ticks: Vec<Tick> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if idx == 0 && fields[0].parse::<i64>().is_err() && fields[0].parse::<f64>().is_err() {
            continue;
        }
        let parse_err = |msg: String| Error::Parse { line: lineno, msg };
        let timestamp_ms = fields[0]
            .parse::<i64>()
            .map_err(|_| parse_err(format!("bad timestamp {:?}", fields[0])))?;
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(format!("bad number {s:?}")))
        };
        let (price, volume) = match (format, fields.len()) {
            (TickFormat::Tick, 2) => (num(fields[1])?, 0.0),
            (TickFormat::Tick, 3) => (num(fields[1])?, num(fields[2])?),
            (TickFormat::Bar, 2) => (num(fields[1])?, 0.0),
            (TickFormat::Bar, 6) => (num(fields[4])?, num(fields[5])?),
            (_, n) => return Err(parse_err(format!("unexpected column count {n}"))),
        };
        if price <= 0.0 {
            return Err(parse_err(format!("non-positive price {price}")));
        }
        if volume < 0.0 {
            return Err(parse_err(format!("negative volume {volume}")));
        }
        if let Some(prev) = ticks.last() {
            if timestamp_ms < prev.timestamp_ms {
                return Err(parse_err(format!(
                    "decreasing timestamp {timestamp_ms} after {}",
                    prev.timestamp_ms
                )));
            }
        }
        ticks.push(Tick {
            timestamp_ms,
            price,
            volume,
        });
    }
    Ok(TickSeries {
        symbol: symbol.to_string(),
        venue: venue.to_string(),
        ticks,
    })
}

/// Prices on a uniform grid; `gap_mask[i]` is true when interval `i` had no trade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceGrid {
    pub t0_ms: i64,
    pub delta_t: f64,
    pub prices: Vec<f64>,
    pub gap_mask: Vec<bool>,
}

fn delta_ms(delta_t: f64) -> Result<i64> {
    let ms = (delta_t * 1000.0).round();
    if !(ms >= 1.0) || !ms.is_finite() {
        return invalid(format!("sampling interval must be at least 1 ms, got {delta_t} s"));
    }
    Ok(ms as i64)
}

/// Resamples ticks onto a grid of `delta_t` seconds, carrying the last observed
/// price into intervals without trades.
///
/// Interval `k` covers `[t0 + kΔ, t0 + (k+1)Δ)` where `t0` is the first tick's
/// interval boundary; its price is the last tick inside it.
pub fn resample(ticks: &TickSeries, delta_t: f64) -> Result<PriceGrid> {
    let dt = delta_ms(delta_t)?;
    let first = match ticks.ticks.first() {
        Some(t) => t,
        None => return insufficient("cannot resample an empty tick series"),
    };
    let t0 = first.timestamp_ms.div_euclid(dt) * dt;
    let last = ticks.ticks.last().unwrap().timestamp_ms;
    let n = ((last - t0).div_euclid(dt) + 1) as usize;
    let mut prices = vec![f64::NAN; n];
    let mut gap_mask = vec![true; n];
    for t in &ticks.ticks {
        let k = (t.timestamp_ms - t0).div_euclid(dt) as usize;
        prices[k] = t.price;
        gap_mask[k] = false;
    }
    for k in 1..n {
        if gap_mask[k] {
            prices[k] = prices[k - 1];
        }
    }
    Ok(PriceGrid {
        t0_ms: t0,
        delta_t,
        prices,
        gap_mask,
    })
}

/// Uniformly sampled log-returns.
///
/// For raw returns a gap-marked entry is exactly zero; transformations such as
/// [`normalize`] keep the mask but rescale every value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub symbol: String,
    /// Sampling interval in seconds.
    pub delta_t: f64,
    /// Timestamp (ms) of the first return's starting sample.
    pub t0_ms: i64,
    pub values: Vec<f64>,
    pub gap_mask: Vec<bool>,
}

impl ReturnSeries {
    /// Gap-free series from plain values.
    pub fn from_values(symbol: impl Into<String>, delta_t: f64, t0_ms: i64, values: Vec<f64>) -> Self {
        let gap_mask = vec![false; values.len()];
        Self {
            symbol: symbol.into(),
            delta_t,
            t0_ms,
            values,
            gap_mask,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Timestamp in ms of sample `i`.
    pub fn timestamp(&self, i: usize) -> i64 {
        self.t0_ms + (i as f64 * self.delta_t * 1000.0).round() as i64
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            symbol: self.symbol.clone(),
            delta_t: self.delta_t,
            t0_ms: self.t0_ms,
            values,
            gap_mask: self.gap_mask.clone(),
        }
    }
}

/// `log p[i+1] - log p[i]` for every consecutive pair.
pub fn log_return_values(prices: &[f64]) -> Result<Vec<f64>> {
    if let Some((i, p)) = prices.iter().enumerate().find(|(_, p)| !(**p > 0.0)) {
        return invalid(format!("price {i} is not positive: {p}"));
    }
    Ok(prices.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
}

/// Log-returns of a resampled grid. Return `i` spans intervals `i -> i+1` and is
/// gap-marked (and exactly zero) when interval `i+1` had no trade.
pub fn log_returns(symbol: &str, grid: &PriceGrid) -> Result<ReturnSeries> {
    if grid.prices.len() != grid.gap_mask.len() {
        return invalid("prices and gap mask differ in length");
    }
    let mut values = log_return_values(&grid.prices)?;
    let gap_mask: Vec<bool> = grid.gap_mask.iter().skip(1).copied().collect();
    for (v, g) in values.iter_mut().zip(&gap_mask) {
        if *g {
            *v = 0.0;
        }
    }
    Ok(ReturnSeries {
        symbol: symbol.to_string(),
        delta_t: grid.delta_t,
        t0_ms: grid.t0_ms,
        values,
        gap_mask,
    })
}

fn standardized(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return insufficient("need at least two samples to standardize");
    }
    let (m, s) = mean_std(values);
    if !(s > 0.0) {
        return invalid("series has zero variance");
    }
    Ok(values.iter().map(|v| (v - m) / s).collect())
}

/// `(R - mean) / std` with the population standard deviation.
pub fn normalize(returns: &ReturnSeries) -> Result<ReturnSeries> {
    Ok(returns.with_values(standardized(&returns.values)?))
}

/// Output of [`deseasonalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Deseasonalized {
    pub series: ReturnSeries,
    /// Phases whose standard deviation was zero; their samples are left unchanged.
    pub degenerate_phases: Vec<usize>,
}

/// Divides each return by the standard deviation of all returns sharing its
/// phase (`index mod period`).
pub fn deseasonalize(returns: &ReturnSeries, period: usize) -> Result<Deseasonalized> {
    let n = returns.len();
    if period == 0 || period >= n {
        return invalid(format!("period must be in 1..{n}, got {period}"));
    }
    if n < 2 * period {
        return insufficient(format!("need at least {} samples for period {period}", 2 * period));
    }
    let mut stds = Vec::with_capacity(period);
    let mut degenerate = Vec::new();
    for phase in 0..period {
        let bucket: Vec<f64> = returns.values.iter().skip(phase).step_by(period).copied().collect();
        let (_, s) = mean_std(&bucket);
        if !(s > 0.0) {
            degenerate.push(phase);
        }
        stds.push(s);
    }
    let values = returns
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let s = stds[i % period];
            if s > 0.0 {
                v / s
            } else {
                *v
            }
        })
        .collect();
    Ok(Deseasonalized {
        series: returns.with_values(values),
        degenerate_phases: degenerate,
    })
}

/// Non-trading period statistics of a return series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    /// Average length (in samples) of maximal runs of gap-marked samples.
    pub mean_gap_length: f64,
    pub gap_count: usize,
    /// Mean spacing in seconds between samples that contain trades
    /// (`delta_t * len / active`).
    pub mean_intertrade_time: f64,
}

pub fn gap_stats(returns: &ReturnSeries) -> GapStats {
    let mut runs = 0usize;
    let mut total = 0usize;
    let mut in_run = false;
    for &g in &returns.gap_mask {
        if g {
            total += 1;
            if !in_run {
                runs += 1;
            }
        }
        in_run = g;
    }
    let active = returns.len() - total;
    GapStats {
        mean_gap_length: if runs > 0 { total as f64 / runs as f64 } else { 0.0 },
        gap_count: runs,
        mean_intertrade_time: if active > 0 {
            returns.delta_t * returns.len() as f64 / active as f64
        } else {
            0.0
        },
    }
}

/// Mean inter-transaction time inside one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntertradeWindow {
    pub start_ms: i64,
    /// Mean seconds between consecutive ticks, `None` when the window holds fewer than two ticks.
    pub mean_seconds: Option<f64>,
    pub intervals: usize,
}

/// Per-window mean inter-tick time. Windows of `window` seconds start at the
/// first tick; a tick-to-tick interval is assigned to the window of its later tick.
pub fn intertrade_stats(ticks: &TickSeries, window: f64) -> Result<Vec<IntertradeWindow>> {
    let w = delta_ms(window)?;
    let Some(first) = ticks.ticks.first() else {
        return Ok(Vec::new());
    };
    let start = first.timestamp_ms;
    let last = ticks.ticks.last().unwrap().timestamp_ms;
    let nwin = ((last - start) / w + 1) as usize;
    let mut sums = vec![0i64; nwin];
    let mut counts = vec![0usize; nwin];
    for pair in ticks.ticks.windows(2) {
        let k = ((pair[1].timestamp_ms - start) / w) as usize;
        sums[k] += pair[1].timestamp_ms - pair[0].timestamp_ms;
        counts[k] += 1;
    }
    Ok((0..nwin)
        .map(|k| IntertradeWindow {
            start_ms: start + k as i64 * w,
            mean_seconds: (counts[k] > 0).then(|| sums[k] as f64 / counts[k] as f64 / 1000.0),
            intervals: counts[k],
        })
        .collect())
}

/// `(P - mean(P)) / std(P) + 4`, population standard deviation.
pub fn standardize_price(prices: &[f64]) -> Result<Vec<f64>> {
    Ok(standardized(prices)?.into_iter().map(|v| v + 4.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ticks(ts_price: &[(i64, f64)]) -> TickSeries {
        TickSeries::new(
            "X/Y",
            "test",
            ts_price
                .iter()
                .map(|&(timestamp_ms, price)| Tick {
                    timestamp_ms,
                    price,
                    volume: 1.0,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn parses_two_ticks() {
        let csv = "1514764800000,13000.0,0.5\n1514764801000,13001.0,0.2";
        let s = parse_ticks(csv.as_bytes(), TickFormat::Tick, "BTC/USD", "x").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.ticks[1].price, 13001.0);
        assert_eq!(s.ticks[0].volume, 0.5);
    }

    #[test]
    fn header_crlf_and_missing_volume() {
        let csv = "timestamp_ms,price\r\n1000,1.5\r\n2000,1.6\r\n";
        let s = parse_ticks(csv.as_bytes(), TickFormat::Tick, "a", "b").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.ticks[0].volume, 0.0);
    }

    #[test]
    fn bar_close_column() {
        let csv = "0,1,3,0.5,2,10\n60000,2,2,2,2.5,1\n";
        let s = parse_ticks(csv.as_bytes(), TickFormat::Bar, "a", "b").unwrap();
        assert_eq!(s.ticks[0].price, 2.0);
        assert_eq!(s.ticks[1].price, 2.5);
    }

    #[test]
    fn empty_stream() {
        let s = parse_ticks("".as_bytes(), TickFormat::Tick, "a", "b").unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn negative_price_reports_line() {
        let csv = "0,1.0,1\n1000,-1,1\n";
        match parse_ticks(csv.as_bytes(), TickFormat::Tick, "a", "b") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_order_rejected() {
        let csv = "2000,1.0\n1000,1.0\n";
        assert!(matches!(
            parse_ticks(csv.as_bytes(), TickFormat::Tick, "a", "b"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn malformed_row() {
        let csv = "1000,1.0\nabc,1.0\n";
        assert!(matches!(
            parse_ticks(csv.as_bytes(), TickFormat::Tick, "a", "b"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn forward_fill() {
        let g = resample(&ticks(&[(0, 100.0), (25_000, 101.0)]), 10.0).unwrap();
        assert_eq!(g.prices, vec![100.0, 100.0, 101.0]);
        assert_eq!(g.gap_mask, vec![false, true, false]);
    }

    #[test]
    fn single_tick() {
        let g = resample(&ticks(&[(12_345, 7.0)]), 10.0).unwrap();
        assert_eq!(g.prices, vec![7.0]);
        assert_eq!(g.gap_mask, vec![false]);
        assert_eq!(g.t0_ms, 10_000);
    }

    #[test]
    fn resample_empty_is_error() {
        assert!(resample(&TickSeries::default(), 10.0).is_err());
    }

    #[test]
    fn dense_ticks_have_no_gaps() {
        let t: Vec<(i64, f64)> = (0..1000).map(|i| (i * 1000, 100.0 + (i % 7) as f64)).collect();
        let g = resample(&ticks(&t), 10.0).unwrap();
        // brute-force interval scan
        for (k, gap) in g.gap_mask.iter().enumerate() {
            let lo = k as i64 * 10_000;
            let any = t.iter().any(|(ts, _)| *ts >= lo && *ts < lo + 10_000);
            assert_eq!(*gap, !any);
        }
        assert_eq!(gap_stats(&log_returns("x", &g).unwrap()).gap_count, 0);
    }

    #[test]
    fn log_return_definitions() {
        assert_eq!(log_return_values(&[100.0, 100.0]).unwrap(), vec![0.0]);
        let r = log_return_values(&[100.0, 100.0 * std::f64::consts::E]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15);
        assert!(log_return_values(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn gap_returns_are_zero() {
        let g = resample(&ticks(&[(0, 100.0), (25_000, 101.0), (31_000, 99.0)]), 10.0).unwrap();
        let r = log_returns("x", &g).unwrap();
        assert_eq!(r.gap_mask, vec![true, false, false]);
        assert_eq!(r.values[0], 0.0);
    }

    #[test]
    fn normalize_examples() {
        let r = ReturnSeries::from_values("x", 1.0, 0, vec![1.0, -1.0]);
        assert_eq!(normalize(&r).unwrap().values, vec![1.0, -1.0]);
        let r = ReturnSeries::from_values("x", 1.0, 0, vec![2.0, 0.0]);
        assert_eq!(normalize(&r).unwrap().values, vec![1.0, -1.0]);
        let r = ReturnSeries::from_values("x", 1.0, 0, vec![3.0, 3.0, 3.0]);
        assert!(normalize(&r).is_err());
    }

    #[test]
    fn deseasonalize_zero_series() {
        let r = ReturnSeries::from_values("x", 1.0, 0, vec![0.0; 10]);
        let d = deseasonalize(&r, 2).unwrap();
        assert_eq!(d.series.values, vec![0.0; 10]);
        assert_eq!(d.degenerate_phases, vec![0, 1]);
    }

    #[test]
    fn deseasonalize_bad_period() {
        let r = ReturnSeries::from_values("x", 1.0, 0, vec![1.0, 2.0, 3.0]);
        assert!(deseasonalize(&r, 0).is_err());
        assert!(deseasonalize(&r, 3).is_err());
        assert!(deseasonalize(&r, 2).is_err());
    }

    #[test]
    fn gap_run_lengths() {
        let mut r = ReturnSeries::from_values("x", 10.0, 0, vec![0.0; 5]);
        r.gap_mask = vec![false, true, true, false, true];
        let g = gap_stats(&r);
        assert_eq!(g.gap_count, 2);
        assert_eq!(g.mean_gap_length, 1.5);
        assert!((g.mean_intertrade_time - 25.0).abs() < 1e-12);
        let empty = ReturnSeries::from_values("x", 10.0, 0, vec![]);
        assert_eq!(gap_stats(&empty).gap_count, 0);
        assert_eq!(gap_stats(&empty).mean_gap_length, 0.0);
    }

    #[test]
    fn intertrade_windows() {
        let s = ticks(&[(0, 1.0), (1000, 1.0), (3000, 1.0), (10_500, 1.0), (12_500, 1.0)]);
        let w = intertrade_stats(&s, 10.0).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].mean_seconds, Some(1.5));
        assert_eq!(w[1].mean_seconds, Some((7.5 + 2.0) / 2.0));
    }

    #[test]
    fn standardized_price() {
        assert_eq!(standardize_price(&[1.0, 3.0]).unwrap(), vec![3.0, 5.0]);
        assert!(standardize_price(&[2.0, 2.0]).is_err());
    }
}
