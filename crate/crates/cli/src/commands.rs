//! Command pipelines.

use std::collections::BTreeMap;

use fractalis::arbitrage::{arb_cross_platform, arb_returns, arb_stats, parse_triangles, ArbSeries};
use fractalis::detrended::{surface, surface_triple, FluctuationSurface, SurfaceConfig};
use fractalis::distributions::{acf, empirical_ccdf, tail_exponent, AcfNormalizer, TailMethod};
use fractalis::ingest::{gap_stats, intertrade_stats, normalize, ReturnSeries};
use fractalis::matrix::{
    base_ladder, correlation_matrix, mp_bounds, mp_pdf, quasi_idempotence, read_labeled_matrix, rebase,
    remove_market_factor, rolling_lambda_max, write_ladder_csv, AssetPanel, Base, CorrelationMatrix,
};
use fractalis::network::{
    degree_cdf, dendrogram, distances, mst, qmst, DistanceMatrix, Linkage, Provenance, RhoStack, SpanningTree,
};
use fractalis::plot::{Plot, Style};
use fractalis::scaling::{
    fit_exponents, hxy_and_dxy, rho, rho_bar, rho_lagged, rho_rolling, spectrum, FitRange, RhoSurface, RollingSpec,
    ScalingExponents, SingularitySpectrum,
};
use fractalis::surrogates::{realizations, SurrogateKind, SurrogateSpec};
use fractalis::synthetic;
use serde_json::json;

use crate::config::AnalysisConfig;
use crate::error::CliError;
use crate::io::{fmt_opt, open_text, read_returns, read_ticks, stem, Meta, Output};

const POPULATION: &str = "standard deviations use the population (1/N) convention";
const SEGMENTS: &str = "each scale uses 2*M_s segments: M_s = floor(T/s) from the start and M_s from the end of the profile";
const NEGATIVE_Q: &str = "for q < 0, segments with zero detrended variance (to working precision) are excluded; cells with more than 20% excluded segments are undefined";
const CROSS_SIGN: &str = "cross moments keep each segment covariance's sign; F_xy is the signed q-th root and non-positive values are undefined";
const FIT: &str = "exponents are least-squares slopes of ln F against ln s over the recorded fit range, requiring at least 3 defined points";
const LEGENDRE: &str = "h'(q) by central differences on the q grid (one-sided at the ends); alpha0 averages alpha at the q values nearest zero on either side";
const RHO_MOMENTS: &str = "rho uses the q-th order moments before the 1/q root; q > 0 only";
const RHO_BAR: &str = "rho_bar averages defined scales only";
const RNG: &str = "random numbers from ChaCha20 seeded with a 64-bit seed; realization k uses seed + k";
const ODD_FOURIER: &str = "odd-length Fourier input drops its final sample";
const ARB_ALIGN: &str = "legs are aligned on the intersection of their timestamps; gaps propagate and are excluded from statistics";
const ARB_ABS: &str = "statistics are computed over |Arb|";
const QI: &str = "quasi-idempotence clips negative entries to zero, normalizes each square by its Frobenius norm, stops when off-diagonal entries change by less than 1e-10 (at most 10^4 squarings)";
const EIGEN: &str = "symmetric eigensolver; eigenvalues ascending; eigenvector signs chosen so that components sum to a nonnegative value";
const REBASE: &str = "rebasing drops the base asset and adds the old quote currency as an asset with returns -R(base/quote)";
const FICTITIOUS: &str = "fictitious base: i.i.d. Gaussian log-returns with per-sample std sigma and mean -sigma^2/2";
const MST_TIES: &str = "Prim's algorithm starts at the lexicographically first label; equal weights resolve to the lexicographically first (label, label) pair";
const PATHS: &str = "mean path length averages hop counts over unordered node pairs";
const MEAN_DIST: &str = "mean MST edge weight and mean over the full distance matrix are both reported";
const DEGREES: &str = "degree-CDF fits need at least 10 nodes and 4 distinct degrees and use k >= 2";
const CLUSTER_TIES: &str = "agglomeration ties resolve to the cluster pair with the smallest ids";
const ACF_NORM: &str = "autocorrelation uses the biased (1/N) normalization";
const TAILS: &str = "Hill threshold is the (k+1)-th largest value; the log-log estimate fits the empirical CCDF sampled at 32 bins per decade, dropping bins with fewer than 10 exceedances";

fn config_error(e: fractalis::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn input(cfg: &AnalysisConfig, k: usize, what: &str) -> Result<String, CliError> {
    cfg.inputs
        .get(k)
        .cloned()
        .ok_or_else(|| CliError::Config(format!("missing input: {what}")))
}

fn surface_config(cfg: &AnalysisConfig, len: usize) -> Result<SurfaceConfig, CliError> {
    let c = SurfaceConfig {
        q_grid: cfg.q_values()?,
        s_grid: cfg.s_values(len)?,
        poly_order: cfg.poly_order,
    };
    c.validate(len).map_err(config_error)?;
    Ok(c)
}

fn q_subset(q_grid: &[f64]) -> Vec<usize> {
    let want = [-4.0, -2.0, 2.0, 4.0];
    let mut idx: Vec<usize> = want
        .iter()
        .filter_map(|w| q_grid.iter().position(|q| (q - w).abs() < 1e-9))
        .collect();
    if idx.is_empty() {
        idx = vec![0, q_grid.len() - 1];
        idx.dedup();
    }
    idx
}

fn surface_plot(title: &str, f: &FluctuationSurface, h: &ScalingExponents) -> Plot {
    let mut p = Plot::new(title, "s", "F(q,s)").log_log();
    for qi in q_subset(&f.q_grid) {
        let pts: Vec<(f64, f64)> = (0..f.s_grid.len())
            .filter(|&si| f.is_defined(qi, si))
            .map(|si| (f.s_grid[si] as f64, f.value(qi, si)))
            .collect();
        let q = f.q_grid[qi];
        if h.defined[qi] && !pts.is_empty() {
            let inside: Vec<&(f64, f64)> = pts.iter().filter(|(s, _)| h.fit_range.contains(*s as usize)).collect();
            if let (Some(a), Some(b)) = (inside.first(), inside.last()) {
                let mean_ln: f64 = inside.iter().map(|(s, v)| v.ln() - h.values[qi] * s.ln()).sum::<f64>() / inside.len() as f64;
                let line = |s: f64| (s, (mean_ln + h.values[qi] * s.ln()).exp());
                p = p.with(&format!("fit q={q}"), vec![line(a.0), line(b.0)], Style::Dashed);
            }
        }
        p = p.with(&format!("q={q}"), pts, Style::Points);
    }
    p
}

fn write_surface(out: &Output, name: &str, f: &FluctuationSurface) -> Result<(), CliError> {
    let formula = match f.kind {
        fractalis::detrended::SurfaceKind::Auto => {
            "F(q,s) = [mean over segments of F2(nu,s)^(q/2)]^(1/q); F2 = mean squared residual of the profile after degree-m polynomial detrending"
        }
        fractalis::detrended::SurfaceKind::Cross => {
            "F_xy(q,s) = sign(M)|M|^(1/q), M = mean over segments of sign(F2_xy)|F2_xy|^(q/2); F2_xy = mean product of both profiles' detrending residuals"
        }
    };
    out.write(
        &format!("{name}.csv"),
        Meta::new("fluctuation surface", formula).with(json!({ "poly_order": f.poly_order, "segments_per_scale": f.segments })),
        |w| f.write_csv(w),
    )?;
    out.write(
        &format!("{name}.bin"),
        Meta::new("fluctuation surface (binary cache)", formula).with(json!({ "layout": "FQSF1 little-endian" })),
        |w| f.write_binary(w),
    )
}

fn write_exponents(out: &Output, name: &str, col: &str, h: &ScalingExponents) -> Result<(), CliError> {
    out.write(
        name,
        Meta::new("scaling exponents", "slope of ln F(q,s) against ln s").with(json!({ "fit_range": h.fit_range })),
        |w| h.write_csv(w, col),
    )
}

fn write_spectrum(out: &Output, sp: &SingularitySpectrum) -> Result<(), CliError> {
    let formula = "alpha = h + q h'(q); f(alpha) = q (alpha - h) + 1";
    out.write("spectrum.csv", Meta::new("singularity spectrum", formula), |w| sp.write_csv(w))?;
    let rows = vec![
        ("width".to_string(), sp.width.to_string()),
        ("asymmetry".into(), sp.asymmetry.to_string()),
        ("alpha0".into(), sp.alpha0.to_string()),
        ("left_width".into(), sp.left_width.to_string()),
        ("right_width".into(), sp.right_width.to_string()),
        ("diagnostics".into(), format!("{:?}", sp.diagnostics).replace(',', ";")),
    ];
    out.table(
        "spectrum_summary.csv",
        Meta::new(
            "spectrum width and asymmetry",
            "width = max(alpha) - min(alpha); asymmetry = (dL - dR)/(dL + dR) with dL = alpha0 - min(alpha), dR = max(alpha) - alpha0",
        ),
        &rows,
    )?;
    let plot = Plot::new("singularity spectrum", "alpha", "f(alpha)").with(
        "f(alpha)",
        sp.alpha.iter().cloned().zip(sp.f_alpha.iter().cloned()).collect(),
        Style::Line,
    );
    out.svg("spectrum.svg", &plot, Meta::new("singularity spectrum plot", formula))
}

fn univariate(cfg: &AnalysisConfig, out: &Output, x: &[f64]) -> Result<(ScalingExponents, Option<SingularitySpectrum>), CliError> {
    let sc = surface_config(cfg, x.len())?;
    let fr = cfg.fit(&sc.s_grid)?;
    let f = surface(x, None, &sc)?;
    write_surface(out, "fq", &f)?;
    let h = fit_exponents(&f, fr).map_err(config_error)?;
    write_exponents(out, "hq.csv", "h", &h)?;
    out.svg("fq.svg", &surface_plot("F(q,s)", &f, &h), Meta::new("fluctuation function plot", "log-log F(q,s) with fitted lines"))?;
    let sp = spectrum(&h).ok();
    if let Some(sp) = &sp {
        write_spectrum(out, sp)?;
    }
    Ok((h, sp))
}

pub fn mfdfa(cfg: &AnalysisConfig) -> Result<(), CliError> {
    let out = Output::new("mfdfa", cfg, vec![POPULATION, SEGMENTS, NEGATIVE_Q, FIT, LEGENDRE])?;
    let r = read_returns(&input(cfg, 0, "series")?, cfg)?;
    let (_, sp) = univariate(cfg, &out, &r.values)?;
    if sp.is_none() {
        return Err(CliError::Numerical("fewer than five consecutive defined exponents; spectrum skipped".into()));
    }
    Ok(())
}

pub fn spectrum_cmd(cfg: &AnalysisConfig) -> Result<(), CliError> {
    let out = Output::new("spectrum", cfg, vec![POPULATION, SEGMENTS, NEGATIVE_Q, FIT, LEGENDRE])?;
    let r = read_returns(&input(cfg, 0, "series")?, cfg)?;
    let sc = surface_config(cfg, r.len())?;
    let fr = cfg.fit(&sc.s_grid)?;
    let h = fit_exponents(&surface(&r.values, None, &sc)?, fr).map_err(config_error)?;
    write_exponents(&out, "hq.csv", "h", &h)?;
    let sp = spectrum(&h).map_err(|e| CliError::Numerical(e.to_string()))?;
    write_spectrum(&out, &sp)
}

fn read_pair(cfg: &AnalysisConfig) -> Result<(ReturnSeries, ReturnSeries), CliError> {
    let x = read_returns(&input(cfg, 0, "first series")?, cfg)?;
    let y = read_returns(&input(cfg, 1, "second series")?, cfg)?;
    if x.len() != y.len() {
        return Err(CliError::Data(format!("series lengths differ: {} vs {}", x.len(), y.len())));
    }
    Ok((x, y))
}

fn write_rho(out: &Output, r: &RhoSurface) -> Result<(), CliError> {
    out.write(
        "rho.csv",
        Meta::new("q-dependent detrended cross-correlation coefficient", "rho(q,s) = M_xy / sqrt(M_xx M_yy), M = q-th order moments")
            .with(json!({ "lag": r.lag })),
        |w| r.write_csv(w),
    )?;
    let bar = rho_bar(r)?;
    out.write(
        "rho_bar.csv",
        Meta::new("scale-averaged rho", "rho_bar(q) = |mean over defined s of rho(q,s)|"),
        |w| {
            writeln!(w, "q,rho_bar")?;
            for (q, b) in r.q_grid.iter().zip(&bar) {
                writeln!(w, "{q},{}", fmt_opt(*b))?;
            }
            Ok(())
        },
    )?;
    let mut p = Plot::new("rho(q,s)", "s", "rho");
    p.log_x = true;
    for (qi, q) in r.q_grid.iter().enumerate() {
        if [1.0, 2.0, 3.0, 4.0].iter().any(|v| (v - q).abs() < 1e-9) {
            let pts = (0..r.s_grid.len())
                .filter(|&si| r.is_defined(qi, si))
                .map(|si| (r.s_grid[si] as f64, r.value(qi, si)))
                .collect();
            p = p.with(&format!("q={q}"), pts, Style::Line);
        }
    }
    out.svg("rho.svg", &p, Meta::new("rho plot", "rho(q,s) against s"))
}

pub fn mfcca(cfg: &AnalysisConfig) -> Result<(), CliError> {
    let out = Output::new("mfcca", cfg, vec![POPULATION, SEGMENTS, NEGATIVE_Q, CROSS_SIGN, FIT, RHO_MOMENTS, RHO_BAR])?;
    let (x, y) = read_pair(cfg)?;
    let sc = surface_config(cfg, x.len())?;
    let fr = cfg.fit(&sc.s_grid)?;
    let t = surface_triple(&x.values, &y.values, &sc)?;
    write_surface(&out, "fxy", &t.xy)?;
    let hx = fit_exponents(&t.xx, fr).map_err(config_error)?;
    let hy = fit_exponents(&t.yy, fr).map_err(config_error)?;
    let lam = fit_exponents(&t.xy, fr).map_err(config_error)?;
    let d = hxy_and_dxy(&hx, &hy, &lam)?;
    out.write(
        "exponents.csv",
        Meta::new("generalized Hurst and cross-correlation exponents", "h_xy = (h_x + h_y)/2; d_xy = lambda - h_xy")
            .with(json!({ "fit_range": fr })),
        |w| {
            writeln!(w, "q,h_x,h_y,lambda,h_xy,d_xy")?;
            for i in 0..d.q_grid.len() {
                let cell = |ok: bool, v: f64| if ok { v.to_string() } else { String::new() };
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    d.q_grid[i],
                    cell(hx.defined[i], hx.values[i]),
                    cell(hy.defined[i], hy.values[i]),
                    cell(lam.defined[i], lam.values[i]),
                    cell(hx.defined[i] && hy.defined[i], d.h_xy[i]),
                    cell(d.defined[i], d.d_xy[i]),
                )?;
            }
            Ok(())
        },
    )?;
    out.svg("fxy.svg", &surface_plot("F_xy(q,s)", &t.xy, &lam), Meta::new("cross fluctuation plot", "log-log F_xy(q,s)"))?;
    write_rho(&out, &rho(&t.xy, &t.xx, &t.yy)?)
}

pub fn rho_cmd(cfg: &AnalysisConfig) -> Result<(), CliError> {
    let out = Output::new("rho", cfg, vec![POPULATION, SEGMENTS, CROSS_SIGN, RHO_MOMENTS, RHO_BAR])?;
    let (x, y) = read_pair(cfg)?;
    if let Some(window) = cfg.window {
        let s = cfg.s.ok_or_else(|| CliError::Config("rolling rho needs s".into()))?;
        let spec = RollingSpec {
            window,
            step: cfg.step.unwrap_or(window),
            q: cfg.q,
            s,
            poly_order: cfg.poly_order,
        };
        let roll = rho_rolling(&x.values, &y.values, Some((&x.gap_mask, &y.gap_mask)), spec).map_err(config_error)?;
        return out.write(
            "rolling.csv",
            Meta::new("moving-window rho", "rho(q,s) per window; windows with more than 50% gaps flagged")
                .with(json!({ "window": window, "step": spec.step, "q": cfg.q, "s": s })),
            |w| {
                writeln!(w, "start,rho,gap_flagged")?;
                for r in &roll {
                    writeln!(w, "{},{},{}", r.start, fmt_opt(r.rho), r.gap_flagged as u8)?;
                }
                Ok(())
            },
        );
    }
    let n = x.len().saturating_sub(cfg.lag.unsigned_abs() as usize);
    let sc = surface_config(cfg, n)?;
    let r = rho_lagged(&x.values, &y.values, cfg.lag, &sc).map_err(config_error)?;
    write_rho(&out, &r)
}

pub fn stats(cfg: &AnalysisConfig) -> Result<(), CliError> {
    let out = Output::new("stats", cfg, vec![POPULATION, ACF_NORM, TAILS])?;
    let path = input(cfg, 0, "series")?;
    let r = read_returns(&path, cfg)?;
    let g = normalize(&r)?;
    let vals: Vec<f64> = g.values.iter().zip(&g.gap_mask).filter(|(_, m)| !**m).map(|(v, _)| *v).collect();
    let gs = gap_stats(&r);
    let mut rows = vec![
        ("samples".to_string(), r.len().to_string()),
        ("gaps".into(), r.gap_mask.iter().filter(|m| **m).count().to_string()),
        ("mean".into(), fractalis::stats::mean(&r.values).to_string()),
        ("std".into(), fractalis::stats::std_dev(&r.values).to_string()),
        ("gap_count".into(), gs.gap_count.to_string()),
        ("mean_gap_length".into(), gs.mean_gap_length.to_string()),
        ("mean_intertrade_time".into(), gs.mean_intertrade_time.to_string()),
    ];
    let abs: Vec<f64> = vals.iter().map(|v| v.abs()).filter(|v| *v > 0.0).collect();
    let tails: Vec<(&str, Vec<f64>)> = vec![
        ("positive", vals.iter().cloned().filter(|v| *v > 0.0).collect()),
        ("negative", vals.iter().filter(|v| **v < 0.0).map(|v| -v).collect()),
        ("absolute", abs.clone()),
    ];
    out.write(
        "tail.csv",
        Meta::new("tail exponents", "P(X > x) ~ x^(-gamma); Hill and log-log CCDF regression")
            .with(json!({ "tail_fraction": cfg.tail_fraction })),
        |w| {
            writeln!(w, "tail,method,gamma,stderr,n_tail")?;
            for (name, v) in &tails {
                for (m, label) in [(TailMethod::Hill, "hill"), (TailMethod::LogLog, "loglog")] {
                    match tail_exponent(v, cfg.tail_fraction, m) {
                        Ok(t) => writeln!(w, "{name},{label},{},{},{}", t.gamma, t.stderr, t.n_tail)?,
                        Err(_) => writeln!(w, "{name},{label},,,")?,
                    }
                }
            }
            Ok(())
        },
    )?;
    if let Ok(c) = empirical_ccdf(&abs) {
        out.write("ccdf.csv", Meta::new("empirical CCDF of |normalized returns|", "P(X > x)"), |w| {
            writeln!(w, "x,p")?;
            for (x, p) in &c {
                writeln!(w, "{x},{p}")?;
            }
            Ok(())
        })?;
    }
    let max_lag = cfg.max_lag.min(r.len().saturating_sub(1) / 2);
    if max_lag > 0 {
        let a = acf(&r.values, max_lag, AcfNormalizer::Biased)?;
        let absr: Vec<f64> = r.values.iter().map(|v| v.abs()).collect();
        let b = acf(&absr, max_lag, AcfNormalizer::Biased).ok();
        out.write(
            "acf.csv",
            Meta::new("autocorrelation", "C(tau) = mean(g(t) g(t+tau)) of standardized series").with(json!({ "max_lag": max_lag })),
            |w| {
                writeln!(w, "lag,acf_returns,acf_abs")?;
                for (i, lag) in a.lags.iter().enumerate() {
                    writeln!(w, "{lag},{},{}", a.values[i], fmt_opt(b.as_ref().map(|b| b.values[i])))?;
                }
                Ok(())
            },
        )?;
    }
    if cfg.format != "returns" {
        let ticks = read_ticks(&path, cfg)?;
        let secs = cfg.delta_t.expect("validated") * cfg.window.unwrap_or(1440) as f64;
        let it = intertrade_stats(&ticks, secs)?;
        out.write(
            "intertrade.csv",
            Meta::new("mean inter-transaction time per window", "mean of consecutive tick time differences").with(json!({ "window_seconds": secs })),
            |w| {
                writeln!(w, "start_ms,mean_seconds,intervals")?;
                for x in &it {
                    writeln!(w, "{},{},{}", x.start_ms, fmt_opt(x.mean_seconds), x.intervals)?;
                }
                Ok(())
            },
        )?;
        rows.push(("ticks".into(), ticks.len().to_string()));
    }
    out.table("stats.csv", Meta::new("summary statistics", "population moments and gap counts"), &rows)
}

pub fn surrogate_cmd(cfg: &AnalysisConfig) -> Result<(), CliError> {
    let out = Output::new("surrogate", cfg, vec![RNG, ODD_FOURIER])?;
    let r = read_returns(&input(cfg, 0, "series")?, cfg)?;
    let kind = if cfg.surrogate == "shuffle" { SurrogateKind::Shuffle } else { SurrogateKind::Fourier };
    let spec = SurrogateSpec {
        kind,
        seed: cfg.seed,
        realizations: cfg.realizations,
    };
    for (k, s) in realizations(&r.values, spec)?.iter().enumerate() {
        let formula = match kind {
            SurrogateKind::Fourier => "inverse DFT of the input amplitudes with uniform random phases (conjugate symmetric)",
            SurrogateKind::Shuffle => "Fisher-Yates permutation of the input",
        };
        out.write(
            &format!("surrogate_{k}.txt"),
            Meta::new("surrogate series", formula).with(json!({ "seed": cfg.seed.wrapping_add(k as u64), "truncated": s.truncated })),
            |w| {
                for v in &s.values {
                    writeln!(w, "{v}")?;
                }
                Ok(())
            },
        )?;
    }
    Ok(())
}

/// `LABEL=PATH` inputs.
fn labeled_inputs(cfg: &AnalysisConfig) -> Result<Vec<(String, String)>, CliError> {
    cfg.inputs
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                .ok_or_else(|| CliError::Config(format!("input {s:?} must be LABEL=PATH")))
        })
        .collect()
}

fn write_arb(out: &Output, name: &str, a: &ArbSeries) -> Result<(), CliError> {
    out.write(
        name,
        Meta::new("arbitrage return series", "Arb(t) = s1 R1(t) + s2 R2(t) + s3 R3(t), or R_A(t) - R_B(t) across venues")
            .with(json!({ "label": a.label })),
        |w| a.write_csv(w),
    )
}

pub fn arb(cfg: &AnalysisConfig) -> Result<(), CliError> {
    let out = Output::new("arb", cfg, vec![ARB_ALIGN, ARB_ABS])?;
    let legs = labeled_inputs(cfg)?;
    let mut summary = Vec::new();
    if cfg.cross {
        if legs.len() != 2 {
            return Err(CliError::Config("cross-platform arbitrage needs exactly two inputs".into()));
        }
        let mut a = read_returns(&legs[0].1, cfg)?;
        let mut b = read_returns(&legs[1].1, cfg)?;
        a.symbol = legs[0].0.clone();
        b.symbol = legs[1].0.clone();
        let s = arb_cross_platform(&a, &b)?;
        write_arb(&out, "arb_cross.csv", &s)?;
        summary.push((s.label.clone(), arb_stats(&s, cfg.threshold)?));
    } else {
        let path = cfg
            .triangles
            .as_ref()
            .ok_or_else(|| CliError::Config("triangular arbitrage needs a triangle list".into()))?;
        let triangles = parse_triangles(open_text(path)?)?;
        let mut series: BTreeMap<String, ReturnSeries> = BTreeMap::new();
        for (label, path) in &legs {
            let mut r = read_returns(path, cfg)?;
            r.symbol = label.clone();
            series.insert(label.clone(), r);
        }
        for (i, t) in triangles.iter().enumerate() {
            let get = |l: &String| {
                series
                    .get(l)
                    .ok_or_else(|| CliError::Config(format!("no input for leg {l}")))
            };
            let s = arb_returns([get(&t.legs[0])?, get(&t.legs[1])?, get(&t.legs[2])?], t)?;
            write_arb(&out, &format!("arb_{}.csv", i + 1), &s)?;
            summary.push((s.label.clone(), arb_stats(&s, cfg.threshold)?));
        }
    }
    out.write(
        "arb_summary.csv",
        Meta::new("arbitrage statistics", "mean and max of |Arb|; fraction of |Arb| above the threshold")
            .with(json!({ "threshold": cfg.threshold })),
        |w| {
            writeln!(w, "triangle,mean_abs,max_abs,nonzero_fraction,samples")?;
            for (l, s) in &summary {
                writeln!(w, "{l},{},{},{},{}", s.mean_abs, s.max_abs, s.nonzero_fraction, s.samples)?;
            }
            Ok(())
        },
    )
}

fn read_panel(cfg: &AnalysisConfig) -> Result<AssetPanel, CliError> {
    Ok(AssetPanel::read_csv(open_text(&input(cfg, 0, "panel")?)?, &cfg.quote)?)
}

fn base(cfg: &AnalysisConfig) -> Base {
    match cfg.base.as_str() {
        "quote" => Base::Quote,
        "fictitious" => Base::Fictitious {
            sigma: cfg.sigma,
            seed: cfg.seed,
        },
        other => Base::Asset(other.to_string()),
    }
}

fn write_matrix(out: &Output, name: &str, c: &CorrelationMatrix, what: &'static str) -> Result<(), CliError> {
    out.write(
        name,
        Meta::new(what, "C = (1/T) G G^T of standardized returns (Pearson matrix)")
            .with(json!({ "base": c.base, "excluded": c.excluded })),
        |w| c.write_csv(w),
    )
}

pub fn matrix_cmd(cfg: &AnalysisConfig) -> Result<(), CliError> {
    let out = Output::new("matrix", cfg, vec![POPULATION, EIGEN, REBASE, FICTITIOUS, QI])?;
    let panel = read_panel(cfg)?;
    let b = base(cfg);
    if let Some(window) = cfg.window {
        let step = cfg.step.unwrap_or(1);
        let roll = rolling_lambda_max(&panel, &b, window, step).map_err(config_error)?;
        return out.write(
            "rolling_lambda.csv",
            Meta::new("rolling largest eigenvalue", "lambda_max of the rebased correlation matrix per window")
                .with(json!({ "window": window, "step": step, "base": b.label(&panel) })),
            |w| {
                writeln!(w, "start,lambda_max,q")?;
                for r in &roll {
                    writeln!(w, "{},{},{}", r.start, r.lambda_max, r.q)?;
                }
                Ok(())
            },
        );
    }
    let rb = rebase(&panel, &b)?;
    let fr = remove_market_factor(&rb)?;
    write_matrix(&out, "matrix.csv", &fr.original, "correlation matrix")?;
    out.write("eigenvalues.csv", Meta::new("eigenvalues", "C v = lambda v, ascending"), |w| fr.original_eigen.write_csv(w))?;
    out.write("eigenvectors.csv", Meta::new("eigenvectors", "columns match eigenvalues.csv"), |w| {
        fr.original_eigen.write_vectors_csv(w, &fr.original.labels)
    })?;
    write_matrix(&out, "residual.csv", &fr.residual, "residual correlation matrix after removing the largest eigensignal")?;
    out.write(
        "residual_eigenvalues.csv",
        Meta::new("residual eigenvalues", "eigenvalues of the correlation matrix of residuals of g_i = a_i + b_i z_max + e_i"),
        |w| fr.residual_eigen.write_csv(w),
    )?;
    let n = fr.original.dim();
    let t = panel.len();
    let q = t as f64 / n as f64;
    let (lo, hi) = mp_bounds(q, 1.0);
    out.write(
        "mp.csv",
        Meta::new("Marchenko-Pastur density", "phi(lambda) = Q/(2 pi sigma^2) sqrt((l+ - lambda)(lambda - l-))/lambda")
            .with(json!({ "Q": q, "sigma": 1.0 })),
        |w| {
            writeln!(w, "lambda,density")?;
            for k in 0..=200 {
                let l = lo + (hi - lo) * k as f64 / 200.0;
                writeln!(w, "{l},{}", mp_pdf(l, q, 1.0))?;
            }
            Ok(())
        },
    )?;
    let inside = fr.residual_eigen.eigenvalues.iter().filter(|l| **l >= lo && **l <= hi).count();
    let iota = quasi_idempotence(&fr.original).ok();
    let rows = vec![
        ("base".to_string(), fr.original.base.clone()),
        ("assets".into(), n.to_string()),
        ("samples".into(), t.to_string()),
        ("Q".into(), q.to_string()),
        ("lambda_minus".into(), lo.to_string()),
        ("lambda_plus".into(), hi.to_string()),
        ("lambda_max".into(), fr.original_eigen.lambda_max().to_string()),
        ("residual_lambda_max".into(), fr.residual_eigen.lambda_max().to_string()),
        ("residual_fraction_inside_mp".into(), (inside as f64 / n as f64).to_string()),
        ("iota".into(), fmt_opt(iota.map(|q| q.iota))),
        ("iota_iterations".into(), iota.map(|q| q.iterations.to_string()).unwrap_or_default()),
        ("excluded".into(), fr.original.excluded.join(";")),
    ];
    out.table("summary.csv", Meta::new("matrix summary", "lambda bounds: sigma^2 (1 + 1/Q +- 2 sqrt(1/Q))"), &rows)
}

pub fn ladder(cfg: &AnalysisConfig) -> Result<(), CliError> {
    let out = Output::new("ladder", cfg, vec![POPULATION, EIGEN, REBASE, FICTITIOUS, QI])?;
    let panel = read_panel(cfg)?;
    let mut bases = vec![Base::Quote];
    bases.extend(panel.labels.iter().map(|l| Base::Asset(l.clone())));
    bases.push(Base::Fictitious {
        sigma: cfg.sigma,
        seed: cfg.seed,
    });
    let rows = base_ladder(&panel, &bases)?;
    out.write(
        "ladder.csv",
        Meta::new("base-currency ladder", "lambda_max and quasi-idempotence per base, ascending in lambda_max"),
        |w| write_ladder_csv(&rows, w),
    )
}

fn write_tree(out: &Output, prefix: &str, t: &SpanningTree, provenance: Provenance) -> Result<(), CliError> {
    let meta = || Meta::new("minimum spanning tree", "Prim's algorithm on d = sqrt(2(1 - c))").with(json!({ "provenance": provenance }));
    out.write(&format!("{prefix}edges.csv"), meta(), |w| t.write_edges_csv(w))?;
    out.write(&format!("{prefix}tree.dot"), meta(), |w| t.write_dot(w))?;
    let cdf = degree_cdf(t, 2);
    out.write(
        &format!("{prefix}degree_cdf.csv"),
        Meta::new("degree exceedance distribution", "P(X >= k)"),
        |w| {
            writeln!(w, "k,p")?;
            for (k, p) in &cdf.points {
                writeln!(w, "{k},{p}")?;
            }
            Ok(())
        },
    )?;
    let rows = vec![
        ("nodes".to_string(), t.nodes.len().to_string()),
        ("k_max".into(), t.stats.k_max.to_string()),
        ("mean_path_length".into(), t.stats.mean_path_length.to_string()),
        ("mean_edge_weight".into(), t.stats.mean_edge_weight.to_string()),
        ("mean_distance".into(), t.stats.mean_distance.to_string()),
        ("total_weight".into(), t.stats.total_weight.to_string()),
        ("degree_gamma".into(), fmt_opt(cdf.fit.as_ref().map(|f| f.exponent))),
        ("degree_gamma_stderr".into(), fmt_opt(cdf.fit.as_ref().map(|f| f.stderr))),
        ("degree_fit_refusal".into(), cdf.refusal.clone().unwrap_or_default().replace(',', ";")),
    ];
    out.table(&format!("{prefix}tree_stats.csv"), Meta::new("tree statistics", "k_max, mean hop count, mean weights"), &rows)
}

fn linkage(cfg: &AnalysisConfig) -> Linkage {
    match cfg.linkage.as_str() {
        "single" => Linkage::Single,
        "complete" => Linkage::Complete,
        _ => Linkage::Average,
    }
}

pub fn mst_cmd(cfg: &AnalysisConfig) -> Result<(), CliError> {
    let out = Output::new("mst", cfg, vec![MST_TIES, PATHS, MEAN_DIST, DEGREES, CLUSTER_TIES])?;
    let d = match cfg.matrix_kind.as_str() {
        "panel" => {
            let panel = read_panel(cfg)?;
            let c = correlation_matrix(&rebase(&panel, &base(cfg))?)?;
            distances(c.labels.clone(), &c.entries, Provenance::Pearson)?
        }
        kind => {
            let (labels, entries) = read_labeled_matrix(open_text(&input(cfg, 0, "matrix")?)?)?;
            if kind == "distance" {
                DistanceMatrix::from_entries(labels, entries)?
            } else {
                let c = CorrelationMatrix::from_entries(labels, cfg.quote.clone(), entries)?;
                distances(c.labels.clone(), &c.entries, Provenance::Pearson)?
            }
        }
    };
    let t = mst(&d)?;
    write_tree(&out, "", &t, d.provenance)?;
    let g = dendrogram(&d, linkage(cfg))?;
    out.write(
        "dendrogram.csv",
        Meta::new("agglomerative clustering merges", "Lance-Williams update for the chosen linkage").with(json!({ "linkage": cfg.linkage })),
        |w| g.write_csv(w),
    )
}

pub fn qmst_cmd(cfg: &AnalysisConfig) -> Result<(), CliError> {
    let out = Output::new("qmst", cfg, vec![SEGMENTS, RHO_MOMENTS, RHO_BAR, MST_TIES, PATHS, MEAN_DIST, DEGREES])?;
    let panel = read_panel(cfg)?;
    let rb = rebase(&panel, &base(cfg))?;
    let sc = surface_config(cfg, panel.len())?;
    if cfg.q <= 0.0 || !sc.q_grid.iter().any(|q| (q - cfg.q).abs() < 1e-9) {
        return Err(CliError::Config(format!("q = {} must be positive and on the q grid", cfg.q)));
    }
    let stack = RhoStack::compute(rb.labels.clone(), &rb.series, &sc)?;
    let mut rows = Vec::new();
    for &s in &sc.s_grid {
        rows.push((s, qmst(&stack, cfg.q, s).ok().map(|t| t.stats)));
    }
    out.write(
        "qmst_stats.csv",
        Meta::new("qMST statistics per scale", "MST on delta = sqrt(2(1 - rho(q,s)))").with(json!({ "q": cfg.q })),
        |w| {
            writeln!(w, "s,k_max,mean_path_length,mean_edge_weight,mean_distance")?;
            for (s, st) in &rows {
                match st {
                    Some(t) => writeln!(w, "{s},{},{},{},{}", t.k_max, t.mean_path_length, t.mean_edge_weight, t.mean_distance)?,
                    None => writeln!(w, "{s},,,,")?,
                }
            }
            Ok(())
        },
    )?;
    if let Some(s) = cfg.s {
        let t = qmst(&stack, cfg.q, s)?;
        write_tree(&out, "qmst_", &t, Provenance::RhoQs { q: cfg.q, s })?;
    }
    let bar = stack.rho_bar_matrix(cfg.q)?;
    let d = distances(stack.labels.clone(), &bar, Provenance::RhoBar { q: cfg.q })?;
    write_tree(&out, "rho_bar_", &mst(&d)?, d.provenance)
}

pub fn report(cfg: &AnalysisConfig) -> Result<(), CliError> {
    let out = Output::new("report", cfg, vec![POPULATION, SEGMENTS, NEGATIVE_Q, FIT, LEGENDRE, RNG, ODD_FOURIER, TAILS])?;
    let r = read_returns(&input(cfg, 0, "series")?, cfg)?;
    let (h, sp) = univariate(cfg, &out, &r.values)?;
    let sc = surface_config(cfg, r.len())?;
    let fr: FitRange = cfg.fit(&sc.s_grid)?;
    let mut rows = vec![
        ("samples".to_string(), r.len().to_string()),
        ("h2".into(), fmt_opt(h.at(2.0))),
        ("width".into(), fmt_opt(sp.as_ref().map(|s| s.width))),
        ("asymmetry".into(), fmt_opt(sp.as_ref().map(|s| s.asymmetry))),
    ];
    for (kind, name) in [(SurrogateKind::Fourier, "fourier"), (SurrogateKind::Shuffle, "shuffle")] {
        let spec = SurrogateSpec {
            kind,
            seed: cfg.seed,
            realizations: cfg.realizations,
        };
        let mut widths = Vec::new();
        let mut h2 = Vec::new();
        for s in realizations(&r.values, spec)? {
            let sc = SurfaceConfig {
                s_grid: sc.s_grid.iter().cloned().filter(|v| *v <= s.values.len()).collect(),
                ..sc.clone()
            };
            let hs = fit_exponents(&surface(&s.values, None, &sc)?, fr).map_err(config_error)?;
            if let Some(v) = hs.at(2.0) {
                h2.push(v);
            }
            if let Ok(sp) = spectrum(&hs) {
                widths.push(sp.width);
            }
        }
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        rows.push((format!("{name}_h2_mean"), fmt_opt(mean(&h2))));
        rows.push((format!("{name}_width_mean"), fmt_opt(mean(&widths))));
        rows.push((format!("{name}_width_realizations"), widths.len().to_string()));
    }
    let g = normalize(&r)?;
    let abs: Vec<f64> = g.values.iter().zip(&g.gap_mask).filter(|(v, m)| !**m && **v != 0.0).map(|(v, _)| v.abs()).collect();
    rows.push((
        "tail_gamma_hill".into(),
        fmt_opt(tail_exponent(&abs, cfg.tail_fraction, TailMethod::Hill).ok().map(|t| t.gamma)),
    ));
    out.table(
        "report.csv",
        Meta::new("analysis report", "h(q), spectrum, surrogate comparison and tail exponent of one series")
            .with(json!({ "fit_range": fr, "source": stem(&input(cfg, 0, "series")?) })),
        &rows,
    )
}

pub fn synth(cfg: &AnalysisConfig) -> Result<(), CliError> {
    let path = input(cfg, 0, "output path")?;
    let series: Vec<Vec<f64>> = match cfg.synth.as_str() {
        "noise" => vec![synthetic::gaussian_noise(cfg.n, cfg.seed)],
        "fgn" => vec![synthetic::fgn(cfg.n, cfg.hurst, cfg.seed).map_err(config_error)?],
        "cascade" => {
            if !cfg.n.is_power_of_two() {
                return Err(CliError::Config("cascade length must be a power of two".into()));
            }
            vec![synthetic::binomial_cascade(cfg.n.trailing_zeros(), cfg.p)]
        }
        "ar1" => vec![synthetic::ar1(cfg.n, cfg.phi, cfg.seed).map_err(config_error)?],
        "pareto" => vec![synthetic::pareto(cfg.n, cfg.gamma, cfg.seed)],
        "factor" => synthetic::one_factor_market(cfg.assets, cfg.n, (0.5, 1.0), cfg.seed),
        "dominant" => synthetic::dominant_market(cfg.assets.saturating_sub(1), cfg.n, 0.5, cfg.seed),
        other => return Err(CliError::Config(format!("unknown generator {other:?}"))),
    };
    let mut text = String::new();
    if series.len() == 1 {
        for v in &series[0] {
            text.push_str(&format!("{v}\n"));
        }
    } else {
        let labels: Vec<String> = (0..series.len()).map(|i| format!("A{}", i + 1)).collect();
        text.push_str(&labels.join(","));
        text.push('\n');
        for t in 0..cfg.n {
            let row: Vec<String> = series.iter().map(|s| s[t].to_string()).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
    }
    if let Some(dir) = std::path::Path::new(&path).parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(&path, text)?;
    let sidecar = json!({
        "command": "synth",
        "file": stem(&path),
        "operation": "synthetic series",
        "formula": cfg.synth,
        "decisions": [RNG],
        "config": cfg,
    });
    std::fs::write(format!("{path}.meta.json"), serde_json::to_string_pretty(&sidecar).expect("json") + "\n")?;
    Ok(())
}
