mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::AnalysisConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "fractalis", version, about = "Multiscale correlation analysis of financial time series")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    over: Overrides,
}

#[derive(Args)]
struct Inputs {
    /// Input files (`LABEL=PATH` for arb; output path for synth).
    inputs: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Summary statistics, tails and autocorrelation.
    Stats(Inputs),
    /// Fluctuation functions and generalized Hurst exponents of one series.
    Mfdfa(Inputs),
    /// Cross fluctuation functions, exponents and rho of two series.
    Mfcca(Inputs),
    /// q-dependent cross-correlation coefficient (lagged or rolling).
    Rho(Inputs),
    /// Singularity spectrum of one series.
    Spectrum(Inputs),
    /// Fourier or shuffle surrogates.
    Surrogate(Inputs),
    /// Triangular or cross-venue arbitrage returns.
    Arb(Inputs),
    /// Correlation matrix, eigenvalues and market-factor removal for a panel.
    Matrix(Inputs),
    /// Largest eigenvalue and quasi-idempotence for every base currency.
    Ladder(Inputs),
    /// Minimum spanning tree and dendrogram.
    Mst(Inputs),
    /// Spanning trees on rho(q,s) distances across scales.
    Qmst(Inputs),
    /// Combined single-series report with surrogate comparison.
    Report(Inputs),
    /// Write a synthetic series or panel.
    Synth(Inputs),
    /// Print the effective configuration as `key = value` text.
    Config(Inputs),
}

#[derive(Args, Default)]
struct Overrides {
    /// `key = value` configuration file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<String>,
    /// returns, ticks or bars.
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    delta_t: Option<f64>,
    /// lo:hi:step or a comma list.
    #[arg(long, global = true, allow_hyphen_values = true)]
    q_grid: Option<String>,
    /// auto, log:min:max:n, dyadic:a:b or a comma list.
    #[arg(long, global = true)]
    s_grid: Option<String>,
    #[arg(long, global = true)]
    poly_order: Option<usize>,
    /// auto or lo:hi.
    #[arg(long, global = true)]
    fit_range: Option<String>,
    #[arg(long, global = true)]
    window: Option<usize>,
    #[arg(long, global = true)]
    step: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    emit_plots: bool,
    #[arg(long, global = true, allow_hyphen_values = true)]
    lag: Option<i64>,
    #[arg(long, global = true)]
    q: Option<f64>,
    #[arg(long, global = true)]
    s: Option<usize>,
    /// fourier or shuffle.
    #[arg(long, global = true)]
    surrogate: Option<String>,
    #[arg(long, global = true)]
    realizations: Option<usize>,
    /// quote, fictitious or an asset label.
    #[arg(long, global = true)]
    base: Option<String>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    quote: Option<String>,
    /// single, average or complete.
    #[arg(long, global = true)]
    linkage: Option<String>,
    /// correlation, distance or panel.
    #[arg(long, global = true)]
    matrix_kind: Option<String>,
    #[arg(long, global = true)]
    tail_fraction: Option<f64>,
    #[arg(long, global = true)]
    max_lag: Option<usize>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true)]
    triangles: Option<String>,
    #[arg(long, global = true)]
    cross: bool,
    /// noise, fgn, cascade, ar1, pareto, factor or dominant.
    #[arg(long, global = true)]
    synth: Option<String>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    hurst: Option<f64>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    phi: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    assets: Option<usize>,
}

macro_rules! apply {
    ($cfg:ident, $o:ident; $($f:ident),*) => {
        $(if let Some(v) = $o.$f.clone() { $cfg.$f = v; })*
    };
}

impl Overrides {
    fn config(&self, inputs: Vec<String>) -> Result<AnalysisConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => AnalysisConfig::load(p)?,
            None => AnalysisConfig::default(),
        };
        let o = self;
        apply!(cfg, o; out_dir, format, q_grid, s_grid, poly_order, fit_range, seed, lag, q, surrogate,
            realizations, base, sigma, quote, linkage, matrix_kind, tail_fraction, max_lag, threshold,
            synth, n, hurst, p, phi, gamma, assets);
        if o.delta_t.is_some() {
            cfg.delta_t = o.delta_t;
        }
        if o.window.is_some() {
            cfg.window = o.window;
        }
        if o.step.is_some() {
            cfg.step = o.step;
        }
        if o.s.is_some() {
            cfg.s = o.s;
        }
        if o.triangles.is_some() {
            cfg.triangles = o.triangles.clone();
        }
        cfg.emit_plots |= o.emit_plots;
        cfg.cross |= o.cross;
        if !inputs.is_empty() {
            cfg.inputs = inputs;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_config(cfg: &AnalysisConfig) -> Result<(), CliError> {
    print!("{}", cfg.to_kv());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Ok(t) = std::env::var("FRACTALIS_THREADS") {
        let n: usize = t
            .parse()
            .map_err(|_| CliError::Config(format!("FRACTALIS_THREADS={t:?} is not a thread count")))?;
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (f, inputs): (fn(&AnalysisConfig) -> Result<(), CliError>, Inputs) = match cli.cmd {
        Cmd::Stats(i) => (commands::stats, i),
        Cmd::Mfdfa(i) => (commands::mfdfa, i),
        Cmd::Mfcca(i) => (commands::mfcca, i),
        Cmd::Rho(i) => (commands::rho_cmd, i),
        Cmd::Spectrum(i) => (commands::spectrum_cmd, i),
        Cmd::Surrogate(i) => (commands::surrogate_cmd, i),
        Cmd::Arb(i) => (commands::arb, i),
        Cmd::Matrix(i) => (commands::matrix_cmd, i),
        Cmd::Ladder(i) => (commands::ladder, i),
        Cmd::Mst(i) => (commands::mst_cmd, i),
        Cmd::Qmst(i) => (commands::qmst_cmd, i),
        Cmd::Report(i) => (commands::report, i),
        Cmd::Synth(i) => (commands::synth, i),
        Cmd::Config(i) => (print_config, i),
    };
    let cfg = cli.over.config(inputs.inputs)?;
    f(&cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::Config(e.to_string().trim().replace('\n', " "));
            eprintln!("{}", err.record());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code())
        }
    }
}
