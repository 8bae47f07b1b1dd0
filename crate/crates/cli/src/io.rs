//! Input readers and output writers with JSON metadata sidecars.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use fractalis::ingest::{log_returns, parse_ticks, resample, ReturnSeries, TickFormat, TickSeries};
use fractalis::plot::Plot;
use serde_json::{json, Value};

use crate::config::AnalysisConfig;
use crate::error::CliError;

fn open(path: &str) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("cannot open {path}: {e}")))
}

pub fn stem(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

/// One value per line; `nan` marks a gap. Blank lines and `#` comments are skipped.
pub fn read_values(path: &str) -> Result<(Vec<f64>, Vec<bool>), CliError> {
    let mut values = Vec::new();
    let mut gaps = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let v: f64 = body
            .parse()
            .map_err(|_| CliError::Data(format!("{path}:{}: bad number {body:?}", i + 1)))?;
        if v.is_nan() {
            values.push(0.0);
            gaps.push(true);
        } else if v.is_finite() {
            values.push(v);
            gaps.push(false);
        } else {
            return Err(CliError::Data(format!("{path}:{}: infinite value", i + 1)));
        }
    }
    Ok((values, gaps))
}

pub fn read_ticks(path: &str, cfg: &AnalysisConfig) -> Result<TickSeries, CliError> {
    let format = if cfg.format == "bars" { TickFormat::Bar } else { TickFormat::Tick };
    Ok(parse_ticks(open(path)?, format, &stem(path), "")?)
}

/// Returns series from any supported input format.
pub fn read_returns(path: &str, cfg: &AnalysisConfig) -> Result<ReturnSeries, CliError> {
    match cfg.format.as_str() {
        "returns" => {
            let (values, gap_mask) = read_values(path)?;
            let mut r = ReturnSeries::from_values(stem(path), cfg.delta_t.unwrap_or(1.0), 0, values);
            r.gap_mask = gap_mask;
            Ok(r)
        }
        _ => {
            let ticks = read_ticks(path, cfg)?;
            let grid = resample(&ticks, cfg.delta_t.expect("validated"))?;
            Ok(log_returns(&ticks.symbol, &grid)?)
        }
    }
}

pub fn open_text(path: &str) -> Result<BufReader<File>, CliError> {
    open(path)
}

/// What a written file contains, for its sidecar.
pub struct Meta {
    pub operation: &'static str,
    pub formula: &'static str,
    pub details: Value,
}

impl Meta {
    pub fn new(operation: &'static str, formula: &'static str) -> Self {
        Self {
            operation,
            formula,
            details: json!({}),
        }
    }

    pub fn with(mut self, details: Value) -> Self {
        self.details = details;
        self
    }
}

pub struct Output<'a> {
    pub dir: PathBuf,
    pub command: &'a str,
    pub config: &'a AnalysisConfig,
    pub decisions: Vec<&'static str>,
}

impl<'a> Output<'a> {
    pub fn new(command: &'a str, config: &'a AnalysisConfig, decisions: Vec<&'static str>) -> Result<Self, CliError> {
        let dir = PathBuf::from(&config.out_dir);
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            command,
            config,
            decisions,
        })
    }

    /// Writes `name` through `body` and its `<name>.meta.json` sidecar.
    pub fn write<F>(&self, name: &str, meta: Meta, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> fractalis::Result<()>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush()?;
        let sidecar = json!({
            "command": self.command,
            "file": name,
            "operation": meta.operation,
            "formula": meta.formula,
            "details": meta.details,
            "decisions": self.decisions,
            "config": self.config,
        });
        let text = serde_json::to_string_pretty(&sidecar).expect("json") + "\n";
        std::fs::write(self.dir.join(format!("{name}.meta.json")), text)?;
        Ok(())
    }

    pub fn svg(&self, name: &str, plot: &Plot, meta: Meta) -> Result<(), CliError> {
        if !self.config.emit_plots {
            return Ok(());
        }
        let svg = plot.to_svg();
        self.write(name, meta, |w| Ok(w.write_all(svg.as_bytes())?))
    }

    /// `key,value` table.
    pub fn table(&self, name: &str, meta: Meta, rows: &[(String, String)]) -> Result<(), CliError> {
        self.write(name, meta, |w| {
            writeln!(w, "key,value")?;
            for (k, v) in rows {
                writeln!(w, "{k},{v}")?;
            }
            Ok(())
        })
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
