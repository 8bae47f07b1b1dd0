//! Analysis configuration: flat `key = value` files, flag overrides and grid specs.

use std::path::Path;

use fractalis::detrended::{default_s_grid, log_scale_grid, q_grid, MAX_POLY_ORDER};
use fractalis::scaling::FitRange;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub inputs: Vec<String>,
    pub out_dir: String,
    /// `returns`, `ticks` or `bars`.
    pub format: String,
    /// Sampling interval in seconds for tick and bar inputs.
    pub delta_t: Option<f64>,
    /// `lo:hi:step` or a comma list.
    pub q_grid: String,
    /// `auto`, `log:min:max:points`, `dyadic:kmin:kmax` or a comma list.
    pub s_grid: String,
    pub poly_order: usize,
    /// `auto` (middle 60% of the scale grid) or `lo:hi`.
    pub fit_range: String,
    pub window: Option<usize>,
    pub step: Option<usize>,
    pub seed: u64,
    pub emit_plots: bool,
    pub lag: i64,
    pub q: f64,
    pub s: Option<usize>,
    /// `fourier` or `shuffle`.
    pub surrogate: String,
    pub realizations: usize,
    /// `quote`, an asset label, or `fictitious`.
    pub base: String,
    /// Per-sample log-return std of the fictitious base.
    pub sigma: f64,
    pub quote: String,
    /// `single`, `average` or `complete`.
    pub linkage: String,
    /// `correlation`, `distance` or `panel`.
    pub matrix_kind: String,
    pub tail_fraction: f64,
    pub max_lag: usize,
    pub threshold: f64,
    pub triangles: Option<String>,
    pub cross: bool,
    /// Generator for `synth`: `noise`, `fgn`, `cascade`, `ar1`, `pareto`, `factor`, `dominant`.
    pub synth: String,
    pub n: usize,
    pub hurst: f64,
    pub p: f64,
    pub phi: f64,
    pub gamma: f64,
    pub assets: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            inputs: vec![],
            out_dir: "fractalis-out".into(),
            format: "returns".into(),
            delta_t: None,
            q_grid: "-4:4:0.2".into(),
            s_grid: "auto".into(),
            poly_order: 2,
            fit_range: "auto".into(),
            window: None,
            step: None,
            seed: 0,
            emit_plots: false,
            lag: 0,
            q: 2.0,
            s: None,
            surrogate: "fourier".into(),
            realizations: 1,
            base: "quote".into(),
            sigma: 1.0,
            quote: "USD".into(),
            linkage: "average".into(),
            matrix_kind: "correlation".into(),
            tail_fraction: 0.05,
            max_lag: 20,
            threshold: 0.0,
            triangles: None,
            cross: false,
            synth: "noise".into(),
            n: 65536,
            hurst: 0.7,
            p: 0.3,
            phi: 0.5,
            gamma: 3.0,
            assets: 10,
        }
    }
}

/// Keys whose values stay strings even when they look numeric.
const STRING_KEYS: [&str; 1] = ["triangles"];

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl AnalysisConfig {
    /// Flat `key = value` text; list fields repeat their key, unset options are omitted.
    pub fn to_kv(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        let mut out = String::new();
        for (k, val) in v.as_object().expect("struct") {
            match val {
                Value::Null => {}
                Value::Array(items) => {
                    for it in items {
                        out.push_str(&format!("{k} = {}\n", scalar(it)));
                    }
                }
                other => out.push_str(&format!("{k} = {}\n", scalar(other))),
            }
        }
        out
    }

    pub fn from_kv(text: &str) -> Result<Self, CliError> {
        let defaults = serde_json::to_value(Self::default()).expect("config serializes");
        let defaults = defaults.as_object().expect("struct");
        let mut obj = Map::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let template = defaults
                .get(k)
                .ok_or_else(|| cfg_err(format!("line {}: unknown key {k:?}", i + 1)))?;
            let parsed = match template {
                Value::Array(_) => {
                    let entry = obj.entry(k.to_string()).or_insert_with(|| Value::Array(vec![]));
                    entry.as_array_mut().expect("array").push(Value::String(v.to_string()));
                    continue;
                }
                Value::String(_) => Value::String(v.to_string()),
                Value::Bool(_) => Value::Bool(
                    v.parse()
                        .map_err(|_| cfg_err(format!("line {}: {k} expects true or false", i + 1)))?,
                ),
                Value::Number(_) => number(v).ok_or_else(|| cfg_err(format!("line {}: {k} expects a number", i + 1)))?,
                Value::Null if STRING_KEYS.contains(&k) => Value::String(v.to_string()),
                Value::Null => number(v).ok_or_else(|| cfg_err(format!("line {}: {k} expects a number", i + 1)))?,
                Value::Object(_) => unreachable!("flat config"),
            };
            obj.insert(k.to_string(), parsed);
        }
        serde_json::from_value(Value::Object(obj)).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_kv(&text)
    }

    pub fn q_values(&self) -> Result<Vec<f64>, CliError> {
        let spec = self.q_grid.trim();
        let parts: Vec<&str> = spec.split(':').collect();
        let g = if parts.len() == 3 {
            let v = parse_f64s(&parts)?;
            if !(v[2] > 0.0) || v[1] < v[0] {
                return Err(cfg_err(format!("bad q grid {spec:?}")));
            }
            q_grid(v[0], v[1], v[2])
        } else {
            parse_f64s(&spec.split(',').collect::<Vec<_>>())?
        };
        if g.is_empty() || g.iter().any(|q| *q == 0.0 || !q.is_finite()) {
            return Err(cfg_err("q grid must be nonempty and exclude zero"));
        }
        if g.windows(2).any(|w| w[1] <= w[0]) {
            return Err(cfg_err("q grid must be strictly increasing"));
        }
        Ok(g)
    }

    pub fn s_values(&self, len: usize) -> Result<Vec<usize>, CliError> {
        let spec = self.s_grid.trim();
        let parts: Vec<&str> = spec.split(':').collect();
        let g = match parts[0] {
            "auto" if parts.len() == 1 => default_s_grid(len, self.poly_order),
            "log" if parts.len() == 4 => {
                let v = parse_usizes(&parts[1..])?;
                log_scale_grid(v[0], v[1], v[2])
            }
            "dyadic" if parts.len() == 3 => {
                let v = parse_usizes(&parts[1..])?;
                if v[0] > v[1] || v[1] > 40 {
                    return Err(cfg_err(format!("bad dyadic grid {spec:?}")));
                }
                (v[0]..=v[1]).map(|k| 1usize << k).collect()
            }
            _ => parse_usizes(&spec.split(',').collect::<Vec<_>>())?,
        };
        if g.is_empty() {
            return Err(cfg_err("empty scale grid"));
        }
        Ok(g)
    }

    pub fn fit(&self, s_grid: &[usize]) -> Result<FitRange, CliError> {
        if self.fit_range.trim() == "auto" {
            return Ok(FitRange::middle(s_grid));
        }
        let v = parse_usizes(&self.fit_range.split(':').collect::<Vec<_>>())?;
        if v.len() != 2 || v[0] > v[1] {
            return Err(cfg_err(format!("fit range {:?} must be lo:hi", self.fit_range)));
        }
        Ok(FitRange::new(v[0], v[1]))
    }

    /// Checks parameters that do not depend on the data.
    pub fn validate(&self) -> Result<(), CliError> {
        self.q_values()?;
        if self.poly_order == 0 || self.poly_order > MAX_POLY_ORDER {
            return Err(cfg_err(format!("poly_order must be in 1..={MAX_POLY_ORDER}")));
        }
        if !["returns", "ticks", "bars"].contains(&self.format.as_str()) {
            return Err(cfg_err(format!("unknown format {:?}", self.format)));
        }
        if self.format != "returns" && !self.delta_t.is_some_and(|d| d > 0.0) {
            return Err(cfg_err("tick and bar inputs need a positive delta_t"));
        }
        if self.window == Some(0) || self.step == Some(0) {
            return Err(cfg_err("window and step must be positive"));
        }
        if self.realizations == 0 {
            return Err(cfg_err("realizations must be at least 1"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return Err(cfg_err("tail_fraction must lie in (0, 1)"));
        }
        if !["single", "average", "complete"].contains(&self.linkage.as_str()) {
            return Err(cfg_err(format!("unknown linkage {:?}", self.linkage)));
        }
        if !["fourier", "shuffle"].contains(&self.surrogate.as_str()) {
            return Err(cfg_err(format!("unknown surrogate kind {:?}", self.surrogate)));
        }
        if !["correlation", "distance", "panel"].contains(&self.matrix_kind.as_str()) {
            return Err(cfg_err(format!("unknown matrix kind {:?}", self.matrix_kind)));
        }
        Ok(())
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn number(v: &str) -> Option<Value> {
    if let Ok(i) = v.parse::<i64>() {
        return Some(Value::from(i));
    }
    if let Ok(u) = v.parse::<u64>() {
        return Some(Value::from(u));
    }
    v.parse::<f64>().ok().filter(|f| f.is_finite()).map(Value::from)
}

fn parse_f64s(parts: &[&str]) -> Result<Vec<f64>, CliError> {
    parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| cfg_err(format!("bad number {p:?}"))))
        .collect()
}

fn parse_usizes(parts: &[&str]) -> Result<Vec<usize>, CliError> {
    parts
        .iter()
        .map(|p| p.trim().parse::<usize>().map_err(|_| cfg_err(format!("bad integer {p:?}"))))
        .collect()
}
