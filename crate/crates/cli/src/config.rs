//! Flat JSON run configuration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use eventclock_core::spin::{GConvention, SpinExampleConfig};
use eventclock_core::C64;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    SpinRun,
    ZenoSweep,
    Detect,
    Commutators,
    ArrivalEvolve,
    ArrivalBackflow,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::SpinRun,
        Experiment::ZenoSweep,
        Experiment::Detect,
        Experiment::Commutators,
        Experiment::ArrivalEvolve,
        Experiment::ArrivalBackflow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::SpinRun => "spin-run",
            Experiment::ZenoSweep => "zeno-sweep",
            Experiment::Detect => "detect",
            Experiment::Commutators => "commutators",
            Experiment::ArrivalEvolve => "arrival-evolve",
            Experiment::ArrivalBackflow => "arrival-backflow",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            Experiment::SpinRun => &["a", "b", "period", "convention", "t_start", "t_end", "n_points"],
            Experiment::ZenoSweep => &["a", "b", "period", "convention", "tau", "k_values"],
            Experiment::Detect => {
                &["a", "b", "period", "convention", "delta", "k_max", "survival_floor", "shots", "seed"]
            }
            Experiment::Commutators => &["a", "b", "period", "convention", "t1", "t2"],
            Experiment::ArrivalEvolve => {
                &["grid_points", "x_min", "x_max", "x0", "sigma", "p0", "t_start", "t_end", "n_times"]
            }
            Experiment::ArrivalBackflow => &[
                "grid_points", "x_min", "x_max", "p1", "p2", "s1", "s2", "scale", "w_values",
                "phi_steps", "t_start", "t_end", "n_times",
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

/// A validated configuration document.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub output_path: PathBuf,
    pub format: Format,
    params: Map<String, Value>,
}

fn bad(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

impl RunConfig {
    pub fn load(
        experiment: Experiment,
        path: &Path,
        out: Option<&Path>,
        format: Option<Format>,
    ) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(experiment, &text, out, format)
    }

    pub fn from_json(
        experiment: Experiment,
        text: &str,
        out: Option<&Path>,
        format: Option<Format>,
    ) -> Result<Self, CliError> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        let Value::Object(mut params) = doc else {
            return Err(CliError::Config("config must be a JSON object".into()));
        };

        if let Some(v) = params.remove("experiment") {
            let name = v.as_str().ok_or_else(|| bad("experiment", "expected a string"))?;
            if name != experiment.name() {
                return Err(bad("experiment", format!("config is for {name}, invoked as {}", experiment.name())));
            }
        }
        let file_out = match params.remove("output_path") {
            Some(v) => Some(PathBuf::from(v.as_str().ok_or_else(|| bad("output_path", "expected a string"))?)),
            None => None,
        };
        let file_format = match params.remove("format") {
            Some(v) => {
                let s = v.as_str().ok_or_else(|| bad("format", "expected a string"))?;
                Some(Format::parse(s).ok_or_else(|| bad("format", format!("expected csv or json, got {s}")))?)
            }
            None => None,
        };

        let allowed: BTreeSet<&str> = experiment.keys().iter().copied().collect();
        if let Some(key) = params.keys().find(|k| !allowed.contains(k.as_str())) {
            return Err(bad(key, format!("unknown key for {}", experiment.name())));
        }

        let output_path = out
            .map(Path::to_path_buf)
            .or(file_out)
            .ok_or_else(|| bad("output_path", "missing (set it in the config or pass --out)"))?;
        let format = format.or(file_format).unwrap_or_default();
        Ok(Self { experiment, output_path, format, params })
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.params.get(key)
    }

    pub fn has(&self, key: &str) -> bool {
        self.params.contains_key(key)
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let v = self.get(key).ok_or_else(|| bad(key, "required"))?;
        as_finite(key, v)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.get(key) {
            Some(v) => as_finite(key, v),
            None => Ok(default),
        }
    }

    pub fn positive(&self, key: &str, default: Option<f64>) -> Result<f64, CliError> {
        let x = match default {
            Some(d) => self.f64_or(key, d)?,
            None => self.f64(key)?,
        };
        if x > 0.0 {
            Ok(x)
        } else {
            Err(bad(key, format!("must be positive, got {x}")))
        }
    }

    pub fn count(&self, key: &str, default: Option<u64>, min: u64) -> Result<u64, CliError> {
        let n = match (self.get(key), default) {
            (Some(v), _) => as_count(key, v)?,
            (None, Some(d)) => d,
            (None, None) => return Err(bad(key, "required")),
        };
        if n < min {
            return Err(bad(key, format!("must be at least {min}, got {n}")));
        }
        Ok(n)
    }

    /// A number or an array of numbers.
    pub fn f64_list(&self, key: &str, default: Option<Vec<f64>>) -> Result<Vec<f64>, CliError> {
        match (self.get(key), default) {
            (Some(Value::Array(items)), _) => {
                if items.is_empty() {
                    return Err(bad(key, "must not be empty"));
                }
                items.iter().map(|v| as_finite(key, v)).collect()
            }
            (Some(v), _) => Ok(vec![as_finite(key, v)?]),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(bad(key, "required")),
        }
    }

    pub fn count_list(&self, key: &str) -> Result<Vec<u64>, CliError> {
        match self.get(key) {
            Some(Value::Array(items)) if !items.is_empty() => items
                .iter()
                .map(|v| match as_count(key, v)? {
                    0 => Err(bad(key, "entries must be at least 1")),
                    n => Ok(n),
                })
                .collect(),
            Some(Value::Array(_)) => Err(bad(key, "must not be empty")),
            Some(_) => Err(bad(key, "expected an array of positive integers")),
            None => Err(bad(key, "required")),
        }
    }

    /// A real number or `[re, im]`.
    fn complex(&self, key: &str, default: C64) -> Result<C64, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Array(parts)) if parts.len() == 2 => {
                Ok(C64::new(as_finite(key, &parts[0])?, as_finite(key, &parts[1])?))
            }
            Some(Value::Array(_)) => Err(bad(key, "expected a number or [re, im]")),
            Some(v) => Ok(C64::new(as_finite(key, v)?, 0.0)),
        }
    }

    /// Spin-example keys `a`, `b`, `period`, `convention`, with `delta` supplied
    /// by the caller.
    pub fn spin(&self, delta: f64) -> Result<SpinExampleConfig, CliError> {
        let a = self.complex("a", C64::new(0.0, 0.0))?;
        let b = self.complex("b", C64::new(1.0, 0.0))?;
        let norm = a.norm_sqr() + b.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(bad("b", format!("|a|² + |b|² = {norm}, expected 1")));
        }
        let period = self.positive("period", Some(1.0))?;
        let convention = match self.get("convention") {
            None => GConvention::FullTurn,
            Some(Value::String(s)) if s == "full_turn" => GConvention::FullTurn,
            Some(Value::String(s)) if s == "flip_at_T" => GConvention::FlipAtT,
            Some(other) => return Err(bad("convention", format!("expected \"full_turn\" or \"flip_at_T\", got {other}"))),
        };
        SpinExampleConfig::new(a, b, period, convention, delta).map_err(|e| CliError::Config(e.to_string()))
    }
}

fn as_finite(key: &str, v: &Value) -> Result<f64, CliError> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(bad(key, format!("expected a finite number, got {v}"))),
    }
}

fn as_count(key: &str, v: &Value) -> Result<u64, CliError> {
    v.as_u64().ok_or_else(|| bad(key, format!("expected a non-negative integer, got {v}")))
}
