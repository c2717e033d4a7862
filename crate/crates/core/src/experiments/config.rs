use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bounds::{Constants, RegimeThresholds};
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Parses JSON, reporting syntax and schema errors with their line and
/// column in `path`.
pub fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| syntax_error(path, &e))
}

fn syntax_error(path: &Path, e: &serde_json::Error) -> Error {
    Error::ConfigSyntax {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses a JSON document after applying `key.path=value` overrides. Values
/// are read as JSON when they parse as such and as strings otherwise, then
/// type-checked by the schema of `T`.
pub fn parse_with_overrides<T: DeserializeOwned>(path: &Path, text: &str, overrides: &[String]) -> Result<T> {
    if overrides.is_empty() {
        return parse_json(path, text);
    }
    let mut doc: Value = parse_json(path, text)?;
    for ov in overrides {
        apply_override(&mut doc, ov)?;
    }
    serde_json::from_value(doc).map_err(|e| Error::config("config (after --set overrides)", e.to_string()))
}

/// Applies one `key.path=value` override to a JSON object.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config("--set", format!("expected KEY=VALUE, got {assignment:?}")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::config("--set", "empty key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::config(key, format!("{} is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        node = obj.entry(*part).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one part")
}

/// `m = ⌈n^exponent⌉ · factor`, for sweeps that grow the sample with the
/// dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MFromN {
    pub exponent: f64,
    #[serde(default = "one_usize")]
    pub factor: usize,
}

fn one_usize() -> usize {
    1
}

fn default_reps() -> usize {
    100
}

fn default_alpha() -> f64 {
    0.5
}

fn default_epsilon() -> f64 {
    0.05
}

fn default_workers() -> usize {
    1
}

fn default_u_grid() -> Vec<f64> {
    vec![2.0]
}

fn default_directions() -> usize {
    20
}

fn default_draws() -> usize {
    1_000_000
}

fn default_t_grid() -> Vec<f64> {
    vec![0.5, 1.0, 1.5, 2.0, 2.5]
}

fn default_tail_draws() -> usize {
    200_000
}

/// Configuration shared by every experiment kind. Fields an experiment does
/// not use are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model_spec: ModelSpec,
    /// Sample sizes; may be empty when `m_from_n` is given.
    #[serde(default)]
    pub m_grid: Vec<usize>,
    /// Dimensions; empty means the model's own dimension. Eigenvalue lists
    /// shorter than `n` are padded with their last entry.
    #[serde(default)]
    pub n_grid: Vec<usize>,
    /// Target signal-to-noise ratios, overriding `model_spec.mu_norm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_grid: Option<Vec<f64>>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 means one per available core. Never affects output.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,

    #[serde(default = "default_u_grid")]
    pub u_grid: Vec<f64>,
    /// Number of projection directions for the sub-gaussian check.
    #[serde(default = "default_directions")]
    pub directions: usize,
    /// Draws per direction for the sub-gaussian check.
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Deviations `t` at which the Gaussian norm tail is calibrated.
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    /// Draws per dimension for the norm-tail calibration.
    #[serde(default = "default_tail_draws")]
    pub tail_draws: usize,
    /// Derives `m` from `n` instead of using `m_grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_from_n: Option<MFromN>,
    /// Sets `η = eta_from_n · n` instead of using `eta_grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_from_n: Option<f64>,
    #[serde(default)]
    pub regime: RegimeThresholds,
}

/// One `(m, n, η)` point of the experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    /// Position in grid order; part of every random stream id.
    pub index: usize,
    pub m: usize,
    pub n: usize,
    /// Requested `η`, or `None` to keep the spec's `‖μ‖`.
    pub eta_target: Option<f64>,
    pub spec: ModelSpec,
}

impl ExperimentConfig {
    /// A small configuration around `spec`, mostly for tests and examples.
    pub fn new(spec: ModelSpec) -> Self {
        serde_json::from_value(serde_json::json!({ "model_spec": spec })).expect("defaults deserialize")
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = parse_with_overrides(path, &text, overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn n_values(&self) -> Vec<usize> {
        if self.n_grid.is_empty() {
            vec![self.model_spec.n]
        } else {
            self.n_grid.clone()
        }
    }

    fn m_values(&self, n: usize) -> Vec<usize> {
        match self.m_from_n {
            Some(rule) => vec![(n as f64).powf(rule.exponent).ceil() as usize * rule.factor],
            None => self.m_grid.clone(),
        }
    }

    fn eta_values(&self, n: usize) -> Vec<Option<f64>> {
        match (self.eta_from_n, &self.eta_grid) {
            (Some(f), _) => vec![Some(f * n as f64)],
            (None, Some(g)) => g.iter().map(|&e| Some(e)).collect(),
            (None, None) => vec![None],
        }
    }

    /// Grid in `n`-major, then `η`, then `m` order.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for n in self.n_values() {
            let base = self.model_spec.with_dim(n);
            for eta in self.eta_values(n) {
                let spec = match eta {
                    Some(e) => base.with_snr(e),
                    None => base.clone(),
                };
                for m in self.m_values(n) {
                    out.push(GridPoint {
                        index: out.len(),
                        m,
                        n,
                        eta_target: eta,
                        spec: spec.clone(),
                    });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::config("reps", "must be at least 1"));
        }
        if self.m_from_n.is_none() && self.m_grid.is_empty() {
            return Err(Error::config("m_grid", "must be nonempty unless m_from_n is given"));
        }
        if self.m_grid.contains(&0) {
            return Err(Error::config("m_grid", "sample sizes must be at least 1"));
        }
        if let Some(rule) = self.m_from_n {
            if !(rule.exponent.is_finite() && rule.exponent >= 0.0) || rule.factor == 0 {
                return Err(Error::config(
                    "m_from_n",
                    "exponent must be nonnegative and factor at least 1",
                ));
            }
        }
        if let Some(g) = &self.eta_grid {
            if g.is_empty() {
                return Err(Error::config("eta_grid", "must be nonempty when given"));
            }
            if g.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                return Err(Error::config("eta_grid", "entries must be positive and finite"));
            }
        }
        if let Some(f) = self.eta_from_n {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::config("eta_from_n", "must be positive and finite"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha", "must lie in (0, 1)"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::config("epsilon", "must lie in (0, 1]"));
        }
        self.constants.validate()?;
        if self.u_grid.is_empty() || self.u_grid.iter().any(|u| !(u.is_finite() && *u >= 0.0)) {
            return Err(Error::config("u_grid", "must be nonempty with nonnegative entries"));
        }
        if self.directions == 0 {
            return Err(Error::config("directions", "must be at least 1"));
        }
        if self.draws < 2 {
            return Err(Error::config("draws", "must be at least 2"));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::config("t_grid", "must be nonempty with positive entries"));
        }
        if self.tail_draws < 2 {
            return Err(Error::config("tail_draws", "must be at least 2"));
        }
        for p in self.grid() {
            p.spec
                .validate()
                .map_err(|e| Error::config(format!("grid point (m={}, n={})", p.m, p.n), e.to_string()))?;
        }
        Ok(())
    }
}
