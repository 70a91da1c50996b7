//! Experiment configuration: JSON documents with `key=value` overrides.

use crate::error::{HarnessError, Result};
use crate::noise::NoiseModel;
use drc_core::oco::Recovery;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemSource {
    /// `A` Gaussian rescaled to spectral radius `rho`, `B`, `C` Gaussian / sqrt(dx).
    Random { dx: usize, du: usize, dy: usize, rho: f64, seed: u64 },
    Explicit { a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, c: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NominalSpec {
    #[default]
    None,
    StaticGain { k: Vec<Vec<f64>> },
    /// Exact observer feedback with DARE gains.
    DareYoula,
    /// Observer feedback on a plant estimate whose entries are perturbed by
    /// `1 + perturbation * N(0,1)`.
    ApproxDareYoula { perturbation: f64, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Stable plant, learner knows the Markov operator.
    Known,
    /// Stable plant, explore then estimate.
    Unknown,
    /// Nominal controller with exogenous DRC on Nature's eta.
    Ex,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    /// The known-system constant step, with the loss and signal bounds
    /// measured on the instance, times `scale`.
    Theory { scale: f64 },
    Constant { eta: f64 },
    /// `c / sqrt(T)`.
    InverseSqrtT { c: f64 },
    /// `c / (alpha t)`; `alpha` defaults to the certified modulus.
    StronglyConvex { c: f64, alpha: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    /// `q |y|^2 + r |u|^2`.
    Quadratic { q: f64, r: f64 },
    /// Track `amplitude * sin(2 pi t / period)` on every output coordinate.
    Tracking { amplitude: f64, period: f64, lambda: f64 },
    PseudoHuber { delta: f64, lambda: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComparatorSpec {
    BestInHindsight { iters: usize },
    /// The nominal controller alone.
    Zero,
}

fn default_delta() -> f64 {
    0.01
}
fn default_radius() -> f64 {
    1.0
}
fn default_comparator() -> ComparatorSpec {
    ComparatorSpec::BestInHindsight { iters: 5000 }
}
fn default_plot() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemSource,
    #[serde(default)]
    pub nominal: NominalSpec,
    pub mode: Mode,
    pub t: usize,
    pub m: usize,
    /// Defaults to `m`, or `m / 3` for strongly convex schedules with a
    /// nominal controller.
    #[serde(default)]
    pub h: Option<usize>,
    /// Exploration length; defaults to the rate-optimal formula.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    pub schedule: ScheduleSpec,
    pub loss: LossSpec,
    pub noise: NoiseModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_comparator")]
    pub comparator: ComparatorSpec,
    #[serde(default)]
    pub recovery: Recovery,
    /// Declared bound on Nature's signal; violations are logged.
    #[serde(default)]
    pub r_nat: Option<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_plot")]
    pub plot: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn h(&self) -> usize {
        match (self.h, self.schedule) {
            (Some(h), _) => h,
            (None, ScheduleSpec::StronglyConvex { .. }) if self.mode == Mode::Ex => (self.m / 3).max(1),
            _ => self.m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(HarnessError::Config(s));
        if self.m < 1 {
            return bad("m must be at least 1".into());
        }
        if self.h() < 1 {
            return bad("h must be at least 1".into());
        }
        if self.radius < 1.0 {
            return bad(format!("radius {} below 1", self.radius));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta {} outside (0, 1)", self.delta));
        }
        if matches!(self.schedule, ScheduleSpec::StronglyConvex { .. }) && self.mode == Mode::Unknown && self.m < 3 * self.h() {
            return bad(format!("strongly convex unknown mode needs m >= 3h, got m = {}, h = {}", self.m, self.h()));
        }
        if self.mode != Mode::Ex && self.nominal != NominalSpec::None {
            return bad("a nominal controller needs mode \"ex\"".into());
        }
        Ok(())
    }

    /// Apply `key=value` overrides; keys are dotted paths and values are
    /// parsed as JSON, falling back to a string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        for o in overrides {
            let o = o.as_ref().trim_start_matches("--");
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("override {o:?} is not key=value")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, key, value)?;
        }
        Ok(serde_json::from_value(doc)?)
    }
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| HarnessError::Config(format!("{key}: {p} is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(p.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(p.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}
