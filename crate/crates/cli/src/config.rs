//! JSON run configuration.
//!
//! A file holds up to six top-level sections: `dynamics`, `topology`,
//! `signal`, `runtime`, `sweep` and `basin`. Each command reads the sections
//! it needs; a missing required section is reported with its position.

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use rcstab_core::network::{construct_adjacency, InputCoupling, NetworkOptions};
use rcstab_core::reservoir::{DEFAULT_N_KEEP, DEFAULT_TRANSIENT};
use rcstab_core::signals::SignalSource;
use rcstab_core::sweep::{BasinWindow, GroupAxis, Grid, Level};
use rcstab_core::{NodalDynamics, ReservoirNetwork, TimeKind};

use crate::error::CliError;

const SECTIONS: [&str; 6] = ["dynamics", "topology", "signal", "runtime", "sweep", "basin"];

/// Parses `text` into a command view, rejecting unknown top-level sections.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let located = |e: serde_json::Error| {
        let text = e.to_string();
        let bare = text.rsplit_once(" at line ").map_or(text.as_str(), |(head, _)| head);
        CliError::Config(format!("line {}, column {}: {bare}", e.line(), e.column()))
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(located)?;
    let Some(obj) = value.as_object() else {
        return Err(CliError::Config("line 1, column 1: top level must be a JSON object".into()));
    };
    if let Some(key) = obj.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        let (line, col) = key_position(text, key);
        return Err(CliError::Config(format!(
            "line {line}, column {col}: unknown section `{key}`, expected one of {}",
            SECTIONS.join(", ")
        )));
    }
    // Deserialize from the text, not the value, so errors keep their position.
    serde_json::from_str(text).map_err(located)
}

fn key_position(text: &str, key: &str) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    let offset = text.find(&needle).unwrap_or(0);
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = offset - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Either an explicit matrix with its input vector, or a generated ensemble member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    /// Row-major adjacency rows; `A[i][j]` couples node `j` into node `i`.
    pub adjacency: Option<Vec<Vec<f64>>>,
    pub input: Option<Vec<f64>>,
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub spectral_target: Option<f64>,
    pub input_coupling: Option<InputCoupling>,
}

pub const DEFAULT_M: usize = 100;

impl TopologySection {
    fn is_explicit(&self) -> Result<bool, CliError> {
        let explicit = self.adjacency.is_some() || self.input.is_some();
        let generative =
            self.m.is_some() || self.seed.is_some() || self.spectral_target.is_some() || self.input_coupling.is_some();
        if explicit && generative {
            return Err(CliError::Config(
                "topology: explicit `adjacency`/`input` and generative `m`/`seed`/`spectral_target`/`input_coupling` are mutually exclusive".into(),
            ));
        }
        Ok(explicit)
    }

    pub fn options(&self) -> NetworkOptions {
        let d = NetworkOptions::default();
        NetworkOptions {
            spectral_target: self.spectral_target.unwrap_or(d.spectral_target),
            input_coupling: self.input_coupling.unwrap_or(d.input_coupling),
        }
    }

    /// Fills in defaults and applies a `--seed` override to generative topologies.
    pub fn resolve(&mut self, seed_override: Option<u64>) -> Result<(), CliError> {
        if !self.is_explicit()? {
            self.m.get_or_insert(DEFAULT_M);
            if let Some(s) = seed_override {
                self.seed = Some(s);
            }
            self.seed.get_or_insert(0);
            let o = self.options();
            self.spectral_target = Some(o.spectral_target);
            self.input_coupling = Some(o.input_coupling);
        }
        Ok(())
    }

    pub fn build(&self) -> Result<ReservoirNetwork, CliError> {
        if self.is_explicit()? {
            let rows = self.adjacency.as_ref().ok_or_else(|| CliError::Config("topology: `adjacency` is required with `input`".into()))?;
            let m = rows.len();
            if rows.iter().any(|r| r.len() != m) {
                return Err(CliError::Config(format!("topology: adjacency must be square ({m} rows)")));
            }
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let input = match &self.input {
                Some(w) => DVector::from_column_slice(w),
                None => DVector::zeros(m),
            };
            Ok(ReservoirNetwork::explicit(DMatrix::from_row_slice(m, m, &flat), input)?)
        } else {
            Ok(construct_adjacency(self.m.unwrap_or(DEFAULT_M), self.seed.unwrap_or(0), &self.options())?)
        }
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeSection {
    #[serde(default = "default_time_kind")]
    pub time_kind: TimeKind,
    #[serde(default = "default_transient")]
    pub transient: usize,
    #[serde(default = "default_n_keep")]
    pub n_keep: usize,
}

fn default_time_kind() -> TimeKind {
    TimeKind::Continuous
}

fn default_transient() -> usize {
    DEFAULT_TRANSIENT
}

fn default_n_keep() -> usize {
    DEFAULT_N_KEEP
}

impl Default for RuntimeSection {
    fn default() -> Self {
        RuntimeSection { time_kind: default_time_kind(), transient: DEFAULT_TRANSIENT, n_keep: DEFAULT_N_KEEP }
    }
}

fn default_signal() -> SignalSource {
    SignalSource::lorenz_x_to_z()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeConfig {
    pub dynamics: NodalDynamics,
    pub topology: TopologySection,
    #[serde(default)]
    pub runtime: RuntimeSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dynamics: NodalDynamics,
    pub topology: TopologySection,
    #[serde(default = "default_signal")]
    pub signal: SignalSource,
    #[serde(default)]
    pub runtime: RuntimeSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalConfig {
    #[serde(default = "default_signal")]
    pub signal: SignalSource,
    #[serde(default)]
    pub runtime: RuntimeSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis_x: usize,
    pub axis_y: usize,
    pub grid: Grid,
    #[serde(default = "one")]
    pub n_realizations: usize,
    /// Defaults to the topology seed.
    pub base_seed: Option<u64>,
    #[serde(default = "yes")]
    pub train: bool,
    /// Boundary curves to trace on realization 0.
    #[serde(default)]
    pub boundaries: Vec<Level>,
    /// Axis for box statistics over realizations.
    pub group_by: Option<GroupAxis>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFileConfig {
    /// Template; the swept parameters are overwritten per cell.
    pub dynamics: NodalDynamics,
    pub topology: TopologySection,
    #[serde(default = "default_signal")]
    pub signal: SignalSource,
    #[serde(default)]
    pub runtime: RuntimeSection,
    pub sweep: SweepSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub radius: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub seed: Option<u64>,
}

fn default_samples() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinSection {
    pub window: BasinWindow,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Optional Monte-Carlo check of a ball of the given radius.
    pub verify: Option<VerifySection>,
}

fn default_resolution() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinConfig {
    pub dynamics: NodalDynamics,
    pub topology: TopologySection,
    pub basin: BasinSection,
}
