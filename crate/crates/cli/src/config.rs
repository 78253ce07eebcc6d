//! Experiment configuration: a flat TOML file with fixed sections.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use speckle_core::simulator::dz_max;
use speckle_core::{GaussianCovariance, Grid, ScalingRegime, SourceProfile, SourceSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeSection {
    pub epsilon: f64,
    pub eta: f64,
    pub omega0: f64,
    /// Carrier wavevector; empty means zero.
    pub k0: Vec<f64>,
    pub z0: f64,
    pub dim: usize,
}

impl Default for RegimeSection {
    fn default() -> Self {
        Self { epsilon: 0.01, eta: 0.25, omega0: 1.0, k0: Vec::new(), z0: 1.0, dim: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 256, length: 64.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumSection {
    pub family: Family,
    pub r0: f64,
    pub ell: f64,
}

impl Default for MediumSection {
    fn default() -> Self {
        Self { family: Family::Gaussian, r0: 1.0, ell: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    PlaneWave,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub profile: Profile,
    pub width: f64,
    /// Tilt in units of ε; empty means zero.
    pub tilt: Vec<f64>,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self { profile: Profile::PlaneWave, width: 1.0, tilt: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub dz: f64,
    pub dz_ode: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { dz: 5e-4, dz_ode: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_realizations: usize,
    pub seed: u64,
    /// Realizations per NDJSON progress record.
    pub batch: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self { n_realizations: 200, seed: 1, batch: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Moments,
    Gaussianity,
    MemoryTilt,
    MemoryChroma,
    JumpCheck,
    Validate,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Moments => "moments",
            Self::Gaussianity => "gaussianity",
            Self::MemoryTilt => "memory-tilt",
            Self::MemoryChroma => "memory-chroma",
            Self::JumpCheck => "jump-check",
            Self::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    /// Separations τ (first axis) for moment and Gaussianity runs.
    pub tau: Vec<f64>,
    /// τ for the tilt scan.
    pub tilt_tau: f64,
    /// Also run the Monte Carlo tilt estimator.
    pub tilt_mc: bool,
    /// Frequency offset Ω for the chroma scan.
    pub omega_offset: f64,
    pub h_span: f64,
    pub h_points: usize,
    pub jump_etas: Vec<f64>,
    pub jump_paths: usize,
    pub jump_z: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Validate,
            tau: vec![0.0, 1.0, 2.0, 4.0],
            tilt_tau: 0.4,
            tilt_mc: false,
            omega_offset: 0.5,
            h_span: 1.0,
            h_points: 201,
            jump_etas: vec![0.5, 0.25, 0.125],
            jump_paths: 100_000,
            jump_z: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Ndjson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: String,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { path: "out".into(), format: Format::Csv }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub regime: RegimeSection,
    pub grid: GridSection,
    pub medium: MediumSection,
    pub source: SourceSection,
    pub solver: SolverSection,
    pub ensemble: EnsembleSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line where `section.key` is assigned, if it appears in the text.
fn line_of_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = "";
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim();
        } else if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl ExperimentConfig {
    pub fn regime(&self) -> speckle_core::Result<ScalingRegime> {
        let r = &self.regime;
        let k0 = if r.k0.is_empty() { vec![0.0; r.dim] } else { r.k0.clone() };
        ScalingRegime::new(r.epsilon, r.eta, r.omega0, k0, r.z0, r.dim)
    }

    pub fn grid(&self) -> speckle_core::Result<Grid> {
        Grid::new(self.grid.n, self.grid.length, self.regime.dim)
    }

    pub fn model(&self) -> speckle_core::Result<GaussianCovariance> {
        match self.medium.family {
            Family::Gaussian => GaussianCovariance::new(self.medium.r0, self.medium.ell, self.regime.dim),
        }
    }

    pub fn source_profile(&self) -> SourceProfile {
        match self.source.profile {
            Profile::PlaneWave => SourceProfile::PlaneWave,
            Profile::Gaussian => SourceProfile::Gaussian { width: self.source.width },
        }
    }

    pub fn source_spec(&self) -> SourceSpec {
        let tilt = if self.source.tilt.is_empty() { vec![0.0; self.regime.dim] } else { self.source.tilt.clone() };
        SourceSpec { profile: self.source_profile(), tilt }
    }

    /// Every precondition checked before any compute. `text` locates keys
    /// for line numbers and may be empty.
    pub fn validate(&self, text: &str) -> Vec<ConfigError> {
        let mut errs = Vec::new();
        let mut push = |section: &str, key: &str, message: String| {
            errs.push(ConfigError { line: line_of_key(text, section, key), message });
        };
        let regime = match self.regime() {
            Ok(r) => Some(r),
            Err(e) => {
                let msg = e.to_string().trim_start_matches("invalid regime: ").to_string();
                let key = match msg.split_whitespace().next() {
                    Some(k @ ("epsilon" | "eta" | "omega0" | "z0" | "k0")) => k.to_string(),
                    _ => "dim".to_string(),
                };
                push("regime", &key, msg);
                None
            }
        };
        let grid = match self.grid() {
            Ok(g) => Some(g),
            Err(e) => {
                push("grid", "n", e.to_string());
                None
            }
        };
        let model = match self.model() {
            Ok(m) => Some(m),
            Err(e) => {
                push("medium", "r0", e.to_string());
                None
            }
        };
        if self.source.profile == Profile::Gaussian && !(self.source.width > 0.0) {
            push("source", "width", format!("source width must be positive, got {}", self.source.width));
        }
        if !self.source.tilt.is_empty() && self.source.tilt.len() != self.regime.dim {
            push("source", "tilt", format!("tilt has {} components, dim is {}", self.source.tilt.len(), self.regime.dim));
        }
        if !(self.solver.dz > 0.0) {
            push("solver", "dz", format!("dz must be positive, got {}", self.solver.dz));
        }
        if !(self.solver.dz_ode > 0.0) {
            push("solver", "dz_ode", format!("dz_ode must be positive, got {}", self.solver.dz_ode));
        }
        if self.ensemble.batch == 0 {
            push("ensemble", "batch", "batch must be at least 1".into());
        }
        let kind = self.experiment.kind;
        let needs_ensemble = matches!(kind, ExperimentKind::Simulate | ExperimentKind::Moments | ExperimentKind::Gaussianity)
            || (kind == ExperimentKind::MemoryTilt && self.experiment.tilt_mc);
        if needs_ensemble && self.ensemble.n_realizations < 2 {
            push("ensemble", "n_realizations", format!("need at least 2 realizations, got {}", self.ensemble.n_realizations));
        }
        if let (Some(regime), Some(grid), Some(model)) = (&regime, &grid, &model) {
            if needs_ensemble && self.solver.dz > 0.0 {
                let limit = dz_max(regime, model, grid, regime.omega0);
                if self.solver.dz > limit {
                    push("solver", "dz", format!("dz = {} exceeds the stable step {limit:.4e}", self.solver.dz));
                }
                if let Err(e) = speckle_core::init_source(regime, grid, &self.source_spec()) {
                    push("source", "tilt", e.to_string());
                }
            }
        }
        if matches!(kind, ExperimentKind::Moments | ExperimentKind::Gaussianity) && self.source.tilt.iter().any(|t| *t != 0.0) {
            push("source", "tilt", "moment oracles assume an untilted source".into());
        }
        if kind == ExperimentKind::Gaussianity && self.experiment.tau.len() < 2 {
            push("experiment", "tau", "gaussianity needs two separations (point offsets)".into());
        }
        if kind == ExperimentKind::MemoryTilt && self.source.profile != Profile::Gaussian {
            push("source", "profile", "memory-tilt needs a gaussian source".into());
        }
        if kind == ExperimentKind::MemoryChroma && self.experiment.h_points < 3 {
            push("experiment", "h_points", "h_points must be at least 3".into());
        }
        if kind == ExperimentKind::JumpCheck && (self.experiment.jump_paths < 2 || self.experiment.jump_etas.iter().any(|e| !(*e > 0.0))) {
            push("experiment", "jump_etas", "jump-check needs positive etas and at least 2 paths".into());
        }
        errs
    }

    /// Canonical TOML text.
    pub fn emit(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.emit().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses and validates. Errors carry line numbers where they can be
/// located.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        vec![ConfigError { line: e.span().map(|s| line_of_offset(text, s.start)), message: e.message().to_string() }]
    })?;
    let errs = cfg.validate(text);
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(errs)
    }
}
