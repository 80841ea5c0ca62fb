use std::fmt;
use std::path::{Path, PathBuf};

use cltlab_core::edgeworth::BoundConstants;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Default output directory when neither the config nor the environment sets one.
pub const OUTPUT_DIR_ENV: &str = "CLTLAB_OUTPUT_DIR";
const FALLBACK_OUTPUT_DIR: &str = "cltlab-out";

pub const MIN_MC_REPS: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    EdgeworthSweep,
    ReluDeltaSweep,
    Zeta2,
    RidgeReconstruct,
    RidgeDeltaBound,
    NormballBound,
    NormGap,
    TailIdentities,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Self::EdgeworthSweep,
        Self::ReluDeltaSweep,
        Self::Zeta2,
        Self::RidgeReconstruct,
        Self::RidgeDeltaBound,
        Self::NormballBound,
        Self::NormGap,
        Self::TailIdentities,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::EdgeworthSweep => "edgeworth_sweep",
            Self::ReluDeltaSweep => "relu_delta_sweep",
            Self::Zeta2 => "zeta2",
            Self::RidgeReconstruct => "ridge_reconstruct",
            Self::RidgeDeltaBound => "ridge_delta_bound",
            Self::NormballBound => "normball_bound",
            Self::NormGap => "norm_gap",
            Self::TailIdentities => "tail_identities",
        }
    }

    pub fn is_monte_carlo(self) -> bool {
        !matches!(self, Self::RidgeReconstruct | Self::TailIdentities)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A grid point: a scalar (`x = 0.5`) or a vector (`x = [0.5, 1.0]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Point {
    pub fn coords(&self) -> Vec<f64> {
        match self {
            Self::Scalar(x) => vec![*x],
            Self::Vector(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constants {
    pub scale: f64,
    pub decay: f64,
}

impl Default for Constants {
    fn default() -> Self {
        let k = BoundConstants::default();
        Self { scale: k.scale, decay: k.decay }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Ignored by `tail_identities`.
    #[serde(default)]
    pub model: String,
    #[serde(default)]
    pub n_values: Vec<u64>,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub x_grid: Vec<Point>,
    /// Bandwidths for `normball_bound`.
    #[serde(default)]
    pub h_grid: Vec<f64>,
    #[serde(default)]
    pub reps: u64,
    #[serde(default)]
    pub seed: u64,
    /// Power control variates for the univariate sweeps, ‖W‖², ‖W‖⁴ for `norm_gap`.
    #[serde(default)]
    pub control_variates: bool,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(format!("{}: {m}", self.experiment)));
        if self.experiment.is_monte_carlo() {
            if self.n_values.is_empty() {
                return bad("n_values must be nonempty");
            }
            if self.n_values[0] == 0 || self.n_values.windows(2).any(|w| w[0] >= w[1]) {
                return bad("n_values must be positive and strictly ascending");
            }
            if self.reps < MIN_MC_REPS {
                return bad("reps must be at least 10000");
            }
        }
        if self.t_grid.iter().chain(&self.h_grid).any(|v| !v.is_finite()) {
            return bad("grids must be finite");
        }
        if self.x_grid.iter().flat_map(|p| p.coords()).any(|v| !v.is_finite()) {
            return bad("grids must be finite");
        }
        if self.experiment == Experiment::ReluDeltaSweep && self.t_grid.is_empty() {
            return bad("t_grid must be nonempty");
        }
        if self.h_grid.iter().any(|&h| h <= 0.0) {
            return bad("bandwidths must be positive");
        }
        self.bound_constants()?;
        Ok(())
    }

    pub fn bound_constants(&self) -> Result<BoundConstants, CliError> {
        BoundConstants::new(self.constants.scale, self.constants.decay).map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the normalized configuration, output directory excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let text = toml::to_string(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }

    /// Config value, then `CLTLAB_OUTPUT_DIR`, then `./cltlab-out`.
    pub fn resolve_output_dir(&self) -> PathBuf {
        if let Some(dir) = &self.output_dir {
            return dir.clone();
        }
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from(FALLBACK_OUTPUT_DIR),
        }
    }
}
