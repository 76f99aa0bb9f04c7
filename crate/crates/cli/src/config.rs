//! Pipeline configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use maxent_debias_core::{MarginalKind, SolverConfig, SolverMode};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalKindSpec {
    Empirical,
    Reweighted,
    Balanced,
}

impl MarginalKindSpec {
    pub fn kind(self) -> MarginalKind {
        match self {
            Self::Empirical => MarginalKind::Empirical,
            Self::Reweighted => MarginalKind::Reweighted,
            Self::Balanced => MarginalKind::Balanced,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Empirical => "empirical",
            Self::Reweighted => "reweighted",
            Self::Balanced => "balanced",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverModeSpec {
    DampedNewton,
    BoxNewton,
}

fn default_tau() -> f64 {
    1.0
}
fn default_c() -> f64 {
    0.5
}
fn default_kind() -> MarginalKindSpec {
    MarginalKindSpec::Balanced
}
fn default_epsilon() -> f64 {
    1e-8
}
fn default_gradient_tolerance() -> f64 {
    1e-9
}
fn default_mode() -> SolverModeSpec {
    SolverModeSpec::DampedNewton
}
fn default_max_iterations() -> usize {
    10_000
}
fn default_sample_count() -> u64 {
    10_000
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_label_value() -> String {
    "1".to_string()
}
fn default_kl_floor() -> f64 {
    maxent_debias_core::metrics::DEFAULT_KL_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_path: PathBuf,
    pub data_path: PathBuf,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_kind")]
    pub marginal_kind: MarginalKindSpec,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_gradient_tolerance")]
    pub gradient_tolerance: f64,
    #[serde(default = "default_mode")]
    pub solver_mode: SolverModeSpec,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_sample_count")]
    pub sample_count: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Label category whose rate is measured.
    #[serde(default = "default_label_value")]
    pub label_value: String,
    #[serde(default = "default_kl_floor")]
    pub kl_floor: f64,
    #[serde(default)]
    pub skip_bad_rows: bool,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(CliError::config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(CliError::config(format!("c must lie in (0, 1], got {}", self.c)));
        }
        if self.sample_count == 0 {
            return Err(CliError::config("sample_count must be at least 1"));
        }
        if !(self.kl_floor > 0.0 && self.kl_floor < 1.0) {
            return Err(CliError::config("kl_floor must lie in (0, 1)"));
        }
        self.solver_config().validate()?;
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            epsilon: self.epsilon,
            mode: match self.solver_mode {
                SolverModeSpec::DampedNewton => SolverMode::DampedNewton,
                SolverModeSpec::BoxNewton => SolverMode::BoxNewton,
            },
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            radius_override: None,
        }
    }

    /// Parses TOML or JSON (chosen by extension, TOML otherwise) and
    /// resolves relative paths against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::formats::read_to_string(path).map_err(|e| CliError::config(e.to_string()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg: Self = if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.schema_path, &mut cfg.data_path, &mut cfg.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
