//! The structured configuration file shared by every command.
//!
//! ```toml
//! [env]
//! reliability = { mode = "one_inflated_beta", alpha = 5.9, beta = 2.7, point_mass = 0.5 }
//! observability = "partial"
//! max_trials = 70
//! rng_seed = 0
//!
//! [agent]
//! n_particles = 10
//! p_t = 0.02
//!
//! [fitting]
//! n_sims = 100
//! epsilon = 0.01
//! rho_grid = [[1, 1], [2, 1]]   # optional, replaces the standard list
//! p_gen_grid = [0.1, 0.5]       # optional
//!
//! # Optional custom layout: [[layout.boxes]] and [[layout.keys]] tables.
//! ```
//!
//! Every section and field is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvConfig, Layout, Observability, ReliabilityMode};
use crate::fitting::{ParamGrid, DEFAULT_EPSILON, DEFAULT_N_SIMS, DEFAULT_PARTICLES, PGEN_GRID, RHO_GRID};
use crate::proposal::{SocVariant, Theta, DEFAULT_P_T};
use crate::smc::ResampleConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("config: {0}")]
    Parse(String),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub n_particles: usize,
    pub p_t: f64,
    pub resample: ResampleConfig,
}

impl Default for AgentSection {
    fn default() -> Self {
        AgentSection { n_particles: DEFAULT_PARTICLES, p_t: DEFAULT_P_T, resample: ResampleConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FittingSection {
    pub n_sims: usize,
    pub epsilon: f64,
    pub rho_grid: Option<Vec<(f64, f64)>>,
    pub p_gen_grid: Option<Vec<f64>>,
}

impl Default for FittingSection {
    fn default() -> Self {
        FittingSection { n_sims: DEFAULT_N_SIMS, epsilon: DEFAULT_EPSILON, rho_grid: None, p_gen_grid: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentSection,
    pub fitting: FittingSection,
    pub layout: Option<Layout>,
}

impl Default for ExperimentConfig {
    /// The children's condition: partial observability, unreliable keys.
    fn default() -> Self {
        ExperimentConfig {
            env: EnvConfig {
                reliability: ReliabilityMode::CHILDREN,
                observability: Observability::Partial,
                ..EnvConfig::default()
            },
            agent: AgentSection::default(),
            fitting: FittingSection::default(),
            layout: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.env.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(l) = &self.layout {
            l.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if self.agent.n_particles == 0 {
            return Err(ConfigError::Invalid("agent.n_particles must be at least 1".into()));
        }
        if !(self.agent.p_t > 0.0 && self.agent.p_t < 1.0) {
            return Err(ConfigError::Invalid(format!("agent.p_t = {} must lie in (0, 1)", self.agent.p_t)));
        }
        if self.fitting.n_sims == 0 {
            return Err(ConfigError::Invalid("fitting.n_sims must be at least 1".into()));
        }
        if !(self.fitting.epsilon > 0.0 && self.fitting.epsilon < 1.0) {
            return Err(ConfigError::Invalid(format!("fitting.epsilon = {} must lie in (0, 1)", self.fitting.epsilon)));
        }
        if let Some(g) = &self.fitting.rho_grid {
            if g.is_empty() || g.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0)) {
                return Err(ConfigError::Invalid("fitting.rho_grid needs positive (alpha, beta) pairs".into()));
            }
        }
        if let Some(g) = &self.fitting.p_gen_grid {
            if g.is_empty() || g.iter().any(|&p| !(0.0..1.0).contains(&(p + self.agent.p_t))) {
                return Err(ConfigError::Invalid("fitting.p_gen_grid values must satisfy 0 <= p_gen < 1 - p_t".into()));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        self.layout.clone().unwrap_or_else(Layout::standard)
    }

    /// The grid for `variant`, honoring any configured overrides.
    pub fn grid(&self, variant: SocVariant) -> ParamGrid {
        let p_t = self.agent.p_t;
        if self.fitting.rho_grid.is_none() && self.fitting.p_gen_grid.is_none() {
            return ParamGrid::with_p_t(variant, p_t);
        }
        let rhos = self.fitting.rho_grid.clone().unwrap_or_else(|| RHO_GRID.to_vec());
        let gens = self.fitting.p_gen_grid.clone().unwrap_or_else(|| PGEN_GRID.to_vec());
        let theta = |rho, p_gen| Theta { rho_prior: rho, p_gen, p_t };
        let settings = match variant {
            SocVariant::Lesioned => vec![theta(None, 0.0)],
            SocVariant::Gen => gens.iter().map(|&g| theta(None, g)).collect(),
            SocVariant::Rel => rhos.iter().map(|&r| theta(Some(r), 0.0)).collect(),
            SocVariant::Full => rhos.iter().flat_map(|&r| gens.iter().map(move |&g| theta(Some(r), g))).collect(),
        };
        ParamGrid { variant, settings }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.grid(SocVariant::Full).len(), 99);
        let c = ExperimentConfig::from_toml_str(
            r#"
[env]
reliability = { mode = "fixed", rho = 0.9 }
observability = "full"
max_trials = 40
rng_seed = 3

[agent]
n_particles = 4

[fitting]
rho_grid = [[1.0, 1.0], [4.0, 1.0]]
"#,
        )
        .unwrap();
        assert_eq!(c.env.reliability, ReliabilityMode::Fixed { rho: 0.9 });
        assert_eq!(c.env.max_trials, 40);
        assert_eq!(c.agent.n_particles, 4);
        assert_eq!(c.grid(SocVariant::Rel).len(), 2);
        assert_eq!(c.grid(SocVariant::Full).len(), 18);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml_str("[agent]\nn_particles = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("[fitting]\nepsilon = 0.0").is_err());
        assert!(ExperimentConfig::from_toml_str("[env]\nmax_trials = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("[bogus]\nx = 1").is_err());
    }
}
