//! Application configuration shared by the CLI and the scoring service.
//!
//! The config file is TOML with one section per subsystem; every key has a
//! default, so an empty file (or no file) is valid. Resolution order is
//! flags over environment over file over defaults, applied by the callers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::evolution::EmbedderConfig;
use crate::grpo::{GrpoConfig, RewardWeights};
use crate::rewards::TaskRewardConfig;
use crate::sim::SimConfig;

/// Scoring service listen address.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub addr: String,
    pub port: u16,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1".into(),
            port: 8787,
        }
    }
}

impl ServiceConfig {
    /// Environment variable overriding the listen address.
    pub const ADDR_ENV: &'static str = "RSREWARD_ADDR";
    /// Environment variable overriding the listen port.
    pub const PORT_ENV: &'static str = "RSREWARD_PORT";

    /// Apply `RSREWARD_ADDR` / `RSREWARD_PORT` overrides.
    pub fn with_env_overrides(mut self) -> Result<Self, ConfigError> {
        if let Ok(addr) = std::env::var(Self::ADDR_ENV) {
            self.addr = addr;
        }
        if let Ok(port) = std::env::var(Self::PORT_ENV) {
            self.port = port
                .parse()
                .map_err(|_| ConfigError::InvalidValue(format!("{}={port}", Self::PORT_ENV)))?;
        }
        Ok(self)
    }

    pub fn bind_address(&self) -> String {
        format!("{}:{}", self.addr, self.port)
    }
}

/// Full application configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub weights: RewardWeights<f64>,
    pub grpo: GrpoConfig<f64>,
    pub embedder: EmbedderConfig,
    pub rewards: TaskRewardConfig,
    pub service: ServiceConfig,
    pub sim: SimConfig,
    /// Abort on malformed input records instead of skipping them.
    pub strict: bool,
}

/// Configuration loading failure.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config value: {0}")]
    InvalidValue(String),
}

impl AppConfig {
    /// Parse a TOML configuration file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: AppConfig = toml::from_str(text)?;
        cfg.grpo
            .validate()
            .map_err(|e| ConfigError::InvalidValue(e.to_string()))?;
        Ok(cfg)
    }

    /// Resolved configuration as TOML, for audit output.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grpo::KlEstimator;
    use crate::rewards::MatchingPolicy;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = AppConfig::from_toml("").unwrap();
        assert_eq!(cfg, AppConfig::default());
        assert_eq!(cfg.weights.srar, 0.1);
        assert_eq!(cfg.weights.rpcr, 0.7);
        assert_eq!(cfg.weights.evol, 0.2);
        assert_eq!(cfg.embedder.dimension, 256);
        assert_eq!(cfg.sim.group_size, 15);
    }

    #[test]
    fn sections_override_defaults() {
        let text = r#"
            strict = true

            [weights]
            srar = 0.2
            rpcr = 0.6
            evol = 0.2

            [grpo]
            epsilon_clip = 0.3
            kl_estimator = "exact_ratio"

            [rewards.ovd]
            policy = "literal"

            [service]
            port = 9000
        "#;
        let cfg = AppConfig::from_toml(text).unwrap();
        assert!(cfg.strict);
        assert_eq!(cfg.weights.srar, 0.2);
        assert_eq!(cfg.grpo.epsilon_clip, 0.3);
        assert_eq!(cfg.grpo.kl_estimator, KlEstimator::ExactRatio);
        assert_eq!(cfg.rewards.ovd.policy, MatchingPolicy::LiteralPerPred);
        assert_eq!(cfg.service.port, 9000);
        // Untouched sections keep defaults.
        assert_eq!(cfg.grpo.beta_kl, 0.04);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(AppConfig::from_toml("nonsense = 1").is_err());
    }

    #[test]
    fn invalid_grpo_rejected() {
        let text = "[grpo]\nepsilon_clip = 2.0\n";
        assert!(AppConfig::from_toml(text).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = AppConfig::default();
        let text = cfg.to_toml_string();
        let back = AppConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn service_env_overrides() {
        // Only this test touches the service env vars.
        std::env::set_var(ServiceConfig::ADDR_ENV, "0.0.0.0");
        std::env::set_var(ServiceConfig::PORT_ENV, "9191");
        let cfg = ServiceConfig::default().with_env_overrides().unwrap();
        assert_eq!(cfg.addr, "0.0.0.0");
        assert_eq!(cfg.port, 9191);
        assert_eq!(cfg.bind_address(), "0.0.0.0:9191");

        std::env::set_var(ServiceConfig::PORT_ENV, "not a port");
        assert!(ServiceConfig::default().with_env_overrides().is_err());
        std::env::remove_var(ServiceConfig::ADDR_ENV);
        std::env::remove_var(ServiceConfig::PORT_ENV);
    }
}
