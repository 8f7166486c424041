//! Run configuration file (TOML). Every table and key is optional; missing
//! values take their defaults.
//!
//! ```toml
//! [game]
//! rounds = 10
//! reviews_per_hotel = 7
//! quality_threshold = 8.0
//! stage_targets = [10, 10, 10, 10, 10, 10]
//! expert_order = ["greedy", "average", "honest", "ambiguous", "choice_adaptive", "points_adaptive"]
//!
//! [train]
//! learning_rate = 0.0004
//! epochs = 20
//! batch_size = 32
//! hidden = 64
//! layers = 2
//! baseline_learning_rate = 1.0
//! baseline_iterations = 2000
//!
//! [eval]
//! n_resamples = 1000
//!
//! [oracle]
//! spread = 0.0
//!
//! [agent]
//! threshold = 8.0
//! noise = 0.0
//! workers = 1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::DEFAULT_BOOTSTRAP;
use crate::game::{GameConfig, GameError};
use crate::predictor::{TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_resamples: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { n_resamples: DEFAULT_BOOTSTRAP }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Spread of the stub oracle around the true score; 0 is a point mass.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub threshold: f64,
    pub noise: f64,
    pub workers: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig { threshold: 8.0, noise: 0.0, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub game: GameConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub oracle: OracleConfig,
    pub agent: AgentConfig,
}

impl RunConfig {
    pub fn parse(text: &str, name: &str) -> Result<Self, ConfigError> {
        let config: RunConfig =
            toml::from_str(text).map_err(|source| ConfigError::Parse { path: name.to_string(), source })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.game.validate()?;
        self.train.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::ExpertStrategy;

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(RunConfig::parse("", "x").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_override_and_round_trip() {
        let c = RunConfig::parse("[train]\nepochs = 3\n[game]\nexpert_order = [\"honest\", \"greedy\", \"average\", \"ambiguous\", \"points_adaptive\", \"choice_adaptive\"]\n", "x").unwrap();
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.train.batch_size, 32);
        assert_eq!(c.game.expert_order[0], ExpertStrategy::Honest);
        assert_eq!(RunConfig::parse(&c.to_toml(), "y").unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(RunConfig::parse("[game]\nrounds = 0\n", "x"), Err(ConfigError::Game(_))));
        assert!(matches!(RunConfig::parse("[game]\nstage_targets = [10]\n", "x"), Err(ConfigError::Game(_))));
        assert!(matches!(RunConfig::parse("[nope]\n", "x"), Err(ConfigError::Parse { .. })));
        for table in ["game", "train", "eval", "oracle", "agent"] {
            let text = format!("[{table}]\ntypo = 1\n");
            assert!(matches!(RunConfig::parse(&text, "x"), Err(ConfigError::Parse { .. })), "{table}");
        }
        assert!(matches!(RunConfig::parse("[train]\nlearning_rate = -1.0\n", "x"), Err(ConfigError::Train(_))));
    }
}
