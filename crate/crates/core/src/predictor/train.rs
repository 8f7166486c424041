//! Mini-batch training loop for the LSTM and the baseline fit.

use log::debug;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adam::Adam;
use super::baseline::Logistic;
use super::features::{EncodedGame, N_FEATURES};
use super::lstm::{Lstm, LstmShape};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub layers: usize,
    pub baseline_learning_rate: f64,
    pub baseline_iterations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 4e-4,
            epochs: 20,
            batch_size: 32,
            hidden: 64,
            layers: 2,
            baseline_learning_rate: 1.0,
            baseline_iterations: 2000,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("no training games")]
    Empty,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("loss became {loss} at epoch {epoch}, step {step}; lower the learning rate")]
    Diverged { epoch: usize, step: usize, loss: f64 },
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 || self.hidden == 0 || self.layers == 0 {
            return Err(TrainError::Config("batch_size, hidden and layers must be positive".into()));
        }
        Ok(())
    }

    pub fn shape(&self) -> LstmShape {
        LstmShape { input: N_FEATURES, hidden: self.hidden, layers: self.layers }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
}

/// Trains from a seeded init; batches are reshuffled every epoch from the
/// same seed, so a fixed (data, seed) pair always gives the same model.
pub fn train_lstm(data: &[EncodedGame], config: &TrainConfig, seed: u64) -> Result<(Lstm, Vec<EpochLog>), TrainError> {
    config.validate()?;
    if data.is_empty() {
        return Err(TrainError::Empty);
    }
    let mut model = Lstm::init(config.shape(), &mut seeded(derive_seed(seed, 0))).map_err(|e| TrainError::Config(e.to_string()))?;
    let mut opt = Adam::new(model.n_params(), config.learning_rate);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle_rng = seeded(derive_seed(seed, 1));
    let mut log = Vec::with_capacity(config.epochs);
    let mut step = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&EncodedGame> = chunk.iter().map(|&i| &data[i]).collect();
            let (loss, grad) = model.loss_and_gradient(&batch);
            step += 1;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::Diverged { epoch, step, loss });
            }
            opt.update(&mut model.params, &grad);
            total += loss;
            batches += 1;
        }
        let mean_loss = total / batches as f64;
        debug!("epoch {epoch}: loss {mean_loss:.5}");
        log.push(EpochLog { epoch, mean_loss });
    }
    Ok((model, log))
}

pub fn train_baseline(data: &[EncodedGame], config: &TrainConfig) -> Result<Logistic, TrainError> {
    if data.is_empty() {
        return Err(TrainError::Empty);
    }
    Ok(Logistic::fit(data, config.baseline_learning_rate, config.baseline_iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::ExpertStrategy;
    use crate::rng::SimRng;
    use rand::Rng;

    /// Label = whether feature 4 was ever 1 so far: needs memory.
    fn toy(n: usize, rng: &mut SimRng) -> Vec<EncodedGame> {
        (0..n)
            .map(|_| {
                let mut x = vec![0.0; 10 * N_FEATURES];
                let mut y = vec![0.0; 10];
                let mut seen = false;
                for t in 0..10 {
                    let flag = rng.random_bool(0.15);
                    x[t * N_FEATURES + 4] = flag as u8 as f64;
                    seen |= flag;
                    y[t] = seen as u8 as f64;
                }
                EncodedGame { dm_id: "t".into(), expert: ExpertStrategy::Greedy, stage_index: 1, game_index: 1, x, y }
            })
            .collect()
    }

    fn small() -> TrainConfig {
        TrainConfig { hidden: 8, epochs: 100, learning_rate: 1e-2, batch_size: 16, ..TrainConfig::default() }
    }

    #[test]
    fn loss_decreases_over_100_steps() {
        let data = toy(16, &mut seeded(1));
        let (_, log) = train_lstm(&data, &small(), 3).unwrap();
        assert_eq!(log.len(), 100);
        assert!(log[99].mean_loss < 0.5 * log[0].mean_loss, "{:?} -> {:?}", log[0], log[99]);
    }

    #[test]
    fn deterministic() {
        let data = toy(20, &mut seeded(2));
        let cfg = TrainConfig { epochs: 3, ..small() };
        let (a, _) = train_lstm(&data, &cfg, 5).unwrap();
        let (b, _) = train_lstm(&data, &cfg, 5).unwrap();
        assert_eq!(a.params, b.params);
        let (c, _) = train_lstm(&data, &cfg, 6).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn divergence_is_reported() {
        let data = toy(4, &mut seeded(3));
        let cfg = TrainConfig { learning_rate: f64::MAX, ..small() };
        let err = train_lstm(&data, &cfg, 1).unwrap_err();
        assert!(matches!(err, TrainError::Diverged { .. }), "{err}");
        assert_eq!(train_lstm(&[], &small(), 1).unwrap_err(), TrainError::Empty);
        let bad = TrainConfig { learning_rate: 0.0, ..small() };
        assert!(matches!(train_lstm(&data, &bad, 1), Err(TrainError::Config(_))));
    }
}
