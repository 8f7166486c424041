//! Central finite-difference check of [`Lstm::loss_and_gradient`].

use rand::Rng;

use super::features::{EncodedGame, N_FEATURES};
use super::lstm::{Lstm, LstmShape};
use crate::experts::ExpertStrategy;
use crate::rng::{stream, SimRng};

pub const STEP: f64 = 1e-5;
/// Denominator floor so parameters with (near-)zero gradient compare by
/// absolute error.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub draws: usize,
    pub checked: usize,
    pub max_rel_error: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(REL_FLOOR)
}

fn random_batch(rng: &mut SimRng) -> Vec<EncodedGame> {
    let n = rng.random_range(1..=3);
    (0..n)
        .map(|_| {
            let len = rng.random_range(3..=10);
            EncodedGame {
                dm_id: "g".into(),
                expert: ExpertStrategy::Greedy,
                stage_index: 1,
                game_index: 1,
                x: (0..len * N_FEATURES).map(|_| rng.random_range(-1.0..1.0)).collect(),
                y: (0..len).map(|_| rng.random_bool(0.5) as u8 as f64).collect(),
            }
        })
        .collect()
}

/// Draws `draws` random (parameter, batch) pairs and compares the analytic
/// gradient with central differences. `max_params` limits how many
/// parameters are checked per draw (a random subset); `None` checks all.
pub fn check_gradients(hidden: usize, layers: usize, draws: usize, max_params: Option<usize>, seed: u64) -> GradCheckReport {
    let shape = LstmShape { input: N_FEATURES, hidden, layers };
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for d in 0..draws {
        let mut rng = stream(seed, d as u64);
        let mut model = Lstm::init(shape, &mut rng).expect("valid shape");
        for p in &mut model.params {
            *p *= 2.0;
        }
        let games = random_batch(&mut rng);
        let batch: Vec<&EncodedGame> = games.iter().collect();
        let (_, grad) = model.loss_and_gradient(&batch);
        let indices: Vec<usize> = match max_params {
            Some(k) if k < model.n_params() => (0..k).map(|_| rng.random_range(0..model.n_params())).collect(),
            _ => (0..model.n_params()).collect(),
        };
        for i in indices {
            let orig = model.params[i];
            model.params[i] = orig + STEP;
            let up = model.loss(&batch);
            model.params[i] = orig - STEP;
            let down = model.loss(&batch);
            model.params[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            worst = worst.max(relative_error(grad[i], numeric));
            checked += 1;
        }
    }
    GradCheckReport { draws, checked, max_rel_error: worst }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_model_all_parameters() {
        let r = check_gradients(4, 2, 3, None, 1);
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 2.1).abs() < 1e-15);
    }
}
