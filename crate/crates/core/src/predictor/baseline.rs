//! History-independent baseline: logistic regression on the two oracle
//! features of the current round (expected score and go mass).

use serde::{Deserialize, Serialize};

use super::features::EncodedGame;
use super::lstm::bce_with_logit;

pub const BASELINE_INPUTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    /// Weights for the two features, then the bias.
    pub params: [f64; 3],
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Logistic {
    fn logit(&self, row: &[f64]) -> f64 {
        self.params[0] * row[0] + self.params[1] * row[1] + self.params[2]
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.logit(row))
    }

    pub fn predict(&self, game: &EncodedGame) -> Vec<f64> {
        (0..game.len()).map(|t| self.predict_row(game.row(t))).collect()
    }

    /// Full-batch gradient descent on mean cross-entropy; the problem is
    /// convex so the fixed step and iteration count suffice.
    pub fn fit(games: &[EncodedGame], learning_rate: f64, iterations: usize) -> Self {
        let mut m = Logistic { params: [0.0; 3] };
        let n: usize = games.iter().map(|g| g.len()).sum();
        if n == 0 {
            return m;
        }
        for _ in 0..iterations {
            let mut g = [0.0; 3];
            for game in games {
                for t in 0..game.len() {
                    let row = game.row(t);
                    let d = sigmoid(m.logit(row)) - game.y[t];
                    g[0] += d * row[0];
                    g[1] += d * row[1];
                    g[2] += d;
                }
            }
            for (p, gk) in m.params.iter_mut().zip(g) {
                *p -= learning_rate * gk / n as f64;
            }
        }
        m
    }

    pub fn loss(&self, games: &[EncodedGame]) -> f64 {
        let mut s = 0.0;
        let mut n = 0;
        for game in games {
            for t in 0..game.len() {
                s += bce_with_logit(self.logit(game.row(t)), game.y[t]);
                n += 1;
            }
        }
        s / n.max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::ExpertStrategy;
    use crate::predictor::features::N_FEATURES;

    fn game(rows: &[(f64, f64, f64)]) -> EncodedGame {
        let mut x = Vec::new();
        for &(e, g, round) in rows {
            let mut r = [0.0; N_FEATURES];
            r[0] = e;
            r[1] = g;
            r[2] = round;
            x.extend_from_slice(&r);
        }
        EncodedGame {
            dm_id: "a".into(),
            expert: ExpertStrategy::Greedy,
            stage_index: 1,
            game_index: 1,
            x,
            y: rows.iter().map(|r| (r.1 >= 0.5) as u8 as f64).collect(),
        }
    }

    #[test]
    fn fits_a_threshold() {
        let g = game(&[(0.95, 1.0, 0.1), (0.75, 0.0, 0.2), (0.85, 1.0, 0.3), (0.55, 0.0, 0.4)]);
        let m = Logistic::fit(std::slice::from_ref(&g), 1.0, 2000);
        let p = m.predict(&g);
        assert!(p[0] > 0.9 && p[2] > 0.9 && p[1] < 0.1 && p[3] < 0.1, "{p:?}");
        assert!(m.loss(&[g]) < 0.1);
    }

    #[test]
    fn ignores_history_columns() {
        let m = Logistic { params: [1.0, -2.0, 0.3] };
        let a = game(&[(0.5, 1.0, 0.1), (0.7, 0.0, 0.2)]);
        let b = game(&[(0.7, 0.0, 0.9), (0.5, 1.0, 0.5)]);
        let (pa, pb) = (m.predict(&a), m.predict(&b));
        assert_eq!(pa[0], pb[1]);
        assert_eq!(pa[1], pb[0]);
    }
}
