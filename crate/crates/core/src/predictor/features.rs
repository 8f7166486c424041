//! Per-round feature encoding.
//!
//! Round `t` of a game is encoded from the review shown at `t` and the
//! outcome of rounds before `t` only:
//!
//! | col | feature |
//! |-----|---------|
//! | 0 | expected score of the shown review / 10 |
//! | 1 | oracle mass on scores >= tau |
//! | 2 | round index / T |
//! | 3 | game index - 1 |
//! | 4 | previous action (0 in round 1) |
//! | 5 | previous DM payoff (0 in round 1) |
//! | 6 | DM points before this round / T |
//! | 7..13 | expert one-hot |

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::corpus::Corpus;
use crate::dataset::InteractionDataset;
use crate::experts::ExpertStrategy;
use crate::game::{GameRecord, Hotel};
use crate::oracle::{expected_score, OracleError, ScoreOracle};

pub const N_FEATURES: usize = 13;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("hotel `{0}` is not in the corpus")]
    MissingHotel(String),
    #[error("hotel `{hotel_id}` has no review {index}")]
    MissingReview { hotel_id: String, index: usize },
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// One game as a feature sequence with its DM actions as labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedGame {
    pub dm_id: String,
    pub expert: ExpertStrategy,
    pub stage_index: u32,
    pub game_index: u32,
    /// Row-major, `len() * N_FEATURES` values.
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl EncodedGame {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.x[t * N_FEATURES..(t + 1) * N_FEATURES]
    }
}

pub struct FeatureEncoder {
    hotels: HashMap<String, Hotel>,
    oracle: Arc<dyn ScoreOracle>,
    tau: f64,
}

impl FeatureEncoder {
    pub fn new(corpus: &Corpus, oracle: Arc<dyn ScoreOracle>) -> Self {
        let hotels = corpus.hotels.iter().map(|h| (h.hotel_id.clone(), h.clone())).collect();
        FeatureEncoder { hotels, oracle, tau: corpus.tau }
    }

    pub fn encode(&self, game: &GameRecord) -> Result<EncodedGame, FeatureError> {
        let t_total = game.rounds.len() as f64;
        let mut x = Vec::with_capacity(game.rounds.len() * N_FEATURES);
        let mut points = 0u32;
        let mut prev = None;
        for r in &game.rounds {
            let hotel = self.hotels.get(&r.hotel_id).ok_or_else(|| FeatureError::MissingHotel(r.hotel_id.clone()))?;
            let review = hotel.reviews.get(r.shown_review_index).ok_or_else(|| FeatureError::MissingReview {
                hotel_id: r.hotel_id.clone(),
                index: r.shown_review_index,
            })?;
            let dist = self.oracle.distribution(&review.positive_text, &review.negative_text)?;
            let (prev_a, prev_v) = prev.unwrap_or((0.0, 0.0));
            x.push(expected_score(&dist) / 10.0);
            x.push(dist.go_mass(self.tau));
            x.push(r.round_index as f64 / t_total);
            x.push(game.game_index as f64 - 1.0);
            x.push(prev_a);
            x.push(prev_v);
            x.push(points as f64 / t_total);
            let mut onehot = [0.0; 6];
            onehot[game.expert_strategy.index()] = 1.0;
            x.extend_from_slice(&onehot);
            // history for the next round
            prev = Some((r.dm_action as u8 as f64, r.dm_payoff as u8 as f64));
            points += r.dm_payoff as u32;
        }
        Ok(EncodedGame {
            dm_id: game.dm_id.clone(),
            expert: game.expert_strategy,
            stage_index: game.stage_index,
            game_index: game.game_index,
            x,
            y: game.rounds.iter().map(|r| r.dm_action as u8 as f64).collect(),
        })
    }

    pub fn encode_all(&self, ds: &InteractionDataset) -> Result<Vec<EncodedGame>, FeatureError> {
        ds.games.iter().map(|g| self.encode(g)).collect()
    }
}
