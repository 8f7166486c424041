//! The six rule-based expert strategies.
//!
//! Each strategy is a small binary decision tree over the current hotel and
//! the interaction history of the current game. The leaves pick one of three
//! reviews: the highest-scored, the lowest-scored, or the one whose score is
//! closest to the hotel's mean score. All ties resolve to the lowest index.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::game::{hotel_quality, Hotel, RoundRecord, SCORE_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExpertStrategy {
    #[serde(rename = "greedy")]
    Greedy,
    #[serde(rename = "average")]
    Average,
    #[serde(rename = "honest")]
    Honest,
    #[serde(rename = "ambiguous")]
    Ambiguous,
    #[serde(rename = "choice_adaptive")]
    ChoiceBasedAdaptive,
    #[serde(rename = "points_adaptive")]
    PointsBasedAdaptive,
}

/// Dependence class of a strategy: on nothing, on hotel quality only, or on
/// the interaction history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyClass {
    Naive,
    Stationary,
    Adaptive,
}

impl ExpertStrategy {
    /// Canonical stage order.
    pub const ALL: [ExpertStrategy; 6] = [
        ExpertStrategy::Greedy,
        ExpertStrategy::Average,
        ExpertStrategy::Honest,
        ExpertStrategy::Ambiguous,
        ExpertStrategy::ChoiceBasedAdaptive,
        ExpertStrategy::PointsBasedAdaptive,
    ];

    /// Stable identifier used in dataset files and CLI flags.
    pub fn as_str(self) -> &'static str {
        match self {
            ExpertStrategy::Greedy => "greedy",
            ExpertStrategy::Average => "average",
            ExpertStrategy::Honest => "honest",
            ExpertStrategy::Ambiguous => "ambiguous",
            ExpertStrategy::ChoiceBasedAdaptive => "choice_adaptive",
            ExpertStrategy::PointsBasedAdaptive => "points_adaptive",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|s| *s == self).unwrap()
    }

    pub fn class(self) -> StrategyClass {
        classify_strategy(self)
    }
}

impl fmt::Display for ExpertStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown expert strategy `{0}` (expected one of greedy, average, honest, ambiguous, choice_adaptive, points_adaptive)")]
pub struct UnknownStrategy(pub String);

impl FromStr for ExpertStrategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

pub fn classify_strategy(strategy: ExpertStrategy) -> StrategyClass {
    match strategy {
        ExpertStrategy::Greedy | ExpertStrategy::Average => StrategyClass::Naive,
        ExpertStrategy::Honest | ExpertStrategy::Ambiguous => StrategyClass::Stationary,
        ExpertStrategy::ChoiceBasedAdaptive | ExpertStrategy::PointsBasedAdaptive => {
            StrategyClass::Adaptive
        }
    }
}

/// What the expert sees when choosing a review: the full hotel (scores
/// included) and the rounds already played in the current game.
#[derive(Debug, Clone, Copy)]
pub struct ExpertObservation<'a> {
    pub hotel: &'a Hotel,
    pub history: &'a [RoundRecord],
    pub expert_points: u32,
    pub dm_points: u32,
}

impl<'a> ExpertObservation<'a> {
    pub fn new(hotel: &'a Hotel, history: &'a [RoundRecord]) -> Self {
        let expert_points = history.iter().filter(|r| r.expert_payoff).count() as u32;
        let dm_points = history.iter().filter(|r| r.dm_payoff).count() as u32;
        ExpertObservation { hotel, history, expert_points, dm_points }
    }
}

pub fn select_review(strategy: ExpertStrategy, obs: &ExpertObservation<'_>, tau: f64) -> usize {
    let scores: Vec<f64> = obs.hotel.reviews.iter().map(|r| r.score).collect();
    let high = || hotel_quality(obs.hotel, tau);
    match strategy {
        ExpertStrategy::Greedy => highest(&scores),
        ExpertStrategy::Average => closest_to_mean(&scores),
        ExpertStrategy::Honest => {
            if high() {
                highest(&scores)
            } else {
                lowest(&scores)
            }
        }
        ExpertStrategy::Ambiguous => {
            if high() {
                highest(&scores)
            } else {
                closest_to_mean(&scores)
            }
        }
        ExpertStrategy::ChoiceBasedAdaptive => {
            // no previous round counts as "did not go"
            let went_last = obs.history.last().is_some_and(|r| r.dm_action);
            if went_last {
                closest_to_mean(&scores)
            } else {
                highest(&scores)
            }
        }
        ExpertStrategy::PointsBasedAdaptive => {
            if high() {
                closest_to_mean(&scores)
            } else if dm_led_after_every_round(obs.history) {
                highest(&scores)
            } else {
                lowest(&scores)
            }
        }
    }
}

/// True iff after each previous round the DM's cumulative points strictly
/// exceeded the expert's. Vacuously true with no history.
pub fn dm_led_after_every_round(history: &[RoundRecord]) -> bool {
    let mut dm = 0u32;
    let mut expert = 0u32;
    history.iter().all(|r| {
        dm += r.dm_payoff as u32;
        expert += r.expert_payoff as u32;
        dm > expert
    })
}

fn highest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s < scores[best] {
            best = i;
        }
    }
    best
}

fn closest_to_mean(scores: &[f64]) -> usize {
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let mut best = 0;
    let mut best_dist = (scores[0] - mean).abs();
    for (i, &s) in scores.iter().enumerate().skip(1) {
        let d = (s - mean).abs();
        if d < best_dist - SCORE_EPS {
            best = i;
            best_dist = d;
        }
    }
    best
}
