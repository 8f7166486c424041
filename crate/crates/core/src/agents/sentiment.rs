//! History-independent sentiment baseline: sample a score from the oracle's
//! distribution for the shown review and go iff it clears the threshold.

use std::sync::Arc;

use rand::Rng;

use super::{Action, AgentError, DmAgent, DmObservation};
use crate::game::DmKind;
use crate::oracle::{review_key, ScoreDistribution, ScoreOracle};
use crate::rng::{seeded, SimRng};

/// Samples a bucket by inverse CDF, then a score uniformly inside it.
pub fn sample_score(dist: &ScoreDistribution, rng: &mut SimRng) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut bucket = ScoreDistribution::BUCKETS;
    for k in 1..=ScoreDistribution::BUCKETS {
        acc += dist.mass(k);
        if u < acc {
            bucket = k;
            break;
        }
    }
    // skip buckets with no mass if rounding left u past the last non-zero one
    while bucket > 1 && dist.mass(bucket) == 0.0 {
        bucket -= 1;
    }
    bucket as f64 + rng.random::<f64>()
}

pub fn sentiment_decide(dist: &ScoreDistribution, tau: f64, rng: &mut SimRng) -> Action {
    Action::from(sample_score(dist, rng) >= tau)
}

/// Decision stream for one review under a per-review seed.
pub fn per_review_rng(seed: u64, positive: &str, negative: &str) -> SimRng {
    let key = review_key(positive, negative);
    seeded(seed ^ u64::from_str_radix(&key[..16], 16).unwrap_or(0))
}

pub struct SentimentDm {
    oracle: Arc<dyn ScoreOracle>,
    tau: f64,
    per_review_seed: Option<u64>,
}

impl SentimentDm {
    pub fn new(oracle: Arc<dyn ScoreOracle>, tau: f64) -> Self {
        SentimentDm { oracle, tau, per_review_seed: None }
    }

    /// Draws each decision from a stream keyed by the review text instead of
    /// the shared game stream, so a review's action does not depend on when
    /// it is shown.
    pub fn with_per_review_seed(mut self, seed: u64) -> Self {
        self.per_review_seed = Some(seed);
        self
    }
}

impl DmAgent for SentimentDm {
    fn kind(&self) -> DmKind {
        DmKind::SentimentBaseline
    }

    fn decide(&mut self, obs: &DmObservation, rng: &mut SimRng) -> Result<Action, AgentError> {
        let (pos, neg) = (&obs.shown_positive_text, &obs.shown_negative_text);
        let dist = self.oracle.distribution(pos, neg)?;
        Ok(match self.per_review_seed {
            Some(seed) => sentiment_decide(&dist, self.tau, &mut per_review_rng(seed, pos, neg)),
            None => sentiment_decide(&dist, self.tau, rng),
        })
    }
}
