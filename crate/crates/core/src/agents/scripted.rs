//! Rule-based decision-makers for tests and synthetic data.

use std::sync::Arc;

use rand::Rng;

use super::{Action, AgentError, DmAgent, DmObservation, GameContext};
use crate::game::DmKind;
use crate::oracle::{expected_score, ScoreOracle};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysGo;

impl DmAgent for AlwaysGo {
    fn kind(&self) -> DmKind {
        DmKind::Scripted
    }

    fn decide(&mut self, _obs: &DmObservation, _rng: &mut SimRng) -> Result<Action, AgentError> {
        Ok(Action::Go)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NeverGo;

impl DmAgent for NeverGo {
    fn kind(&self) -> DmKind {
        DmKind::Scripted
    }

    fn decide(&mut self, _obs: &DmObservation, _rng: &mut SimRng) -> Result<Action, AgentError> {
        Ok(Action::DontGo)
    }
}

/// Acts on the true hotel quality. Leaks hidden information by construction;
/// only for tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct QualityOracle {
    quality: Option<bool>,
}

impl DmAgent for QualityOracle {
    fn kind(&self) -> DmKind {
        DmKind::Scripted
    }

    fn observe_hidden_quality(&mut self, quality: bool) {
        self.quality = Some(quality);
    }

    fn decide(&mut self, _obs: &DmObservation, _rng: &mut SimRng) -> Result<Action, AgentError> {
        Ok(Action::from(self.quality.take().unwrap_or(false)))
    }
}

/// Goes every round until the first time it went to a bad hotel, then never
/// goes again for the rest of the game.
#[derive(Debug, Clone, Copy, Default)]
pub struct Grudger {
    betrayed: bool,
}

impl DmAgent for Grudger {
    fn kind(&self) -> DmKind {
        DmKind::Scripted
    }

    fn begin_game(&mut self, _game: &GameContext) {
        self.betrayed = false;
    }

    fn decide(&mut self, obs: &DmObservation, _rng: &mut SimRng) -> Result<Action, AgentError> {
        if let Some(fb) = obs.last_round_feedback {
            if fb.action.is_go() && !fb.quality {
                self.betrayed = true;
            }
        }
        Ok(Action::from(!self.betrayed))
    }
}

/// Goes iff the oracle's expected score for the shown review reaches the
/// threshold; flips its decision with probability `noise`.
#[derive(Clone)]
pub struct NoisyThreshold {
    oracle: Arc<dyn ScoreOracle>,
    threshold: f64,
    noise: f64,
}

impl NoisyThreshold {
    pub fn new(oracle: Arc<dyn ScoreOracle>, threshold: f64, noise: f64) -> Self {
        NoisyThreshold { oracle, threshold, noise }
    }
}

impl DmAgent for NoisyThreshold {
    fn kind(&self) -> DmKind {
        DmKind::Scripted
    }

    fn decide(&mut self, obs: &DmObservation, rng: &mut SimRng) -> Result<Action, AgentError> {
        let dist = self
            .oracle
            .distribution(&obs.shown_positive_text, &obs.shown_negative_text)?;
        let mut go = expected_score(&dist) >= self.threshold;
        if self.noise > 0.0 && rng.random::<f64>() < self.noise {
            go = !go;
        }
        Ok(Action::from(go))
    }
}

/// Replays a recorded action log, one action per round. Used to rebuild a
/// live session's records from its log.
#[derive(Debug, Clone)]
pub struct ActionReplay {
    kind: DmKind,
    actions: Vec<Action>,
    next: usize,
}

impl ActionReplay {
    pub fn new(kind: DmKind, actions: Vec<Action>) -> Self {
        ActionReplay { kind, actions, next: 0 }
    }
}

impl DmAgent for ActionReplay {
    fn kind(&self) -> DmKind {
        self.kind
    }

    fn decide(&mut self, obs: &DmObservation, _rng: &mut SimRng) -> Result<Action, AgentError> {
        let a = *self
            .actions
            .get(self.next)
            .ok_or(AgentError::ReplayExhausted(obs.round_index))?;
        self.next += 1;
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::RoundFeedback;
    use crate::rng::seeded;

    fn obs(round: u32, fb: Option<(bool, bool)>) -> DmObservation {
        DmObservation {
            shown_positive_text: "nice".into(),
            shown_negative_text: String::new(),
            round_index: round,
            cumulative_points: 0,
            last_round_feedback: fb.map(|(a, q)| RoundFeedback {
                action: Action::from(a),
                quality: q,
                payoff: a == q,
            }),
            expert_display_name: "David".into(),
            stage_index: 1,
            game_index: 1,
        }
    }

    #[test]
    fn grudger_trace() {
        let mut g = Grudger::default();
        let mut rng = seeded(0);
        // round 1 go; went to a bad hotel; never goes again
        assert_eq!(g.decide(&obs(1, None), &mut rng).unwrap(), Action::Go);
        assert_eq!(g.decide(&obs(2, Some((true, false))), &mut rng).unwrap(), Action::DontGo);
        assert_eq!(g.decide(&obs(3, Some((false, true))), &mut rng).unwrap(), Action::DontGo);
        g.begin_game(&GameContext { stage_index: 1, game_index: 2, previous_game: None });
        assert_eq!(g.decide(&obs(1, None), &mut rng).unwrap(), Action::Go);
    }

    #[test]
    fn grudger_keeps_going_after_good_hotels() {
        let mut g = Grudger::default();
        let mut rng = seeded(0);
        assert_eq!(g.decide(&obs(2, Some((true, true))), &mut rng).unwrap(), Action::Go);
    }

    #[test]
    fn always_go() {
        assert_eq!(AlwaysGo.decide(&obs(1, None), &mut seeded(0)).unwrap(), Action::Go);
        assert_eq!(NeverGo.decide(&obs(1, None), &mut seeded(0)).unwrap(), Action::DontGo);
    }

    #[test]
    fn replay_runs_out() {
        let mut r = ActionReplay::new(DmKind::Human, vec![Action::Go]);
        let mut rng = seeded(0);
        assert_eq!(r.decide(&obs(1, None), &mut rng).unwrap(), Action::Go);
        assert!(matches!(r.decide(&obs(2, None), &mut rng), Err(AgentError::ReplayExhausted(2))));
    }
}
