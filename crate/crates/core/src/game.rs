//! The repeated persuasion game.
//!
//! A game is `T` rounds between one expert and one decision-maker (DM). Each
//! round the expert sees all `R` scored reviews of a hotel and reveals one
//! review's text; the DM goes (`a = 1`) or stays home (`a = 0`). The expert
//! earns `u = a`, the DM earns `v = 1` iff `a` matches the hotel quality
//! `q = [mean score >= tau]`.
//!
//! A stage is up to two games against the same expert: the second game is
//! played only if the DM missed the stage target in the first. A full
//! interaction is six stages, one per expert.

use std::sync::Arc;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    Action, AgentError, DmAgent, DmObservation, GameContext, Persona, PreviousGame, RoundFeedback,
    StageContext,
};
use crate::corpus::Corpus;
use crate::experts::{select_review, ExpertObservation, ExpertStrategy};
use crate::rng::SimRng;

pub const STAGES: usize = 6;
pub const MAX_GAMES_PER_STAGE: u32 = 2;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("invalid review: {0}")]
    InvalidReview(String),
    #[error("invalid hotel `{hotel_id}`: {reason}")]
    InvalidHotel { hotel_id: String, reason: String },
    #[error("invalid game config: {0}")]
    InvalidConfig(String),
    #[error("corpus has {available} hotels but a game needs {needed} distinct hotels")]
    CorpusTooSmall { available: usize, needed: usize },
    #[error("a game needs exactly {expected} hotels, got {got}")]
    WrongHotelCount { expected: usize, got: usize },
    #[error("an interaction needs exactly {STAGES} experts, got {0}")]
    WrongExpertCount(usize),
    #[error("invalid game record: {0}")]
    InvalidRecord(String),
    #[error("interaction already finished")]
    Finished,
    #[error("decision-maker `{dm_id}` failed at stage {stage_index}, game {game_index}, round {round_index}: {source}")]
    Agent {
        dm_id: String,
        stage_index: u32,
        game_index: u32,
        round_index: u32,
        #[source]
        source: AgentError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredReview {
    pub positive_text: String,
    pub negative_text: String,
    pub score: f64,
}

impl ScoredReview {
    pub fn new(
        positive_text: impl Into<String>,
        negative_text: impl Into<String>,
        score: f64,
    ) -> Result<Self, GameError> {
        let review = ScoredReview {
            positive_text: positive_text.into(),
            negative_text: negative_text.into(),
            score,
        };
        review.validate()?;
        Ok(review)
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if !(1.0..=10.0).contains(&self.score) {
            return Err(GameError::InvalidReview(format!(
                "score {} outside [1, 10]",
                self.score
            )));
        }
        if self.positive_text.is_empty() && self.negative_text.is_empty() {
            return Err(GameError::InvalidReview("both texts are empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotel {
    pub hotel_id: String,
    pub reviews: Vec<ScoredReview>,
}

impl Hotel {
    pub fn mean_score(&self) -> f64 {
        self.reviews.iter().map(|r| r.score).sum::<f64>() / self.reviews.len() as f64
    }

    pub fn validate(&self, reviews_per_hotel: usize) -> Result<(), GameError> {
        if self.reviews.len() != reviews_per_hotel {
            return Err(GameError::InvalidHotel {
                hotel_id: self.hotel_id.clone(),
                reason: format!(
                    "has {} reviews, expected {reviews_per_hotel}",
                    self.reviews.len()
                ),
            });
        }
        for (i, r) in self.reviews.iter().enumerate() {
            r.validate().map_err(|e| GameError::InvalidHotel {
                hotel_id: self.hotel_id.clone(),
                reason: format!("review {i}: {e}"),
            })?;
        }
        Ok(())
    }
}

/// Slack for comparisons of decimal scores, whose float sums are inexact.
pub const SCORE_EPS: f64 = 1e-9;

/// `q = 1` iff the mean review score is at least `tau`.
pub fn hotel_quality(hotel: &Hotel, tau: f64) -> bool {
    hotel.mean_score() >= tau - SCORE_EPS
}

/// Returns `(dm_payoff, expert_payoff)` = `(I(a = q), a)`.
pub fn round_payoffs(action: bool, quality: bool) -> (bool, bool) {
    (action == quality, action)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    pub rounds: usize,
    pub reviews_per_hotel: usize,
    pub quality_threshold: f64,
    /// Points needed to complete each stage in a single game.
    pub stage_targets: Vec<u32>,
    pub expert_order: Vec<ExpertStrategy>,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            rounds: 10,
            reviews_per_hotel: 7,
            quality_threshold: 8.0,
            stage_targets: vec![10; STAGES],
            expert_order: ExpertStrategy::ALL.to_vec(),
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), GameError> {
        if self.rounds == 0 {
            return Err(GameError::InvalidConfig("rounds must be at least 1".into()));
        }
        if self.reviews_per_hotel == 0 {
            return Err(GameError::InvalidConfig("reviews_per_hotel must be at least 1".into()));
        }
        if !self.quality_threshold.is_finite() {
            return Err(GameError::InvalidConfig("quality_threshold must be finite".into()));
        }
        if self.stage_targets.len() != STAGES {
            return Err(GameError::InvalidConfig(format!(
                "stage_targets needs {STAGES} entries, got {}",
                self.stage_targets.len()
            )));
        }
        if let Some(t) = self.stage_targets.iter().find(|&&t| t as usize > self.rounds) {
            return Err(GameError::InvalidConfig(format!(
                "stage target {t} exceeds rounds per game {}",
                self.rounds
            )));
        }
        if self.expert_order.len() != STAGES {
            return Err(GameError::WrongExpertCount(self.expert_order.len()));
        }
        Ok(())
    }

    pub fn stage_target(&self, stage_index: u32) -> u32 {
        self.stage_targets[stage_index as usize - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DmKind {
    Human,
    Llm,
    SentimentBaseline,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: u32,
    pub hotel_id: String,
    pub shown_review_index: usize,
    pub hotel_quality: bool,
    pub dm_action: bool,
    pub dm_payoff: bool,
    pub expert_payoff: bool,
}

impl RoundRecord {
    pub fn new(
        round_index: u32,
        hotel_id: String,
        shown_review_index: usize,
        hotel_quality: bool,
        dm_action: bool,
    ) -> Self {
        let (dm_payoff, expert_payoff) = round_payoffs(dm_action, hotel_quality);
        RoundRecord {
            round_index,
            hotel_id,
            shown_review_index,
            hotel_quality,
            dm_action,
            dm_payoff,
            expert_payoff,
        }
    }

    pub fn feedback(&self) -> RoundFeedback {
        RoundFeedback {
            action: Action::from(self.dm_action),
            quality: self.hotel_quality,
            payoff: self.dm_payoff,
        }
    }
}

/// Identity of the decision-maker as recorded on every game.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DmMeta {
    pub dm_id: String,
    pub dm_kind: DmKind,
    pub persona_id: Option<Persona>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub dm_id: String,
    pub dm_kind: DmKind,
    pub persona_id: Option<Persona>,
    pub expert_strategy: ExpertStrategy,
    pub stage_index: u32,
    pub game_index: u32,
    pub rounds: Vec<RoundRecord>,
    pub cumulative_dm_points: u32,
}

impl GameRecord {
    /// Checks the per-game invariants. Cross-game rules (uniqueness, the
    /// second-game rule) are checked at the dataset level.
    pub fn validate(&self) -> Result<(), GameError> {
        let bad = |msg: String| {
            Err(GameError::InvalidRecord(format!(
                "{} stage {} game {}: {msg}",
                self.dm_id, self.stage_index, self.game_index
            )))
        };
        if !(1..=STAGES as u32).contains(&self.stage_index) {
            return bad(format!("stage_index {} outside 1..={STAGES}", self.stage_index));
        }
        if !(1..=MAX_GAMES_PER_STAGE).contains(&self.game_index) {
            return bad(format!("game_index {} outside 1..=2", self.game_index));
        }
        if self.rounds.is_empty() {
            return bad("no rounds".into());
        }
        for (i, r) in self.rounds.iter().enumerate() {
            if r.round_index as usize != i + 1 {
                return bad(format!("round {} has round_index {}", i + 1, r.round_index));
            }
            if r.dm_payoff != (r.dm_action == r.hotel_quality) {
                return bad(format!("round {}: dm_payoff != I(a = q)", i + 1));
            }
            if r.expert_payoff != r.dm_action {
                return bad(format!("round {}: expert_payoff != a", i + 1));
            }
        }
        let points = self.rounds.iter().filter(|r| r.dm_payoff).count() as u32;
        if points != self.cumulative_dm_points {
            return bad(format!(
                "cumulative_dm_points {} but rounds sum to {points}",
                self.cumulative_dm_points
            ));
        }
        Ok(())
    }

    pub fn expert_points(&self) -> u32 {
        self.rounds.iter().filter(|r| r.expert_payoff).count() as u32
    }
}

/// Display pseudonym of the expert met in each stage. The mapping to
/// strategies stays server-side.
pub const EXPERT_NAMES: [&str; STAGES] = ["David", "Sarah", "Michael", "Rachel", "Daniel", "Noa"];

pub fn stage_context(stage_index: u32, config: &GameConfig) -> StageContext {
    StageContext {
        stage_index,
        expert_display_name: EXPERT_NAMES[(stage_index as usize - 1) % STAGES].to_string(),
        points_target: config.stage_target(stage_index),
        rounds: config.rounds as u32,
    }
}

/// Whether the stage continues with another game after `game_index`.
pub fn stage_needs_another_game(game_index: u32, points: u32, target: u32) -> bool {
    game_index < MAX_GAMES_PER_STAGE && points < target
}

/// Draws `rounds` distinct hotels uniformly at random.
pub fn sample_game_hotels(
    corpus: &[Hotel],
    rounds: usize,
    rng: &mut SimRng,
) -> Result<Vec<Hotel>, GameError> {
    if corpus.len() < rounds {
        return Err(GameError::CorpusTooSmall { available: corpus.len(), needed: rounds });
    }
    Ok(sample(rng, corpus.len(), rounds)
        .into_iter()
        .map(|i| corpus[i].clone())
        .collect())
}

/// One game in progress. Owns its hotels so it can outlive the corpus borrow
/// (live sessions keep one of these between HTTP requests).
#[derive(Debug, Clone)]
pub struct GameRun {
    expert: ExpertStrategy,
    hotels: Vec<Hotel>,
    tau: f64,
    rounds: Vec<RoundRecord>,
}

impl GameRun {
    pub fn new(expert: ExpertStrategy, hotels: Vec<Hotel>, tau: f64) -> Self {
        GameRun { expert, hotels, tau, rounds: Vec::new() }
    }

    pub fn expert(&self) -> ExpertStrategy {
        self.expert
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn is_over(&self) -> bool {
        self.rounds.len() == self.hotels.len()
    }

    pub fn dm_points(&self) -> u32 {
        self.rounds.iter().filter(|r| r.dm_payoff).count() as u32
    }

    /// The hotel of the current round and the review index the expert picks.
    pub fn current_selection(&self) -> Option<(&Hotel, usize)> {
        let hotel = self.hotels.get(self.rounds.len())?;
        let obs = ExpertObservation::new(hotel, &self.rounds);
        Some((hotel, select_review(self.expert, &obs, self.tau)))
    }

    pub fn observation(&self, stage: &StageContext, game_index: u32) -> Option<DmObservation> {
        let (hotel, idx) = self.current_selection()?;
        let review = &hotel.reviews[idx];
        Some(DmObservation {
            shown_positive_text: review.positive_text.clone(),
            shown_negative_text: review.negative_text.clone(),
            round_index: self.rounds.len() as u32 + 1,
            cumulative_points: self.dm_points(),
            last_round_feedback: self.rounds.last().map(RoundRecord::feedback),
            expert_display_name: stage.expert_display_name.clone(),
            stage_index: stage.stage_index,
            game_index,
        })
    }

    /// Hidden quality of the current hotel. Only the quality-oracle test agent
    /// is ever handed this before acting.
    pub fn current_quality(&self) -> Option<bool> {
        self.hotels.get(self.rounds.len()).map(|h| hotel_quality(h, self.tau))
    }

    pub fn resolve(&mut self, action: Action) -> Result<RoundRecord, GameError> {
        let (hotel, idx) = self.current_selection().ok_or(GameError::Finished)?;
        let record = RoundRecord::new(
            self.rounds.len() as u32 + 1,
            hotel.hotel_id.clone(),
            idx,
            hotel_quality(hotel, self.tau),
            action.is_go(),
        );
        self.rounds.push(record.clone());
        Ok(record)
    }

    pub fn into_record(self, meta: &DmMeta, stage_index: u32, game_index: u32) -> GameRecord {
        let cumulative_dm_points = self.dm_points();
        GameRecord {
            dm_id: meta.dm_id.clone(),
            dm_kind: meta.dm_kind,
            persona_id: meta.persona_id,
            expert_strategy: self.expert,
            stage_index,
            game_index,
            rounds: self.rounds,
            cumulative_dm_points,
        }
    }
}

/// Where a game sits in the interaction.
#[derive(Debug, Clone, Copy)]
pub struct GameSetup<'a> {
    pub meta: &'a DmMeta,
    pub stage: &'a StageContext,
    pub game: &'a GameContext,
}

pub fn play_game(
    expert: ExpertStrategy,
    dm: &mut dyn DmAgent,
    hotels: &[Hotel],
    config: &GameConfig,
    setup: GameSetup<'_>,
    rng: &mut SimRng,
) -> Result<GameRecord, GameError> {
    if hotels.len() != config.rounds {
        return Err(GameError::WrongHotelCount { expected: config.rounds, got: hotels.len() });
    }
    let mut run = GameRun::new(expert, hotels.to_vec(), config.quality_threshold);
    while let Some(obs) = run.observation(setup.stage, setup.game.game_index) {
        if let Some(q) = run.current_quality() {
            dm.observe_hidden_quality(q);
        }
        let action = dm.decide(&obs, rng).map_err(|source| GameError::Agent {
            dm_id: setup.meta.dm_id.clone(),
            stage_index: setup.stage.stage_index,
            game_index: setup.game.game_index,
            round_index: obs.round_index,
            source,
        })?;
        run.resolve(action)?;
    }
    Ok(run.into_record(setup.meta, setup.stage.stage_index, setup.game.game_index))
}

pub fn play_stage(
    expert: ExpertStrategy,
    dm: &mut dyn DmAgent,
    corpus: &[Hotel],
    config: &GameConfig,
    meta: &DmMeta,
    stage_index: u32,
    rng: &mut SimRng,
) -> Result<Vec<GameRecord>, GameError> {
    let stage = stage_context(stage_index, config);
    dm.begin_stage(&stage);
    let mut games = Vec::with_capacity(MAX_GAMES_PER_STAGE as usize);
    let mut previous_game = None;
    for game_index in 1..=MAX_GAMES_PER_STAGE {
        let hotels = sample_game_hotels(corpus, config.rounds, rng)?;
        let game = GameContext { stage_index, game_index, previous_game: previous_game.take() };
        dm.begin_game(&game);
        let record = play_game(
            expert,
            dm,
            &hotels,
            config,
            GameSetup { meta, stage: &stage, game: &game },
            rng,
        )?;
        let points = record.cumulative_dm_points;
        previous_game = Some(PreviousGame {
            points,
            final_feedback: record.rounds.last().map(RoundRecord::feedback),
        });
        games.push(record);
        if !stage_needs_another_game(game_index, points, stage.points_target) {
            break;
        }
    }
    Ok(games)
}

pub fn play_full_interaction(
    dm: &mut dyn DmAgent,
    expert_sequence: &[ExpertStrategy],
    corpus: &[Hotel],
    config: &GameConfig,
    meta: &DmMeta,
    rng: &mut SimRng,
) -> Result<Vec<GameRecord>, GameError> {
    if expert_sequence.len() != STAGES {
        return Err(GameError::WrongExpertCount(expert_sequence.len()));
    }
    let mut games = Vec::new();
    for (i, &expert) in expert_sequence.iter().enumerate() {
        games.extend(play_stage(expert, dm, corpus, config, meta, i as u32 + 1, rng)?);
    }
    Ok(games)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub record: RoundRecord,
    pub game_finished: bool,
    pub stage_finished: bool,
    pub interaction_finished: bool,
}

/// A full six-stage interaction driven one action at a time, for players who
/// act asynchronously (the HTTP play service). Uses the same sampling and
/// stage rules as [`play_full_interaction`], so feeding it an action log
/// with the same seed reproduces the same records.
#[derive(Debug, Clone)]
pub struct Interaction {
    corpus: Arc<Corpus>,
    config: GameConfig,
    meta: DmMeta,
    rng: SimRng,
    stage: StageContext,
    game_index: u32,
    run: GameRun,
    completed: Vec<GameRecord>,
    finished: bool,
}

impl Interaction {
    pub fn new(
        corpus: Arc<Corpus>,
        config: GameConfig,
        meta: DmMeta,
        mut rng: SimRng,
    ) -> Result<Self, GameError> {
        config.validate()?;
        let stage = stage_context(1, &config);
        let hotels = sample_game_hotels(&corpus.hotels, config.rounds, &mut rng)?;
        let run = GameRun::new(config.expert_order[0], hotels, config.quality_threshold);
        Ok(Interaction {
            corpus,
            config,
            meta,
            rng,
            stage,
            game_index: 1,
            run,
            completed: Vec::new(),
            finished: false,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn stage(&self) -> &StageContext {
        &self.stage
    }

    pub fn game_index(&self) -> u32 {
        self.game_index
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn current_points(&self) -> u32 {
        self.run.dm_points()
    }

    pub fn completed_games(&self) -> &[GameRecord] {
        &self.completed
    }

    pub fn observation(&self) -> Option<DmObservation> {
        if self.finished {
            return None;
        }
        self.run.observation(&self.stage, self.game_index)
    }

    pub fn submit(&mut self, action: Action) -> Result<RoundOutcome, GameError> {
        if self.finished {
            return Err(GameError::Finished);
        }
        let record = self.run.resolve(action)?;
        let mut outcome = RoundOutcome {
            record,
            game_finished: false,
            stage_finished: false,
            interaction_finished: false,
        };
        if !self.run.is_over() {
            return Ok(outcome);
        }
        outcome.game_finished = true;
        let stage_index = self.stage.stage_index;
        let finished_game = self.game_index;
        let points = self.run.dm_points();
        let next_hotels =
            if stage_needs_another_game(finished_game, points, self.stage.points_target) {
                self.game_index += 1;
                Some(sample_game_hotels(&self.corpus.hotels, self.config.rounds, &mut self.rng)?)
            } else {
                outcome.stage_finished = true;
                if stage_index as usize == STAGES {
                    self.finished = true;
                    outcome.interaction_finished = true;
                    None
                } else {
                    self.stage = stage_context(stage_index + 1, &self.config);
                    self.game_index = 1;
                    Some(sample_game_hotels(&self.corpus.hotels, self.config.rounds, &mut self.rng)?)
                }
            };
        let next_expert = self.config.expert_order[self.stage.stage_index as usize - 1];
        let next = GameRun::new(
            next_expert,
            next_hotels.unwrap_or_default(),
            self.config.quality_threshold,
        );
        let done = std::mem::replace(&mut self.run, next);
        self.completed.push(done.into_record(&self.meta, stage_index, finished_game));
        Ok(outcome)
    }

    /// Completed game records; all of them once [`is_finished`](Self::is_finished).
    pub fn into_records(self) -> Vec<GameRecord> {
        self.completed
    }
}
