//! Repeated language-based persuasion games.
//!
//! An expert who sees every scored review of a hotel reveals one review per
//! round; a decision-maker (DM) who sees only that text decides whether to go.
//! This crate holds the game engine, the six expert strategies, DM agents,
//! corpora and interaction datasets, the choice predictor, and evaluation.

pub mod agents;
pub mod config;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod experts;
pub mod game;
pub mod manifest;
pub mod oracle;
pub mod pipeline;
pub mod predictor;
pub mod rng;
pub mod session;

pub use agents::{Action, DmAgent, DmObservation, Persona};
pub use config::RunConfig;
pub use corpus::{load_corpus, synth_corpus, Corpus};
pub use dataset::{InteractionDataset, Provenance};
pub use experts::{classify_strategy, select_review, ExpertStrategy, StrategyClass};
pub use game::{
    hotel_quality, play_full_interaction, play_game, play_stage, round_payoffs, DmKind, DmMeta,
    GameConfig, GameRecord, Hotel, RoundRecord, ScoredReview,
};
pub use manifest::RunManifest;
pub use oracle::{expected_score, ScoreDistribution, ScoreOracle, StubOracle};
pub use pipeline::{AgentKind, GenerateSpec, ModelKind};
pub use predictor::{PredictorModel, TrainConfig};
pub use rng::{seeded, SimRng};
pub use session::SessionManager;
