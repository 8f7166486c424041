//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use persuasion_core::pipeline::{encode, generate, AgentKind, Backends, GenerateSpec};
use persuasion_core::predictor::{EncodedGame, FeatureEncoder};
use persuasion_core::{seeded, synth_corpus, Corpus, GameConfig, ScoreOracle, StubOracle};

pub fn corpus(n_hotels: usize) -> Corpus {
    synth_corpus(n_hotels, &mut seeded(1), 0.5)
}

/// Encoded grudger games of `players` players over `corpus`.
pub fn encoded_games(corpus: &Corpus, players: usize) -> Vec<EncodedGame> {
    let oracle: Arc<dyn ScoreOracle> = Arc::new(StubOracle::from_corpus(corpus, 0.0));
    let spec = GenerateSpec { agent: AgentKind::Grudger, n_players: players, seed: 2, ..GenerateSpec::default() };
    let backends = Backends { oracle: Some(oracle.clone()), chat: None };
    let ds = generate(&spec, corpus, &GameConfig::default(), &backends).expect("scripted generation");
    encode(&FeatureEncoder::new(corpus, oracle), &ds).expect("encodable dataset")
}
