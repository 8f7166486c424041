use std::sync::Arc;

use persuasion_core::pipeline::{encode, evaluate_model, fit, generate, AgentKind, Backends, GenerateSpec};
use persuasion_core::predictor::{EncodedGame, FeatureEncoder, N_FEATURES};
use persuasion_core::{seeded, synth_corpus, Corpus, GameConfig, ModelKind, ScoreOracle, StubOracle, TrainConfig};

fn data(agent: AgentKind, players: usize, seed: u64) -> (Vec<EncodedGame>, Corpus) {
    let corpus = synth_corpus(300, &mut seeded(9), 0.5);
    let oracle: Arc<dyn ScoreOracle> = Arc::new(StubOracle::from_corpus(&corpus, 0.0));
    let b = Backends { oracle: Some(oracle.clone()), chat: None };
    let spec = GenerateSpec { agent, n_players: players, seed, ..GenerateSpec::default() };
    let ds = generate(&spec, &corpus, &GameConfig::default(), &b).unwrap();
    let enc = FeatureEncoder::new(&corpus, oracle);
    (encode(&enc, &ds).unwrap(), corpus)
}

#[test]
fn always_go_learned_with_high_confidence() {
    let (train, _) = data(AgentKind::AlwaysGo, 128, 1);
    let (test, _) = data(AgentKind::AlwaysGo, 8, 2);
    let (model, _) = fit(ModelKind::Lstm, &train, &TrainConfig::default(), 3).unwrap();
    let preds = model.predict(&test);
    let min = preds.iter().flatten().cloned().fold(1.0, f64::min);
    assert!(min > 0.9, "lowest held-out go probability {min}");
}

#[test]
fn grudger_history_beats_baseline() {
    let (train, _) = data(AgentKind::Grudger, 128, 1);
    let (test, _) = data(AgentKind::Grudger, 16, 2);
    let config = TrainConfig::default();
    let (lstm, _) = fit(ModelKind::Lstm, &train, &config, 3).unwrap();
    let (base, _) = fit(ModelKind::Baseline, &train, &config, 3).unwrap();
    let a = evaluate_model(&lstm, &test, 10, 0).unwrap().overall_accuracy;
    let b = evaluate_model(&base, &test, 10, 0).unwrap().overall_accuracy;
    assert!(a > b, "lstm {a} vs baseline {b}");
}

#[test]
fn threshold_agent_is_separable_for_the_baseline() {
    let (train, _) = data(AgentKind::Threshold, 32, 1);
    let (test, _) = data(AgentKind::Threshold, 8, 2);
    let (base, _) = fit(ModelKind::Baseline, &train, &TrainConfig::default(), 0).unwrap();
    let acc = evaluate_model(&base, &test, 10, 0).unwrap().overall_accuracy;
    assert!(acc > 0.95, "{acc}");
}

#[test]
fn baseline_predictions_ignore_round_order() {
    let (train, _) = data(AgentKind::Threshold, 8, 1);
    let (base, _) = fit(ModelKind::Baseline, &train, &TrainConfig::default(), 0).unwrap();
    let g = &train[0];
    let p = base.predict(std::slice::from_ref(g)).remove(0);
    // reverse the rounds, keeping each row intact
    let mut rev = g.clone();
    rev.x = (0..g.len()).rev().flat_map(|t| g.row(t).to_vec()).collect();
    rev.y.reverse();
    let q = base.predict(std::slice::from_ref(&rev)).remove(0);
    for t in 0..g.len() {
        assert_eq!(p[t], q[g.len() - 1 - t]);
    }
    assert_eq!(rev.x.len(), g.len() * N_FEATURES);
}

#[test]
fn training_is_bit_stable() {
    let (train, _) = data(AgentKind::Grudger, 4, 1);
    let config = TrainConfig { epochs: 2, hidden: 8, ..TrainConfig::default() };
    let (a, _) = fit(ModelKind::Lstm, &train, &config, 7).unwrap();
    let (b, _) = fit(ModelKind::Lstm, &train, &config, 7).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
}
