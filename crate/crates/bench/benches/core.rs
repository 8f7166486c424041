use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use persuasion_bench::{corpus, encoded_games};
use persuasion_core::experts::ExpertObservation;
use persuasion_core::pipeline::{generate, AgentKind, Backends, GenerateSpec};
use persuasion_core::predictor::lstm::{Lstm, LstmShape};
use persuasion_core::predictor::{EncodedGame, N_FEATURES};
use persuasion_core::{seeded, select_review, ExpertStrategy, GameConfig};

fn experts(c: &mut Criterion) {
    let corpus = corpus(200);
    let mut group = c.benchmark_group("select_review");
    for s in ExpertStrategy::ALL {
        group.bench_function(s.as_str(), |b| {
            b.iter(|| {
                corpus
                    .hotels
                    .iter()
                    .map(|h| select_review(s, &ExpertObservation::new(h, &[]), corpus.tau))
                    .sum::<usize>()
            })
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let corpus = corpus(1068);
    let spec = GenerateSpec { agent: AgentKind::AlwaysGo, n_players: 10, ..GenerateSpec::default() };
    c.bench_function("generate/10_players", |b| {
        b.iter(|| generate(&spec, &corpus, &GameConfig::default(), &Backends::default()).unwrap())
    });
}

fn lstm(c: &mut Criterion) {
    let games = encoded_games(&corpus(300), 8);
    let batch: Vec<&EncodedGame> = games.iter().take(32).collect();
    let mut group = c.benchmark_group("lstm");
    for hidden in [16, 64] {
        let shape = LstmShape { input: N_FEATURES, hidden, layers: 2 };
        let model = Lstm::init(shape, &mut seeded(3)).unwrap();
        group.bench_with_input(BenchmarkId::new("forward_batch32", hidden), &model, |b, m| b.iter(|| m.predict_batch(&batch)));
        group.bench_with_input(BenchmarkId::new("gradient_batch32", hidden), &model, |b, m| {
            b.iter(|| m.loss_and_gradient(&batch))
        });
    }
    group.finish();
}

criterion_group!(benches, experts, simulation, lstm);
criterion_main!(benches);
