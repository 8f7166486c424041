//! Experiment drivers: dataset generation, model fitting and evaluation,
//! training-size sweeps and the global-vs-local comparison.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::scripted::{AlwaysGo, Grudger, NeverGo, NoisyThreshold};
use crate::agents::{ChatBackend, DmAgent, LlmDm, Persona, SentimentDm};
use crate::corpus::Corpus;
use crate::dataset::{dm_id, DatasetError, DatasetWriter, InteractionDataset, Provenance};
use crate::eval::{decisions, evaluate, EvalError, EvalReport};
use crate::experts::ExpertStrategy;
use crate::game::{play_full_interaction, DmKind, DmMeta, GameConfig, GameError};
use crate::oracle::ScoreOracle;
use crate::predictor::{
    train_baseline, train_lstm, EncodedGame, EpochLog, FeatureEncoder, FeatureError, PredictorModel, TrainConfig,
    TrainError,
};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("agent `{0}` needs {1}")]
    MissingBackend(AgentKind, &'static str),
    #[error("no training games for expert {0}")]
    EmptyLocal(ExpertStrategy),
    #[error("requested {needed} training players but only {available} are available")]
    InsufficientData { needed: usize, available: usize },
    #[error("generation worker panicked")]
    Worker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    AlwaysGo,
    NeverGo,
    Grudger,
    Threshold,
    SentimentBaseline,
    Llm,
}

impl AgentKind {
    pub const ALL: [AgentKind; 6] = [
        AgentKind::AlwaysGo,
        AgentKind::NeverGo,
        AgentKind::Grudger,
        AgentKind::Threshold,
        AgentKind::SentimentBaseline,
        AgentKind::Llm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::AlwaysGo => "always_go",
            AgentKind::NeverGo => "never_go",
            AgentKind::Grudger => "grudger",
            AgentKind::Threshold => "threshold",
            AgentKind::SentimentBaseline => "sentiment_baseline",
            AgentKind::Llm => "llm",
        }
    }

    pub fn dm_kind(self) -> DmKind {
        match self {
            AgentKind::SentimentBaseline => DmKind::SentimentBaseline,
            AgentKind::Llm => DmKind::Llm,
            _ => DmKind::Scripted,
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown agent kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSpec {
    pub agent: AgentKind,
    pub n_players: usize,
    pub personas: bool,
    pub seed: u64,
    /// Go threshold on the expected score for the threshold agent.
    pub threshold: f64,
    /// Decision flip probability for the threshold agent.
    pub noise: f64,
    /// Players generated concurrently; output order is by player index
    /// regardless.
    pub workers: usize,
}

impl Default for GenerateSpec {
    fn default() -> Self {
        GenerateSpec {
            agent: AgentKind::Grudger,
            n_players: 8,
            personas: false,
            seed: 0,
            threshold: 8.0,
            noise: 0.0,
            workers: 1,
        }
    }
}

/// What an agent may need besides the game itself.
#[derive(Clone, Default)]
pub struct Backends {
    pub oracle: Option<Arc<dyn ScoreOracle>>,
    pub chat: Option<Arc<dyn ChatBackend>>,
}

impl GenerateSpec {
    pub fn provenance(&self, backends: &Backends) -> Provenance {
        match self.agent {
            AgentKind::SentimentBaseline => Provenance::SentimentBaseline,
            AgentKind::Llm => Provenance::Llm {
                model: backends.chat.as_ref().map(|c| c.model_name().to_string()).unwrap_or_default(),
            },
            _ => Provenance::Scripted,
        }
    }

    fn make_agent(&self, backends: &Backends, player_index: usize, persona: Option<Persona>, tau: f64) -> Result<Box<dyn DmAgent>, PipelineError> {
        let oracle = || backends.oracle.clone().ok_or(PipelineError::MissingBackend(self.agent, "a score oracle"));
        Ok(match self.agent {
            AgentKind::AlwaysGo => Box::new(AlwaysGo),
            AgentKind::NeverGo => Box::new(NeverGo),
            AgentKind::Grudger => Box::new(Grudger::default()),
            AgentKind::Threshold => Box::new(NoisyThreshold::new(oracle()?, self.threshold, self.noise)),
            // keyed per review so an action never depends on when the review is shown
            AgentKind::SentimentBaseline => {
                Box::new(SentimentDm::new(oracle()?, tau).with_per_review_seed(sentiment_seed(self.seed, player_index)))
            }
            AgentKind::Llm => {
                let chat = backends.chat.clone().ok_or(PipelineError::MissingBackend(self.agent, "a chat backend"))?;
                Box::new(LlmDm::new(chat, persona))
            }
        })
    }

    pub fn meta(&self, player_index: usize, provenance: &Provenance) -> DmMeta {
        DmMeta {
            dm_id: dm_id(provenance.dm_prefix(), player_index),
            dm_kind: self.agent.dm_kind(),
            persona_id: self.personas.then(|| Persona::round_robin(player_index)),
        }
    }

    /// Plays one full interaction for `player_index` on its own seed stream.
    pub fn play_player(
        &self,
        player_index: usize,
        corpus: &Corpus,
        config: &GameConfig,
        backends: &Backends,
    ) -> Result<Vec<crate::game::GameRecord>, PipelineError> {
        let provenance = self.provenance(backends);
        let meta = self.meta(player_index, &provenance);
        let mut agent = self.make_agent(backends, player_index, meta.persona_id, corpus.tau)?;
        let mut rng = stream(self.seed, player_index as u64);
        Ok(play_full_interaction(agent.as_mut(), &config.expert_order, &corpus.hotels, config, &meta, &mut rng)?)
    }
}

/// Per-review seed of a sentiment-baseline player.
pub fn sentiment_seed(seed: u64, player_index: usize) -> u64 {
    derive_seed(derive_seed(seed, 1 << 32), player_index as u64)
}

fn play_range(
    spec: &GenerateSpec,
    range: std::ops::Range<usize>,
    corpus: &Corpus,
    config: &GameConfig,
    backends: &Backends,
    mut sink: impl FnMut(Vec<crate::game::GameRecord>) -> Result<(), PipelineError>,
) -> Result<(), PipelineError> {
    let workers = spec.workers.max(1);
    let players: Vec<usize> = range.collect();
    for chunk in players.chunks(workers) {
        let results: Vec<Result<Vec<_>, PipelineError>> = if workers == 1 {
            chunk.iter().map(|&p| spec.play_player(p, corpus, config, backends)).collect()
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&p| s.spawn(move || spec.play_player(p, corpus, config, backends)))
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap_or(Err(PipelineError::Worker))).collect()
            })
        };
        for r in results {
            sink(r?)?;
        }
    }
    Ok(())
}

/// Generates the whole dataset in memory.
pub fn generate(
    spec: &GenerateSpec,
    corpus: &Corpus,
    config: &GameConfig,
    backends: &Backends,
) -> Result<InteractionDataset, PipelineError> {
    config.validate()?;
    let mut ds = InteractionDataset::new(spec.provenance(backends));
    play_range(spec, 0..spec.n_players, corpus, config, backends, |games| {
        ds.games.extend(games);
        Ok(())
    })?;
    Ok(ds)
}

/// Generates into `path`, one line per game, appending each player's games
/// in a single write. With `resume`, players already in the file are kept
/// and generation continues from the next player index; since player `i`
/// always plays on seed stream `i`, the result equals an uninterrupted run.
pub fn generate_to_file(
    spec: &GenerateSpec,
    corpus: &Corpus,
    config: &GameConfig,
    backends: &Backends,
    path: &Path,
    resume: bool,
) -> Result<usize, PipelineError> {
    config.validate()?;
    let provenance = spec.provenance(backends);
    let (mut writer, start) = if resume && path.exists() {
        let writer = DatasetWriter::open_append(path)?;
        let done = InteractionDataset::load(path)?.players().len();
        info!("resuming {} after {done} players", path.display());
        (writer, done)
    } else {
        (DatasetWriter::create(path, &provenance)?, 0)
    };
    let mut written = 0;
    play_range(spec, start..spec.n_players.max(start), corpus, config, backends, |games| {
        writer.append(&games)?;
        written += 1;
        Ok(())
    })?;
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lstm,
    Baseline,
}

pub fn fit(kind: ModelKind, train: &[EncodedGame], config: &TrainConfig, seed: u64) -> Result<(PredictorModel, Vec<EpochLog>), PipelineError> {
    Ok(match kind {
        ModelKind::Lstm => {
            let (m, log) = train_lstm(train, config, seed)?;
            (PredictorModel::Lstm(m), log)
        }
        ModelKind::Baseline => (PredictorModel::Baseline(train_baseline(train, config)?), Vec::new()),
    })
}

pub fn evaluate_model(model: &PredictorModel, test: &[EncodedGame], n_resamples: usize, seed: u64) -> Result<EvalReport, PipelineError> {
    let preds = model.predict(test);
    Ok(evaluate(&decisions(test, &preds)?, n_resamples, seed)?)
}

pub fn encode(encoder: &FeatureEncoder, ds: &InteractionDataset) -> Result<Vec<EncodedGame>, PipelineError> {
    Ok(encoder.encode_all(ds)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub source: String,
    pub train_players: usize,
    pub model: ModelKind,
    pub accuracy: f64,
    pub ci95: Option<(f64, f64)>,
    pub ece: f64,
    pub train_decisions: usize,
}

/// Training-size sweep: for each size, draws that many players from each
/// source pool, trains, and evaluates on `test`. Duplicate sizes are
/// dropped with a warning.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    sizes: &[usize],
    sources: &[(String, InteractionDataset)],
    test: &InteractionDataset,
    encoder: &FeatureEncoder,
    model: ModelKind,
    config: &TrainConfig,
    n_resamples: usize,
    seed: u64,
) -> Result<Vec<SweepRow>, PipelineError> {
    let mut seen = BTreeSet::new();
    let mut uniq = Vec::new();
    for &s in sizes {
        if seen.insert(s) {
            uniq.push(s);
        } else {
            warn!("duplicate training size {s} ignored");
        }
    }
    let test_enc = encode(encoder, test)?;
    let mut rows = Vec::new();
    for (name, pool) in sources {
        let available = pool.players().len();
        if let Some(&too_big) = uniq.iter().find(|&&s| s > available) {
            return Err(PipelineError::InsufficientData { needed: too_big, available });
        }
        for (i, &size) in uniq.iter().enumerate() {
            let run_seed = derive_seed(seed, i as u64);
            let subset = pool.subset_players(size, &mut stream(run_seed, 0))?;
            let train_enc = encode(encoder, &subset)?;
            let (m, _) = fit(model, &train_enc, config, run_seed)?;
            let report = evaluate_model(&m, &test_enc, n_resamples, run_seed)?;
            info!("{name} size {size}: accuracy {:.4}", report.overall_accuracy);
            rows.push(SweepRow {
                source: name.clone(),
                train_players: size,
                model,
                accuracy: report.overall_accuracy,
                ci95: report.ci95,
                ece: report.ece,
                train_decisions: subset.n_decisions(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalLocal {
    pub expert: ExpertStrategy,
    pub global: EvalReport,
    pub local: EvalReport,
}

/// Trains on all experts (global) and on the target expert only (local);
/// both are evaluated on the target expert's test games.
pub fn global_vs_local(
    expert: ExpertStrategy,
    train: &[EncodedGame],
    test: &[EncodedGame],
    model: ModelKind,
    config: &TrainConfig,
    n_resamples: usize,
    seed: u64,
) -> Result<GlobalLocal, PipelineError> {
    let local_train: Vec<EncodedGame> = train.iter().filter(|g| g.expert == expert).cloned().collect();
    if local_train.is_empty() {
        return Err(PipelineError::EmptyLocal(expert));
    }
    let target_test: Vec<EncodedGame> = test.iter().filter(|g| g.expert == expert).cloned().collect();
    if target_test.is_empty() {
        return Err(EvalError::ExpertAbsent(expert).into());
    }
    let (g, _) = fit(model, train, config, seed)?;
    let (l, _) = fit(model, &local_train, config, seed)?;
    Ok(GlobalLocal {
        expert,
        global: evaluate_model(&g, &target_test, n_resamples, seed)?,
        local: evaluate_model(&l, &target_test, n_resamples, seed)?,
    })
}
