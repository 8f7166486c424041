use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{bail, Context as _, Result};
use log::{info, warn};
use serde_json::{json, Value};

use persuasion_core::agents::chat::{HttpChatClient, HttpEndpoint, RateLimiter, ReplayCache, ENV_API_KEY, ENV_API_URL, ENV_MODEL};
use persuasion_core::agents::ChatBackend;
use persuasion_core::corpus::read_corpus;
use persuasion_core::dataset::{ingest_human, mix, split_by_player, DatasetWriter, HumanColumns, RELEASED_HUMAN_DECISIONS, RELEASED_HUMAN_PLAYERS};
use persuasion_core::eval::{decisions, evaluate, expert_winning_rates};
use persuasion_core::oracle::{ExtractionMode, HttpScoreModel, LlmScoreOracle, OracleCache};
use persuasion_core::pipeline::{fit, generate_to_file, global_vs_local, sweep, AgentKind, Backends, GenerateSpec};
use persuasion_core::session::{CompletionSink, SessionManager};
use persuasion_core::{synth_corpus, ExpertStrategy, InteractionDataset, PredictorModel, Provenance, ScoreOracle, StubOracle};

use crate::context::Ctx;
use crate::{Cli, Command, CorpusCmd, DatasetCmd, EvalArgs, ExperimentCmd, GenerateArgs, OracleBackend, OracleCmd, PredictArgs, ServeArgs, TrainArgs};

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Corpus(CorpusCmd::Validate { .. }) => "corpus validate",
        Command::Corpus(CorpusCmd::Synth { .. }) => "corpus synth",
        Command::Generate(_) => "generate",
        Command::Dataset(DatasetCmd::Stats { .. }) => "dataset stats",
        Command::Dataset(DatasetCmd::Mix { .. }) => "dataset mix",
        Command::Dataset(DatasetCmd::Split { .. }) => "dataset split",
        Command::Dataset(DatasetCmd::IngestHuman { .. }) => "dataset ingest-human",
        Command::Oracle(OracleCmd::Build { .. }) => "oracle build",
        Command::Train(_) => "train",
        Command::Predict(_) => "predict",
        Command::Eval(_) => "eval",
        Command::Experiment(ExperimentCmd::GlobalVsLocal { .. }) => "experiment global-vs-local",
        Command::Experiment(ExperimentCmd::Sweep { .. }) => "experiment sweep",
        Command::Serve(_) => "serve",
    }
}

pub fn run(cli: Cli) -> Result<()> {
    // a live service without an explicit seed gets unpredictable session ids
    let seed = match (&cli.command, cli.seed) {
        (Command::Serve(_), None) => Some(rand::random()),
        (_, s) => s,
    };
    let mut ctx = Ctx::new(command_name(&cli.command), seed, cli.config.as_deref(), cli.out.clone(), cli.manifest.clone())?;
    match cli.command {
        Command::Corpus(CorpusCmd::Validate { path }) => {
            let corpus = ctx.corpus(&path)?;
            println!("{}", serde_json::to_string_pretty(&corpus.summary())?);
        }
        Command::Corpus(CorpusCmd::Synth { n, high_fraction }) => {
            let out = ctx.require_out()?;
            let corpus = synth_corpus(n, &mut persuasion_core::seeded(ctx.seed), high_fraction);
            corpus.save(&out)?;
            ctx.manifest.output(&out);
            ctx.manifest.detail("summary", corpus.summary());
            // reload so the written file is what gets validated
            read_corpus(File::open(&out)?, &out.display().to_string(), corpus.tau, corpus.reviews_per_hotel)?;
        }
        Command::Generate(args) => generate(&mut ctx, args)?,
        Command::Dataset(cmd) => dataset(&mut ctx, cmd)?,
        Command::Oracle(OracleCmd::Build { corpus, backend, samples }) => {
            let out = ctx.require_out()?;
            let corpus = ctx.corpus(&corpus.corpus)?;
            let oracle: Box<dyn ScoreOracle> = match backend {
                OracleBackend::Stub => Box::new(StubOracle::from_corpus(&corpus, ctx.config.oracle.spread)),
                OracleBackend::Llm => {
                    let url = std::env::var(ENV_API_URL).with_context(|| format!("{ENV_API_URL} is not set"))?;
                    let model = std::env::var(ENV_MODEL).with_context(|| format!("{ENV_MODEL} is not set"))?;
                    let mode = samples.map_or(ExtractionMode::Logprobs, |s| ExtractionMode::Sampling { samples: s });
                    ctx.manifest.detail("llm_model", &model);
                    let endpoint = HttpEndpoint::new(url, std::env::var(ENV_API_KEY).ok());
                    Box::new(LlmScoreOracle::new(HttpScoreModel::new(endpoint, model), mode))
                }
            };
            let cache = OracleCache::build(&corpus, oracle.as_ref())?;
            cache.save(&out)?;
            ctx.manifest.output(&out);
            ctx.manifest.detail("entries", cache.len());
        }
        Command::Train(args) => train(&mut ctx, args)?,
        Command::Predict(args) => predict(&mut ctx, args)?,
        Command::Eval(args) => eval(&mut ctx, args)?,
        Command::Experiment(cmd) => experiment(&mut ctx, cmd)?,
        Command::Serve(args) => return serve(ctx, args),
    }
    ctx.finish()
}

fn chat_backend(args: &GenerateArgs) -> Result<Arc<dyn ChatBackend>> {
    let dir = args.llm_cache.clone().context("--agent llm needs --llm-cache")?;
    fs::create_dir_all(&dir)?;
    if args.replay_only {
        let model = match &args.llm_model {
            Some(m) => m.clone(),
            None => std::env::var(ENV_MODEL).with_context(|| format!("--replay-only needs --llm-model or {ENV_MODEL}"))?,
        };
        return Ok(Arc::new(ReplayCache::replay_only(dir, model)));
    }
    let mut client = HttpChatClient::from_env()?;
    if args.min_interval_ms > 0 {
        client = client.with_limiter(Arc::new(RateLimiter::new(Duration::from_millis(args.min_interval_ms))));
    }
    Ok(Arc::new(ReplayCache::recording(dir, client)))
}

fn generate(ctx: &mut Ctx, args: GenerateArgs) -> Result<()> {
    let out = ctx.require_out()?;
    let corpus = ctx.corpus(&args.corpus.corpus)?;
    let mut backends = Backends::default();
    if matches!(args.agent, AgentKind::Threshold | AgentKind::SentimentBaseline) {
        backends.oracle = Some(ctx.oracle(&corpus, &args.oracle)?);
    }
    if args.agent == AgentKind::Llm {
        backends.chat = Some(chat_backend(&args)?);
    }
    let agent = &ctx.config.agent;
    let spec = GenerateSpec {
        agent: args.agent,
        n_players: args.players,
        personas: args.personas,
        seed: ctx.seed,
        threshold: agent.threshold,
        noise: agent.noise,
        workers: agent.workers,
    };
    let written = generate_to_file(&spec, &corpus, &ctx.config.game, &backends, &out, args.resume)?;
    info!("wrote {written} players to {}", out.display());
    let stats = InteractionDataset::load(&out)?.stats();
    eprintln!("{} players, {} games, {} decisions", stats.players, stats.games, stats.decisions);
    ctx.manifest.detail("spec", &spec);
    ctx.manifest.detail("players_written", written);
    ctx.manifest.detail("stats", stats);
    ctx.manifest.output(&out);
    Ok(())
}

fn dataset(ctx: &mut Ctx, cmd: DatasetCmd) -> Result<()> {
    match cmd {
        DatasetCmd::Stats { path } => {
            let ds = ctx.dataset(&path)?;
            ds.validate(Some(&ctx.config.game))?;
            println!("{}", serde_json::to_string_pretty(&json!({"provenance": ds.provenance, "stats": ds.stats()}))?);
        }
        DatasetCmd::Mix { a, b } => {
            let out = ctx.require_out()?;
            let (a, b) = (ctx.dataset(&a)?, ctx.dataset(&b)?);
            let m = mix(&a, &b)?;
            m.save(&out)?;
            ctx.manifest.output(&out);
            ctx.manifest.detail("stats", m.stats());
        }
        DatasetCmd::Split { path, test_players, splits } => {
            let out = ctx.require_out()?;
            let ds = ctx.dataset(&path)?;
            fs::create_dir_all(&out)?;
            for (i, s) in split_by_player(&ds, test_players, splits, ctx.seed)?.iter().enumerate() {
                for (name, part) in [("train", &s.train), ("test", &s.test)] {
                    let p = out.join(format!("split{i}_{name}.jsonl"));
                    part.save(&p)?;
                    ctx.manifest.output(p);
                }
            }
        }
        DatasetCmd::IngestHuman { path, columns } => {
            let out = ctx.require_out()?;
            let cols: HumanColumns = match &columns {
                Some(p) => {
                    ctx.manifest.input(p);
                    toml::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?
                }
                None => HumanColumns::default(),
            };
            ctx.manifest.input(&path);
            let (ds, report) = ingest_human(File::open(&path)?, &cols, &ctx.config.game)?;
            if report.players != RELEASED_HUMAN_PLAYERS || report.raw_decisions != RELEASED_HUMAN_DECISIONS {
                warn!(
                    "expected {RELEASED_HUMAN_PLAYERS} players and {RELEASED_HUMAN_DECISIONS} decisions in the released data, got {} and {}",
                    report.players, report.raw_decisions
                );
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            ds.save(&out)?;
            ctx.manifest.output(&out);
            ctx.manifest.detail("report", report);
        }
    }
    Ok(())
}

fn train(ctx: &mut Ctx, args: TrainArgs) -> Result<()> {
    let out = ctx.require_out()?;
    let corpus = ctx.corpus(&args.corpus.corpus)?;
    let ds = ctx.dataset(&args.data)?;
    let data = ctx.encode(&corpus, &args.oracle, &ds)?;
    let (model, log) = fit(args.model, &data, &ctx.config.train, ctx.seed)?;
    for e in &log {
        info!("epoch {} mean loss {:.5}", e.epoch, e.mean_loss);
    }
    model.save(&out)?;
    ctx.manifest.output(&out);
    ctx.manifest.detail("model", model.kind());
    ctx.manifest.detail("train_decisions", ds.n_decisions());
    ctx.manifest.detail("epochs", log);
    Ok(())
}

fn predict(ctx: &mut Ctx, args: PredictArgs) -> Result<()> {
    let out = ctx.require_out()?;
    ctx.manifest.input(&args.model);
    let model = PredictorModel::load(&args.model)?;
    let corpus = ctx.corpus(&args.corpus.corpus)?;
    let ds = ctx.dataset(&args.data)?;
    let games = ctx.encode(&corpus, &args.oracle, &ds)?;
    let preds = model.predict(&games);
    let mut lines = Vec::new();
    for (g, p) in games.iter().zip(&preds) {
        for (t, prob) in p.iter().enumerate() {
            lines.push(json!({
                "dm_id": g.dm_id, "expert": g.expert, "stage_index": g.stage_index,
                "game_index": g.game_index, "round_index": t + 1, "go_probability": prob,
                "predicted_action": *prob >= 0.5, "dm_action": g.y[t] == 1.0,
            }));
        }
    }
    write_lines(&out, &lines)?;
    ctx.manifest.output(&out);
    Ok(())
}

fn eval(ctx: &mut Ctx, args: EvalArgs) -> Result<()> {
    if args.model.is_none() && !args.winning_rates {
        bail!("eval needs --model, --winning-rates or both");
    }
    let ds = ctx.dataset(&args.data)?;
    let mut lines = Vec::new();
    let mut table = String::new();
    if let Some(model_path) = &args.model {
        let corpus_path = args.corpus.as_ref().context("eval with --model needs --corpus")?;
        ctx.manifest.input(model_path);
        let model = PredictorModel::load(model_path)?;
        let corpus = ctx.corpus(corpus_path)?;
        let games = ctx.encode(&corpus, &args.oracle, &ds)?;
        let report = evaluate(&decisions(&games, &model.predict(&games))?, ctx.config.eval.n_resamples, ctx.seed)?;
        lines.extend(
            report
                .metric_lines(args.per_expert)
                .into_iter()
                .filter(|l| args.per_expert || l["metric"] != "expert_accuracy"),
        );
        table.push_str(&report.table());
    }
    if args.winning_rates {
        let _ = writeln!(table, "{:<24} {:>8} {:>10} {:>12}", "expert", "rounds", "go_rate", "go_rate|bad");
        for (e, w) in expert_winning_rates(&ds) {
            let bad = w.go_rate_given_low_quality.map_or("-".to_string(), |r| format!("{r:.4}"));
            let _ = writeln!(table, "{:<24} {:>8} {:>10.4} {:>12}", e.as_str(), w.rounds, w.go_rate, bad);
            lines.push(json!({"metric": "winning_rate", "expert": e, "rounds": w.rounds, "go_rate": w.go_rate,
                "low_quality_rounds": w.low_quality_rounds, "go_rate_given_low_quality": w.go_rate_given_low_quality}));
        }
    }
    print!("{table}");
    if let Some(out) = ctx.out().map(Path::to_path_buf) {
        write_lines(&out, &lines)?;
        ctx.manifest.output(out);
    }
    Ok(())
}

fn experiment(ctx: &mut Ctx, cmd: ExperimentCmd) -> Result<()> {
    let mut lines = Vec::new();
    match cmd {
        ExperimentCmd::GlobalVsLocal { train, test, corpus, oracle, expert, model } => {
            let corpus = ctx.corpus(&corpus.corpus)?;
            let (train_ds, test_ds) = (ctx.dataset(&train)?, ctx.dataset(&test)?);
            let train_enc = ctx.encode(&corpus, &oracle, &train_ds)?;
            let test_enc = ctx.encode(&corpus, &oracle, &test_ds)?;
            let experts = expert.map_or_else(|| ExpertStrategy::ALL.to_vec(), |e| vec![e]);
            println!("{:<18} {:>8} {:>8}", "expert", "global", "local");
            for e in experts {
                let r = global_vs_local(e, &train_enc, &test_enc, model, &ctx.config.train, ctx.config.eval.n_resamples, ctx.seed)?;
                println!("{:<18} {:>8.4} {:>8.4}", e.as_str(), r.global.overall_accuracy, r.local.overall_accuracy);
                lines.push(json!({
                    "expert": e, "global_accuracy": r.global.overall_accuracy, "local_accuracy": r.local.overall_accuracy,
                    "global_ci95": r.global.ci95, "local_ci95": r.local.ci95, "test_decisions": r.global.n_decisions,
                }));
            }
        }
        ExperimentCmd::Sweep { sizes, sources, test, corpus, oracle, model } => {
            let corpus = ctx.corpus(&corpus.corpus)?;
            let mut pools = Vec::new();
            for (name, path) in sources {
                pools.push((name, ctx.dataset(&path)?));
            }
            let test_ds = ctx.dataset(&test)?;
            let enc = persuasion_core::predictor::FeatureEncoder::new(&corpus, ctx.oracle(&corpus, &oracle)?);
            let rows = sweep(&sizes, &pools, &test_ds, &enc, model, &ctx.config.train, ctx.config.eval.n_resamples, ctx.seed)?;
            println!("{:<16} {:>8} {:>10} {:>20}", "source", "players", "accuracy", "ci95");
            for r in &rows {
                let ci = r.ci95.map_or("-".into(), |(lo, hi)| format!("[{lo:.4}, {hi:.4}]"));
                println!("{:<16} {:>8} {:>10.4} {:>20}", r.source, r.train_players, r.accuracy, ci);
                lines.push(serde_json::to_value(r)?);
            }
            let resources: Vec<Value> = rows
                .iter()
                .map(|r| json!({"source": r.source, "train_players": r.train_players, "train_decisions": r.train_decisions}))
                .collect();
            ctx.manifest.detail("resources", resources);
        }
    }
    if let Some(out) = ctx.out().map(Path::to_path_buf) {
        write_lines(&out, &lines)?;
        ctx.manifest.output(out);
    }
    Ok(())
}

fn serve(mut ctx: Ctx, args: ServeArgs) -> Result<()> {
    let corpus = Arc::new(ctx.corpus(&args.corpus.corpus)?);
    let writer = if args.out_dataset.exists() {
        let existing = InteractionDataset::load(&args.out_dataset)?;
        if existing.provenance != Provenance::Human {
            bail!("{} is not a human dataset", args.out_dataset.display());
        }
        DatasetWriter::open_append(&args.out_dataset)?
    } else {
        DatasetWriter::create(&args.out_dataset, &Provenance::Human)?
    };
    let mut manager = SessionManager::new(corpus, ctx.config.game.clone(), ctx.seed)?
        .with_sink(Arc::new(Mutex::new(writer)) as Arc<dyn CompletionSink>);
    if let Some(dir) = &args.log_dir {
        fs::create_dir_all(dir)?;
        manager = manager.with_log_dir(dir);
    }
    ctx.manifest.output(&args.out_dataset);
    let addr = format!("{}:{}", args.host, args.port);
    // the manifest records the startup state; the dataset grows afterwards
    ctx.default_manifest(PathBuf::from(format!("{}.manifest.json", args.out_dataset.display())));
    ctx.finish()?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
        eprintln!("serving on http://{}", listener.local_addr()?);
        persuasion_service::serve(listener, Arc::new(manager)).await?;
        Ok(())
    })
}

fn write_lines(path: &Path, lines: &[Value]) -> Result<()> {
    let mut s = String::new();
    for l in lines {
        s.push_str(&serde_json::to_string(l)?);
        s.push('\n');
    }
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}
