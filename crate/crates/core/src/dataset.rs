//! Interaction datasets.
//!
//! On disk a dataset is JSON lines: a header object
//! `{"format":"persuasion-interactions","version":1,"provenance":{..}}`
//! followed by one [`GameRecord`] per line. Writers append whole lines, so a
//! reader never sees a half-written game.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experts::ExpertStrategy;
use crate::game::{GameConfig, GameRecord, RoundRecord, STAGES};
use crate::rng::{stream, SimRng};

pub const FORMAT: &str = "persuasion-interactions";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("missing header line")]
    MissingHeader,
    #[error("duplicate game ({dm_id}, stage {stage_index}, game {game_index})")]
    Duplicate { dm_id: String, stage_index: u32, game_index: u32 },
    #[error("{dm_id} stage {stage_index}: second game without a losing first game")]
    StageRule { dm_id: String, stage_index: u32 },
    #[error("need more than {needed} players, dataset has {available}")]
    InsufficientPlayers { needed: usize, available: usize },
    #[error("dm_id `{0}` appears in both datasets")]
    Collision(String),
    #[error("human data: {0}")]
    Human(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Human,
    Llm { model: String },
    SentimentBaseline,
    Scripted,
    Mixed,
}

impl Provenance {
    /// Prefix used to namespace dm_ids of this provenance.
    pub fn dm_prefix(&self) -> &'static str {
        match self {
            Provenance::Human => "human",
            Provenance::Llm { .. } => "llm",
            Provenance::SentimentBaseline => "sentiment",
            Provenance::Scripted => "scripted",
            Provenance::Mixed => "mixed",
        }
    }
}

pub fn dm_id(prefix: &str, player_index: usize) -> String {
    format!("{prefix}:{player_index:06}")
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    pub provenance: Provenance,
    pub games: Vec<GameRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub players: usize,
    pub games: usize,
    pub decisions: usize,
    pub go_rate: f64,
    pub games_per_strategy: BTreeMap<String, usize>,
    pub players_per_persona: BTreeMap<String, usize>,
}

impl InteractionDataset {
    pub fn new(provenance: Provenance) -> Self {
        InteractionDataset { provenance, games: Vec::new() }
    }

    pub fn n_decisions(&self) -> usize {
        self.games.iter().map(|g| g.rounds.len()).sum()
    }

    /// Distinct dm_ids in order of first appearance.
    pub fn players(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.games
            .iter()
            .filter(|g| seen.insert(g.dm_id.as_str()))
            .map(|g| g.dm_id.clone())
            .collect()
    }

    pub fn stats(&self) -> DatasetStats {
        let decisions = self.n_decisions();
        let gos = self.games.iter().flat_map(|g| &g.rounds).filter(|r| r.dm_action).count();
        let mut games_per_strategy = BTreeMap::new();
        for g in &self.games {
            *games_per_strategy.entry(g.expert_strategy.as_str().to_string()).or_insert(0) += 1;
        }
        let mut persona_of: BTreeMap<&str, String> = BTreeMap::new();
        for g in &self.games {
            let p = g.persona_id.map(|p| p.as_str().to_string()).unwrap_or_else(|| "none".into());
            persona_of.entry(&g.dm_id).or_insert(p);
        }
        let mut players_per_persona = BTreeMap::new();
        for p in persona_of.into_values() {
            *players_per_persona.entry(p).or_insert(0) += 1;
        }
        DatasetStats {
            players: self.players().len(),
            games: self.games.len(),
            decisions,
            go_rate: if decisions == 0 { 0.0 } else { gos as f64 / decisions as f64 },
            games_per_strategy,
            players_per_persona,
        }
    }

    /// Record-level invariants plus uniqueness of (dm_id, stage, game) and
    /// the rule that a second game follows a first game of the same stage.
    /// Pass a config to also check that the first game missed its target.
    pub fn validate(&self, config: Option<&GameConfig>) -> Result<(), DatasetError> {
        let mut seen: HashMap<(&str, u32, u32), u32> = HashMap::new();
        for g in &self.games {
            g.validate().map_err(|e| DatasetError::Line { line: 0, reason: e.to_string() })?;
            if seen.insert((&g.dm_id, g.stage_index, g.game_index), g.cumulative_dm_points).is_some() {
                return Err(DatasetError::Duplicate {
                    dm_id: g.dm_id.clone(),
                    stage_index: g.stage_index,
                    game_index: g.game_index,
                });
            }
        }
        for g in self.games.iter().filter(|g| g.game_index == 2) {
            let first = seen.get(&(g.dm_id.as_str(), g.stage_index, 1));
            let ok = match (first, config) {
                (None, _) => false,
                (Some(&points), Some(c)) => points < c.stage_target(g.stage_index),
                (Some(_), None) => true,
            };
            if !ok {
                return Err(DatasetError::StageRule { dm_id: g.dm_id.clone(), stage_index: g.stage_index });
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let mut w = DatasetWriter::create(path, &self.provenance)?;
        w.append(&self.games)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        Self::read(File::open(path)?)
    }

    pub fn read<R: Read>(input: R) -> Result<Self, DatasetError> {
        let mut lines = BufReader::new(input).lines().enumerate();
        let header = loop {
            match lines.next() {
                None => return Err(DatasetError::MissingHeader),
                Some((_, l)) if l.as_ref().map(|s| s.trim().is_empty()).unwrap_or(false) => continue,
                Some((i, l)) => {
                    let l = l?;
                    let h: Header = serde_json::from_str(&l)
                        .map_err(|e| DatasetError::Line { line: i + 1, reason: format!("bad header: {e}") })?;
                    if h.format != FORMAT || h.version != VERSION {
                        return Err(DatasetError::Line {
                            line: i + 1,
                            reason: format!("unsupported format {} v{}", h.format, h.version),
                        });
                    }
                    break h;
                }
            }
        };
        let mut ds = InteractionDataset::new(header.provenance);
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |reason: String| DatasetError::Line { line: i + 1, reason };
            let g: GameRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
            g.validate().map_err(|e| err(e.to_string()))?;
            ds.games.push(g);
        }
        ds.validate(None)?;
        Ok(ds)
    }

    pub fn games_of<'a>(&'a self, players: &'a HashSet<String>) -> impl Iterator<Item = &'a GameRecord> + 'a {
        self.games.iter().filter(move |g| players.contains(&g.dm_id))
    }

    fn restricted(&self, players: &HashSet<String>) -> InteractionDataset {
        InteractionDataset { provenance: self.provenance.clone(), games: self.games_of(players).cloned().collect() }
    }

    /// Games of `k` players drawn without replacement.
    pub fn subset_players(&self, k: usize, rng: &mut SimRng) -> Result<InteractionDataset, DatasetError> {
        let mut players = self.players();
        if k > players.len() {
            return Err(DatasetError::InsufficientPlayers { needed: k, available: players.len() });
        }
        players.shuffle(rng);
        let chosen: HashSet<String> = players.into_iter().take(k).collect();
        Ok(self.restricted(&chosen))
    }

    /// Games whose expert is `strategy`.
    pub fn for_expert(&self, strategy: ExpertStrategy) -> InteractionDataset {
        InteractionDataset {
            provenance: self.provenance.clone(),
            games: self.games.iter().filter(|g| g.expert_strategy == strategy).cloned().collect(),
        }
    }
}

/// Appends whole games to a dataset file.
pub struct DatasetWriter {
    file: File,
}

impl DatasetWriter {
    pub fn create(path: &Path, provenance: &Provenance) -> Result<Self, DatasetError> {
        let mut file = File::create(path)?;
        let header = Header { format: FORMAT.into(), version: VERSION, provenance: provenance.clone() };
        file.write_all(format!("{}\n", serde_json::to_string(&header)?).as_bytes())?;
        Ok(DatasetWriter { file })
    }

    /// Opens an existing file for appending. A trailing line without a
    /// newline (an interrupted write) is cut off first.
    pub fn open_append(path: &Path) -> Result<Self, DatasetError> {
        let bytes = std::fs::read(path)?;
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if keep < bytes.len() {
            warn!("{}: dropping {} bytes of an incomplete final line", path.display(), bytes.len() - keep);
            OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
        }
        Ok(DatasetWriter { file: OpenOptions::new().append(true).open(path)? })
    }

    /// Writes `games` with a single write so concurrent readers see either
    /// none or all of them.
    pub fn append(&mut self, games: &[GameRecord]) -> Result<(), DatasetError> {
        let mut buf = String::new();
        for g in games {
            buf.push_str(&serde_json::to_string(g)?);
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes())?;
        self.file.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: InteractionDataset,
    pub test: InteractionDataset,
}

/// `n_splits` random partitions of the players: `test_players` in each test
/// set, the rest in train. Split `i` draws from seed stream `i`.
pub fn split_by_player(
    ds: &InteractionDataset,
    test_players: usize,
    n_splits: usize,
    seed: u64,
) -> Result<Vec<Split>, DatasetError> {
    let players = ds.players();
    if players.len() <= test_players {
        return Err(DatasetError::InsufficientPlayers { needed: test_players, available: players.len() });
    }
    Ok((0..n_splits)
        .map(|i| {
            let mut order = players.clone();
            order.shuffle(&mut stream(seed, i as u64));
            let test: HashSet<String> = order[..test_players].iter().cloned().collect();
            let train: HashSet<String> = order[test_players..].iter().cloned().collect();
            Split { train: ds.restricted(&train), test: ds.restricted(&test) }
        })
        .collect())
}

/// Concatenates two datasets whose dm_ids do not overlap.
pub fn mix(a: &InteractionDataset, b: &InteractionDataset) -> Result<InteractionDataset, DatasetError> {
    let ids: HashSet<&str> = a.games.iter().map(|g| g.dm_id.as_str()).collect();
    if let Some(g) = b.games.iter().find(|g| ids.contains(g.dm_id.as_str())) {
        return Err(DatasetError::Collision(g.dm_id.clone()));
    }
    let provenance = match (a.games.is_empty(), b.games.is_empty()) {
        (false, true) => a.provenance.clone(),
        (true, false) => b.provenance.clone(),
        _ if a.provenance == b.provenance => a.provenance.clone(),
        _ => Provenance::Mixed,
    };
    let mut games = a.games.clone();
    games.extend(b.games.iter().cloned());
    Ok(InteractionDataset { provenance, games })
}

/// Whether `games` (one player's records) form a complete six-stage
/// interaction under `config`.
pub fn interaction_complete(games: &[GameRecord], config: &GameConfig) -> bool {
    (1..=STAGES as u32).all(|s| {
        let first = games.iter().find(|g| g.stage_index == s && g.game_index == 1);
        let second = games.iter().any(|g| g.stage_index == s && g.game_index == 2);
        match first {
            None => false,
            Some(g) => second == (g.cumulative_dm_points < config.stage_target(s)),
        }
    })
}

/// Column names of a raw human decision table. Defaults follow the public
/// human-choice-prediction release; override them when the release differs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HumanColumns {
    pub player: String,
    pub strategy: String,
    pub game: String,
    pub round: String,
    pub hotel: String,
    pub review: String,
    pub did_go: String,
    pub did_win: String,
    /// Raw strategy id -> strategy name.
    pub strategy_ids: BTreeMap<String, ExpertStrategy>,
    /// Subtracted from the raw review column to get a 0-based index.
    pub review_index_base: i64,
}

impl Default for HumanColumns {
    fn default() -> Self {
        let ids = ["3", "0", "2", "5", "59", "19"];
        HumanColumns {
            player: "user_id".into(),
            strategy: "strategy_id".into(),
            game: "gameId".into(),
            round: "roundNum".into(),
            hotel: "hotelId".into(),
            review: "reviewId".into(),
            did_go: "didGo".into(),
            did_win: "didWin".into(),
            strategy_ids: ids.iter().map(|s| s.to_string()).zip(ExpertStrategy::ALL).collect(),
            review_index_base: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HumanIngestReport {
    /// Players who met all six experts.
    pub players: usize,
    /// Decision rows of those players, before keeping two games per expert.
    pub raw_decisions: usize,
    pub kept_games: usize,
    pub kept_decisions: usize,
}

/// Counts expected from the public human-choice release.
pub const RELEASED_HUMAN_PLAYERS: usize = 210;
pub const RELEASED_HUMAN_DECISIONS: usize = 71_579;

fn parse_flag(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "1.0" => Some(true),
        "0" | "false" | "0.0" => Some(false),
        _ => None,
    }
}

struct HumanRow {
    strategy: ExpertStrategy,
    game: String,
    round: u32,
    hotel: String,
    review: usize,
    go: bool,
    win: bool,
}

/// Converts a raw human decision table (comma-separated) to game records:
/// stages follow the order in which each player met the experts and only
/// the first two games per expert are kept. Any kept game without exactly
/// `config.rounds` rounds is a hard error.
pub fn ingest_human<R: Read>(
    input: R,
    columns: &HumanColumns,
    config: &GameConfig,
) -> Result<(InteractionDataset, HumanIngestReport), DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = rdr.headers()?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DatasetError::Human(format!("missing column `{name}`")))
    };
    let c = [
        idx(&columns.player)?,
        idx(&columns.strategy)?,
        idx(&columns.game)?,
        idx(&columns.round)?,
        idx(&columns.hotel)?,
        idx(&columns.review)?,
        idx(&columns.did_go)?,
        idx(&columns.did_win)?,
    ];

    let mut player_order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<HumanRow>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |what: &str| DatasetError::Human(format!("line {line}: bad `{what}`"));
        let get = |i: usize| rec.get(c[i]).map(str::trim).unwrap_or("");
        let player = get(0).to_string();
        let strategy = *columns.strategy_ids.get(get(1)).ok_or_else(|| bad(&columns.strategy))?;
        let round: u32 = get(3).parse().map_err(|_| bad(&columns.round))?;
        let raw_review: i64 = get(5).parse().map_err(|_| bad(&columns.review))?;
        let review = usize::try_from(raw_review - columns.review_index_base).map_err(|_| bad(&columns.review))?;
        if review >= config.reviews_per_hotel {
            return Err(bad(&columns.review));
        }
        let row = HumanRow {
            strategy,
            game: get(2).to_string(),
            round,
            hotel: get(4).to_string(),
            review,
            go: parse_flag(get(6)).ok_or_else(|| bad(&columns.did_go))?,
            win: parse_flag(get(7)).ok_or_else(|| bad(&columns.did_win))?,
        };
        rows.entry(player.clone())
            .or_insert_with(|| {
                player_order.push(player.clone());
                Vec::new()
            })
            .push(row);
    }

    let mut ds = InteractionDataset::new(Provenance::Human);
    let mut report = HumanIngestReport { players: 0, raw_decisions: 0, kept_games: 0, kept_decisions: 0 };
    for player in player_order {
        let prow = &rows[&player];
        let mut expert_order: Vec<ExpertStrategy> = Vec::new();
        for r in prow {
            if !expert_order.contains(&r.strategy) {
                expert_order.push(r.strategy);
            }
        }
        if expert_order.len() != STAGES {
            continue;
        }
        report.players += 1;
        report.raw_decisions += prow.len();
        for (s, &strategy) in expert_order.iter().enumerate() {
            let mut game_order: Vec<&str> = Vec::new();
            for r in prow.iter().filter(|r| r.strategy == strategy) {
                if !game_order.contains(&r.game.as_str()) {
                    game_order.push(&r.game);
                }
            }
            for (g, game_id) in game_order.iter().take(2).enumerate() {
                let mut game_rows: Vec<&HumanRow> =
                    prow.iter().filter(|r| r.strategy == strategy && r.game == *game_id).collect();
                game_rows.sort_by_key(|r| r.round);
                let rounds: Vec<RoundRecord> = game_rows
                    .iter()
                    .map(|r| {
                        let quality = if r.win { r.go } else { !r.go };
                        RoundRecord::new(r.round, r.hotel.clone(), r.review, quality, r.go)
                    })
                    .collect();
                if rounds.len() != config.rounds
                    || rounds.iter().enumerate().any(|(i, r)| r.round_index as usize != i + 1)
                {
                    return Err(DatasetError::Human(format!(
                        "player {player}, expert {strategy}, game {game_id}: {} rounds, expected rounds 1..={}",
                        rounds.len(),
                        config.rounds
                    )));
                }
                let points = rounds.iter().filter(|r| r.dm_payoff).count() as u32;
                report.kept_decisions += rounds.len();
                report.kept_games += 1;
                ds.games.push(GameRecord {
                    dm_id: format!("human:{player}"),
                    dm_kind: crate::game::DmKind::Human,
                    persona_id: None,
                    expert_strategy: strategy,
                    stage_index: s as u32 + 1,
                    game_index: g as u32 + 1,
                    rounds,
                    cumulative_dm_points: points,
                });
            }
        }
    }
    if report.players != RELEASED_HUMAN_PLAYERS || report.raw_decisions != RELEASED_HUMAN_DECISIONS {
        warn!(
            "human data has {} players and {} decisions; the published release has {} and {}",
            report.players, report.raw_decisions, RELEASED_HUMAN_PLAYERS, RELEASED_HUMAN_DECISIONS
        );
    }
    ds.validate(None)?;
    Ok((ds, report))
}
