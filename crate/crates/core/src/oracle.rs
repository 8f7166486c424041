//! Review text -> distribution over scores.
//!
//! A [`ScoreDistribution`] holds mass over ten buckets, bucket `k` covering
//! scores `[k, k+1)`. The LLM backend asks a model to rate a review on a
//! 1-100 scale (80 being the stay-worthy minimum, which lines up with the
//! game threshold of 8) and folds the mass on each numeral `n` into bucket
//! `n / 10`. The stub backend looks up a review's true score, which makes it
//! usable only on corpora it was built from.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::RwLock;

use regex::Regex;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::chat::{reply_text, ChatError, HttpEndpoint};
use crate::corpus::Corpus;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid score distribution: {0}")]
    InvalidDistribution(String),
    #[error("no score distribution for review {0}")]
    Missing(String),
    #[error(
        "the model endpoint returned no token log-probabilities; \
         use the sampling fallback (repeated single-answer samples) instead"
    )]
    NoLogits,
    #[error("the model produced no numeric answer for review {0}")]
    NoNumerals(String),
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error("cache file {path}, line {line}: {reason}")]
    CacheFormat { path: String, line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreDistribution {
    mass: [f64; 10],
}

impl ScoreDistribution {
    pub const BUCKETS: usize = 10;
    const TOLERANCE: f64 = 1e-9;

    pub fn new(mass: [f64; 10]) -> Result<Self, OracleError> {
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(OracleError::InvalidDistribution(format!("negative or non-finite mass in {mass:?}")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > Self::TOLERANCE {
            return Err(OracleError::InvalidDistribution(format!("mass sums to {total}")));
        }
        Ok(ScoreDistribution { mass })
    }

    /// Rescales non-negative mass to sum to one.
    pub fn normalized(raw: [f64; 10]) -> Result<Self, OracleError> {
        let total: f64 = raw.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(OracleError::InvalidDistribution(format!("total mass {total}")));
        }
        Self::new(raw.map(|m| m / total))
    }

    pub fn point_mass(bucket: usize) -> Self {
        let mut mass = [0.0; 10];
        mass[bucket.clamp(1, 10) - 1] = 1.0;
        ScoreDistribution { mass }
    }

    pub fn uniform() -> Self {
        ScoreDistribution { mass: [0.1; 10] }
    }

    /// Mass of bucket `k` in `1..=10`.
    pub fn mass(&self, bucket: usize) -> f64 {
        self.mass[bucket - 1]
    }

    pub fn masses(&self) -> &[f64; 10] {
        &self.mass
    }

    /// Total mass on buckets `k >= tau`.
    pub fn go_mass(&self, tau: f64) -> f64 {
        (1..=Self::BUCKETS)
            .filter(|&k| k as f64 >= tau)
            .map(|k| self.mass(k))
            .sum()
    }
}

/// `sum_k (k + 0.5) * mass[k]`: each bucket contributes its midpoint.
pub fn expected_score(dist: &ScoreDistribution) -> f64 {
    (1..=ScoreDistribution::BUCKETS)
        .map(|k| (k as f64 + 0.5) * dist.mass(k))
        .sum()
}

/// Bucket of a 1-100 numeral: decades, with 1-9 folded into bucket 1 and
/// 100 alone in bucket 10.
pub fn bucket_for_numeral(n: u32) -> usize {
    ((n / 10) as usize).clamp(1, 10)
}

/// Folds numeral masses into the ten buckets without renormalizing.
pub fn bucket_numeral_masses(masses: impl IntoIterator<Item = (u32, f64)>) -> [f64; 10] {
    let mut out = [0.0; 10];
    for (n, m) in masses {
        out[bucket_for_numeral(n) - 1] += m;
    }
    out
}

/// Content key of a review: hex SHA-256 of its two texts.
pub fn review_key(positive: &str, negative: &str) -> String {
    let mut h = Sha256::new();
    h.update(positive.as_bytes());
    h.update([0x1f]);
    h.update(negative.as_bytes());
    hex::encode(h.finalize())
}

pub trait ScoreOracle: Send + Sync {
    fn distribution(&self, positive: &str, negative: &str) -> Result<ScoreDistribution, OracleError>;
}

/// Deterministic oracle built from a corpus's true scores. With spread 0
/// every review maps to a point mass on the bucket of its score; otherwise
/// the mass follows a discretized Gaussian around the score.
#[derive(Debug, Clone)]
pub struct StubOracle {
    scores: HashMap<String, f64>,
    spread: f64,
}

impl StubOracle {
    pub fn from_corpus(corpus: &Corpus, spread: f64) -> Self {
        let mut scores = HashMap::new();
        for hotel in &corpus.hotels {
            for r in &hotel.reviews {
                scores.entry(review_key(&r.positive_text, &r.negative_text)).or_insert(r.score);
            }
        }
        StubOracle { scores, spread }
    }

    pub fn for_score(score: f64, spread: f64) -> ScoreDistribution {
        if spread <= 0.0 {
            return ScoreDistribution::point_mass(score.floor() as usize);
        }
        let raw: [f64; 10] = std::array::from_fn(|i| {
            let mid = i as f64 + 1.5;
            (-(mid - score).powi(2) / (2.0 * spread * spread)).exp()
        });
        ScoreDistribution::normalized(raw).expect("gaussian weights are positive")
    }
}

impl ScoreOracle for StubOracle {
    fn distribution(&self, positive: &str, negative: &str) -> Result<ScoreDistribution, OracleError> {
        let key = review_key(positive, negative);
        let score = self.scores.get(&key).ok_or(OracleError::Missing(key))?;
        Ok(Self::for_score(*score, self.spread))
    }
}

/// Memoizes any oracle by review content.
pub struct CachingOracle<O> {
    inner: O,
    cache: RwLock<HashMap<String, ScoreDistribution>>,
}

impl<O: ScoreOracle> CachingOracle<O> {
    pub fn new(inner: O) -> Self {
        CachingOracle { inner, cache: RwLock::new(HashMap::new()) }
    }

    pub fn len(&self) -> usize {
        self.cache.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> OracleCache {
        let map = self.cache.read().unwrap_or_else(|e| e.into_inner());
        OracleCache { entries: map.iter().map(|(k, v)| (k.clone(), *v)).collect() }
    }
}

impl<O: ScoreOracle> ScoreOracle for CachingOracle<O> {
    fn distribution(&self, positive: &str, negative: &str) -> Result<ScoreDistribution, OracleError> {
        let key = review_key(positive, negative);
        if let Some(d) = self.cache.read().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(*d);
        }
        let d = self.inner.distribution(positive, negative)?;
        self.cache.write().unwrap_or_else(|e| e.into_inner()).insert(key, d);
        Ok(d)
    }
}

/// Precomputed distributions keyed by [`review_key`]. On disk: a comment
/// line, a header row `review_key b1 .. b10`, then one tab-separated row per
/// review.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleCache {
    entries: BTreeMap<String, ScoreDistribution>,
}

const CACHE_COMMENT: &str = "# score-distribution cache v1: bucket bK holds the mass on scores [K, K+1)";

impl OracleCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: String, dist: ScoreDistribution) {
        self.entries.insert(key, dist);
    }

    pub fn get(&self, key: &str) -> Option<&ScoreDistribution> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Scores every distinct review of `corpus` once.
    pub fn build(corpus: &Corpus, oracle: &dyn ScoreOracle) -> Result<Self, OracleError> {
        let mut cache = OracleCache::new();
        for hotel in &corpus.hotels {
            for r in &hotel.reviews {
                let key = review_key(&r.positive_text, &r.negative_text);
                if cache.entries.contains_key(&key) {
                    continue;
                }
                let d = oracle.distribution(&r.positive_text, &r.negative_text)?;
                cache.insert(key, d);
            }
        }
        Ok(cache)
    }

    pub fn save(&self, path: &Path) -> Result<(), OracleError> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "{CACHE_COMMENT}")?;
        let header: Vec<String> = (1..=10).map(|k| format!("b{k}")).collect();
        writeln!(w, "review_key\t{}", header.join("\t"))?;
        for (key, d) in &self.entries {
            let cols: Vec<String> = d.masses().iter().map(|m| m.to_string()).collect();
            writeln!(w, "{key}\t{}", cols.join("\t"))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, OracleError> {
        let file = BufReader::new(File::open(path)?);
        let err = |line: usize, reason: String| OracleError::CacheFormat {
            path: path.display().to_string(),
            line,
            reason,
        };
        let mut cache = OracleCache::new();
        let mut saw_header = false;
        for (i, line) in file.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            if !saw_header {
                if !line.starts_with("review_key\t") {
                    return Err(err(lineno, "expected header row".into()));
                }
                saw_header = true;
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 11 {
                return Err(err(lineno, format!("expected 11 columns, got {}", cols.len())));
            }
            let mut mass = [0.0; 10];
            for (k, c) in cols[1..].iter().enumerate() {
                mass[k] = c.parse().map_err(|e| err(lineno, format!("column b{}: {e}", k + 1)))?;
            }
            let d = ScoreDistribution::new(mass).map_err(|e| err(lineno, e.to_string()))?;
            cache.insert(cols[0].to_string(), d);
        }
        Ok(cache)
    }
}

impl ScoreOracle for OracleCache {
    fn distribution(&self, positive: &str, negative: &str) -> Result<ScoreDistribution, OracleError> {
        let key = review_key(positive, negative);
        self.entries.get(&key).copied().ok_or(OracleError::Missing(key))
    }
}

pub fn score_prompt(positive: &str, negative: &str) -> String {
    format!(
        "Rank the value of the hotel as presented by the review, from 1 to 100, with 80 being the minimum score for a hotel you would like to stay in.\n\
Positive: {}\nNegative: {}\nAnswer only with your value!",
        positive.trim(),
        negative.trim()
    )
}

/// Access to a scoring model: either first-token log-probabilities or plain
/// sampled answers.
pub trait ScoreModel: Send + Sync {
    /// `(token, logprob)` alternatives for the first answer token, or `None`
    /// if the endpoint does not expose them.
    fn first_token_logprobs(&self, prompt: &str) -> Result<Option<Vec<(String, f64)>>, OracleError>;

    fn sample_answer(&self, prompt: &str, sample_index: usize) -> Result<String, OracleError>;
}

/// Reads the first-token alternatives as numerals. A lone digit `d` is the
/// leading digit of a two-digit answer and counts as numeral `10 d`;
/// non-numeric tokens are dropped before renormalizing.
pub fn distribution_from_logprobs(tokens: &[(String, f64)]) -> Option<ScoreDistribution> {
    let numerals = tokens.iter().filter_map(|(tok, lp)| {
        let n: u32 = tok.trim().parse().ok()?;
        let n = match n {
            1..=9 => n * 10,
            10..=100 => n,
            _ => return None,
        };
        Some((n, lp.exp()))
    });
    ScoreDistribution::normalized(bucket_numeral_masses(numerals)).ok()
}

/// Empirical distribution of the leading integer of each sampled answer.
pub fn distribution_from_samples(answers: &[String]) -> Option<ScoreDistribution> {
    let number = Regex::new(r"\d+").unwrap();
    let numerals = answers.iter().filter_map(|a| {
        let n: u32 = number.find(a)?.as_str().parse().ok()?;
        (1..=100).contains(&n).then_some((n, 1.0))
    });
    ScoreDistribution::normalized(bucket_numeral_masses(numerals)).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionMode {
    Logprobs,
    /// Fallback when the endpoint has no log-probabilities.
    Sampling { samples: usize },
}

pub const DEFAULT_FALLBACK_SAMPLES: usize = 64;

pub struct LlmScoreOracle<M> {
    model: M,
    mode: ExtractionMode,
}

impl<M: ScoreModel> LlmScoreOracle<M> {
    pub fn new(model: M, mode: ExtractionMode) -> Self {
        LlmScoreOracle { model, mode }
    }
}

impl<M: ScoreModel> ScoreOracle for LlmScoreOracle<M> {
    fn distribution(&self, positive: &str, negative: &str) -> Result<ScoreDistribution, OracleError> {
        let prompt = score_prompt(positive, negative);
        let key = || review_key(positive, negative);
        match self.mode {
            ExtractionMode::Logprobs => {
                let tokens = self.model.first_token_logprobs(&prompt)?.ok_or(OracleError::NoLogits)?;
                distribution_from_logprobs(&tokens).ok_or_else(|| OracleError::NoNumerals(key()))
            }
            ExtractionMode::Sampling { samples } => {
                let answers = (0..samples)
                    .map(|i| self.model.sample_answer(&prompt, i))
                    .collect::<Result<Vec<_>, _>>()?;
                distribution_from_samples(&answers).ok_or_else(|| OracleError::NoNumerals(key()))
            }
        }
    }
}

/// Chat-completions endpoint queried with `logprobs`/`top_logprobs`.
pub struct HttpScoreModel {
    endpoint: HttpEndpoint,
    model: String,
    top_logprobs: u32,
}

impl HttpScoreModel {
    pub fn new(endpoint: HttpEndpoint, model: impl Into<String>) -> Self {
        HttpScoreModel { endpoint, model: model.into(), top_logprobs: 20 }
    }
}

impl ScoreModel for HttpScoreModel {
    fn first_token_logprobs(&self, prompt: &str) -> Result<Option<Vec<(String, f64)>>, OracleError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": 1,
            "temperature": 0,
            "logprobs": true,
            "top_logprobs": self.top_logprobs,
        });
        let resp = self.endpoint.post(&body)?;
        let Some(top) = resp
            .pointer("/choices/0/logprobs/content/0/top_logprobs")
            .and_then(Value::as_array)
        else {
            return Ok(None);
        };
        Ok(Some(
            top.iter()
                .filter_map(|t| Some((t["token"].as_str()?.to_string(), t["logprob"].as_f64()?)))
                .collect(),
        ))
    }

    fn sample_answer(&self, prompt: &str, _sample_index: usize) -> Result<String, OracleError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": 4,
            "temperature": 1.0,
        });
        Ok(reply_text(&self.endpoint.post(&body)?)?)
    }
}
