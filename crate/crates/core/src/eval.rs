//! Accuracy, calibration and bootstrap intervals.
//!
//! Accuracy is the per-DM per-expert average: decisions are grouped by
//! (dm_id, expert), each group gets its own accuracy and the overall number
//! is the unweighted mean over groups. A probability of exactly 0.5 counts
//! as a predicted Go.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::dataset::InteractionDataset;
use crate::experts::ExpertStrategy;
use crate::predictor::EncodedGame;
use crate::rng::seeded;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no decisions to evaluate")]
    Empty,
    #[error("expert {0} has no decisions in the test data")]
    ExpertAbsent(ExpertStrategy),
    #[error("bootstrap needs at least 2 players, got {0}")]
    Degenerate(usize),
    #[error("{games} games but {predictions} prediction vectors")]
    Misaligned { games: usize, predictions: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub dm_id: String,
    pub expert: ExpertStrategy,
    pub prob: f64,
    pub truth: bool,
}

impl Decision {
    pub fn predicted(&self) -> bool {
        self.prob >= 0.5
    }

    pub fn correct(&self) -> bool {
        self.predicted() == self.truth
    }
}

/// Pairs per-round predictions with the games they were made for.
pub fn decisions(games: &[EncodedGame], predictions: &[Vec<f64>]) -> Result<Vec<Decision>, EvalError> {
    if games.len() != predictions.len() {
        return Err(EvalError::Misaligned { games: games.len(), predictions: predictions.len() });
    }
    let mut out = Vec::new();
    for (g, p) in games.iter().zip(predictions) {
        if p.len() != g.len() {
            return Err(EvalError::Misaligned { games: g.len(), predictions: p.len() });
        }
        for (t, &prob) in p.iter().enumerate() {
            out.push(Decision { dm_id: g.dm_id.clone(), expert: g.expert, prob, truth: g.y[t] >= 0.5 });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub correct: usize,
    pub n: usize,
}

impl Tally {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.n as f64
    }
}

pub fn pair_tallies(ds: &[Decision]) -> BTreeMap<(String, ExpertStrategy), Tally> {
    let mut m: BTreeMap<(String, ExpertStrategy), Tally> = BTreeMap::new();
    for d in ds {
        let t = m.entry((d.dm_id.clone(), d.expert)).or_default();
        t.n += 1;
        t.correct += d.correct() as usize;
    }
    m
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Unweighted mean over (dm, expert) pairs of within-pair accuracy.
pub fn accuracy(ds: &[Decision]) -> Result<f64, EvalError> {
    mean(pair_tallies(ds).values().map(Tally::accuracy)).ok_or(EvalError::Empty)
}

/// Pair-mean accuracy per expert.
pub fn per_expert_accuracy(ds: &[Decision]) -> BTreeMap<ExpertStrategy, f64> {
    let mut by: BTreeMap<ExpertStrategy, Vec<f64>> = BTreeMap::new();
    for ((_, e), t) in pair_tallies(ds) {
        by.entry(e).or_default().push(t.accuracy());
    }
    by.into_iter().map(|(e, v)| (e, mean(v.into_iter()).unwrap_or(0.0))).collect()
}

pub fn expert_accuracy(ds: &[Decision], expert: ExpertStrategy) -> Result<f64, EvalError> {
    per_expert_accuracy(ds).get(&expert).copied().ok_or(EvalError::ExpertAbsent(expert))
}

/// Expected calibration error with confidence `max(p, 1 - p)` and
/// `n_bins` equal-width bins over `[0.5, 1]`.
pub fn ece(probs: &[f64], truths: &[bool], n_bins: usize) -> f64 {
    let n = probs.len();
    if n == 0 {
        return 0.0;
    }
    let mut count = vec![0usize; n_bins];
    let mut correct = vec![0usize; n_bins];
    let mut conf_sum = vec![0.0; n_bins];
    for (&p, &y) in probs.iter().zip(truths) {
        let conf = p.max(1.0 - p);
        let bin = (((conf - 0.5) * 2.0 * n_bins as f64) as usize).min(n_bins - 1);
        count[bin] += 1;
        correct[bin] += ((p >= 0.5) == y) as usize;
        conf_sum[bin] += conf;
    }
    (0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let c = count[b] as f64;
            (c / n as f64) * (correct[b] as f64 / c - conf_sum[b] / c).abs()
        })
        .sum()
}

/// Percentile bootstrap over units (players): resample with replacement,
/// recompute the statistic, and return the order statistics at the
/// `(1 - level) / 2` and `(1 + level) / 2` quantiles.
pub fn bootstrap_ci<T>(
    units: &[T],
    statistic: impl Fn(&[&T]) -> f64,
    n_resamples: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, f64), EvalError> {
    if units.len() < 2 {
        return Err(EvalError::Degenerate(units.len()));
    }
    let mut rng = seeded(seed);
    let mut stats: Vec<f64> = (0..n_resamples.max(1))
        .map(|_| {
            let sample: Vec<&T> = (0..units.len()).map(|_| &units[rng.random_range(0..units.len())]).collect();
            statistic(&sample)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let n = stats.len();
    let alpha = (1.0 - level) / 2.0;
    let lo = ((alpha * n as f64).floor() as usize).min(n - 1);
    let hi = (((1.0 - alpha) * n as f64).ceil() as usize).clamp(1, n) - 1;
    Ok((stats[lo], stats[hi]))
}

/// One player's per-expert tallies, the bootstrap unit.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerTallies {
    pub dm_id: String,
    pub pairs: Vec<(ExpertStrategy, Tally)>,
}

pub fn player_tallies(ds: &[Decision]) -> Vec<PlayerTallies> {
    let mut by: BTreeMap<String, Vec<(ExpertStrategy, Tally)>> = BTreeMap::new();
    for ((dm, e), t) in pair_tallies(ds) {
        by.entry(dm).or_default().push((e, t));
    }
    by.into_iter().map(|(dm_id, pairs)| PlayerTallies { dm_id, pairs }).collect()
}

/// Pair-mean accuracy of a (re)sampled set of players; a player drawn twice
/// contributes its pairs twice.
pub fn pair_mean(players: &[&PlayerTallies]) -> f64 {
    mean(players.iter().flat_map(|p| p.pairs.iter().map(|(_, t)| t.accuracy()))).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairAccuracy {
    pub dm_id: String,
    pub expert: ExpertStrategy,
    pub accuracy: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    pub per_pair_accuracy: Vec<PairAccuracy>,
    pub per_expert_accuracy: BTreeMap<ExpertStrategy, f64>,
    pub ece: f64,
    pub ci95: Option<(f64, f64)>,
    pub n_decisions: usize,
    pub n_players: usize,
}

pub const DEFAULT_BOOTSTRAP: usize = 1000;
pub const ECE_BINS: usize = 10;

/// Full report; the interval is omitted when there are fewer than two
/// players.
pub fn evaluate(ds: &[Decision], n_resamples: usize, seed: u64) -> Result<EvalReport, EvalError> {
    let overall = accuracy(ds)?;
    let probs: Vec<f64> = ds.iter().map(|d| d.prob).collect();
    let truths: Vec<bool> = ds.iter().map(|d| d.truth).collect();
    let players = player_tallies(ds);
    let ci95 = match bootstrap_ci(&players, pair_mean, n_resamples, 0.95, seed) {
        Ok(ci) => Some(ci),
        Err(EvalError::Degenerate(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        overall_accuracy: overall,
        per_pair_accuracy: pair_tallies(ds)
            .into_iter()
            .map(|((dm_id, expert), t)| PairAccuracy { dm_id, expert, accuracy: t.accuracy(), n: t.n })
            .collect(),
        per_expert_accuracy: per_expert_accuracy(ds),
        ece: ece(&probs, &truths, ECE_BINS),
        ci95,
        n_decisions: ds.len(),
        n_players: players.len(),
    })
}

impl EvalReport {
    /// One JSON object per line: summary metrics first, then per-expert and
    /// per-pair rows.
    pub fn metric_lines(&self, include_pairs: bool) -> Vec<Value> {
        let mut out = vec![
            json!({"metric": "overall_accuracy", "value": self.overall_accuracy}),
            json!({"metric": "ece", "value": self.ece}),
            json!({"metric": "ci95", "lo": self.ci95.map(|c| c.0), "hi": self.ci95.map(|c| c.1)}),
            json!({"metric": "n_decisions", "value": self.n_decisions}),
            json!({"metric": "n_players", "value": self.n_players}),
        ];
        for (e, a) in &self.per_expert_accuracy {
            out.push(json!({"metric": "expert_accuracy", "expert": e, "value": a}));
        }
        if include_pairs {
            for p in &self.per_pair_accuracy {
                out.push(json!({"metric": "pair_accuracy", "dm_id": p.dm_id, "expert": p.expert, "value": p.accuracy, "n": p.n}));
            }
        }
        out
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<24} {:>10}", "metric", "value");
        let _ = writeln!(s, "{:<24} {:>10.4}", "accuracy", self.overall_accuracy);
        if let Some((lo, hi)) = self.ci95 {
            let _ = writeln!(s, "{:<24} {:>10}", "ci95", format!("[{lo:.4}, {hi:.4}]"));
        }
        let _ = writeln!(s, "{:<24} {:>10.4}", "ece", self.ece);
        let _ = writeln!(s, "{:<24} {:>10}", "decisions", self.n_decisions);
        let _ = writeln!(s, "{:<24} {:>10}", "players", self.n_players);
        for (e, a) in &self.per_expert_accuracy {
            let _ = writeln!(s, "{:<24} {:>10.4}", format!("accuracy[{e}]"), a);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WinningRate {
    pub rounds: usize,
    pub go_rate: f64,
    pub low_quality_rounds: usize,
    /// Undefined (`None`) when the strategy met no low-quality hotel.
    pub go_rate_given_low_quality: Option<f64>,
}

/// Expert winning rate per strategy: the DM's per-round go rate, overall
/// and over low-quality rounds only.
pub fn expert_winning_rates(ds: &InteractionDataset) -> BTreeMap<ExpertStrategy, WinningRate> {
    let mut acc: BTreeMap<ExpertStrategy, (usize, usize, usize, usize)> = BTreeMap::new();
    for g in &ds.games {
        let e = acc.entry(g.expert_strategy).or_default();
        for r in &g.rounds {
            e.0 += 1;
            e.1 += r.dm_action as usize;
            if !r.hotel_quality {
                e.2 += 1;
                e.3 += r.dm_action as usize;
            }
        }
    }
    acc.into_iter()
        .map(|(s, (n, go, low, low_go))| {
            (
                s,
                WinningRate {
                    rounds: n,
                    go_rate: go as f64 / n.max(1) as f64,
                    low_quality_rounds: low,
                    go_rate_given_low_quality: (low > 0).then(|| low_go as f64 / low as f64),
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{DmKind, GameRecord, RoundRecord};
    use crate::rng::seeded;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn d(dm: &str, e: ExpertStrategy, prob: f64, truth: bool) -> Decision {
        Decision { dm_id: dm.into(), expert: e, prob, truth }
    }

    fn group(dm: &str, e: ExpertStrategy, correct: usize, n: usize) -> Vec<Decision> {
        (0..n).map(|i| d(dm, e, 0.9, i < correct)).collect()
    }

    #[test]
    fn pair_mean_not_decision_mean() {
        let mut ds = group("a", ExpertStrategy::Greedy, 8, 10);
        ds.extend(group("a", ExpertStrategy::Honest, 10, 20));
        ds.extend(group("b", ExpertStrategy::Greedy, 10, 10));
        // the (a, honest) pair is 10/20
        for x in ds.iter_mut().filter(|x| x.expert == ExpertStrategy::Honest).skip(10) {
            x.truth = false;
        }
        let acc = accuracy(&ds).unwrap();
        assert!((acc - (0.8 + 0.5 + 1.0) / 3.0).abs() < 1e-12);
        assert!((acc - 0.7667).abs() < 1e-4);
        assert_eq!(accuracy(&[]), Err(EvalError::Empty));
    }

    #[test]
    fn tie_is_go() {
        assert!(d("a", ExpertStrategy::Greedy, 0.5, true).correct());
        assert!(!d("a", ExpertStrategy::Greedy, 0.5, false).correct());
    }

    #[test]
    fn ece_fixtures() {
        let e = ece(&[0.9, 0.1], &[true, false], 10);
        assert!((e - 0.1).abs() < 1e-15, "{e}");
        assert_eq!(ece(&[1.0; 5], &[true; 5], 10), 0.0);
        let mut rng = seeded(1);
        let n = 100_000;
        let probs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let truths: Vec<bool> = probs.iter().map(|&p| rng.random_bool(p)).collect();
        assert!(ece(&probs, &truths, 10) < 0.01);
    }

    fn two_players() -> Vec<PlayerTallies> {
        vec![
            PlayerTallies { dm_id: "a".into(), pairs: vec![(ExpertStrategy::Greedy, Tally { correct: 4, n: 10 })] },
            PlayerTallies { dm_id: "b".into(), pairs: vec![(ExpertStrategy::Greedy, Tally { correct: 8, n: 10 })] },
        ]
    }

    #[test]
    fn bootstrap_two_players() {
        let players = two_players();
        let (lo, hi) = bootstrap_ci(&players, pair_mean, 1000, 0.95, 3).unwrap();
        let allowed = [0.4, 0.6, 0.8];
        assert!(allowed.iter().any(|a| (a - lo).abs() < 1e-12), "{lo}");
        assert!(allowed.iter().any(|a| (a - hi).abs() < 1e-12), "{hi}");
        assert_eq!(bootstrap_ci(&players, pair_mean, 1000, 0.95, 3).unwrap(), (lo, hi));
        assert!(matches!(bootstrap_ci(&players[..1], pair_mean, 10, 0.95, 0), Err(EvalError::Degenerate(1))));
        let same = vec![players[0].clone(), players[0].clone(), players[0].clone()];
        let (lo, hi) = bootstrap_ci(&same, pair_mean, 200, 0.95, 1).unwrap();
        assert_eq!(lo, hi);
    }

    #[test]
    fn per_expert_fixture() {
        // 2 experts x 2 players
        let mut ds = group("a", ExpertStrategy::Greedy, 3, 4);
        ds.extend(group("b", ExpertStrategy::Greedy, 1, 4));
        ds.extend(group("a", ExpertStrategy::Average, 2, 2));
        ds.extend(group("b", ExpertStrategy::Average, 0, 2));
        let m = per_expert_accuracy(&ds);
        assert_eq!(m[&ExpertStrategy::Greedy], 0.5);
        assert_eq!(m[&ExpertStrategy::Average], 0.5);
        assert_eq!(expert_accuracy(&ds, ExpertStrategy::Honest), Err(EvalError::ExpertAbsent(ExpertStrategy::Honest)));
        let only = group("a", ExpertStrategy::Greedy, 1, 2);
        assert_eq!(per_expert_accuracy(&only).len(), 1);
    }

    fn game(strategy: ExpertStrategy, rounds: &[(bool, bool)]) -> GameRecord {
        let rounds: Vec<RoundRecord> = rounds
            .iter()
            .enumerate()
            .map(|(i, &(q, a))| RoundRecord::new(i as u32 + 1, format!("h{i}"), 0, q, a))
            .collect();
        GameRecord {
            dm_id: "x".into(),
            dm_kind: DmKind::Scripted,
            persona_id: None,
            expert_strategy: strategy,
            stage_index: 1,
            game_index: 1,
            cumulative_dm_points: rounds.iter().filter(|r| r.dm_payoff).count() as u32,
            rounds,
        }
    }

    #[test]
    fn winning_rate_fixture() {
        // 6 rounds: greedy (q, a) = (1,1) (0,1) (0,0); honest (1,0) (1,1) (1,1)
        let mut ds = InteractionDataset::new(crate::dataset::Provenance::Scripted);
        ds.games.push(game(ExpertStrategy::Greedy, &[(true, true), (false, true), (false, false)]));
        ds.games.push(game(ExpertStrategy::Honest, &[(true, false), (true, true), (true, true)]));
        let w = expert_winning_rates(&ds);
        let g = &w[&ExpertStrategy::Greedy];
        assert!((g.go_rate - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(g.go_rate_given_low_quality, Some(0.5));
        let h = &w[&ExpertStrategy::Honest];
        assert!((h.go_rate - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(h.go_rate_given_low_quality, None);
    }

    #[test]
    fn report_shapes() {
        let mut ds = group("a", ExpertStrategy::Greedy, 3, 4);
        ds.extend(group("b", ExpertStrategy::Greedy, 2, 4));
        let r = evaluate(&ds, 100, 1).unwrap();
        assert_eq!(r.n_players, 2);
        assert_eq!(r.n_decisions, 8);
        let (lo, hi) = r.ci95.unwrap();
        assert!(lo <= r.overall_accuracy && r.overall_accuracy <= hi);
        assert!(r.table().contains("accuracy[greedy]"));
        assert_eq!(r.metric_lines(true).len(), 5 + 1 + 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn duplicating_a_pair_changes_nothing(seed in 0u64..1000, dup in 1usize..4) {
            let mut rng = seeded(seed);
            let ds: Vec<Decision> = (0..60)
                .map(|i| d(&format!("p{}", i % 5), ExpertStrategy::ALL[i % 3], rng.random(), rng.random_bool(0.5)))
                .collect();
            let base = accuracy(&ds).unwrap();
            let mut more = ds.clone();
            for x in ds.iter().filter(|x| x.dm_id == "p1") {
                for _ in 0..dup {
                    more.push(x.clone());
                }
            }
            prop_assert!((accuracy(&more).unwrap() - base).abs() < 1e-12);
            let e = ece(&ds.iter().map(|x| x.prob).collect::<Vec<_>>(), &ds.iter().map(|x| x.truth).collect::<Vec<_>>(), 10);
            prop_assert!((0.0..=0.5).contains(&e));
            let perfect = ds.iter().map(|x| if x.truth { 1.0 } else { 0.0 }).collect::<Vec<_>>();
            prop_assert_eq!(ece(&perfect, &ds.iter().map(|x| x.truth).collect::<Vec<_>>(), 10), 0.0);
        }
    }
}
