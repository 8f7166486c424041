//! Hotel/review corpora: TSV loading and saving, and synthetic corpora for
//! offline runs.
//!
//! File schema: UTF-8, tab-separated, one row per review, header row
//! `hotel_id review_index score positive_text negative_text`. Extra columns
//! are ignored. Rows of a hotel may appear in any order but every index in
//! `0..R` must occur exactly once.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::game::{hotel_quality, Hotel, ScoredReview, SCORE_EPS};
use crate::rng::SimRng;

pub const DEFAULT_REVIEWS_PER_HOTEL: usize = 7;
pub const DEFAULT_TAU: f64 = 8.0;

const COLUMNS: [&str; 5] = ["hotel_id", "review_index", "score", "positive_text", "negative_text"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: missing column `{column}` in header")]
    MissingColumn { path: String, column: &'static str },
    #[error("{path}, line {line}: {reason}")]
    Row { path: String, line: u64, reason: String },
    #[error("{path}: hotel `{hotel_id}`: {reason}")]
    Hotel { path: String, hotel_id: String, reason: String },
    #[error("{path}: corpus has no hotels")]
    Empty { path: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub hotels: Vec<Hotel>,
    pub tau: f64,
    pub reviews_per_hotel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub hotels: usize,
    pub reviews: usize,
    pub high_quality: usize,
    pub high_quality_fraction: f64,
}

impl Corpus {
    pub fn summary(&self) -> CorpusSummary {
        let high = self.hotels.iter().filter(|h| hotel_quality(h, self.tau)).count();
        CorpusSummary {
            hotels: self.hotels.len(),
            reviews: self.hotels.iter().map(|h| h.reviews.len()).sum(),
            high_quality: high,
            high_quality_fraction: high as f64 / self.hotels.len().max(1) as f64,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        self.write_to(File::create(path)?)
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), CorpusError> {
        let mut out = csv::WriterBuilder::new().delimiter(b'\t').from_writer(w);
        out.write_record(COLUMNS)?;
        for hotel in &self.hotels {
            for (i, r) in hotel.reviews.iter().enumerate() {
                out.write_record([
                    hotel.hotel_id.as_str(),
                    &i.to_string(),
                    &r.score.to_string(),
                    &r.positive_text,
                    &r.negative_text,
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub fn load_corpus(path: &Path, tau: f64, reviews_per_hotel: usize) -> Result<Corpus, CorpusError> {
    read_corpus(File::open(path)?, &path.display().to_string(), tau, reviews_per_hotel)
}

pub fn read_corpus<R: Read>(
    input: R,
    name: &str,
    tau: f64,
    reviews_per_hotel: usize,
) -> Result<Corpus, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').flexible(true).from_reader(input);
    let headers = rdr.headers()?.clone();
    let mut col = [0usize; 5];
    for (slot, name_) in col.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name_)
            .ok_or(CorpusError::MissingColumn { path: name.to_string(), column: name_ })?;
    }

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<Option<ScoredReview>>> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |reason: String| CorpusError::Row { path: name.to_string(), line, reason };
        let field = |i: usize| record.get(col[i]).ok_or_else(|| row_err(format!("missing `{}` field", COLUMNS[i])));
        let hotel_id = field(0)?.to_string();
        if hotel_id.is_empty() {
            return Err(row_err("empty hotel_id".into()));
        }
        let index: usize = field(1)?
            .trim()
            .parse()
            .map_err(|e| row_err(format!("review_index: {e}")))?;
        let score: f64 = field(2)?.trim().parse().map_err(|e| row_err(format!("score: {e}")))?;
        let review = ScoredReview::new(field(3)?, field(4)?, score).map_err(|e| row_err(e.to_string()))?;
        if index >= reviews_per_hotel {
            return Err(row_err(format!(
                "review_index {index} out of range for {reviews_per_hotel} reviews per hotel"
            )));
        }
        let slots = rows.entry(hotel_id.clone()).or_insert_with(|| {
            order.push(hotel_id.clone());
            vec![None; reviews_per_hotel]
        });
        if slots[index].replace(review).is_some() {
            return Err(row_err(format!("duplicate review_index {index} for hotel `{hotel_id}`")));
        }
    }

    if order.is_empty() {
        return Err(CorpusError::Empty { path: name.to_string() });
    }
    let mut hotels = Vec::with_capacity(order.len());
    for hotel_id in order {
        let slots = rows.remove(&hotel_id).unwrap_or_default();
        let present = slots.iter().filter(|s| s.is_some()).count();
        if present != reviews_per_hotel {
            return Err(CorpusError::Hotel {
                path: name.to_string(),
                hotel_id,
                reason: format!("has {present} reviews, expected {reviews_per_hotel}"),
            });
        }
        hotels.push(Hotel { hotel_id, reviews: slots.into_iter().flatten().collect() });
    }
    Ok(Corpus { hotels, tau, reviews_per_hotel })
}

/// Review aspects. Each one has phrases graded from strongly negative to
/// strongly positive, so text sentiment tracks the score.
const ASPECTS: [(&str, [&str; 4]); 8] = [
    ("price", ["Far too expensive for what you get.", "A bit overpriced.", "Fair value for the money.", "Excellent value, a real bargain."]),
    ("staff", ["The staff were rude and unhelpful.", "Reception was slow to respond.", "Staff were friendly enough.", "The staff went out of their way to help us."]),
    ("room", ["The room was tiny and worn out.", "The room was a little cramped.", "Comfortable room with a decent bed.", "Spacious, beautifully furnished room."]),
    ("location", ["The location is remote and hard to reach.", "A long walk to the center.", "Good location near public transport.", "Perfect location right in the heart of the city."]),
    ("facilities", ["Nothing worked, the facilities are broken.", "The gym and pool were closed.", "Facilities were adequate.", "Great pool, spa and gym."]),
    ("sanitary", ["The bathroom was dirty and smelled bad.", "Cleaning was patchy.", "Clean and tidy.", "Spotless, the cleanest hotel we have stayed in."]),
    ("breakfast", ["Breakfast was inedible.", "Breakfast had little choice.", "A decent breakfast.", "An amazing breakfast buffet."]),
    ("noise", ["Unbearable noise all night.", "Some street noise at night.", "Quiet enough to sleep well.", "Perfectly quiet and peaceful."]),
];

fn grade(score: f64) -> usize {
    match score {
        s if s < 4.0 => 0,
        s if s < 6.5 => 1,
        s if s < 8.5 => 2,
        _ => 3,
    }
}

fn review_text(score: f64, tag: usize, rng: &mut SimRng) -> (String, String) {
    let g = grade(score);
    let a = rng.random_range(0..ASPECTS.len());
    let b = (a + 1 + rng.random_range(0..ASPECTS.len() - 1)) % ASPECTS.len();
    // the better-graded aspect goes in the positive text, the other one in
    // the negative text; high scores pull both up
    let pos_grade = (g + 1).min(3);
    let neg_grade = g.saturating_sub(1);
    let positive = format!("{} Stayed in room {}.", ASPECTS[a].1[pos_grade], 100 + tag);
    let negative = if g == 3 && rng.random_bool(0.5) {
        "Nothing to complain about.".to_string()
    } else {
        ASPECTS[b].1[neg_grade].to_string()
    };
    (positive, negative)
}

/// Synthetic corpus: each hotel's quality is drawn with probability
/// `high_fraction`, then review scores are drawn around a mean on the
/// matching side of the threshold until the realized mean agrees.
pub fn synth_corpus(n_hotels: usize, rng: &mut SimRng, high_fraction: f64) -> Corpus {
    let r = DEFAULT_REVIEWS_PER_HOTEL;
    let tau = DEFAULT_TAU;
    let noise = Normal::new(0.0, 1.0).expect("valid normal");
    let mut hotels = Vec::with_capacity(n_hotels);
    for h in 0..n_hotels {
        let high = rng.random_bool(high_fraction.clamp(0.0, 1.0));
        let scores = loop {
            let centre = if high { rng.random_range(8.2..9.6) } else { rng.random_range(4.0..7.8) };
            let scores: Vec<f64> = (0..r)
                .map(|_| {
                    let s: f64 = centre + noise.sample(rng);
                    ((s * 10.0).round() / 10.0).clamp(1.0, 10.0)
                })
                .collect();
            let mean = scores.iter().sum::<f64>() / r as f64;
            if (mean >= tau - SCORE_EPS) == high {
                break scores;
            }
        };
        let reviews = scores
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let (pos, neg) = review_text(s, h * r + i, rng);
                ScoredReview { positive_text: pos, negative_text: neg, score: s }
            })
            .collect();
        hotels.push(Hotel { hotel_id: format!("hotel_{h:05}"), reviews });
    }
    Corpus { hotels, tau, reviews_per_hotel: r }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ScoreOracle, StubOracle};
    use crate::rng::seeded;

    fn bytes(c: &Corpus) -> Vec<u8> {
        let mut v = Vec::new();
        c.write_to(&mut v).unwrap();
        v
    }

    #[test]
    fn synth_is_deterministic() {
        let a = synth_corpus(1068, &mut seeded(3), 0.5);
        let b = synth_corpus(1068, &mut seeded(3), 0.5);
        assert_eq!(bytes(&a), bytes(&b));
        for h in &a.hotels {
            h.validate(7).unwrap();
        }
    }

    #[test]
    fn synth_fraction() {
        let all = synth_corpus(50, &mut seeded(1), 1.0);
        assert_eq!(all.summary().high_quality, 50);
        let half = synth_corpus(200, &mut seeded(2), 0.5).summary().high_quality_fraction;
        assert!((0.36..=0.64).contains(&half), "{half}");
    }

    #[test]
    fn stub_recovers_synthetic_buckets() {
        let c = synth_corpus(100, &mut seeded(9), 0.5);
        let stub = StubOracle::from_corpus(&c, 0.0);
        for h in &c.hotels {
            for r in &h.reviews {
                let d = stub.distribution(&r.positive_text, &r.negative_text).unwrap();
                assert_eq!(d.mass(r.score.floor() as usize), 1.0);
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let c = synth_corpus(30, &mut seeded(4), 0.5);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.tsv");
        c.save(&p).unwrap();
        let back = load_corpus(&p, 8.0, 7).unwrap();
        assert_eq!(back, c);
        assert_eq!(bytes(&back), std::fs::read(&p).unwrap());
    }

    #[test]
    fn quoting_and_extra_columns() {
        let src = "extra\thotel_id\treview_index\tscore\tpositive_text\tnegative_text\n\
x\th1\t1\t8.5\t\"said \"\"great\"\"\"\tnone\n\
x\th1\t0\t9\tok\t\n";
        let c = read_corpus(src.as_bytes(), "mem", 8.0, 2).unwrap();
        assert_eq!(c.hotels.len(), 1);
        assert_eq!(c.hotels[0].reviews[0].score, 9.0);
        assert_eq!(c.hotels[0].reviews[1].positive_text, "said \"great\"");
    }

    #[test]
    fn short_hotel_is_named() {
        let mut src = String::from("hotel_id\treview_index\tscore\tpositive_text\tnegative_text\n");
        for i in 0..6 {
            src.push_str(&format!("short_one\t{i}\t8\tnice\t\n"));
        }
        let err = read_corpus(src.as_bytes(), "mem", 8.0, 7).unwrap_err();
        assert!(err.to_string().contains("short_one"), "{err}");
    }

    #[test]
    fn row_errors_carry_line_numbers() {
        let src = "hotel_id\treview_index\tscore\tpositive_text\tnegative_text\nh\t0\t11\tx\ty\n";
        let err = read_corpus(src.as_bytes(), "mem", 8.0, 1).unwrap_err();
        assert!(matches!(err, CorpusError::Row { line: 2, .. }), "{err}");
        let src = "hotel_id\tscore\n";
        assert!(matches!(read_corpus(src.as_bytes(), "mem", 8.0, 1), Err(CorpusError::MissingColumn { .. })));
    }
}
