//! Choice prediction: per-round Go probabilities from game histories.
//!
//! Model file format: a text header terminated by a line `end`, then the
//! parameters as little-endian `f64`:
//!
//! ```text
//! persuasion-model v1
//! kind lstm
//! input 13
//! hidden 64
//! layers 2
//! params 67009
//! end
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

pub mod adam;
pub mod baseline;
pub mod features;
pub mod gradcheck;
pub mod lstm;
pub mod train;

pub use baseline::Logistic;
pub use features::{EncodedGame, FeatureEncoder, FeatureError, N_FEATURES};
pub use lstm::{Lstm, LstmShape, ShapeError};
pub use train::{train_baseline, train_lstm, EpochLog, TrainConfig, TrainError};

const MAGIC: &str = "persuasion-model v1";

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("not a model file (missing `{MAGIC}` header)")]
    Magic,
    #[error("model header: {0}")]
    Header(String),
    #[error("model body has {got} bytes, expected {expected}")]
    Body { expected: usize, got: usize },
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictorModel {
    Lstm(Lstm),
    Baseline(Logistic),
}

impl PredictorModel {
    pub fn kind(&self) -> &'static str {
        match self {
            PredictorModel::Lstm(_) => "lstm",
            PredictorModel::Baseline(_) => "baseline",
        }
    }

    /// Per-round Go probabilities, one vector per game.
    pub fn predict(&self, games: &[EncodedGame]) -> Vec<Vec<f64>> {
        match self {
            PredictorModel::Lstm(m) => games
                .chunks(64)
                .flat_map(|c| m.predict_batch(&c.iter().collect::<Vec<_>>()))
                .collect(),
            PredictorModel::Baseline(m) => games.iter().map(|g| m.predict(g)).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (header, params): (String, &[f64]) = match self {
            PredictorModel::Lstm(m) => {
                let s = m.shape();
                (
                    format!("kind lstm\ninput {}\nhidden {}\nlayers {}\nparams {}\n", s.input, s.hidden, s.layers, m.n_params()),
                    &m.params,
                )
            }
            PredictorModel::Baseline(m) => (format!("kind baseline\nparams {}\n", m.params.len()), &m.params),
        };
        let mut out = format!("{MAGIC}\n{header}end\n").into_bytes();
        for p in params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelFileError> {
        let end = b"\nend\n";
        let pos = bytes.windows(end.len()).position(|w| w == end).ok_or(ModelFileError::Magic)?;
        let header = std::str::from_utf8(&bytes[..pos]).map_err(|_| ModelFileError::Magic)?;
        let body = &bytes[pos + end.len()..];
        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(ModelFileError::Magic);
        }
        let mut fields = std::collections::HashMap::new();
        for line in lines {
            let (k, v) = line.split_once(' ').ok_or_else(|| ModelFileError::Header(format!("bad line `{line}`")))?;
            fields.insert(k, v);
        }
        let num = |k: &str| -> Result<usize, ModelFileError> {
            fields
                .get(k)
                .ok_or_else(|| ModelFileError::Header(format!("missing `{k}`")))?
                .parse()
                .map_err(|e| ModelFileError::Header(format!("`{k}`: {e}")))
        };
        let n = num("params")?;
        if body.len() != 8 * n {
            return Err(ModelFileError::Body { expected: 8 * n, got: body.len() });
        }
        let params: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        match fields.get("kind").copied() {
            Some("lstm") => {
                let shape = LstmShape { input: num("input")?, hidden: num("hidden")?, layers: num("layers")? };
                Ok(PredictorModel::Lstm(Lstm::from_params(shape, params)?))
            }
            Some("baseline") => {
                let params: [f64; 3] = params
                    .try_into()
                    .map_err(|_| ModelFileError::Header("baseline needs 3 parameters".into()))?;
                Ok(PredictorModel::Baseline(Logistic { params }))
            }
            other => Err(ModelFileError::Header(format!("unknown kind {other:?}"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelFileError> {
        Ok(fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self, ModelFileError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn model_file_round_trip() {
        let shape = LstmShape { input: N_FEATURES, hidden: 5, layers: 2 };
        let m = PredictorModel::Lstm(Lstm::init(shape, &mut seeded(1)).unwrap());
        let bytes = m.to_bytes();
        assert!(bytes.starts_with(b"persuasion-model v1\nkind lstm\ninput 13\nhidden 5\nlayers 2\n"));
        assert_eq!(PredictorModel::from_bytes(&bytes).unwrap(), m);
        let b = PredictorModel::Baseline(Logistic { params: [0.1, -3.0, 1e-300] });
        assert_eq!(PredictorModel::from_bytes(&b.to_bytes()).unwrap(), b);
        assert!(matches!(PredictorModel::from_bytes(&bytes[..bytes.len() - 1]), Err(ModelFileError::Body { .. })));
        assert!(matches!(PredictorModel::from_bytes(b"junk"), Err(ModelFileError::Magic)));
    }
}
