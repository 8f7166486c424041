//! Shared state of one command run: config, seed, inputs and the manifest.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context as _, Result};

use persuasion_core::dataset::InteractionDataset;
use persuasion_core::manifest::ManifestBuilder;
use persuasion_core::oracle::OracleCache;
use persuasion_core::predictor::{EncodedGame, FeatureEncoder};
use persuasion_core::{load_corpus, Corpus, RunConfig, ScoreOracle, StubOracle};

use crate::OracleArg;

pub struct Ctx {
    pub seed: u64,
    pub config: RunConfig,
    out: Option<PathBuf>,
    manifest_path: Option<PathBuf>,
    pub manifest: ManifestBuilder,
}

impl Ctx {
    pub fn new(
        command: &str,
        seed: Option<u64>,
        config_path: Option<&Path>,
        out: Option<PathBuf>,
        manifest_path: Option<PathBuf>,
    ) -> Result<Self> {
        let config = match config_path {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let seed = seed.unwrap_or(0);
        let mut manifest = ManifestBuilder::new(command, std::env::args().collect(), seed, config.clone());
        if let Some(p) = config_path {
            manifest.input(p);
        }
        Ok(Ctx { seed, config, out, manifest_path, manifest })
    }

    pub fn out(&self) -> Option<&Path> {
        self.out.as_deref()
    }

    pub fn require_out(&self) -> Result<PathBuf> {
        match &self.out {
            Some(p) => Ok(p.clone()),
            None => bail!("this command needs --out"),
        }
    }

    pub fn corpus(&mut self, path: &Path) -> Result<Corpus> {
        self.manifest.input(path);
        let game = &self.config.game;
        Ok(load_corpus(path, game.quality_threshold, game.reviews_per_hotel)?)
    }

    pub fn dataset(&mut self, path: &Path) -> Result<InteractionDataset> {
        self.manifest.input(path);
        InteractionDataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
    }

    pub fn oracle(&mut self, corpus: &Corpus, arg: &OracleArg) -> Result<Arc<dyn ScoreOracle>> {
        Ok(match &arg.oracle_cache {
            Some(p) => {
                self.manifest.input(p);
                Arc::new(OracleCache::load(p)?)
            }
            None => Arc::new(StubOracle::from_corpus(corpus, self.config.oracle.spread)),
        })
    }

    pub fn encode(&mut self, corpus: &Corpus, oracle: &OracleArg, ds: &InteractionDataset) -> Result<Vec<EncodedGame>> {
        let enc = FeatureEncoder::new(corpus, self.oracle(corpus, oracle)?);
        Ok(enc.encode_all(ds)?)
    }

    /// Manifest location for commands whose output is not `--out`.
    pub fn default_manifest(&mut self, path: PathBuf) {
        if self.manifest_path.is_none() && self.out.is_none() {
            self.manifest_path = Some(path);
        }
    }

    /// Writes the manifest next to the primary output, or where
    /// `--manifest` says. Commands without outputs write none unless asked.
    pub fn finish(self) -> Result<()> {
        let path = self
            .manifest_path
            .or_else(|| self.out.as_ref().map(|o| PathBuf::from(format!("{}.manifest.json", o.display()))));
        if let Some(path) = path {
            self.manifest.finish()?.save(&path).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}
