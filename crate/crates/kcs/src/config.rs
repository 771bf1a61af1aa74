//! The run configuration file: one TOML document bundling the encoder,
//! selector, decoding, training, and generator settings plus default
//! paths, so an experiment is reproducible from a single artifact.
//! Flags override config values; `KCS_CACHE_DIR` and `KCS_CHECKPOINT_DIR`
//! override the corresponding paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decoding::DecodeConfig;
use crate::encoder::EncoderSpec;
use crate::error::{KcsError, Result};
use crate::qgen::GeneratorSpec;
use crate::selector::{SelectorConfig, TrainConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Default corpus JSONL when a subcommand omits `--data`.
    pub data: Option<PathBuf>,
    /// Embedding-cache directory (precomputed backend and hash-encoder
    /// caching); overridable via `KCS_CACHE_DIR`.
    pub cache_dir: Option<PathBuf>,
    /// Default checkpoint directory for `train --out` and the commands
    /// that read `--checkpoint`; overridable via `KCS_CHECKPOINT_DIR`.
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed: when set it is stamped into every block's seed so one
    /// value controls all randomness in a run.
    pub seed: Option<u64>,
    pub paths: PathsConfig,
    pub encoder: EncoderSpec,
    pub selector: SelectorConfig,
    pub decode: DecodeConfig,
    pub train: TrainConfig,
    pub generator: GeneratorSpec,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KcsError::io(path, e))?;
        let config: RunConfig = toml::from_str(&text).map_err(|e| {
            KcsError::Config(format!("invalid config {}: {e}", path.display()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.selector.validate()?;
        self.decode.validate()?;
        self.train.validate()?;
        self.generator.validate()?;
        if self.selector.d != self.encoder.d {
            return Err(KcsError::Config(format!(
                "selector d ({}) must equal encoder d ({})",
                self.selector.d, self.encoder.d
            )));
        }
        if let Some(data) = &self.paths.data {
            if !data.exists() {
                return Err(KcsError::Config(format!(
                    "configured data path does not exist: {}",
                    data.display()
                )));
            }
        }
        Ok(())
    }

    /// Apply the `KCS_CACHE_DIR` / `KCS_CHECKPOINT_DIR` overrides.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os("KCS_CACHE_DIR") {
            self.paths.cache_dir = Some(PathBuf::from(dir));
        }
        if let Some(dir) = std::env::var_os("KCS_CHECKPOINT_DIR") {
            self.paths.checkpoint_dir = Some(PathBuf::from(dir));
        }
    }

    /// Stamp one seed into every block. `override_seed` (from `--seed`)
    /// wins over the config's own `seed`; with neither, block seeds stand
    /// as written.
    pub fn apply_seed(&mut self, override_seed: Option<u64>) {
        if let Some(seed) = override_seed.or(self.seed) {
            self.seed = Some(seed);
            self.encoder.seed = seed;
            self.selector.seed = seed;
            self.decode.seed = seed;
            self.train.seed = seed;
        }
    }

    /// The effective configuration for a run: file (or defaults), then
    /// environment, then the master seed.
    pub fn resolve(path: Option<&Path>, override_seed: Option<u64>) -> Result<Self> {
        let mut config = match path {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        config.apply_env();
        config.apply_seed(override_seed);
        Ok(config)
    }
}
