//! TOML run configuration. Every field has a default; a file only needs the
//! values it changes.
//!
//! ```toml
//! seed = 7
//!
//! [encoder]
//! model_dim = 32
//! max_len = 64
//!
//! [contrastive]
//! tau = 0.05
//!
//! [head]
//! hidden = 64
//! freeze_encoder = true
//!
//! [data]
//! stopwords_extra = "extra_stopwords.txt"
//!
//! [serve]
//! port = 8080
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simrec_core::contrastive::ContrastiveConfig;
use simrec_core::encoder::{EncoderSpec, ToyConfig, DEFAULT_MAX_LEN};
use simrec_core::recommender::HeadConfig;

use crate::error::{Error, Result};

/// Environment variable consulted when `--config` is absent.
pub const CONFIG_ENV: &str = "SIMREC_CONFIG";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub layers: usize,
    pub heads: usize,
    pub model_dim: usize,
    pub ff_dim: usize,
    pub max_len: usize,
    pub vocab_min_count: usize,
    pub vocab_max_size: usize,
    /// Seed for weight initialisation.
    pub seed: u64,
}

impl Default for EncoderSection {
    fn default() -> Self {
        Self {
            layers: 2,
            heads: 2,
            model_dim: 32,
            ff_dim: 64,
            max_len: DEFAULT_MAX_LEN,
            vocab_min_count: 1,
            vocab_max_size: 30_000,
            seed: 42,
        }
    }
}

impl EncoderSection {
    /// Toy-transformer spec; `vocab_size` is filled in when the vocabulary is built.
    pub fn spec(&self) -> EncoderSpec {
        EncoderSpec::toy(ToyConfig {
            layers: self.layers,
            heads: self.heads,
            model_dim: self.model_dim,
            ff_dim: self.ff_dim,
            vocab_size: 1,
            max_len: self.max_len,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub stopwords_extra: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub host: String,
    pub port: u16,
}

impl Default for ServeSection {
    fn default() -> Self {
        Self { host: "127.0.0.1".into(), port: 8080 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// When set, replaces the encoder, contrastive and head seeds.
    pub seed: Option<u64>,
    pub encoder: EncoderSection,
    pub contrastive: ContrastiveConfig,
    pub head: HeadConfig,
    pub data: DataSection,
    pub serve: ServeSection,
}

impl Config {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let mut cfg: Config =
            toml::from_str(text).map_err(|e| Error::Config { path: path.to_path_buf(), detail: e.to_string() })?;
        if let (Some(p), Some(dir)) = (&cfg.data.stopwords_extra, path.parent()) {
            if p.is_relative() {
                cfg.data.stopwords_extra = Some(dir.join(p));
            }
        }
        Ok(cfg.resolved())
    }

    /// Reads `path`, else the file named by `SIMREC_CONFIG`, else defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        match path.map(Path::to_path_buf).or(env) {
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                Self::from_toml(&text, &p)
            }
            None => Ok(Self::default()),
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if seed.is_some() {
            self.seed = seed;
        }
        self.resolved()
    }

    fn resolved(mut self) -> Self {
        if let Some(s) = self.seed {
            self.encoder.seed = s;
            self.contrastive.seed = s;
            self.head.seed = s;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_merges_over_defaults() {
        let text = "seed = 9\n[head]\nhidden = 16\n[contrastive]\ntau = 0.1\n";
        let cfg = Config::from_toml(text, Path::new("/tmp/x.toml")).unwrap();
        assert_eq!(cfg.head.hidden, 16);
        assert_eq!(cfg.head.dropout, HeadConfig::default().dropout);
        assert_eq!(cfg.contrastive.tau, 0.1);
        assert_eq!((cfg.encoder.seed, cfg.contrastive.seed, cfg.head.seed), (9, 9, 9));
        assert_eq!(cfg.with_seed(Some(3)).head.seed, 3);
    }

    #[test]
    fn unknown_key_is_config_error() {
        let err = Config::from_toml("[head]\nhiden = 3\n", Path::new("c.toml")).unwrap_err();
        assert_eq!(err.name(), "ConfigError");
    }
}
