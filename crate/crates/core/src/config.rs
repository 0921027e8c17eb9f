//! Run configuration, read from a TOML file.
//!
//! ```toml
//! seed = 42
//! output = "out"
//!
//! [data]
//! news = "news.tsv"
//! behaviors = "behaviors.tsv"
//! embeddings = "embeddings.emb"   # only needed for features.kind = "external"
//!
//! [transitions]
//! window_seconds = 1800
//!
//! [split]
//! kinds = ["warm", "cold"]
//! warm_fraction = 0.2
//! cold_fraction = 0.1
//!
//! [features]
//! kind = "tfidf"
//! max_vocab = 5000
//!
//! [model]
//! kinds = ["almm", "forbes", "oord"]
//!
//! [hyper]
//! latent_dim = 32
//!
//! [eval]
//! ks = [10, 20]
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, TfidfConfig};
use crate::models::{Hyperparams, ModelKind};
use crate::splits::SplitKind;
use crate::transitions::DEFAULT_WINDOW_SECONDS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub news: PathBuf,
    pub behaviors: PathBuf,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitionConfig {
    pub window_seconds: i64,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig {
            window_seconds: DEFAULT_WINDOW_SECONDS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub kinds: Vec<SplitKind>,
    pub warm_fraction: f64,
    pub cold_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            kinds: vec![SplitKind::Warm, SplitKind::Cold],
            warm_fraction: 0.2,
            cold_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
    pub min_token_len: usize,
    pub max_vocab: usize,
    pub stopwords: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let t = TfidfConfig::default();
        FeatureConfig {
            kind: FeatureKind::Tfidf,
            min_token_len: t.min_token_len,
            max_vocab: t.max_vocab,
            stopwords: t.stopwords,
        }
    }
}

impl FeatureConfig {
    pub fn tfidf(&self) -> TfidfConfig {
        TfidfConfig {
            min_token_len: self.min_token_len,
            max_vocab: self.max_vocab,
            stopwords: self.stopwords,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kinds: Vec<ModelKind>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kinds: ModelKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ks: vec![1, 5, 10, 20, 50, 100],
        }
    }
}

fn default_seed() -> u64 {
    42
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub data: DataPaths,
    #[serde(default)]
    pub transitions: TransitionConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub features: FeatureConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub hyper: Hyperparams,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl RunConfig {
    /// Config with default settings for the given input files.
    pub fn for_data(news: impl Into<PathBuf>, behaviors: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        RunConfig {
            seed: default_seed(),
            output: output.into(),
            data: DataPaths {
                news: news.into(),
                behaviors: behaviors.into(),
                embeddings: None,
            },
            transitions: TransitionConfig::default(),
            split: SplitConfig::default(),
            features: FeatureConfig::default(),
            model: ModelConfig::default(),
            hyper: Hyperparams::default(),
            eval: EvalConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<RunConfig> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut cfg.output);
        resolve(&mut cfg.data.news);
        resolve(&mut cfg.data.behaviors);
        if let Some(p) = cfg.data.embeddings.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        RunConfig::from_toml_str(&text, base)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks parameters and that every referenced input file exists.
    pub fn validate(&self) -> Result<()> {
        let mut paths = vec![&self.data.news, &self.data.behaviors];
        if self.features.kind == FeatureKind::External {
            match &self.data.embeddings {
                Some(p) => paths.push(p),
                None => {
                    return Err(Error::Config(
                        "features.kind = \"external\" needs data.embeddings".into(),
                    ))
                }
            }
        }
        for p in paths {
            if !p.is_file() {
                return Err(Error::Config(format!("input file not found: {}", p.display())));
            }
        }
        if self.transitions.window_seconds <= 0 {
            return Err(Error::Config("transitions.window_seconds must be positive".into()));
        }
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            return Err(Error::Config("eval.ks must be a non-empty list of K >= 1".into()));
        }
        if self.model.kinds.is_empty() || self.split.kinds.is_empty() {
            return Err(Error::Config("model.kinds and split.kinds must be non-empty".into()));
        }
        self.hyper.validate()
    }
}
