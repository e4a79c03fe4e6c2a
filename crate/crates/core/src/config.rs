//! Pipeline configuration, read from a TOML file.
//!
//! ```toml
//! [source_language]
//! lexicon = "lang_a/lexicon.tsv"
//! paradigms = "lang_a/paradigms.txt"
//! treebank = "lang_a/treebank.conllu"
//!
//! [target_language]
//! lexicon = "lang_b/lexicon.tsv"
//! paradigms = "lang_b/paradigms.txt"
//! templates = "lang_b/templates.txt"
//! text = "lang_b/text.txt"
//! gold = "lang_b/gold.cohorts"
//!
//! [paths]
//! mapping = "mapping.txt"
//! out = "../out"
//!
//! [model]
//! hidden_dim = 32
//!
//! [train]
//! steps = 800
//!
//! [expand]
//! per_template = 20
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seq2seq::{ModelConfig, TrainConfig};
use crate::tplgen::ExpansionConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("config has no `{0}` entry")]
    MissingKey(&'static str),
    #[error("`{key}` points to {path}, which does not exist")]
    MissingInput { key: &'static str, path: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceLanguage {
    pub lexicon: Option<PathBuf>,
    pub paradigms: Option<PathBuf>,
    pub treebank: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetLanguage {
    pub lexicon: Option<PathBuf>,
    pub paradigms: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    /// Raw evaluation text, one sentence per line.
    pub text: Option<PathBuf>,
    /// Disambiguated cohorts, one reading per cohort.
    pub gold: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub mapping: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            mapping: None,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub source_language: SourceLanguage,
    pub target_language: TargetLanguage,
    pub paths: Paths,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub expand: ExpansionConfig,
}

/// Names an input path of the config for error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Input {
    SourceLexicon,
    SourceParadigms,
    Treebank,
    TargetLexicon,
    TargetParadigms,
    Templates,
    TargetText,
    Gold,
    Mapping,
}

impl Input {
    pub fn key(self) -> &'static str {
        match self {
            Input::SourceLexicon => "source_language.lexicon",
            Input::SourceParadigms => "source_language.paradigms",
            Input::Treebank => "source_language.treebank",
            Input::TargetLexicon => "target_language.lexicon",
            Input::TargetParadigms => "target_language.paradigms",
            Input::Templates => "target_language.templates",
            Input::TargetText => "target_language.text",
            Input::Gold => "target_language.gold",
            Input::Mapping => "paths.mapping",
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_owned(),
            message: e.message().to_owned(),
        })?;
        for p in [
            &mut cfg.source_language.lexicon,
            &mut cfg.source_language.paradigms,
            &mut cfg.source_language.treebank,
            &mut cfg.target_language.lexicon,
            &mut cfg.target_language.paradigms,
            &mut cfg.target_language.templates,
            &mut cfg.target_language.text,
            &mut cfg.target_language.gold,
            &mut cfg.paths.mapping,
        ]
        .into_iter()
        .flatten()
        {
            resolve(base_dir, p);
        }
        resolve(base_dir, &mut cfg.paths.out);
        cfg.model
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("[model] {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Seeds both model initialization and template expansion.
    pub fn set_seed(&mut self, seed: u64) {
        self.model.seed = seed;
        self.expand.seed = seed;
    }

    fn slot(&self, input: Input) -> Option<&PathBuf> {
        match input {
            Input::SourceLexicon => self.source_language.lexicon.as_ref(),
            Input::SourceParadigms => self.source_language.paradigms.as_ref(),
            Input::Treebank => self.source_language.treebank.as_ref(),
            Input::TargetLexicon => self.target_language.lexicon.as_ref(),
            Input::TargetParadigms => self.target_language.paradigms.as_ref(),
            Input::Templates => self.target_language.templates.as_ref(),
            Input::TargetText => self.target_language.text.as_ref(),
            Input::Gold => self.target_language.gold.as_ref(),
            Input::Mapping => self.paths.mapping.as_ref(),
        }
    }

    /// The configured path of `input`, which must exist.
    pub fn input(&self, input: Input) -> Result<&Path, ConfigError> {
        let path = self
            .slot(input)
            .ok_or(ConfigError::MissingKey(input.key()))?;
        if !path.exists() {
            return Err(ConfigError::MissingInput {
                key: input.key(),
                path: path.display().to_string(),
            });
        }
        Ok(path)
    }

    /// Checks several inputs up front so a command fails before doing work.
    pub fn require(&self, inputs: &[Input]) -> Result<(), ConfigError> {
        inputs.iter().try_for_each(|&i| self.input(i).map(|_| ()))
    }

    pub fn out_dir(&self) -> &Path {
        &self.paths.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq2seq::{CellKind, OptimizerKind};

    #[test]
    fn sections_and_relative_paths() {
        let text = r#"
[source_language]
lexicon = "a/lex.tsv"

[paths]
mapping = "/abs/map.txt"
out = "run"

[model]
hidden_dim = 16
cell = "gru"

[train]
optimizer = "adam"
steps = 7

[expand]
per_template = 3
"#;
        let cfg = PipelineConfig::parse(text, "t.toml", Path::new("/cfg")).unwrap();
        assert_eq!(
            cfg.source_language.lexicon,
            Some(PathBuf::from("/cfg/a/lex.tsv"))
        );
        assert_eq!(cfg.paths.mapping, Some(PathBuf::from("/abs/map.txt")));
        assert_eq!(cfg.out_dir(), Path::new("/cfg/run"));
        assert_eq!(cfg.model.hidden_dim, 16);
        assert_eq!(cfg.model.emb_dim, ModelConfig::default().emb_dim);
        assert_eq!(cfg.model.cell, CellKind::Gru);
        assert_eq!(cfg.train.optimizer, OptimizerKind::Adam);
        assert_eq!(cfg.train.steps, 7);
        assert_eq!(cfg.expand.per_template, 3);
        assert_eq!(cfg.expand.max_attempts, 100);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let base = Path::new(".");
        assert!(PipelineConfig::parse("[model]\nhiden_dim = 3\n", "t", base).is_err());
        assert!(PipelineConfig::parse("[model]\nhidden_dim = 0\n", "t", base).is_err());
        assert!(PipelineConfig::parse("[nope]\n", "t", base).is_err());
        assert!(PipelineConfig::parse("[train]\noptimizer = \"rmsprop\"\n", "t", base).is_err());
    }

    #[test]
    fn missing_inputs_are_named() {
        let cfg =
            PipelineConfig::parse("[paths]\nmapping = \"nowhere.txt\"\n", "t", Path::new("/x"))
                .unwrap();
        match cfg.input(Input::Mapping) {
            Err(ConfigError::MissingInput { key, path }) => {
                assert_eq!(key, "paths.mapping");
                assert_eq!(path, "/x/nowhere.txt");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            cfg.input(Input::Treebank),
            Err(ConfigError::MissingKey("source_language.treebank"))
        ));
    }

    #[test]
    fn seed_override_reaches_model_and_expansion() {
        let mut cfg = PipelineConfig::default();
        cfg.set_seed(42);
        assert_eq!((cfg.model.seed, cfg.expand.seed), (42, 42));
    }
}
