use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::similarity::check_weights;

/// Which stages feed context retrieval besides entity matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchMode {
    /// Entity + scene.
    Es,
    /// Entity + event.
    Ee,
    /// Entity + event + scene.
    Ees,
}

impl MatchMode {
    pub fn uses_events(self) -> bool {
        matches!(self, MatchMode::Ee | MatchMode::Ees)
    }

    pub fn uses_scenes(self) -> bool {
        matches!(self, MatchMode::Es | MatchMode::Ees)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MatchMode::Es => "ES",
            MatchMode::Ee => "EE",
            MatchMode::Ees => "EES",
        }
    }
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MatchMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ES" => Ok(MatchMode::Es),
            "EE" => Ok(MatchMode::Ee),
            "EES" => Ok(MatchMode::Ees),
            _ => Err(ConfigError::BadValue {
                key: "mode".into(),
                value: s.into(),
            }),
        }
    }
}

/// How event candidates are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimilarityMode {
    Semantic,
    Action,
    SemanticAction,
}

impl SimilarityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityMode::Semantic => "semantic",
            SimilarityMode::Action => "action",
            SimilarityMode::SemanticAction => "semantic+action",
        }
    }
}

impl fmt::Display for SimilarityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimilarityMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "semantic" => Ok(SimilarityMode::Semantic),
            "action" => Ok(SimilarityMode::Action),
            "semantic+action" | "action+semantic" => Ok(SimilarityMode::SemanticAction),
            _ => Err(ConfigError::BadValue {
                key: "similarity".into(),
                value: s.into(),
            }),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}")]
    BadValue { key: String, value: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchConfig {
    pub mode: MatchMode,
    pub similarity: SimilarityMode,
    /// Action weight.
    pub w1: f64,
    /// Semantic weight.
    pub w2: f64,
    pub k_events: usize,
    pub k_scenes: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            mode: MatchMode::Ees,
            similarity: SimilarityMode::SemanticAction,
            w1: 0.5,
            w2: 0.5,
            k_events: 5,
            k_scenes: 5,
        }
    }
}

impl MatchConfig {
    pub fn with_modes(mut self, mode: MatchMode, similarity: SimilarityMode) -> Self {
        self.mode = mode;
        self.similarity = similarity;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.mode == MatchMode::Es && self.similarity != SimilarityMode::Semantic {
            return Err(ConfigError::Invalid(
                "ES mode has no event stage; similarity must be `semantic`".into(),
            ));
        }
        check_weights(self.w1, self.w2).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.k_events == 0 || self.k_scenes == 0 {
            return Err(ConfigError::Invalid("k_events and k_scenes must be positive".into()));
        }
        Ok(())
    }

    /// `(w1, w2)` actually applied to event scoring under the similarity mode.
    pub fn effective_weights(&self) -> (f64, f64) {
        match self.similarity {
            SimilarityMode::Semantic => (0.0, 1.0),
            SimilarityMode::Action => (1.0, 0.0),
            SimilarityMode::SemanticAction => (self.w1, self.w2),
        }
    }

    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    /// Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                message: "expected key=value".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || ConfigError::BadValue {
                key: key.into(),
                value: value.into(),
            };
            match key {
                "mode" => config.mode = value.parse()?,
                "similarity" => config.similarity = value.parse()?,
                "w1" => config.w1 = value.parse().map_err(|_| bad())?,
                "w2" => config.w2 = value.parse().map_err(|_| bad())?,
                "k_events" => config.k_events = value.parse().map_err(|_| bad())?,
                "k_scenes" => config.k_scenes = value.parse().map_err(|_| bad())?,
                other => return Err(ConfigError::UnknownKey(other.into())),
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_config_string(&self) -> String {
        format!(
            "mode={}\nsimilarity={}\nw1={}\nw2={}\nk_events={}\nk_scenes={}\n",
            self.mode, self.similarity, self.w1, self.w2, self.k_events, self.k_scenes
        )
    }
}
