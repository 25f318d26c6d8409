use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::graph::EntityType;

const DEFAULT_ALIASES: &[(&str, EntityType)] = &[
    ("person", EntityType::Person),
    ("people", EntityType::Person),
    ("character", EntityType::Person),
    ("human", EntityType::Person),
    ("individual", EntityType::Person),
    ("figure", EntityType::Person),
    ("人物", EntityType::Person),
    ("organization", EntityType::Organization),
    ("organisation", EntityType::Organization),
    ("company", EntityType::Organization),
    ("corporation", EntityType::Organization),
    ("institution", EntityType::Organization),
    ("agency", EntityType::Organization),
    ("group", EntityType::Organization),
    ("party", EntityType::Organization),
    ("组织", EntityType::Organization),
    ("机构", EntityType::Organization),
    ("location", EntityType::Location),
    ("place", EntityType::Location),
    ("geographical area", EntityType::Location),
    ("geographic area", EntityType::Location),
    ("area", EntityType::Location),
    ("region", EntityType::Location),
    ("city", EntityType::Location),
    ("country", EntityType::Location),
    ("site", EntityType::Location),
    ("gpe", EntityType::Location),
    ("地点", EntityType::Location),
    ("object", EntityType::Object),
    ("item", EntityType::Object),
    ("entity", EntityType::Object),
    ("thing", EntityType::Object),
    ("product", EntityType::Object),
    ("vehicle", EntityType::Object),
    ("weapon", EntityType::Object),
    ("物体", EntityType::Object),
    ("document", EntityType::Document),
    ("text", EntityType::Document),
    ("file", EntityType::Document),
    ("report", EntityType::Document),
    ("certificate", EntityType::Document),
    ("文件", EntityType::Document),
    ("other", EntityType::Other),
];

#[derive(Debug, Error)]
pub enum AliasError {
    #[error("alias file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("alias file line {line}: {message}")]
    Malformed { line: usize, message: String },
}

fn alias_key(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Maps raw extractor types onto the six canonical categories.
///
/// Lookup trims, collapses inner whitespace and lowercases the raw type.
/// Unknown types map to [`EntityType::Other`].
#[derive(Debug, Clone)]
pub struct TypeNormalizer {
    aliases: HashMap<String, EntityType>,
}

impl Default for TypeNormalizer {
    fn default() -> Self {
        Self {
            aliases: DEFAULT_ALIASES.iter().map(|(k, t)| (k.to_string(), *t)).collect(),
        }
    }
}

impl TypeNormalizer {
    /// Normalizer without the built-in aliases; canonical names still map to
    /// themselves.
    pub fn empty() -> Self {
        Self {
            aliases: EntityType::ALL.iter().map(|t| (alias_key(t.as_str()), *t)).collect(),
        }
    }

    pub fn with_alias(mut self, raw: &str, canonical: EntityType) -> Self {
        self.insert(raw, canonical);
        self
    }

    pub fn insert(&mut self, raw: &str, canonical: EntityType) {
        self.aliases.insert(alias_key(raw), canonical);
    }

    /// Adds `raw = Canonical` lines on top of the current table. Blank lines
    /// and `#` comments are skipped.
    pub fn extend_from_str(&mut self, text: &str) -> Result<(), AliasError> {
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |message: String| AliasError::Malformed { line: idx + 1, message };
            let (raw, canonical) = line
                .split_once('=')
                .ok_or_else(|| malformed("expected `raw = Canonical`".into()))?;
            let canonical: EntityType = canonical.trim().parse().map_err(|e| malformed(format!("{e}")))?;
            if raw.trim().is_empty() {
                return Err(malformed("empty raw type".into()));
            }
            self.insert(raw, canonical);
        }
        Ok(())
    }

    /// Default table extended with the aliases in `path`.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, AliasError> {
        let mut normalizer = Self::default();
        normalizer.extend_from_str(&fs::read_to_string(path)?)?;
        Ok(normalizer)
    }

    pub fn normalize(&self, raw_type: &str) -> EntityType {
        self.aliases.get(&alias_key(raw_type)).copied().unwrap_or(EntityType::Other)
    }
}
