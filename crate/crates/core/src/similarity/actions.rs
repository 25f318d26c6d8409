use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::path::Path;

/// Pulls action phrases out of an event description.
pub trait ActionExtractor: Send + Sync {
    /// Ordered action phrases; never empty.
    fn extract(&self, description: &str) -> Vec<String>;
}

impl<A: ActionExtractor + ?Sized> ActionExtractor for &A {
    fn extract(&self, description: &str) -> Vec<String> {
        (**self).extract(description)
    }
}

fn is_separator(c: char) -> bool {
    if c.is_whitespace() || c.is_ascii_punctuation() {
        return true;
    }
    let cp = c as u32;
    matches!(
        cp,
        0x2000..=0x206F       // general punctuation: dashes, quotes, ellipsis
            | 0x3000..=0x303F // CJK symbols and punctuation
            | 0xFE30..=0xFE4F // CJK compatibility forms
            | 0xFF00..=0xFF0F
            | 0xFF1A..=0xFF20
            | 0xFF3B..=0xFF40
            | 0xFF5B..=0xFF65
    )
}

pub(crate) fn tokenize(text: &str) -> Vec<&str> {
    text.split(is_separator).filter(|t| !t.is_empty()).collect()
}

/// Lexicon-driven extractor: tokens (or multi-token phrases) found in the
/// lexicon, in text order, longest phrase first at each position. Falls back
/// to the whole description when nothing matches.
#[derive(Debug, Clone, Default)]
pub struct LexiconExtractor {
    // keyed by first token; each entry is a phrase's token list
    phrases: HashMap<String, Vec<Vec<String>>>,
}

impl LexiconExtractor {
    pub fn new<I, S>(phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let mut by_head: HashMap<String, Vec<Vec<String>>> = HashMap::new();
        for phrase in phrases {
            let tokens: Vec<String> = tokenize(phrase.as_ref()).into_iter().map(str::to_string).collect();
            if tokens.is_empty() || !seen.insert(tokens.clone()) {
                continue;
            }
            by_head.entry(tokens[0].clone()).or_default().push(tokens);
        }
        for list in by_head.values_mut() {
            list.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        }
        Self { phrases: by_head }
    }

    /// Parses lexicon text: one phrase per line, `#` starts a comment line.
    pub fn parse(text: &str) -> Self {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn from_file(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    pub fn len(&self) -> usize {
        self.phrases.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }
}

impl ActionExtractor for LexiconExtractor {
    fn extract(&self, description: &str) -> Vec<String> {
        let tokens = tokenize(description);
        let mut found = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let hit = self.phrases.get(tokens[i]).and_then(|candidates| {
                candidates
                    .iter()
                    .find(|p| p.len() <= tokens.len() - i && p.iter().zip(&tokens[i..]).all(|(a, b)| a == b))
            });
            match hit {
                Some(phrase) => {
                    found.push(phrase.join(" "));
                    i += phrase.len();
                }
                None => i += 1,
            }
        }
        if found.is_empty() {
            found.push(description.to_string());
        }
        found
    }
}
