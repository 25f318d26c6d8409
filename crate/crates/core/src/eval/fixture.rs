//! Seeded synthetic corpus with planted gold contexts.
//!
//! Each context gets 2-4 entities of its own, 1-3 events with distinct
//! action words from [`ACTION_LEXICON`], and one scene. About half the
//! contexts also involve one entity from a small shared pool, so entity
//! lookup alone does not isolate a context, and about a third are covered by
//! a second record. Queries come in two flavours: verbatim copies of every
//! record, and perturbed copies whose event descriptions are token-shuffled
//! with the action field dropped, whose scene is paraphrased through a
//! synonym table, and whose entity types use aliases.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::{EesRecord, RecordContext, RecordEntity, RecordEvent, RecordScene};

use super::LabeledQuery;

pub const ACTION_LEXICON: &[&str] = &[
    "speech", "protest", "march", "rally", "parade", "salute", "handshake", "interview", "ceremony", "signing",
    "inspection", "launch", "rescue", "patrol", "drill", "landing", "broadcast", "vote", "strike", "meeting",
    "negotiation", "celebration", "funeral", "concert", "auction", "briefing", "convoy", "evacuation", "training",
    "exhibition", "summit", "dance", "prayer", "repair", "demonstration", "visit",
];

const SYLLABLES: &[&str] = &[
    "ar", "ven", "tol", "mira", "kas", "dor", "eli", "zan", "bru", "nok", "sel", "ta", "riv", "om", "quen", "lia",
    "gar", "pho", "stre", "wyn", "ul", "ces", "ind", "mar",
];

const SHARED_ENTITIES: &[(&str, &str)] = &[
    ("United Nations", "Organization"),
    ("Central Square", "Location"),
    ("National Guard", "Organization"),
    ("Harbor District", "Location"),
];

const TYPES: &[&str] = &["Person", "Person", "Person", "Organization", "Location", "Object", "Document"];

const FILLERS: &[&str] = &[
    "while reporters watch", "as the crowd cheers", "before noon", "amid heavy security", "under floodlights",
    "despite the rain", "in front of cameras", "after a long delay", "surrounded by supporters",
    "as sirens sound nearby",
];

/// Scene vocabulary: (word, synonym).
const SCENE_ADJECTIVES: &[(&str, &str)] = &[
    ("crowded", "packed"),
    ("bright", "sunny"),
    ("dark", "dim"),
    ("quiet", "calm"),
    ("busy", "bustling"),
    ("wet", "rainy"),
    ("cold", "chilly"),
    ("smoky", "hazy"),
];

const SCENE_NOUNS: &[(&str, &str)] = &[
    ("street", "road"),
    ("square", "plaza"),
    ("harbor", "port"),
    ("stage", "platform"),
    ("hall", "auditorium"),
    ("bridge", "overpass"),
    ("market", "bazaar"),
    ("field", "meadow"),
    ("flags", "banners"),
    ("soldiers", "troops"),
    ("tents", "shelters"),
    ("lights", "lamps"),
    ("trucks", "lorries"),
    ("cameras", "lenses"),
    ("mountains", "peaks"),
    ("buildings", "towers"),
];

const TYPE_ALIASES: &[(&str, &str)] = &[
    ("Person", "Character"),
    ("Organization", "Company"),
    ("Location", "Place"),
    ("Object", "Item"),
    ("Document", "Report"),
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixtureError {
    #[error("fixture needs at least 2 contexts, got {0}")]
    TooFewContexts(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fixture {
    /// KG-building records, context blocks included.
    pub corpus: Vec<EesRecord>,
    pub verbatim: Vec<LabeledQuery>,
    pub perturbed: Vec<LabeledQuery>,
}

impl Fixture {
    /// Verbatim queries followed by perturbed ones.
    pub fn queries(&self) -> Vec<LabeledQuery> {
        self.verbatim.iter().chain(&self.perturbed).cloned().collect()
    }

    pub fn lexicon() -> Vec<String> {
        ACTION_LEXICON.iter().map(|s| s.to_string()).collect()
    }

    pub fn corpus_jsonl(&self) -> String {
        self.corpus.iter().map(|r| r.to_json_line() + "\n").collect()
    }

    pub fn queries_jsonl(&self) -> String {
        self.queries().iter().map(|q| q.to_json_line() + "\n").collect()
    }

    pub fn lexicon_text() -> String {
        let mut out = String::from("# action lexicon for the synthetic fixture\n");
        for word in ACTION_LEXICON {
            out.push_str(word);
            out.push('\n');
        }
        out
    }
}

struct Generator {
    rng: ChaCha8Rng,
    used_names: HashSet<String>,
}

impl Generator {
    fn word(&mut self) -> String {
        let n = self.rng.random_range(2..=3);
        let mut w: String = (0..n).map(|_| *SYLLABLES.choose(&mut self.rng).unwrap()).collect();
        w[..1].make_ascii_uppercase();
        w
    }

    fn unique_name(&mut self) -> String {
        loop {
            let name = format!("{} {}", self.word(), self.word());
            if self.used_names.insert(name.clone()) {
                return name;
            }
        }
    }

    fn scene(&mut self) -> Vec<&'static str> {
        let adj: Vec<_> = SCENE_ADJECTIVES.choose_multiple(&mut self.rng, 2).map(|p| p.0).collect();
        let nouns: Vec<_> = SCENE_NOUNS.choose_multiple(&mut self.rng, 4).map(|p| p.0).collect();
        // "A <adj> <noun> with <noun> and <noun> beside a <adj> <noun>"
        vec![adj[0], nouns[0], nouns[1], nouns[2], adj[1], nouns[3]]
    }
}

fn scene_text(words: &[&str]) -> String {
    format!(
        "A {} {} with {} and {} beside a {} {}",
        words[0], words[1], words[2], words[3], words[4], words[5]
    )
}

fn synonym(word: &str) -> Option<&'static str> {
    SCENE_ADJECTIVES
        .iter()
        .chain(SCENE_NOUNS)
        .find(|(w, _)| *w == word)
        .map(|(_, s)| *s)
}

fn alias_type(raw: &str) -> String {
    TYPE_ALIASES
        .iter()
        .find(|(canonical, _)| *canonical == raw)
        .map_or(raw, |(_, alias)| alias)
        .to_string()
}

struct PlannedContext {
    id: String,
    entities: Vec<(String, String)>,
    shared: Option<(String, String)>,
    events: Vec<(Vec<String>, String, String)>,
    scene: Vec<&'static str>,
    description: String,
}

/// Deterministic fixture: the same `(n_contexts, seed)` always yields the
/// same corpus and queries.
pub fn generate_fixture(n_contexts: usize, seed: u64) -> Result<Fixture, FixtureError> {
    if n_contexts < 2 {
        return Err(FixtureError::TooFewContexts(n_contexts));
    }
    let mut g = Generator {
        rng: ChaCha8Rng::seed_from_u64(seed),
        used_names: SHARED_ENTITIES.iter().map(|(n, _)| n.to_string()).collect(),
    };

    let mut plans = Vec::with_capacity(n_contexts);
    for c in 0..n_contexts {
        let n_entities = g.rng.random_range(2..=4);
        let entities: Vec<(String, String)> = (0..n_entities)
            .map(|_| (g.unique_name(), TYPES.choose(&mut g.rng).unwrap().to_string()))
            .collect();
        let shared = g
            .rng
            .random_bool(0.5)
            .then(|| SHARED_ENTITIES.choose(&mut g.rng).unwrap())
            .map(|(n, t)| (n.to_string(), t.to_string()));

        let n_events = g.rng.random_range(1..=3);
        let actions: Vec<&str> = ACTION_LEXICON.choose_multiple(&mut g.rng, n_events).copied().collect();
        let mut events = Vec::with_capacity(n_events);
        for (i, action) in actions.into_iter().enumerate() {
            let a = &entities[i % entities.len()].0;
            let b = &entities[(i + 1) % entities.len()].0;
            let mut participants = vec![a.clone(), b.clone()];
            let mut description = format!("{a} joins a {action} with {b}");
            if i == 0 {
                if let Some((shared_name, _)) = &shared {
                    participants.push(shared_name.clone());
                    description.push_str(&format!(" near the {shared_name}"));
                }
            }
            description.push(' ');
            description.push_str(FILLERS.choose(&mut g.rng).unwrap());
            events.push((participants, action.to_string(), description));
        }
        let scene = g.scene();
        plans.push(PlannedContext {
            id: format!("ctx-{c:04}"),
            description: format!("Background report {c} on {} and {}", entities[0].0, events[0].1),
            entities,
            shared,
            events,
            scene,
        });
    }

    let mut corpus = Vec::new();
    for plan in &plans {
        let mut entities: Vec<RecordEntity> = plan
            .entities
            .iter()
            .map(|(name, t)| RecordEntity {
                name: name.clone(),
                entity_type: t.clone(),
            })
            .collect();
        if let Some((name, t)) = &plan.shared {
            entities.push(RecordEntity {
                name: name.clone(),
                entity_type: t.clone(),
            });
        }
        let context = RecordContext {
            context_id: plan.id.clone(),
            description: plan.description.clone(),
            time: None,
            location: None,
        };
        let events: Vec<RecordEvent> = plan
            .events
            .iter()
            .map(|(names, action, description)| RecordEvent {
                entity_names: names.clone(),
                action: Some(action.clone()),
                description: description.clone(),
            })
            .collect();
        corpus.push(EesRecord {
            record_id: format!("{}-a", plan.id),
            entities: entities.clone(),
            events: events.clone(),
            scene: RecordScene {
                description: scene_text(&plan.scene),
                location: None,
                time: None,
            },
            context: Some(context.clone()),
        });

        // second image of the same situation: last event only, different framing
        if g.rng.random_bool(1.0 / 3.0) {
            let last = events.last().cloned().expect("at least one event");
            let keep: HashSet<&String> = last.entity_names.iter().collect();
            let mut scene = plan.scene.clone();
            scene.swap(2, 3);
            scene[5] = SCENE_NOUNS.choose(&mut g.rng).unwrap().0;
            corpus.push(EesRecord {
                record_id: format!("{}-b", plan.id),
                entities: entities.iter().filter(|e| keep.contains(&e.name)).cloned().collect(),
                events: vec![last],
                scene: RecordScene {
                    description: scene_text(&scene),
                    location: None,
                    time: None,
                },
                context: Some(context),
            });
        }
    }

    let mut verbatim = Vec::with_capacity(corpus.len());
    let mut perturbed = Vec::with_capacity(corpus.len());
    for record in &corpus {
        let gold = record.context.as_ref().expect("corpus records carry contexts").context_id.clone();
        let mut query = record.clone();
        query.context = None;
        query.record_id = format!("q-{}-v", record.record_id);
        verbatim.push(LabeledQuery {
            gold_context_id: gold.clone(),
            record: query.clone(),
        });

        query.record_id = format!("q-{}-p", record.record_id);
        for entity in &mut query.entities {
            entity.entity_type = alias_type(&entity.entity_type);
        }
        for event in &mut query.events {
            let mut tokens: Vec<&str> = event.description.split_whitespace().collect();
            tokens.shuffle(&mut g.rng);
            event.description = tokens.join(" ");
            event.action = None;
        }
        let paraphrased: Vec<String> = query
            .scene
            .description
            .split(' ')
            .map(|w| match synonym(w) {
                Some(s) if g.rng.random_bool(0.5) => s.to_string(),
                _ => w.to_string(),
            })
            .collect();
        query.scene.description = paraphrased.join(" ");
        perturbed.push(LabeledQuery {
            gold_context_id: gold,
            record: query,
        });
    }

    Ok(Fixture {
        corpus,
        verbatim,
        perturbed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::validate_record;

    #[test]
    fn deterministic() {
        let a = generate_fixture(20, 42).unwrap();
        let b = generate_fixture(20, 42).unwrap();
        assert_eq!(a.corpus_jsonl(), b.corpus_jsonl());
        assert_eq!(a.queries_jsonl(), b.queries_jsonl());
        assert_ne!(a.corpus_jsonl(), generate_fixture(20, 43).unwrap().corpus_jsonl());
    }

    #[test]
    fn too_few_contexts() {
        assert_eq!(generate_fixture(1, 42), Err(FixtureError::TooFewContexts(1)));
    }

    #[test]
    fn shape() {
        let f = generate_fixture(30, 7).unwrap();
        let contexts: HashSet<_> = f
            .corpus
            .iter()
            .map(|r| r.context.as_ref().unwrap().context_id.clone())
            .collect();
        assert_eq!(contexts.len(), 30);
        assert_eq!(f.verbatim.len(), f.corpus.len());
        assert_eq!(f.perturbed.len(), f.corpus.len());
        for r in &f.corpus {
            assert!(validate_record(r).is_empty(), "{:?}", validate_record(r));
            assert!((1..=3).contains(&r.events.len()));
            let actions: HashSet<_> = r.events.iter().map(|e| e.action.clone()).collect();
            assert_eq!(actions.len(), r.events.len());
        }
        for q in f.queries() {
            assert!(q.record.context.is_none());
            assert!(validate_record(&q.record).is_empty());
        }
    }
}
