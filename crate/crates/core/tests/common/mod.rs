#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use ees_core::eval::LabeledQuery;
use ees_core::graph::{ContextLinks, EdgeLabel, EntityType, Graph, Node, NodeId, NodeKind};
use ees_core::ingest::EesRecord;
use ees_core::normalize_name;
use ees_core::query::Value;
use ees_core::similarity::{EmbedError, Embedding, EmbeddingProvider};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const NAMES: &[&str] = &[
    "Ada", "Bo", "Cy Lee", "Dee", "Eve \"E\" Moss", "Fay\\Gray", "Gus", " Hal ", "伊万", "Jo\tKay",
];
pub const ACTIONS: &[&str] = &["", "speech", "march", "vote", "launch", "dance"];
pub const TEXTS: &[&str] = &[
    "a speech in the square",
    "troops march at dawn",
    "voters queue outside",
    "rocket launch at night",
    "dancers on a stage",
    "line one\nline two",
];
pub const PLACES: &[&str] = &["Paris", "Oslo", "Lima"];

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn read_records(name: &str) -> Vec<EesRecord> {
    std::fs::read_to_string(data_path(name))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

pub fn read_queries(name: &str) -> Vec<LabeledQuery> {
    std::fs::read_to_string(data_path(name))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn pick_some<R: Rng>(rng: &mut R, pool: &[NodeId], lo: usize, hi: usize) -> Vec<NodeId> {
    let n = rng.random_range(lo..=hi).min(pool.len());
    pool.choose_multiple(rng, n).copied().collect()
}

fn opt<R: Rng>(rng: &mut R, pool: &[&'static str]) -> Option<&'static str> {
    rng.random_bool(0.5).then(|| *pool.choose(rng).unwrap())
}

/// Random well-formed graph with at most `max_nodes` nodes.
pub fn random_graph<R: Rng>(rng: &mut R, max_nodes: usize) -> Graph {
    let mut g = Graph::new();
    let budget = rng.random_range(4..=max_nodes.max(4));
    let n_entities = rng.random_range(1..=(budget / 4).max(1));
    let n_events = rng.random_range(1..=(budget / 4).max(1));
    let n_scenes = rng.random_range(1..=(budget / 4).max(1));
    let n_contexts = budget.saturating_sub(n_entities + n_events + n_scenes).min(budget / 4);

    let mut entities = Vec::new();
    for _ in 0..n_entities {
        let t = *EntityType::ALL.choose(rng).unwrap();
        let id = g.upsert_entity(t, NAMES.choose(rng).unwrap()).unwrap();
        if !entities.contains(&id) {
            entities.push(id);
        }
    }
    let mut events = Vec::new();
    for _ in 0..n_events {
        let who = pick_some(rng, &entities, 1, 3);
        let id = g
            .insert_event(&who, ACTIONS.choose(rng).unwrap(), TEXTS.choose(rng).unwrap())
            .unwrap();
        events.push(id);
    }
    let mut scenes = Vec::new();
    for _ in 0..n_scenes {
        let members = pick_some(rng, &events, 0, 3);
        let (loc, time) = (opt(rng, PLACES), opt(rng, &["dawn", "noon"]));
        scenes.push(g.insert_scene(&members, loc, time, TEXTS.choose(rng).unwrap()).unwrap());
    }
    for c in 0..n_contexts {
        let links = ContextLinks {
            entities: pick_some(rng, &entities, 1, 3),
            events: pick_some(rng, &events, 1, 3),
            scenes: pick_some(rng, &scenes, 1, 2),
        };
        g.insert_context(&format!("ctx{c}"), "background", opt(rng, &["2020"]), opt(rng, PLACES), &links)
            .unwrap();
    }
    // extra edges between existing nodes
    for _ in 0..rng.random_range(0..=budget / 4) {
        match rng.random_range(0..3) {
            0 => {
                let (e, v) = (*entities.choose(rng).unwrap(), *events.choose(rng).unwrap());
                g.add_edge(e, v, EdgeLabel::ParticipatesIn).unwrap();
            }
            1 => {
                let (v, s) = (*events.choose(rng).unwrap(), *scenes.choose(rng).unwrap());
                g.add_edge(v, s, EdgeLabel::PartOf).unwrap();
            }
            _ => {
                let contexts: Vec<NodeId> = g.contexts().map(|c| c.id).collect();
                if let Some(&c) = contexts.choose(rng) {
                    let targets: Vec<NodeId> = entities.iter().chain(&events).chain(&scenes).copied().collect();
                    g.add_edge(c, *targets.choose(rng).unwrap(), EdgeLabel::ContextOf).unwrap();
                }
            }
        }
    }
    g
}

pub fn ids_of_kind(g: &Graph, kind: NodeKind) -> Vec<NodeId> {
    g.nodes().iter().filter(|n| n.kind() == kind).map(Node::id).collect()
}

fn text(s: &str) -> Value {
    Value::Text(s.to_string())
}

fn opt_text(s: &Option<String>) -> Value {
    s.as_deref().map_or(Value::Null, text)
}

pub fn oracle_entities(g: &Graph, wanted: &[(String, EntityType)]) -> Vec<Vec<Value>> {
    let mut rows = BTreeSet::new();
    for node in g.nodes() {
        if let Node::Entity(e) = node {
            if wanted.iter().any(|(n, t)| *t == e.entity_type && normalize_name(n) == e.name) {
                rows.insert(vec![Value::Int(e.id.0), text(e.entity_type.as_str()), text(&e.name)]);
            }
        }
    }
    rows.into_iter().collect()
}

fn edge_targets(g: &Graph, label: EdgeLabel, sources: &[NodeId]) -> BTreeSet<NodeId> {
    g.edges()
        .filter(|e| e.label == label && sources.contains(&e.src))
        .map(|e| e.dst)
        .collect()
}

pub fn oracle_events(g: &Graph, entity_ids: &[NodeId]) -> Vec<Vec<Value>> {
    let rows: BTreeSet<Vec<Value>> = edge_targets(g, EdgeLabel::ParticipatesIn, entity_ids)
        .into_iter()
        .map(|id| {
            let v = g.event(id).unwrap();
            vec![Value::Int(id.0), text(&v.action), text(&v.description)]
        })
        .collect();
    rows.into_iter().collect()
}

pub fn oracle_scenes(g: &Graph, event_ids: &[NodeId]) -> Vec<Vec<Value>> {
    let rows: BTreeSet<Vec<Value>> = edge_targets(g, EdgeLabel::PartOf, event_ids)
        .into_iter()
        .map(|id| {
            let s = g.scene(id).unwrap();
            vec![Value::Int(id.0), text(&s.context_text), opt_text(&s.location), opt_text(&s.time)]
        })
        .collect();
    rows.into_iter().collect()
}

/// Contexts linked to at least one id of every non-empty list.
pub fn oracle_contexts(g: &Graph, lists: [&[NodeId]; 3]) -> Vec<NodeId> {
    g.contexts()
        .map(|c| c.id)
        .filter(|&c| {
            lists.iter().filter(|l| !l.is_empty()).all(|l| {
                g.edges()
                    .any(|e| e.src == c && e.label == EdgeLabel::ContextOf && l.contains(&e.dst))
            })
        })
        .collect()
}

/// Wraps a provider and multiplies every vector by a constant.
pub struct Scaled<P>(pub P, pub f64);

impl<P: EmbeddingProvider> EmbeddingProvider for Scaled<P> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        Ok(self.0.embed(text)?.scaled(self.1))
    }
}
