//! Staged matching of a query-side entity/event/scene description against
//! the graph.
//!
//! 1. Raw entity types are normalized and every `(name, type)` pair is looked
//!    up through the entity query.
//! 2. Events the matched entities participate in, and the scenes those
//!    events belong to, are gathered as candidates.
//! 3. Candidate events are scored by a weighted mix of action similarity
//!    (best cosine over action-phrase pairs) and description similarity;
//!    candidate scenes by description similarity. The top `k` of each
//!    survive.
//! 4. Contexts linked to the matched entities and, depending on the mode, to
//!    a surviving event and a surviving scene are retrieved and ranked by
//!    the mean of their active component scores.

mod config;
mod normalize;

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::graph::{Direction, EdgeLabel, EntityType, Graph, GraphError, NodeId, NodeKind};
use crate::ingest::{errors_only, validate_record, EesRecord, Violation};
use crate::query::{build_context_query, build_entity_query, build_event_scene_query, run, QueryError, Value};
use crate::similarity::{
    cosine, event_score, rank_order, top_k, ActionExtractor, EmbedError, Embedding, EmbeddingProvider,
    SimilarityError,
};
use crate::text::normalize_name;

pub use config::{ConfigError, MatchConfig, MatchMode, SimilarityMode};
pub use normalize::{AliasError, TypeNormalizer};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid query record: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidRecord(Vec<Violation>),
    #[error("query entity list is empty")]
    NoQueryEntities,
}

/// Embedding and action-extraction providers used by one pipeline run.
/// Event and scene stages may use distinct embedders.
#[derive(Clone, Copy)]
pub struct Providers<'a> {
    pub events: &'a dyn EmbeddingProvider,
    pub scenes: &'a dyn EmbeddingProvider,
    pub extractor: &'a dyn ActionExtractor,
}

impl<'a> Providers<'a> {
    pub fn new(embedder: &'a dyn EmbeddingProvider, extractor: &'a dyn ActionExtractor) -> Self {
        Self {
            events: embedder,
            scenes: embedder,
            extractor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EntityMatch {
    /// Matched entity ids, ascending.
    pub matched: Vec<NodeId>,
    /// Query entities with no node of the same normalized type and name.
    pub unmatched: Vec<(String, EntityType)>,
}

/// Query-side event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventText {
    pub action: Option<String>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateEvent {
    pub id: NodeId,
    pub action: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateScene {
    pub id: NodeId,
    pub context_text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedContext {
    pub id: NodeId,
    pub key: String,
    pub total: f64,
    pub entity_overlap: f64,
    /// Best linked top-k event score; `None` when the mode has no event stage.
    pub event: Option<f64>,
    /// Best linked top-k scene score; `None` when the mode has no scene stage.
    pub scene: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContextResult {
    /// Every candidate context, ranked. Membership here is what counts as a
    /// match.
    pub ranked: Vec<RankedContext>,
    pub matched_entities: Vec<NodeId>,
    pub unmatched_entities: Vec<(String, EntityType)>,
    pub top_events: Vec<(NodeId, f64)>,
    pub top_scenes: Vec<(NodeId, f64)>,
    pub no_entity_match: bool,
}

impl ContextResult {
    pub fn ranked_ids(&self) -> Vec<NodeId> {
        self.ranked.iter().map(|r| r.id).collect()
    }

    /// 1-based rank of `id`, if it is a candidate.
    pub fn rank_of(&self, id: NodeId) -> Option<usize> {
        self.ranked.iter().position(|r| r.id == id).map(|p| p + 1)
    }
}

/// Normalizes the query types, runs the entity query and reports matched and
/// unmatched entities. Unmatched entities do not abort.
pub fn match_entities(
    query_entities: &[(String, String)],
    graph: &Graph,
    normalizer: &TypeNormalizer,
) -> Result<EntityMatch, PipelineError> {
    if query_entities.is_empty() {
        return Err(PipelineError::NoQueryEntities);
    }
    let normalized: Vec<(String, EntityType)> = query_entities
        .iter()
        .map(|(name, raw)| (normalize_name(name), normalizer.normalize(raw)))
        .filter(|(name, _)| !name.is_empty())
        .collect();
    if normalized.is_empty() {
        return Err(PipelineError::NoQueryEntities);
    }
    let table = run(&build_entity_query(&normalized)?, graph)?;
    let mut found: BTreeSet<(EntityType, String)> = BTreeSet::new();
    let mut matched = BTreeSet::new();
    for row in &table.rows {
        if let [Value::Int(id), Value::Text(t), Value::Text(name)] = row.as_slice() {
            matched.insert(NodeId(*id));
            if let Ok(t) = t.parse::<EntityType>() {
                found.insert((t, name.clone()));
            }
        }
    }
    let mut unmatched = Vec::new();
    for (name, t) in normalized {
        if !found.contains(&(t, name.clone())) && !unmatched.contains(&(name.clone(), t)) {
            unmatched.push((name, t));
        }
    }
    Ok(EntityMatch {
        matched: matched.into_iter().collect(),
        unmatched,
    })
}

/// Candidate events and scenes reachable from the matched entities.
pub fn gather_candidates(
    graph: &Graph,
    entity_ids: &[NodeId],
) -> Result<(Vec<CandidateEvent>, Vec<CandidateScene>), PipelineError> {
    let query = build_event_scene_query(entity_ids)?;
    let (events, scenes, _) = query.execute(graph)?;
    let text = |v: &Value| v.as_text().unwrap_or_default().to_string();
    let events = events
        .rows
        .iter()
        .filter_map(|row| {
            Some(CandidateEvent {
                id: row[0].as_id()?,
                action: text(&row[1]),
                description: text(&row[2]),
            })
        })
        .collect();
    let scenes = scenes
        .rows
        .iter()
        .filter_map(|row| {
            Some(CandidateScene {
                id: row[0].as_id()?,
                context_text: text(&row[1]),
            })
        })
        .collect();
    Ok((events, scenes))
}

fn action_phrases(action: Option<&str>, description: &str, extractor: &dyn ActionExtractor) -> Vec<String> {
    match action.map(str::trim).filter(|a| !a.is_empty()) {
        Some(a) => vec![a.to_string()],
        None => extractor.extract(description),
    }
}

struct EventFeatures {
    actions: Vec<Embedding>,
    description: Option<Embedding>,
}

fn event_features(
    action: Option<&str>,
    description: &str,
    want_action: bool,
    want_semantic: bool,
    providers: &Providers<'_>,
) -> Result<EventFeatures, PipelineError> {
    let actions = if want_action {
        action_phrases(action, description, providers.extractor)
            .iter()
            .map(|p| providers.events.embed(p))
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    let description = if want_semantic {
        Some(providers.events.embed(description)?)
    } else {
        None
    };
    Ok(EventFeatures { actions, description })
}

fn best_action_similarity(a: &[Embedding], b: &[Embedding]) -> Result<f64, SimilarityError> {
    let mut best: Option<f64> = None;
    for x in a {
        for y in b {
            let s = cosine(x, y)?;
            best = Some(best.map_or(s, |b: f64| b.max(s)));
        }
    }
    Ok(best.unwrap_or(0.0))
}

/// Scores every candidate event against the query events and keeps the top
/// `k_events`. A candidate's score is its best weighted score over all query
/// events.
pub fn match_events(
    query_events: &[EventText],
    candidates: &[CandidateEvent],
    config: &MatchConfig,
    providers: &Providers<'_>,
) -> Result<Vec<(NodeId, f64)>, PipelineError> {
    if query_events.is_empty() || candidates.is_empty() {
        return Ok(Vec::new());
    }
    let (w1, w2) = config.effective_weights();
    let (want_action, want_semantic) = (w1 > 0.0, w2 > 0.0);
    let queries = query_events
        .iter()
        .map(|q| event_features(q.action.as_deref(), &q.description, want_action, want_semantic, providers))
        .collect::<Result<Vec<_>, _>>()?;
    let mut scored = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let feats = event_features(
            Some(&cand.action),
            &cand.description,
            want_action,
            want_semantic,
            providers,
        )?;
        let mut best = f64::NEG_INFINITY;
        for q in &queries {
            let s_action = if want_action {
                best_action_similarity(&q.actions, &feats.actions)?
            } else {
                0.0
            };
            let s_semantic = match (&q.description, &feats.description) {
                (Some(a), Some(b)) => cosine(a, b)?,
                _ => 0.0,
            };
            best = best.max(event_score(s_action, s_semantic, w1, w2)?);
        }
        scored.push((cand.id, best));
    }
    Ok(top_k(&scored, config.k_events))
}

/// Scores candidate scenes by description cosine and keeps the top
/// `k_scenes`.
pub fn match_scenes(
    query_scene: &str,
    candidates: &[CandidateScene],
    config: &MatchConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<(NodeId, f64)>, PipelineError> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let query = provider.embed(query_scene)?;
    let scored = candidates
        .iter()
        .map(|c| Ok((c.id, cosine(&query, &provider.embed(&c.context_text)?)?)))
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(top_k(&scored, config.k_scenes))
}

/// Mean of the active component scores.
fn combine(entity_overlap: f64, event: Option<f64>, scene: Option<f64>) -> f64 {
    let parts: Vec<f64> = std::iter::once(entity_overlap).chain(event).chain(scene).collect();
    parts.iter().sum::<f64>() / parts.len() as f64
}

/// Retrieves candidate contexts through the context query and ranks them.
pub fn retrieve_context(
    graph: &Graph,
    matched_entities: &[NodeId],
    top_events: &[(NodeId, f64)],
    top_scenes: &[(NodeId, f64)],
    config: &MatchConfig,
) -> Result<ContextResult, PipelineError> {
    let mut result = ContextResult {
        matched_entities: matched_entities.to_vec(),
        top_events: top_events.to_vec(),
        top_scenes: top_scenes.to_vec(),
        ..ContextResult::default()
    };
    if matched_entities.is_empty() {
        result.no_entity_match = true;
        return Ok(result);
    }
    let event_ids: Vec<NodeId> = if config.mode.uses_events() {
        top_events.iter().map(|(id, _)| *id).collect()
    } else {
        Vec::new()
    };
    let scene_ids: Vec<NodeId> = if config.mode.uses_scenes() {
        top_scenes.iter().map(|(id, _)| *id).collect()
    } else {
        Vec::new()
    };
    let candidates = build_context_query(matched_entities, &event_ids, &scene_ids)?.execute(graph)?;

    let matched: BTreeSet<NodeId> = matched_entities.iter().copied().collect();
    let event_scores: HashMap<NodeId, f64> = top_events.iter().copied().collect();
    let scene_scores: HashMap<NodeId, f64> = top_scenes.iter().copied().collect();
    let best_linked = |linked: &[NodeId], scores: &HashMap<NodeId, f64>| {
        linked
            .iter()
            .filter_map(|id| scores.get(id).copied())
            .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))))
            .unwrap_or(0.0)
    };

    let mut ranked = Vec::with_capacity(candidates.len());
    for id in candidates {
        let linked = graph.neighbors(id, EdgeLabel::ContextOf, Direction::Out)?;
        let (mut entities, mut events, mut scenes) = (Vec::new(), Vec::new(), Vec::new());
        for n in linked {
            match graph.node(n).map(|node| node.kind()) {
                Some(NodeKind::Entity) => entities.push(n),
                Some(NodeKind::Event) => events.push(n),
                Some(NodeKind::Scene) => scenes.push(n),
                _ => {}
            }
        }
        let overlap = entities.iter().filter(|e| matched.contains(e)).count() as f64 / matched.len() as f64;
        let event = config.mode.uses_events().then(|| best_linked(&events, &event_scores));
        let scene = config.mode.uses_scenes().then(|| best_linked(&scenes, &scene_scores));
        ranked.push(RankedContext {
            id,
            key: graph.context(id).map(|c| c.key.clone()).unwrap_or_default(),
            total: combine(overlap, event, scene),
            entity_overlap: overlap,
            event,
            scene,
        });
    }
    ranked.sort_by(|a, b| rank_order(&(a.id, a.total), &(b.id, b.total)));
    result.ranked = ranked;
    Ok(result)
}

/// Runs every stage for one query record.
pub fn run_pipeline(
    record: &EesRecord,
    graph: &Graph,
    config: &MatchConfig,
    normalizer: &TypeNormalizer,
    providers: &Providers<'_>,
) -> Result<ContextResult, PipelineError> {
    config.validate()?;
    let errors = errors_only(validate_record(record));
    if !errors.is_empty() {
        return Err(PipelineError::InvalidRecord(errors));
    }
    let query_entities: Vec<(String, String)> = record
        .entities
        .iter()
        .map(|e| (e.name.clone(), e.entity_type.clone()))
        .collect();
    let entity_match = match_entities(&query_entities, graph, normalizer)?;
    if entity_match.matched.is_empty() {
        return Ok(ContextResult {
            unmatched_entities: entity_match.unmatched,
            no_entity_match: true,
            ..ContextResult::default()
        });
    }

    let (events, scenes) = gather_candidates(graph, &entity_match.matched)?;
    let top_events = if config.mode.uses_events() {
        let query_events: Vec<EventText> = record
            .events
            .iter()
            .map(|e| EventText {
                action: e.action.clone(),
                description: e.description.clone(),
            })
            .collect();
        match_events(&query_events, &events, config, providers)?
    } else {
        Vec::new()
    };
    let top_scenes = if config.mode.uses_scenes() {
        match_scenes(&record.scene.description, &scenes, config, providers.scenes)?
    } else {
        Vec::new()
    };

    let mut result = retrieve_context(graph, &entity_match.matched, &top_events, &top_scenes, config)?;
    result.unmatched_entities = entity_match.unmatched;
    Ok(result)
}
