//! Query text for the three matching stages: entity lookup, event/scene
//! gathering and context retrieval.

use std::collections::BTreeSet;

use crate::graph::{EdgeLabel, EntityType, Graph, NodeId, NodeKind};

use super::{run, Clause, IdFilter, NodePattern, Projection, QueryError, QueryPlan, ResultTable};

fn proj(var: &str, key: &str) -> Projection {
    Projection {
        var: var.into(),
        key: key.into(),
    }
}

fn id_list(ids: &[NodeId]) -> Vec<u64> {
    let set: BTreeSet<u64> = ids.iter().map(|id| id.0).collect();
    set.into_iter().collect()
}

fn hop_clause(
    anchor: (&str, NodeKind),
    edge: EdgeLabel,
    target: (&str, NodeKind),
    filter_var: &str,
    ids: &[NodeId],
    projections: Vec<Projection>,
) -> Clause {
    Clause {
        anchor: NodePattern {
            var: anchor.0.into(),
            label: anchor.1,
            props: Vec::new(),
        },
        hop: Some(super::Hop {
            edge,
            target: NodePattern {
                var: target.0.into(),
                label: target.1,
                props: Vec::new(),
            },
        }),
        filter: Some(IdFilter {
            var: filter_var.into(),
            ids: id_list(ids),
        }),
        projections,
    }
}

/// Entity lookup: one clause per entity pinning both type and name, joined
/// by `UNION`.
pub fn build_entity_query(entities: &[(String, EntityType)]) -> Result<String, QueryError> {
    if entities.is_empty() {
        return Err(QueryError::EmptyInput("entity list is empty"));
    }
    let clauses = entities
        .iter()
        .map(|(name, entity_type)| Clause {
            anchor: NodePattern {
                var: "e".into(),
                label: NodeKind::Entity,
                props: vec![
                    ("type".into(), entity_type.as_str().into()),
                    ("name".into(), name.clone()),
                ],
            },
            hop: None,
            filter: None,
            projections: vec![proj("e", "id"), proj("e", "type"), proj("e", "name")],
        })
        .collect();
    Ok(QueryPlan { clauses }.render())
}

/// Events in which any of the given entities participates.
pub fn build_events_query(entity_ids: &[NodeId]) -> Result<String, QueryError> {
    if entity_ids.is_empty() {
        return Err(QueryError::EmptyInput("entity id list is empty"));
    }
    let clause = hop_clause(
        ("e", NodeKind::Entity),
        EdgeLabel::ParticipatesIn,
        ("v", NodeKind::Event),
        "e",
        entity_ids,
        vec![proj("v", "id"), proj("v", "action"), proj("v", "description")],
    );
    Ok(QueryPlan { clauses: vec![clause] }.render())
}

/// Scenes that any of the given events is part of.
pub fn build_scenes_query(event_ids: &[NodeId]) -> Result<String, QueryError> {
    if event_ids.is_empty() {
        return Err(QueryError::EmptyInput("event id list is empty"));
    }
    let clause = hop_clause(
        ("v", NodeKind::Event),
        EdgeLabel::PartOf,
        ("s", NodeKind::Scene),
        "v",
        event_ids,
        vec![
            proj("s", "id"),
            proj("s", "context_text"),
            proj("s", "location"),
            proj("s", "time"),
        ],
    );
    Ok(QueryPlan { clauses: vec![clause] }.render())
}

/// Event/scene gathering for a set of matched entities. The scene query is
/// chained off the event ids the event query returns, since a single clause
/// spans one hop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSceneQuery {
    pub events_query: String,
}

impl EventSceneQuery {
    /// Runs the events query, then the scenes query over its results.
    /// Returns the two tables plus the scenes query text (absent when no
    /// events were found).
    pub fn execute(&self, graph: &Graph) -> Result<(ResultTable, ResultTable, Option<String>), QueryError> {
        let events = run(&self.events_query, graph)?;
        let event_ids = events.first_column_ids();
        if event_ids.is_empty() {
            let empty = ResultTable {
                columns: vec!["s.id".into(), "s.context_text".into(), "s.location".into(), "s.time".into()],
                rows: Vec::new(),
            };
            return Ok((events, empty, None));
        }
        let scenes_query = build_scenes_query(&event_ids)?;
        let scenes = run(&scenes_query, graph)?;
        Ok((events, scenes, Some(scenes_query)))
    }
}

pub fn build_event_scene_query(entity_ids: &[NodeId]) -> Result<EventSceneQuery, QueryError> {
    Ok(EventSceneQuery {
        events_query: build_events_query(entity_ids)?,
    })
}

/// Context retrieval: one query per non-empty id list. A context is a
/// candidate when it appears in every part (at least one linked node of each
/// listed kind).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextQuery {
    pub parts: Vec<String>,
}

impl ContextQuery {
    pub fn execute(&self, graph: &Graph) -> Result<Vec<NodeId>, QueryError> {
        let mut candidates: Option<BTreeSet<NodeId>> = None;
        for part in &self.parts {
            let ids: BTreeSet<NodeId> = run(part, graph)?.first_column_ids().into_iter().collect();
            candidates = Some(match candidates {
                None => ids,
                Some(acc) => acc.intersection(&ids).copied().collect(),
            });
        }
        Ok(candidates.unwrap_or_default().into_iter().collect())
    }
}

pub fn build_context_query(
    entity_ids: &[NodeId],
    event_ids: &[NodeId],
    scene_ids: &[NodeId],
) -> Result<ContextQuery, QueryError> {
    if entity_ids.is_empty() && event_ids.is_empty() && scene_ids.is_empty() {
        return Err(QueryError::EmptyInput("entity, event and scene id lists are all empty"));
    }
    let parts = [
        (entity_ids, NodeKind::Entity),
        (event_ids, NodeKind::Event),
        (scene_ids, NodeKind::Scene),
    ]
    .into_iter()
    .filter(|(ids, _)| !ids.is_empty())
    .map(|(ids, kind)| {
        let clause = hop_clause(
            ("c", NodeKind::Context),
            EdgeLabel::ContextOf,
            ("x", kind),
            "x",
            ids,
            vec![proj("c", "id")],
        );
        QueryPlan { clauses: vec![clause] }.render()
    })
    .collect();
    Ok(ContextQuery { parts })
}
