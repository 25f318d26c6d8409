use std::collections::BTreeSet;

use crate::graph::{Direction, EntityType, Graph, Node, NodeId};
use crate::text::normalize_name;

use super::{parse, Clause, NodePattern, QueryError, QueryPlan};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Null,
    Int(u64),
    Text(String),
}

impl Value {
    pub fn as_id(&self) -> Option<NodeId> {
        match self {
            Value::Int(n) => Some(NodeId(*n)),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }
}

/// Rectangular result, rows distinct and ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultTable {
    /// Node ids from the first column.
    pub fn first_column_ids(&self) -> Vec<NodeId> {
        self.rows.iter().filter_map(|r| r.first().and_then(Value::as_id)).collect()
    }
}

/// Property value of a node, or `None` if the label has no such property.
pub(crate) fn property(node: &Node, key: &str) -> Option<Value> {
    let text = |s: &str| Some(Value::Text(s.to_string()));
    let opt = |s: &Option<String>| Some(s.as_deref().map_or(Value::Null, |v| Value::Text(v.to_string())));
    if key == "id" {
        return Some(Value::Int(node.id().0));
    }
    match (node, key) {
        (Node::Entity(e), "type") => text(e.entity_type.as_str()),
        (Node::Entity(e), "name") => text(&e.name),
        (Node::Event(ev), "action") => text(&ev.action),
        (Node::Event(ev), "description") => text(&ev.description),
        (Node::Scene(sc), "context_text") => text(&sc.context_text),
        (Node::Scene(sc), "location") => opt(&sc.location),
        (Node::Scene(sc), "time") => opt(&sc.time),
        (Node::Context(c), "key") => text(&c.key),
        (Node::Context(c), "description") => text(&c.description),
        (Node::Context(c), "time") => opt(&c.time),
        (Node::Context(c), "location") => opt(&c.location),
        _ => None,
    }
}

fn matches_pattern(node: &Node, pattern: &NodePattern) -> bool {
    if node.kind() != pattern.label {
        return false;
    }
    pattern.props.iter().all(|(key, expected)| match (node, key.as_str()) {
        (Node::Entity(e), "name") => e.name == normalize_name(expected),
        _ => property(node, key).and_then(|v| v.as_text().map(|s| s == expected)).unwrap_or(false),
    })
}

fn anchor_candidates<'g>(graph: &'g Graph, clause: &Clause) -> Vec<&'g Node> {
    let anchor = &clause.anchor;
    let prop = |k: &str| anchor.props.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
    if let (Some(type_text), Some(name)) = (prop("type"), prop("name")) {
        if anchor.label == crate::graph::NodeKind::Entity {
            let Ok(entity_type) = type_text.parse::<EntityType>() else {
                return Vec::new();
            };
            return graph
                .find_entities(entity_type, name)
                .into_iter()
                .filter_map(|e| graph.node(e.id))
                .filter(|n| matches_pattern(n, anchor))
                .collect();
        }
    }
    if let Some(filter) = clause.filter.as_ref().filter(|f| f.var == anchor.var) {
        let mut ids = filter.ids.clone();
        ids.sort_unstable();
        ids.dedup();
        return ids
            .into_iter()
            .filter_map(|id| graph.node(NodeId(id)))
            .filter(|n| matches_pattern(n, anchor))
            .collect();
    }
    graph.nodes().iter().filter(|n| matches_pattern(n, anchor)).collect()
}

fn passes_filter(clause: &Clause, var: &str, node: &Node) -> bool {
    match &clause.filter {
        Some(f) if f.var == var => f.ids.contains(&node.id().0),
        _ => true,
    }
}

fn execute_clause(graph: &Graph, clause: &Clause, rows: &mut BTreeSet<Vec<Value>>) {
    let project = |bindings: &[(&str, &Node)]| -> Vec<Value> {
        clause
            .projections
            .iter()
            .map(|p| {
                let node = bindings.iter().find(|(v, _)| *v == p.var).map(|(_, n)| *n);
                node.and_then(|n| property(n, &p.key)).unwrap_or(Value::Null)
            })
            .collect()
    };
    for anchor in anchor_candidates(graph, clause) {
        if !passes_filter(clause, &clause.anchor.var, anchor) {
            continue;
        }
        match &clause.hop {
            None => {
                rows.insert(project(&[(&clause.anchor.var, anchor)]));
            }
            Some(hop) => {
                let targets = graph
                    .neighbors(anchor.id(), hop.edge, Direction::Out)
                    .unwrap_or_default();
                for target_id in targets {
                    let Some(target) = graph.node(target_id) else { continue };
                    if !matches_pattern(target, &hop.target) || !passes_filter(clause, &hop.target.var, target) {
                        continue;
                    }
                    rows.insert(project(&[(&clause.anchor.var, anchor), (&hop.target.var, target)]));
                }
            }
        }
    }
}

/// Evaluates a plan. Uses the `(type, name)` index when an entity anchor
/// pins both properties, the id filter when it constrains the anchor, and a
/// scan otherwise.
pub fn execute(plan: &QueryPlan, graph: &Graph) -> ResultTable {
    let mut rows = BTreeSet::new();
    for clause in &plan.clauses {
        execute_clause(graph, clause, &mut rows);
    }
    ResultTable {
        columns: plan.columns(),
        rows: rows.into_iter().collect(),
    }
}

/// Parses and executes query text.
pub fn run(query_text: &str, graph: &Graph) -> Result<ResultTable, QueryError> {
    Ok(execute(&parse(query_text)?, graph))
}
