//! Embedded typed property graph holding entities, events, scenes and contexts.
//!
//! Node ids are dense and assigned in insertion order. Entities are keyed by
//! `(type, normalized name)`; every other node kind is always inserted fresh.
//! Membership edges (`PARTICIPATES_IN`, `PART_OF`) are created from the id
//! lists carried by events and scenes, and a context node is only ever
//! inserted together with its `CONTEXT_OF` links so the linkage invariant
//! holds in every reachable state.

mod snapshot;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize_name;

pub use snapshot::SnapshotError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Canonical entity category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityType {
    Person,
    Organization,
    Location,
    Object,
    Document,
    Other,
}

impl EntityType {
    pub const ALL: [EntityType; 6] = [
        EntityType::Person,
        EntityType::Organization,
        EntityType::Location,
        EntityType::Object,
        EntityType::Document,
        EntityType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Person => "Person",
            EntityType::Organization => "Organization",
            EntityType::Location => "Location",
            EntityType::Object => "Object",
            EntityType::Document => "Document",
            EntityType::Other => "Other",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not a canonical entity type: {0:?}")]
pub struct UnknownEntityType(pub String);

impl FromStr for EntityType {
    type Err = UnknownEntityType;

    /// Exact, case-sensitive match on the canonical spelling. Raw extractor
    /// types go through [`crate::pipeline::TypeNormalizer`] instead.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownEntityType(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Entity,
    Event,
    Scene,
    Context,
}

impl NodeKind {
    /// Label used by the query language.
    pub fn label(self) -> &'static str {
        match self {
            NodeKind::Entity => "Entity",
            NodeKind::Event => "Event",
            NodeKind::Scene => "Scene",
            NodeKind::Context => "Context",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "Entity" => Some(NodeKind::Entity),
            "Event" => Some(NodeKind::Event),
            "Scene" => Some(NodeKind::Scene),
            "Context" => Some(NodeKind::Context),
            _ => None,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

// Variant order is alphabetical so derived ordering matches the textual
// ordering used in snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    ContextOf,
    PartOf,
    ParticipatesIn,
}

impl EdgeLabel {
    pub const ALL: [EdgeLabel; 3] = [EdgeLabel::ContextOf, EdgeLabel::PartOf, EdgeLabel::ParticipatesIn];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::ContextOf => "CONTEXT_OF",
            EdgeLabel::PartOf => "PART_OF",
            EdgeLabel::ParticipatesIn => "PARTICIPATES_IN",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        EdgeLabel::ALL.into_iter().find(|l| l.as_str() == s)
    }

    /// Whether an edge with this label may run from `src` to `dst`.
    pub fn allows(self, src: NodeKind, dst: NodeKind) -> bool {
        match self {
            EdgeLabel::ParticipatesIn => src == NodeKind::Entity && dst == NodeKind::Event,
            EdgeLabel::PartOf => src == NodeKind::Event && dst == NodeKind::Scene,
            EdgeLabel::ContextOf => src == NodeKind::Context && dst != NodeKind::Context,
        }
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityNode {
    pub id: NodeId,
    pub entity_type: EntityType,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventNode {
    pub id: NodeId,
    pub entity_ids: Vec<NodeId>,
    /// Empty when the source record carried no action.
    pub action: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneNode {
    pub id: NodeId,
    pub event_ids: Vec<NodeId>,
    pub location: Option<String>,
    pub time: Option<String>,
    pub context_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextNode {
    pub id: NodeId,
    /// External context identifier from the building corpus.
    pub key: String,
    pub description: String,
    pub time: Option<String>,
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Entity(EntityNode),
    Event(EventNode),
    Scene(SceneNode),
    Context(ContextNode),
}

impl Node {
    pub fn id(&self) -> NodeId {
        match self {
            Node::Entity(n) => n.id,
            Node::Event(n) => n.id,
            Node::Scene(n) => n.id,
            Node::Context(n) => n.id,
        }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            Node::Entity(_) => NodeKind::Entity,
            Node::Event(_) => NodeKind::Event,
            Node::Scene(_) => NodeKind::Scene,
            Node::Context(_) => NodeKind::Context,
        }
    }
}

/// Links a new context node must carry; each list needs at least one id.
#[derive(Debug, Clone, Default)]
pub struct ContextLinks {
    pub entities: Vec<NodeId>,
    pub events: Vec<NodeId>,
    pub scenes: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("dangling reference: node {0} does not exist")]
    DanglingReference(NodeId),
    #[error("node {id} is a {found}, expected {expected}")]
    WrongKind {
        id: NodeId,
        expected: NodeKind,
        found: NodeKind,
    },
    #[error("{label} cannot connect {src_kind} -> {dst_kind}")]
    KindMismatch {
        label: EdgeLabel,
        src_kind: NodeKind,
        dst_kind: NodeKind,
    },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

fn clean_optional(value: Option<&str>) -> Option<String> {
    value.map(str::trim).filter(|s| !s.is_empty()).map(str::to_string)
}

fn require_text(value: &str, what: &str) -> Result<String, GraphError> {
    let trimmed = value.trim();
    if trimmed.is_empty() {
        return Err(GraphError::Invariant(format!("{what} must be non-empty")));
    }
    Ok(trimmed.to_string())
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    edges: BTreeSet<Edge>,
    out_adj: Vec<Vec<(EdgeLabel, NodeId)>>,
    in_adj: Vec<Vec<(EdgeLabel, NodeId)>>,
    entity_index: HashMap<(EntityType, String), NodeId>,
    embedding_dim: usize,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Embedding dimension recorded at build time, 0 if unset.
    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn set_embedding_dim(&mut self, dim: usize) {
        self.embedding_dim = dim;
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Edges in canonical `(src, dst, label)` order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id.index())
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId, label: EdgeLabel) -> bool {
        self.edges.contains(&Edge { src, dst, label })
    }

    pub fn entity(&self, id: NodeId) -> Option<&EntityNode> {
        match self.node(id) {
            Some(Node::Entity(n)) => Some(n),
            _ => None,
        }
    }

    pub fn event(&self, id: NodeId) -> Option<&EventNode> {
        match self.node(id) {
            Some(Node::Event(n)) => Some(n),
            _ => None,
        }
    }

    pub fn scene(&self, id: NodeId) -> Option<&SceneNode> {
        match self.node(id) {
            Some(Node::Scene(n)) => Some(n),
            _ => None,
        }
    }

    pub fn context(&self, id: NodeId) -> Option<&ContextNode> {
        match self.node(id) {
            Some(Node::Context(n)) => Some(n),
            _ => None,
        }
    }

    pub fn contexts(&self) -> impl Iterator<Item = &ContextNode> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Context(c) => Some(c),
            _ => None,
        })
    }

    /// Looks a context up by its external key. Linear in the node count.
    pub fn context_by_key(&self, key: &str) -> Option<&ContextNode> {
        self.contexts().find(|c| c.key == key)
    }

    fn next_id(&self) -> NodeId {
        NodeId(self.nodes.len() as u64)
    }

    fn expect_kind(&self, id: NodeId, expected: NodeKind) -> Result<(), GraphError> {
        let node = self.node(id).ok_or(GraphError::DanglingReference(id))?;
        if node.kind() != expected {
            return Err(GraphError::WrongKind {
                id,
                expected,
                found: node.kind(),
            });
        }
        Ok(())
    }

    fn push_node(&mut self, node: Node) -> NodeId {
        let id = node.id();
        debug_assert_eq!(id, self.next_id());
        if let Node::Entity(e) = &node {
            self.entity_index.insert((e.entity_type, e.name.clone()), id);
        }
        self.nodes.push(node);
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        id
    }

    fn link(&mut self, edge: Edge) {
        if self.edges.insert(edge) {
            self.out_adj[edge.src.index()].push((edge.label, edge.dst));
            self.in_adj[edge.dst.index()].push((edge.label, edge.src));
        }
    }

    /// Inserts an entity keyed on `(type, normalized name)`. Upserting an
    /// existing key returns the existing id unchanged.
    pub fn upsert_entity(&mut self, entity_type: EntityType, name: &str) -> Result<NodeId, GraphError> {
        let name = normalize_name(name);
        if name.is_empty() {
            return Err(GraphError::Invariant("entity name must be non-empty".into()));
        }
        if let Some(&id) = self.entity_index.get(&(entity_type, name.clone())) {
            return Ok(id);
        }
        let id = self.next_id();
        Ok(self.push_node(Node::Entity(EntityNode {
            id,
            entity_type,
            name,
        })))
    }

    /// Inserts an event and one `PARTICIPATES_IN` edge per participant.
    pub fn insert_event(
        &mut self,
        entity_ids: &[NodeId],
        action: &str,
        description: &str,
    ) -> Result<NodeId, GraphError> {
        if entity_ids.is_empty() {
            return Err(GraphError::Invariant("event needs at least one entity".into()));
        }
        for &e in entity_ids {
            self.expect_kind(e, NodeKind::Entity)?;
        }
        let description = require_text(description, "event description")?;
        let mut participants = Vec::with_capacity(entity_ids.len());
        for &e in entity_ids {
            if !participants.contains(&e) {
                participants.push(e);
            }
        }
        let id = self.next_id();
        self.push_node(Node::Event(EventNode {
            id,
            entity_ids: participants.clone(),
            action: action.trim().to_string(),
            description,
        }));
        for e in participants {
            self.link(Edge {
                src: e,
                dst: id,
                label: EdgeLabel::ParticipatesIn,
            });
        }
        Ok(id)
    }

    /// Inserts a scene and one `PART_OF` edge per member event.
    pub fn insert_scene(
        &mut self,
        event_ids: &[NodeId],
        location: Option<&str>,
        time: Option<&str>,
        context_text: &str,
    ) -> Result<NodeId, GraphError> {
        for &ev in event_ids {
            self.expect_kind(ev, NodeKind::Event)?;
        }
        let context_text = require_text(context_text, "scene context text")?;
        let mut members = Vec::with_capacity(event_ids.len());
        for &ev in event_ids {
            if !members.contains(&ev) {
                members.push(ev);
            }
        }
        let id = self.next_id();
        self.push_node(Node::Scene(SceneNode {
            id,
            event_ids: members.clone(),
            location: clean_optional(location),
            time: clean_optional(time),
            context_text,
        }));
        for ev in members {
            self.link(Edge {
                src: ev,
                dst: id,
                label: EdgeLabel::PartOf,
            });
        }
        Ok(id)
    }

    /// Inserts a context node together with its `CONTEXT_OF` links. Each of
    /// the three link lists must name at least one node of the right kind.
    pub fn insert_context(
        &mut self,
        key: &str,
        description: &str,
        time: Option<&str>,
        location: Option<&str>,
        links: &ContextLinks,
    ) -> Result<NodeId, GraphError> {
        let groups = [
            (&links.entities, NodeKind::Entity),
            (&links.events, NodeKind::Event),
            (&links.scenes, NodeKind::Scene),
        ];
        for (ids, kind) in groups {
            if ids.is_empty() {
                return Err(GraphError::Invariant(format!(
                    "context must link to at least one {kind}"
                )));
            }
            for &id in ids {
                self.expect_kind(id, kind)?;
            }
        }
        let description = require_text(description, "context description")?;
        let id = self.next_id();
        self.push_node(Node::Context(ContextNode {
            id,
            key: key.trim().to_string(),
            description,
            time: clean_optional(time),
            location: clean_optional(location),
        }));
        for (ids, _) in groups {
            for &dst in ids {
                self.link(Edge {
                    src: id,
                    dst,
                    label: EdgeLabel::ContextOf,
                });
            }
        }
        Ok(id)
    }

    /// Adds an edge after checking endpoint kinds. Re-adding is a no-op.
    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, label: EdgeLabel) -> Result<(), GraphError> {
        let src_kind = self.node(src).ok_or(GraphError::DanglingReference(src))?.kind();
        let dst_kind = self.node(dst).ok_or(GraphError::DanglingReference(dst))?.kind();
        if !label.allows(src_kind, dst_kind) {
            return Err(GraphError::KindMismatch {
                label,
                src_kind,
                dst_kind,
            });
        }
        self.link(Edge { src, dst, label });
        Ok(())
    }

    /// Entities whose type equals `entity_type` and whose normalized name
    /// equals the normalized `name`. Case-sensitive.
    pub fn find_entities(&self, entity_type: EntityType, name: &str) -> Vec<&EntityNode> {
        self.entity_index
            .get(&(entity_type, normalize_name(name)))
            .and_then(|&id| self.entity(id))
            .into_iter()
            .collect()
    }

    /// Nodes connected to `id` by `label` edges in the given direction,
    /// ascending by id.
    pub fn neighbors(&self, id: NodeId, label: EdgeLabel, direction: Direction) -> Result<Vec<NodeId>, GraphError> {
        if !self.contains(id) {
            return Err(GraphError::UnknownNode(id));
        }
        let adj = match direction {
            Direction::Out => &self.out_adj[id.index()],
            Direction::In => &self.in_adj[id.index()],
        };
        let mut ids: Vec<NodeId> = adj.iter().filter(|(l, _)| *l == label).map(|&(_, n)| n).collect();
        ids.sort_unstable();
        Ok(ids)
    }

    /// Checks every structural invariant; returns a description of each
    /// violation found.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (idx, node) in self.nodes.iter().enumerate() {
            if node.id().index() != idx {
                problems.push(format!("node at position {idx} carries id {}", node.id()));
            }
        }
        for edge in &self.edges {
            match (self.node(edge.src), self.node(edge.dst)) {
                (Some(s), Some(d)) if edge.label.allows(s.kind(), d.kind()) => {}
                (Some(_), Some(_)) => problems.push(format!("edge {edge:?} has illegal endpoint kinds")),
                _ => problems.push(format!("edge {edge:?} does not resolve")),
            }
        }
        let mut seen = HashMap::new();
        for node in &self.nodes {
            match node {
                Node::Entity(e) => {
                    if e.name.trim().is_empty() {
                        problems.push(format!("entity {} has an empty name", e.id));
                    }
                    if let Some(prev) = seen.insert((e.entity_type, e.name.clone()), e.id) {
                        problems.push(format!("entities {prev} and {} share a key", e.id));
                    }
                }
                Node::Event(ev) => {
                    if ev.entity_ids.is_empty() {
                        problems.push(format!("event {} has no participants", ev.id));
                    }
                    for &e in &ev.entity_ids {
                        if !self.has_edge(e, ev.id, EdgeLabel::ParticipatesIn) {
                            problems.push(format!("event {} lacks PARTICIPATES_IN from {e}", ev.id));
                        }
                    }
                }
                Node::Scene(sc) => {
                    for &ev in &sc.event_ids {
                        if !self.has_edge(ev, sc.id, EdgeLabel::PartOf) {
                            problems.push(format!("scene {} lacks PART_OF from {ev}", sc.id));
                        }
                    }
                }
                Node::Context(c) => {
                    let mut kinds = BTreeSet::new();
                    for &(label, dst) in &self.out_adj[c.id.index()] {
                        if label == EdgeLabel::ContextOf {
                            if let Some(n) = self.node(dst) {
                                kinds.insert(n.kind());
                            }
                        }
                    }
                    for kind in [NodeKind::Entity, NodeKind::Event, NodeKind::Scene] {
                        if !kinds.contains(&kind) {
                            problems.push(format!("context {} has no CONTEXT_OF link to any {kind}", c.id));
                        }
                    }
                }
            }
        }
        problems
    }
}
