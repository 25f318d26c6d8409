//! The line-delimited record format emitted by upstream extractors, record
//! validation, and knowledge-graph construction from an annotated corpus.
//!
//! One JSON object per line:
//!
//! ```json
//! {"record_id": "r1",
//!  "entities": [{"name": "Donald Trump", "type": "Person"}],
//!  "events": [{"entity_names": ["Donald Trump"], "action": "speech",
//!              "description": "Donald Trump giving a speech"}],
//!  "scene": {"description": "An outdoor rally", "location": null, "time": null},
//!  "context": {"context_id": "c1", "description": "...", "time": null, "location": null}}
//! ```
//!
//! Unknown keys are rejected. `context` is only present in KG-building
//! records.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ContextLinks, EdgeLabel, Graph, GraphError, NodeId};
use crate::pipeline::TypeNormalizer;
use crate::text::normalize_name;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordEntity {
    pub name: String,
    #[serde(rename = "type")]
    pub entity_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordEvent {
    pub entity_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordScene {
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordContext {
    pub context_id: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EesRecord {
    pub record_id: String,
    pub entities: Vec<RecordEntity>,
    pub events: Vec<RecordEvent>,
    pub scene: RecordScene,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<RecordContext>,
}

impl EesRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization cannot fail")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub rule: &'static str,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{level} at `{}` [{}]: {}", self.path, self.rule, self.message)
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("invalid record: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// Every invariant violation in `record`; warnings included.
pub fn validate_record(record: &EesRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |path: String, rule: &'static str, severity: Severity, message: &str| {
        out.push(Violation {
            path,
            rule,
            severity,
            message: message.to_string(),
        })
    };

    if record.record_id.trim().is_empty() {
        push("record_id".into(), "non_empty", Severity::Error, "record_id is empty");
    }
    if record.entities.is_empty() {
        push("entities".into(), "non_empty", Severity::Error, "at least one entity is required");
    }
    let mut names = BTreeSet::new();
    let mut pairs = BTreeSet::new();
    for (i, entity) in record.entities.iter().enumerate() {
        let name = normalize_name(&entity.name);
        if name.is_empty() {
            push(format!("entities[{i}].name"), "non_empty", Severity::Error, "entity name is empty");
        }
        if entity.entity_type.trim().is_empty() {
            push(format!("entities[{i}].type"), "non_empty", Severity::Error, "entity type is empty");
        }
        if !pairs.insert((name.clone(), entity.entity_type.trim().to_string())) {
            push(
                format!("entities[{i}]"),
                "duplicate_entity",
                Severity::Warning,
                "duplicate (name, type) pair; merged on ingest",
            );
        }
        names.insert(name);
    }
    for (i, event) in record.events.iter().enumerate() {
        if event.entity_names.is_empty() {
            push(
                format!("events[{i}].entity_names"),
                "non_empty",
                Severity::Error,
                "event names no participating entity",
            );
        }
        for (j, name) in event.entity_names.iter().enumerate() {
            if !names.contains(&normalize_name(name)) {
                push(
                    format!("events[{i}].entity_names[{j}]"),
                    "unknown_entity",
                    Severity::Error,
                    "entity is not listed in the record's entities",
                );
            }
        }
        if event.description.trim().is_empty() {
            push(
                format!("events[{i}].description"),
                "non_empty",
                Severity::Error,
                "event description is empty",
            );
        }
    }
    if record.scene.description.trim().is_empty() {
        push("scene.description".into(), "non_empty", Severity::Error, "scene description is empty");
    }
    if let Some(context) = &record.context {
        if context.context_id.trim().is_empty() {
            push("context.context_id".into(), "non_empty", Severity::Error, "context_id is empty");
        }
        if context.description.trim().is_empty() {
            push(
                "context.description".into(),
                "non_empty",
                Severity::Error,
                "context description is empty",
            );
        }
    }
    out
}

pub fn errors_only(violations: Vec<Violation>) -> Vec<Violation> {
    violations.into_iter().filter(|v| v.severity == Severity::Error).collect()
}

/// Parses and validates one record document. Warnings do not fail parsing.
pub fn parse_record(document: &str) -> Result<EesRecord, RecordError> {
    let record: EesRecord = serde_json::from_str(document).map_err(|e| RecordError::Malformed(e.to_string()))?;
    let errors = errors_only(validate_record(&record));
    if !errors.is_empty() {
        return Err(RecordError::Invalid(errors));
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// 1-based line in the corpus file, when read from one.
    pub line: Option<usize>,
    pub record_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusReport {
    pub read: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Rejections tallied by rule.
    pub error_counts: BTreeMap<String, usize>,
    pub rejections: Vec<Rejection>,
    pub nodes: usize,
    pub edges: usize,
    pub contexts: usize,
}

impl CorpusReport {
    fn reject(&mut self, line: Option<usize>, record_id: Option<String>, rule: &str, reason: String) {
        self.rejected += 1;
        *self.error_counts.entry(rule.to_string()).or_default() += 1;
        self.rejections.push(Rejection { line, record_id, reason });
    }
}

/// Incremental graph construction from KG-building records.
#[derive(Debug)]
pub struct GraphBuilder<'n> {
    graph: Graph,
    normalizer: &'n TypeNormalizer,
    contexts: HashMap<String, NodeId>,
    report: CorpusReport,
}

impl<'n> GraphBuilder<'n> {
    pub fn new(normalizer: &'n TypeNormalizer) -> Self {
        Self {
            graph: Graph::new(),
            normalizer,
            contexts: HashMap::new(),
            report: CorpusReport::default(),
        }
    }

    /// Adds one record, or tallies why it was skipped.
    pub fn add(&mut self, record: &EesRecord, line: Option<usize>) {
        self.report.read += 1;
        let id = Some(record.record_id.clone());
        let errors = errors_only(validate_record(record));
        if let Some(first) = errors.first() {
            let reason = errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            self.report.reject(line, id, first.rule, reason);
            return;
        }
        if record.context.is_none() {
            self.report
                .reject(line, id, "missing_context", "KG-building record has no context block".into());
            return;
        }
        if record.events.is_empty() {
            self.report.reject(
                line,
                id,
                "no_events",
                "a context needs at least one event to link to".into(),
            );
            return;
        }
        match self.insert(record) {
            Ok(()) => self.report.accepted += 1,
            Err(e) => self.report.reject(line, id, "graph", e.to_string()),
        }
    }

    fn insert(&mut self, record: &EesRecord) -> Result<(), GraphError> {
        let mut by_name: HashMap<String, Vec<NodeId>> = HashMap::new();
        let mut entity_ids = Vec::new();
        for entity in &record.entities {
            let entity_type = self.normalizer.normalize(&entity.entity_type);
            let id = self.graph.upsert_entity(entity_type, &entity.name)?;
            let slot = by_name.entry(normalize_name(&entity.name)).or_default();
            if !slot.contains(&id) {
                slot.push(id);
            }
            if !entity_ids.contains(&id) {
                entity_ids.push(id);
            }
        }

        let mut event_ids = Vec::with_capacity(record.events.len());
        for event in &record.events {
            let mut participants = Vec::new();
            for name in &event.entity_names {
                for &id in by_name.get(&normalize_name(name)).into_iter().flatten() {
                    if !participants.contains(&id) {
                        participants.push(id);
                    }
                }
            }
            let action = event.action.as_deref().unwrap_or("");
            event_ids.push(self.graph.insert_event(&participants, action, &event.description)?);
        }

        let scene = &record.scene;
        let scene_id = self.graph.insert_scene(
            &event_ids,
            scene.location.as_deref(),
            scene.time.as_deref(),
            &scene.description,
        )?;

        let context = record.context.as_ref().expect("checked by caller");
        let key = context.context_id.trim().to_string();
        match self.contexts.get(&key) {
            Some(&ctx) => {
                for &target in entity_ids.iter().chain(&event_ids).chain(std::iter::once(&scene_id)) {
                    self.graph.add_edge(ctx, target, EdgeLabel::ContextOf)?;
                }
            }
            None => {
                let links = ContextLinks {
                    entities: entity_ids,
                    events: event_ids,
                    scenes: vec![scene_id],
                };
                let ctx = self.graph.insert_context(
                    &key,
                    &context.description,
                    context.time.as_deref(),
                    context.location.as_deref(),
                    &links,
                )?;
                self.contexts.insert(key, ctx);
            }
        }
        Ok(())
    }

    /// Records a line that could not be parsed at all.
    pub fn reject_unparsed(&mut self, line: usize, reason: String) {
        self.report.read += 1;
        self.report.reject(Some(line), None, "malformed", reason);
    }

    pub fn finish(mut self) -> (Graph, CorpusReport) {
        self.report.nodes = self.graph.node_count();
        self.report.edges = self.graph.edge_count();
        self.report.contexts = self.contexts.len();
        debug_assert!(self.graph.check_invariants().is_empty());
        (self.graph, self.report)
    }
}

/// Builds the graph from records in order. Same order gives the same graph,
/// ids included.
pub fn build_graph<'r, I>(records: I, normalizer: &TypeNormalizer) -> (Graph, CorpusReport)
where
    I: IntoIterator<Item = &'r EesRecord>,
{
    let mut builder = GraphBuilder::new(normalizer);
    for record in records {
        builder.add(record, None);
    }
    builder.finish()
}

/// Builds the graph from a line-delimited corpus. Blank lines are skipped;
/// lines that fail to parse are tallied as `malformed`.
pub fn build_graph_from_reader<R: BufRead>(
    reader: R,
    normalizer: &TypeNormalizer,
) -> std::io::Result<(Graph, CorpusReport)> {
    let mut builder = GraphBuilder::new(normalizer);
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<EesRecord>(&line) {
            Ok(record) => builder.add(&record, Some(idx + 1)),
            Err(e) => builder.reject_unparsed(idx + 1, e.to_string()),
        }
    }
    Ok(builder.finish())
}
