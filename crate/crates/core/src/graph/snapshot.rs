//! Line-oriented text snapshots.
//!
//! ```text
//! EESKG v1 <dim>
//! N<TAB><id><TAB>ENT<TAB>type=<t><TAB>name=<n>
//! N<TAB><id><TAB>EVT<TAB>entities=<ids><TAB>action=<a><TAB>description=<d>
//! N<TAB><id><TAB>SCN<TAB>events=<ids><TAB>location=<l><TAB>time=<t><TAB>context=<c>
//! N<TAB><id><TAB>CTX<TAB>key=<k><TAB>description=<d><TAB>time=<t><TAB>location=<l>
//! E<TAB><src><TAB><dst><TAB><label>
//! ```
//!
//! Nodes come sorted by id, edges by `(src, dst, label)`. Id lists are comma
//! separated. Absent optional values are written as an empty value. Inside
//! values, backslash, tab, newline and carriage return are escaped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{ContextNode, Edge, EntityNode, EntityType, EventNode, Graph, Node, NodeId, SceneNode};
use super::EdgeLabel;

const MAGIC: &str = "EESKG";
const VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: edge endpoint {node} does not exist")]
    DanglingEdge { line: usize, node: NodeId },
    #[error("snapshot violates graph invariants: {0}")]
    Invalid(String),
}

fn escape(value: &str, out: &mut String) {
    for ch in value.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
}

fn unescape(value: &str) -> Result<String, String> {
    let mut out = String::with_capacity(value.len());
    let mut chars = value.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => return Err(format!("bad escape \\{other}")),
            None => return Err("dangling backslash".into()),
        }
    }
    Ok(out)
}

fn join_ids(ids: &[NodeId]) -> String {
    ids.iter().map(|id| id.to_string()).collect::<Vec<_>>().join(",")
}

fn push_field(out: &mut String, key: &str, value: &str) {
    out.push('\t');
    out.push_str(key);
    out.push('=');
    escape(value, out);
}

impl Graph {
    /// Canonical snapshot text. Equal graphs always render to equal bytes.
    pub fn to_snapshot_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {VERSION} {}", self.embedding_dim);
        for node in &self.nodes {
            let _ = write!(out, "N\t{}", node.id());
            match node {
                Node::Entity(e) => {
                    out.push_str("\tENT");
                    push_field(&mut out, "type", e.entity_type.as_str());
                    push_field(&mut out, "name", &e.name);
                }
                Node::Event(ev) => {
                    out.push_str("\tEVT");
                    push_field(&mut out, "entities", &join_ids(&ev.entity_ids));
                    push_field(&mut out, "action", &ev.action);
                    push_field(&mut out, "description", &ev.description);
                }
                Node::Scene(sc) => {
                    out.push_str("\tSCN");
                    push_field(&mut out, "events", &join_ids(&sc.event_ids));
                    push_field(&mut out, "location", sc.location.as_deref().unwrap_or(""));
                    push_field(&mut out, "time", sc.time.as_deref().unwrap_or(""));
                    push_field(&mut out, "context", &sc.context_text);
                }
                Node::Context(c) => {
                    out.push_str("\tCTX");
                    push_field(&mut out, "key", &c.key);
                    push_field(&mut out, "description", &c.description);
                    push_field(&mut out, "time", c.time.as_deref().unwrap_or(""));
                    push_field(&mut out, "location", c.location.as_deref().unwrap_or(""));
                }
            }
            out.push('\n');
        }
        for edge in &self.edges {
            let _ = writeln!(out, "E\t{}\t{}\t{}", edge.src, edge.dst, edge.label);
        }
        out
    }

    pub fn save_snapshot(&self, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
        fs::write(path, self.to_snapshot_string())?;
        Ok(())
    }

    pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Graph, SnapshotError> {
        let text = fs::read_to_string(path)?;
        Graph::from_snapshot_str(&text)
    }

    pub fn from_snapshot_str(text: &str) -> Result<Graph, SnapshotError> {
        let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or(SnapshotError::Malformed {
            line: 1,
            message: "missing header".into(),
        })?;
        let dim = parse_header(header)?;

        let mut graph = Graph::new();
        graph.embedding_dim = dim;
        let mut in_edges = false;
        for (line_no, line) in lines {
            if line.is_empty() {
                continue;
            }
            let malformed = |message: String| SnapshotError::Malformed { line: line_no, message };
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "N" => {
                    if in_edges {
                        return Err(malformed("node line after edge lines".into()));
                    }
                    let node = parse_node(&fields, line_no)?;
                    if node.id() != graph.next_id() {
                        return Err(malformed(format!(
                            "expected node id {}, found {}",
                            graph.next_id(),
                            node.id()
                        )));
                    }
                    graph.push_node(node);
                }
                "E" => {
                    in_edges = true;
                    if fields.len() != 4 {
                        return Err(malformed(format!("edge line has {} fields, expected 4", fields.len())));
                    }
                    let src = parse_id(fields[1]).map_err(malformed)?;
                    let dst = parse_id(fields[2]).map_err(malformed)?;
                    let label = EdgeLabel::from_name(fields[3]).ok_or_else(|| SnapshotError::UnknownLabel {
                        line: line_no,
                        label: fields[3].to_string(),
                    })?;
                    for id in [src, dst] {
                        if !graph.contains(id) {
                            return Err(SnapshotError::DanglingEdge { line: line_no, node: id });
                        }
                    }
                    let edge = Edge { src, dst, label };
                    if let Some(last) = graph.edges.last() {
                        if *last >= edge {
                            return Err(malformed("edges out of canonical order".into()));
                        }
                    }
                    graph.add_edge(src, dst, label).map_err(|e| malformed(e.to_string()))?;
                }
                other => return Err(malformed(format!("unknown record tag {other:?}"))),
            }
        }

        let problems = graph.check_invariants();
        if !problems.is_empty() {
            return Err(SnapshotError::Invalid(problems.join("; ")));
        }
        Ok(graph)
    }
}

fn parse_header(header: &str) -> Result<usize, SnapshotError> {
    let bad = |message: &str| SnapshotError::Malformed {
        line: 1,
        message: message.to_string(),
    };
    let parts: Vec<&str> = header.split(' ').collect();
    if parts.len() != 3 || parts[0] != MAGIC {
        return Err(bad("expected header `EESKG v1 <dim>`"));
    }
    if parts[1] != VERSION {
        return Err(bad("unsupported snapshot version"));
    }
    parts[2].parse().map_err(|_| bad("embedding dimension is not an integer"))
}

fn parse_id(s: &str) -> Result<NodeId, String> {
    s.parse::<u64>().map(NodeId).map_err(|_| format!("invalid node id {s:?}"))
}

fn parse_id_list(s: &str) -> Result<Vec<NodeId>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_id).collect()
}

fn optional(s: String) -> Option<String> {
    if s.is_empty() {
        None
    } else {
        Some(s)
    }
}

fn parse_node(fields: &[&str], line: usize) -> Result<Node, SnapshotError> {
    let malformed = |message: String| SnapshotError::Malformed { line, message };
    if fields.len() < 3 {
        return Err(malformed("node line is missing id or kind".into()));
    }
    let id = parse_id(fields[1]).map_err(malformed)?;
    let expected_keys: &[&str] = match fields[2] {
        "ENT" => &["type", "name"],
        "EVT" => &["entities", "action", "description"],
        "SCN" => &["events", "location", "time", "context"],
        "CTX" => &["key", "description", "time", "location"],
        other => {
            return Err(SnapshotError::UnknownLabel {
                line,
                label: other.to_string(),
            })
        }
    };
    let raw = &fields[3..];
    if raw.len() != expected_keys.len() {
        return Err(malformed(format!(
            "{} node expects {} fields, found {}",
            fields[2],
            expected_keys.len(),
            raw.len()
        )));
    }
    let mut values = Vec::with_capacity(raw.len());
    for (field, key) in raw.iter().zip(expected_keys) {
        let value = field
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('='))
            .ok_or_else(|| malformed(format!("expected field `{key}=`")))?;
        values.push(unescape(value).map_err(&malformed)?);
    }
    let mut values = values.into_iter();
    let mut next = || values.next().unwrap_or_default();

    let node = match fields[2] {
        "ENT" => {
            let type_text = next();
            let entity_type: EntityType = type_text.parse().map_err(|_| SnapshotError::UnknownLabel {
                line,
                label: type_text.clone(),
            })?;
            let name = next();
            if name.trim().is_empty() {
                return Err(malformed("entity name is empty".into()));
            }
            Node::Entity(EntityNode { id, entity_type, name })
        }
        "EVT" => {
            let entity_ids = parse_id_list(&next()).map_err(malformed)?;
            let action = next();
            let description = next();
            if description.trim().is_empty() {
                return Err(malformed("event description is empty".into()));
            }
            Node::Event(EventNode {
                id,
                entity_ids,
                action,
                description,
            })
        }
        "SCN" => {
            let event_ids = parse_id_list(&next()).map_err(malformed)?;
            let location = optional(next());
            let time = optional(next());
            let context_text = next();
            if context_text.trim().is_empty() {
                return Err(malformed("scene context text is empty".into()));
            }
            Node::Scene(SceneNode {
                id,
                event_ids,
                location,
                time,
                context_text,
            })
        }
        _ => {
            let key = next();
            let description = next();
            if description.trim().is_empty() {
                return Err(malformed("context description is empty".into()));
            }
            Node::Context(ContextNode {
                id,
                key,
                description,
                time: optional(next()),
                location: optional(next()),
            })
        }
    };
    Ok(node)
}
