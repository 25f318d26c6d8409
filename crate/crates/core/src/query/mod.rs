//! A small Cypher subset: one anchor pattern, an optional single outgoing
//! hop, property equality, an `id IN [...]` filter, `RETURN` projections and
//! `UNION` of clauses.
//!
//! ```text
//! query   := clause ("UNION" clause)*
//! clause  := "MATCH" pattern ["WHERE" var ".id" "IN" "[" int ("," int)* "]"]
//!            "RETURN" proj ("," proj)*
//! pattern := "(" var ":" label props? ")" ["-[:" edgelabel "]->" "(" var ":" label ")"]
//! props   := "{" key ":" string ("," key ":" string)* "}"
//! proj    := var "." key
//! ```
//!
//! Results use set semantics: duplicate rows collapse and rows come back in
//! ascending lexicographic order.

mod builders;
mod exec;
mod parser;

use std::fmt;

use thiserror::Error;

use crate::graph::{EdgeLabel, NodeKind};

pub use builders::{
    build_context_query, build_entity_query, build_event_scene_query, build_events_query, build_scenes_query,
    ContextQuery, EventSceneQuery,
};
pub use exec::{execute, run, ResultTable, Value};
pub use parser::parse;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePattern {
    pub var: String,
    pub label: NodeKind,
    /// Property equality constraints in written order.
    pub props: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hop {
    pub edge: EdgeLabel,
    pub target: NodePattern,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdFilter {
    pub var: String,
    pub ids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    pub var: String,
    pub key: String,
}

impl Projection {
    pub fn column_name(&self) -> String {
        format!("{}.{}", self.var, self.key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub anchor: NodePattern,
    pub hop: Option<Hop>,
    pub filter: Option<IdFilter>,
    pub projections: Vec<Projection>,
}

impl Clause {
    pub(crate) fn pattern_for(&self, var: &str) -> Option<&NodePattern> {
        if self.anchor.var == var {
            return Some(&self.anchor);
        }
        self.hop.as_ref().map(|h| &h.target).filter(|t| t.var == var)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPlan {
    pub clauses: Vec<Clause>,
}

impl QueryPlan {
    pub fn columns(&self) -> Vec<String> {
        self.clauses[0].projections.iter().map(Projection::column_name).collect()
    }

    /// Query text that [`parse`] maps back to an equal plan.
    pub fn render(&self) -> String {
        self.to_string()
    }
}

/// Properties addressable on each label. `id` is projectable and filterable
/// but never appears in a property map.
pub fn properties(kind: NodeKind) -> &'static [&'static str] {
    match kind {
        NodeKind::Entity => &["id", "type", "name"],
        NodeKind::Event => &["id", "action", "description"],
        NodeKind::Scene => &["id", "context_text", "location", "time"],
        NodeKind::Context => &["id", "key", "description", "time", "location"],
    }
}

fn write_string_literal(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for ch in s.chars() {
        match ch {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

impl fmt::Display for NodePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}:{}", self.var, self.label)?;
        if !self.props.is_empty() {
            f.write_str(" {")?;
            for (i, (key, value)) in self.props.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{key}:")?;
                write_string_literal(f, value)?;
            }
            f.write_str("}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MATCH {}", self.anchor)?;
        if let Some(hop) = &self.hop {
            write!(f, "-[:{}]->{}", hop.edge, hop.target)?;
        }
        if let Some(filter) = &self.filter {
            let ids: Vec<String> = filter.ids.iter().map(u64::to_string).collect();
            write!(f, " WHERE {}.id IN [{}]", filter.var, ids.join(","))?;
        }
        f.write_str(" RETURN ")?;
        for (i, p) in self.projections.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}.{}", p.var, p.key)?;
        }
        Ok(())
    }
}

impl fmt::Display for QueryPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, clause) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str(" UNION ")?;
            }
            write!(f, "{clause}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("syntax error at byte {pos}: expected {}, found {found}", expected.join(" | "))]
    Syntax {
        pos: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown label {label:?} at byte {pos}")]
    UnknownLabel { pos: usize, label: String },
    #[error("unknown property {property:?} on {label} at byte {pos}")]
    UnknownProperty {
        pos: usize,
        label: NodeKind,
        property: String,
    },
    #[error("undeclared variable {var:?} at byte {pos}")]
    UnknownVariable { pos: usize, var: String },
    #[error("invalid pattern at byte {pos}: {message}")]
    InvalidPattern { pos: usize, message: String },
    #[error("cannot build query: {0}")]
    EmptyInput(&'static str),
}
