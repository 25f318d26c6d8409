pub mod eval;
pub mod graph;
pub mod ingest;
pub mod pipeline;
pub mod query;
pub mod similarity;
mod text;

pub use text::normalize_name;
