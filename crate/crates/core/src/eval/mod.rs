//! Match / Hit@k evaluation over labeled queries, the ablation grid, and a
//! synthetic fixture with planted gold contexts.
//!
//! Match is the fraction of queries whose gold context is in the retrieved
//! candidate set at all; Hit@k the fraction whose gold ranks within the first
//! `k`. Queries are independent, so with the `parallel` feature they are
//! spread over a rayon pool; results are identical either way.

mod ablation;
mod fixture;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::ingest::EesRecord;
use crate::pipeline::{run_pipeline, MatchConfig, PipelineError, Providers, TypeNormalizer};

pub use ablation::{AblationRow, ABLATION_GRID};
pub use fixture::{generate_fixture, Fixture, FixtureError, ACTION_LEXICON};

/// A query-side record with its gold context id.
///
/// Serialized one per line as `{"gold_context_id": "...", "record": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledQuery {
    pub gold_context_id: String,
    pub record: EesRecord,
}

impl LabeledQuery {
    pub fn query_id(&self) -> &str {
        &self.record.record_id
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("query serialization cannot fail")
    }
}

/// 1 if `gold` is among the first `k` ranked ids, else 0.
pub fn hit_at_k<T: PartialEq>(ranked: &[T], gold: &T, k: usize) -> u8 {
    u8::from(ranked.iter().take(k).any(|id| id == gold))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRow {
    pub query_id: String,
    pub candidates: usize,
    /// 1-based rank of the gold context; `None` if it is not a candidate.
    pub gold_rank: Option<usize>,
    /// The gold context id does not exist in the graph.
    pub gold_missing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub n_queries: usize,
    pub match_rate: f64,
    pub hit_at_1: f64,
    pub hit_at_2: f64,
    /// Sorted by query id.
    pub rows: Vec<QueryRow>,
}

impl MetricsReport {
    pub fn from_rows(mut rows: Vec<QueryRow>) -> Self {
        rows.sort_by(|a, b| a.query_id.cmp(&b.query_id));
        let n = rows.len();
        let frac = |pred: &dyn Fn(&QueryRow) -> bool| {
            if n == 0 {
                0.0
            } else {
                rows.iter().filter(|r| pred(r)).count() as f64 / n as f64
            }
        };
        let match_rate = frac(&|r| r.gold_rank.is_some());
        let hit_at_1 = frac(&|r| r.gold_rank.is_some_and(|k| k <= 1));
        let hit_at_2 = frac(&|r| r.gold_rank.is_some_and(|k| k <= 2));
        Self {
            n_queries: n,
            match_rate,
            hit_at_1,
            hit_at_2,
            rows,
        }
    }

    pub fn summary_tsv(&self) -> String {
        format!(
            "n_queries\tMatch\tHit@1\tHit@2\n{}\t{:.4}\t{:.4}\t{:.4}\n",
            self.n_queries, self.match_rate, self.hit_at_1, self.hit_at_2
        )
    }

    pub fn rows_tsv(&self) -> String {
        let mut out = String::from("query_id\tcandidates\tgold_rank\n");
        for row in &self.rows {
            let rank = match (row.gold_missing, row.gold_rank) {
                (true, _) => "missing-gold".to_string(),
                (false, Some(k)) => k.to_string(),
                (false, None) => "-".to_string(),
            };
            let _ = writeln!(out, "{}\t{}\t{}", row.query_id, row.candidates, rank);
        }
        out
    }
}

/// Evaluation context: a read-only graph plus the providers every query run
/// shares.
#[derive(Clone, Copy)]
pub struct Evaluator<'a> {
    pub graph: &'a Graph,
    pub normalizer: &'a TypeNormalizer,
    pub providers: Providers<'a>,
    /// Worker threads for per-query runs; 0 uses every core, 1 runs
    /// sequentially. Ignored without the `parallel` feature.
    pub jobs: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(graph: &'a Graph, normalizer: &'a TypeNormalizer, providers: Providers<'a>) -> Self {
        Self {
            graph,
            normalizer,
            providers,
            jobs: 1,
        }
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs;
        self
    }

    fn score_query(&self, query: &LabeledQuery, config: &MatchConfig) -> Result<QueryRow, PipelineError> {
        let result = run_pipeline(&query.record, self.graph, config, self.normalizer, &self.providers)?;
        let gold = self.graph.context_by_key(&query.gold_context_id);
        Ok(QueryRow {
            query_id: query.query_id().to_string(),
            candidates: result.ranked.len(),
            gold_rank: gold.and_then(|g| result.rank_of(g.id)),
            gold_missing: gold.is_none(),
        })
    }

    /// Runs every query through the pipeline under `config`.
    pub fn evaluate(&self, queries: &[LabeledQuery], config: &MatchConfig) -> Result<MetricsReport, PipelineError> {
        config.validate()?;
        let rows = map_queries(queries, self.jobs, |q| self.score_query(q, config));
        Ok(MetricsReport::from_rows(rows.into_iter().collect::<Result<_, _>>()?))
    }
}

#[cfg(feature = "parallel")]
fn map_queries<T, F>(queries: &[LabeledQuery], jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&LabeledQuery) -> T + Sync + Send,
{
    use rayon::prelude::*;

    if jobs == 1 {
        return queries.iter().map(f).collect();
    }
    let run = || queries.par_iter().map(&f).collect();
    if jobs == 0 {
        return run();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(run),
        Err(_) => queries.iter().map(&f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_queries<T, F>(queries: &[LabeledQuery], _jobs: usize, f: F) -> Vec<T>
where
    F: Fn(&LabeledQuery) -> T,
{
    queries.iter().map(f).collect()
}

/// Free-function form of [`Evaluator::evaluate`], run sequentially.
pub fn evaluate(
    queries: &[LabeledQuery],
    graph: &Graph,
    config: &MatchConfig,
    normalizer: &TypeNormalizer,
    providers: &Providers<'_>,
) -> Result<MetricsReport, PipelineError> {
    Evaluator::new(graph, normalizer, *providers).evaluate(queries, config)
}
