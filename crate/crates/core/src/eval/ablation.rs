use std::fmt::Write as _;

use crate::pipeline::{MatchConfig, MatchMode, PipelineError, SimilarityMode};

use super::{Evaluator, LabeledQuery, MetricsReport};

/// The seven (mode, similarity) rows, in report order.
pub const ABLATION_GRID: [(MatchMode, SimilarityMode); 7] = [
    (MatchMode::Es, SimilarityMode::Semantic),
    (MatchMode::Ee, SimilarityMode::Semantic),
    (MatchMode::Ee, SimilarityMode::Action),
    (MatchMode::Ee, SimilarityMode::SemanticAction),
    (MatchMode::Ees, SimilarityMode::Semantic),
    (MatchMode::Ees, SimilarityMode::Action),
    (MatchMode::Ees, SimilarityMode::SemanticAction),
];

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub method: MatchMode,
    pub similarity: SimilarityMode,
    pub report: MetricsReport,
}

impl AblationRow {
    pub fn to_tsv(rows: &[AblationRow]) -> String {
        let mut out = String::from("Method\tSimilarity\tMatch\tHit@1\tHit@2\n");
        for row in rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.4}\t{:.4}\t{:.4}",
                row.method, row.similarity, row.report.match_rate, row.report.hit_at_1, row.report.hit_at_2
            );
        }
        out
    }
}

impl Evaluator<'_> {
    /// Evaluates every row of [`ABLATION_GRID`]. Weights and `k` come from
    /// `base`; mode and similarity are overridden per row.
    pub fn run_ablation(&self, queries: &[LabeledQuery], base: &MatchConfig) -> Result<Vec<AblationRow>, PipelineError> {
        ABLATION_GRID
            .iter()
            .map(|&(method, similarity)| {
                let config = base.clone().with_modes(method, similarity);
                Ok(AblationRow {
                    method,
                    similarity,
                    report: self.evaluate(queries, &config)?,
                })
            })
            .collect()
    }
}
