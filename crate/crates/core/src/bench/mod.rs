//! Preference-pair benchmarks and their evaluation metrics.

pub mod alpha;
pub mod ap;
pub mod critique;
pub mod pairs;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use alpha::krippendorff_alpha;
pub use ap::{auc_pr, scored_sites, ScoredSite, SiteDedup, SiteRole};
pub use critique::{critique_report, CritiqueRecord, CritiqueTable, KeywordClassifier, ModelClassifier, SiteKind, Verdict};
pub use pairs::{
    agreement_rate, build_benchmark, build_benchmark_with, judge_pair, mean_delta, Benchmark, LabelSource, PairLabel, PreferencePair, ScoreMap,
    SourceEntry,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BenchError {
    #[error("source {source_site} has {found} defect variant(s); at least {needed} are needed")]
    TooFewVariants { source_site: String, found: usize, needed: usize },
    #[error("pair {0} is labeled a tie and cannot be judged")]
    TieLabel(String),
    #[error("ranking needs both chosen and rejected sites")]
    SingleClass,
    #[error("no item has two or more ratings")]
    NoPairableItems,
    #[error("all ratings share one value; expected disagreement is zero")]
    NoVariation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub label: String,
    pub auc_pr: Option<f64>,
    pub agreement_rate: Option<f64>,
    pub mean_delta: Option<f64>,
    pub n_pairs: usize,
    /// Non-tie pairs entering the agreement rate.
    pub n_judged: usize,
    pub critique: Option<Vec<critique::CritiqueRow>>,
    pub critique_text: Option<String>,
}

pub fn evaluate(
    label: &str,
    pairs: &[PreferencePair],
    scores: &ScoreMap,
    dedup: SiteDedup,
    critique: Option<&CritiqueTable>,
) -> BenchmarkReport {
    BenchmarkReport {
        label: label.to_string(),
        auc_pr: auc_pr(&scored_sites(pairs, scores, dedup)).ok(),
        agreement_rate: agreement_rate(pairs, scores),
        mean_delta: mean_delta(pairs, scores),
        n_pairs: pairs.len(),
        n_judged: pairs.iter().filter(|p| p.label != PairLabel::Tie).count(),
        critique: critique.map(CritiqueTable::rows),
        critique_text: critique.map(CritiqueTable::render),
    }
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "--".to_string(), |x| format!("{x:.digits$}"))
}

impl BenchmarkReport {
    /// Text table with AUC, agreement rate and score difference, followed
    /// by the critique table when present.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<24} {:>7} {:>15} {:>8}\n{:<24} {:>7} {:>15} {:>8}\n",
            "Model",
            "AUC",
            "Agreement Rate",
            "Delta",
            self.label,
            opt(self.auc_pr, 3),
            opt(self.agreement_rate, 3),
            opt(self.mean_delta, 2)
        );
        out.push_str(&format!("pairs: {} (judged {})\n", self.n_pairs, self.n_judged));
        if let Some(text) = &self.critique_text {
            out.push('\n');
            out.push_str(text);
        }
        out
    }
}
