//! Critique extraction, categorization and the per-category precision table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::harness::{Message, Policy, PolicyError, PolicyRequest, Role, Turn};
use crate::DefectPrinciple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKind {
    Plain,
    DefectAugmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    #[serde(rename = "tp")]
    TruePositive,
    #[serde(rename = "fp")]
    FalsePositive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CritiqueRecord {
    pub site_id: String,
    pub site_kind: SiteKind,
    pub issue: String,
    pub category: DefectPrinciple,
    pub verified: Option<Verdict>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u32,
    pub fp: u32,
}

impl Counts {
    pub fn precision(self) -> Option<f64> {
        let total = self.tp + self.fp;
        (total > 0).then(|| f64::from(self.tp) / f64::from(total))
    }

    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CritiqueTable {
    pub cells: BTreeMap<(DefectPrinciple, SiteKind), Counts>,
}

/// Integer percentage, or `--` for an empty cell.
pub fn format_cell(precision: Option<f64>) -> String {
    match precision {
        Some(p) => format!("{}%", (p * 100.0).round()),
        None => "--".to_string(),
    }
}

/// One-decimal percentage, or `--`.
pub fn format_total(precision: Option<f64>) -> String {
    match precision {
        Some(p) => format!("{:.1}%", p * 100.0),
        None => "--".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CritiqueRow {
    pub category: DefectPrinciple,
    pub plain: Counts,
    pub defect_augmented: Counts,
    pub plain_precision: String,
    pub defect_augmented_precision: String,
}

impl CritiqueTable {
    pub fn rows(&self) -> Vec<CritiqueRow> {
        DefectPrinciple::ALL
            .into_iter()
            .map(|p| {
                let plain = self.counts(p, SiteKind::Plain);
                let da = self.counts(p, SiteKind::DefectAugmented);
                CritiqueRow {
                    category: p,
                    plain,
                    defect_augmented: da,
                    plain_precision: format_cell(plain.precision()),
                    defect_augmented_precision: format_cell(da.precision()),
                }
            })
            .collect()
    }

    pub fn counts(&self, category: DefectPrinciple, kind: SiteKind) -> Counts {
        self.cells.get(&(category, kind)).copied().unwrap_or_default()
    }

    pub fn precision(&self, category: DefectPrinciple, kind: SiteKind) -> Option<f64> {
        self.counts(category, kind).precision()
    }

    pub fn kind_total(&self, kind: SiteKind) -> Counts {
        let mut c = Counts::default();
        for p in DefectPrinciple::ALL {
            c.add(self.counts(p, kind));
        }
        c
    }

    pub fn total(&self) -> Counts {
        let mut c = self.kind_total(SiteKind::Plain);
        c.add(self.kind_total(SiteKind::DefectAugmented));
        c
    }

    /// Fixed-width text table: counts, per-cell precision and totals.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>5} {:>5} {:>5} {:>5} {:>8} {:>8}\n",
            "Category", "P.TP", "P.FP", "DA.TP", "DA.FP", "Plain", "D.A."
        ));
        for p in DefectPrinciple::ALL {
            let plain = self.counts(p, SiteKind::Plain);
            let da = self.counts(p, SiteKind::DefectAugmented);
            out.push_str(&format!(
                "{:<12} {:>5} {:>5} {:>5} {:>5} {:>8} {:>8}\n",
                p.title(),
                plain.tp,
                plain.fp,
                da.tp,
                da.fp,
                format_cell(plain.precision()),
                format_cell(da.precision())
            ));
        }
        out.push_str(&format!(
            "Overall precision: plain {}, defect-augmented {}, total {}\n",
            format_total(self.kind_total(SiteKind::Plain).precision()),
            format_total(self.kind_total(SiteKind::DefectAugmented).precision()),
            format_total(self.total().precision())
        ));
        out
    }
}

/// Tally verified records per (category, site kind); unverified records are
/// skipped.
pub fn critique_report(records: &[CritiqueRecord]) -> CritiqueTable {
    let mut cells: BTreeMap<(DefectPrinciple, SiteKind), Counts> = BTreeMap::new();
    for r in records {
        let Some(v) = r.verified else { continue };
        let c = cells.entry((r.category, r.site_kind)).or_default();
        match v {
            Verdict::TruePositive => c.tp += 1,
            Verdict::FalsePositive => c.fp += 1,
        }
    }
    CritiqueTable { cells }
}

/// Bulleted or numbered lines of an assessment, without the score line.
pub fn extract_issues(assessment: &str) -> Vec<String> {
    assessment
        .lines()
        .map(str::trim)
        .filter_map(|l| {
            let rest = l
                .strip_prefix("- ")
                .or_else(|| l.strip_prefix("* "))
                .or_else(|| {
                    let digits = l.bytes().take_while(u8::is_ascii_digit).count();
                    (digits > 0).then(|| l[digits..].strip_prefix(". ").or_else(|| l[digits..].strip_prefix(") ")))?
                })?;
            let rest = rest.trim();
            (!rest.is_empty()).then(|| rest.to_string())
        })
        .collect()
}

pub trait IssueClassifier {
    fn classify(&mut self, issue: &str) -> Result<Option<DefectPrinciple>, PolicyError>;
}

/// Keyword vocabulary per principle; the principle with most hits wins,
/// ties going to the earlier principle.
#[derive(Debug, Clone)]
pub struct KeywordClassifier {
    vocab: Vec<(DefectPrinciple, Vec<String>)>,
}

impl Default for KeywordClassifier {
    fn default() -> Self {
        use DefectPrinciple::*;
        let v = |p, words: &[&str]| (p, words.iter().map(|w| w.to_string()).collect());
        Self {
            vocab: vec![
                v(Consistency, &["inconsistent", "consistency", "different label", "renamed", "moved between", "changes position", "swapped"]),
                v(Feedback, &["no feedback", "no visible change", "nothing happened", "did nothing", "unresponsive", "non-responsive", "not loading", "stuck", "no response", "no change"]),
                v(Dialog, &["confirmation", "no closure", "never confirmed", "unclear whether", "completed", "success message", "back at the home"]),
                v(Prevention, &["without confirm", "accidental", "irreversible", "deleted immediately", "no warning", "destructive", "error prevention"]),
                v(Control, &["redirect", "unexpected", "interstitial", "popup", "promo", "forced", "taken to"]),
                v(Reversal, &["no back", "cannot go back", "can't go back", "undo", "cannot return", "no way back", "reverse"]),
                v(Memory, &["remember", "memorize", "code", "recall", "not displayed", "previous page"]),
                v(Hierarchy, &["below the fold", "hard to find", "too small", "tiny", "buried", "scroll to find", "hidden", "prominent"]),
            ],
        }
    }
}

impl KeywordClassifier {
    pub fn classify_text(&self, issue: &str) -> Option<DefectPrinciple> {
        let lower = issue.to_lowercase();
        let mut best: Option<(DefectPrinciple, usize)> = None;
        for (p, words) in &self.vocab {
            let hits = words.iter().filter(|w| lower.contains(w.as_str())).count();
            if hits > 0 && best.is_none_or(|(_, b)| hits > b) {
                best = Some((*p, hits));
            }
        }
        best.map(|(p, _)| p)
    }
}

impl IssueClassifier for KeywordClassifier {
    fn classify(&mut self, issue: &str) -> Result<Option<DefectPrinciple>, PolicyError> {
        Ok(self.classify_text(issue))
    }
}

pub const CLASSIFIER_PROMPT: &str = "Classify the usability issue below into exactly one of these principles: consistency, feedback, dialog, prevention, control, reversal, memory, hierarchy. Answer with the single principle name on the last line.";

/// Asks a policy endpoint to name the principle.
pub struct ModelClassifier<P> {
    pub policy: P,
}

impl<P: Policy> IssueClassifier for ModelClassifier<P> {
    fn classify(&mut self, issue: &str) -> Result<Option<DefectPrinciple>, PolicyError> {
        let request = PolicyRequest {
            turn: Turn::Assessment,
            attempt: 0,
            messages: vec![
                Message::text(Role::System, CLASSIFIER_PROMPT),
                Message::text(Role::User, issue),
            ],
        };
        let answer = self.policy.generate(&request)?;
        let last = answer.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
        let word = last
            .trim()
            .trim_matches(|c: char| !c.is_ascii_alphabetic())
            .rsplit(|c: char| !c.is_ascii_alphabetic())
            .next()
            .unwrap_or("");
        Ok(word.parse().ok())
    }
}

/// Extract and categorize the issues of one assessment; uncategorized
/// issues are dropped.
pub fn categorize(
    site_id: &str,
    site_kind: SiteKind,
    assessment: &str,
    classifier: &mut dyn IssueClassifier,
) -> Result<Vec<CritiqueRecord>, PolicyError> {
    let mut out = Vec::new();
    for issue in extract_issues(assessment) {
        if let Some(category) = classifier.classify(&issue)? {
            out.push(CritiqueRecord {
                site_id: site_id.to_string(),
                site_kind,
                issue,
                category,
                verified: None,
            });
        }
    }
    Ok(out)
}
