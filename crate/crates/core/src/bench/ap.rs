use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::pairs::{PreferencePair, ScoreMap};
use super::BenchError;

/// Score given to sites without a parseable prediction; ranks below 0.
pub const MISSING_SCORE: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteRole {
    Chosen,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSite {
    pub site_id: String,
    pub predicted_score: Option<f64>,
    pub role: SiteRole,
}

/// How the sites of a pair list become ranked instances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteDedup {
    /// Each (site, role) counted once.
    #[default]
    BySiteRole,
    /// Both sides of every pair counted, repeats included.
    PerPair,
}

/// Ranked instances from the non-tie pairs.
pub fn scored_sites(pairs: &[PreferencePair], scores: &ScoreMap, dedup: SiteDedup) -> Vec<ScoredSite> {
    let mut out = Vec::new();
    let mut seen = BTreeMap::new();
    for p in pairs {
        let Some((chosen, rejected)) = p.chosen_rejected() else {
            continue;
        };
        for (site, role) in [(chosen, SiteRole::Chosen), (rejected, SiteRole::Rejected)] {
            if dedup == SiteDedup::BySiteRole && seen.insert((site.to_string(), role), ()).is_some() {
                continue;
            }
            out.push(ScoredSite {
                site_id: site.to_string(),
                predicted_score: scores.get(site).copied().flatten(),
                role,
            });
        }
    }
    out
}

/// Average precision of chosen sites ranked by descending score.
///
/// Equal scores form one group; a group holding `p` positives contributes
/// `p * TP / N` with `TP` and `N` counted through the end of the group.
pub fn auc_pr(sites: &[ScoredSite]) -> Result<f64, BenchError> {
    let positives = sites.iter().filter(|s| s.role == SiteRole::Chosen).count();
    if positives == 0 || positives == sites.len() {
        return Err(BenchError::SingleClass);
    }
    let mut ranked: Vec<(f64, bool)> = sites
        .iter()
        .map(|s| (s.predicted_score.unwrap_or(MISSING_SCORE), s.role == SiteRole::Chosen))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut ap = 0.0;
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut i = 0;
    while i < ranked.len() {
        let score = ranked[i].0;
        let mut group_pos = 0;
        while i < ranked.len() && ranked[i].0 == score {
            group_pos += usize::from(ranked[i].1);
            seen += 1;
            i += 1;
        }
        tp += group_pos;
        ap += group_pos as f64 * tp as f64 / seen as f64;
    }
    Ok(ap / positives as f64)
}
