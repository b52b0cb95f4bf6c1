//! Rating statistics and export of votes as labeled pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use uxpipe_core::bench::{krippendorff_alpha, LabelSource, PreferencePair};

use crate::store::{Choice, VoteRecord};

pub const OUTLIER_Z: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingStats {
    pub n_votes: usize,
    pub n_sessions: usize,
    /// Votes whose duration was excluded from the mean.
    pub duration_outliers: usize,
    pub mean_duration_s: Option<f64>,
    pub mean_frame_clicks: Option<f64>,
    pub mean_element_clicks: Option<f64>,
    /// Inter-rater agreement over co-rated pairs; absent without two raters
    /// sharing a pair or without any disagreement to measure against.
    pub alpha: Option<f64>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (n, sum) = xs.into_iter().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| sum / n as f64)
}

/// Values whose z-score against the population mean and standard deviation
/// is at most `z_max`.
pub fn without_outliers(values: &[f64], z_max: f64) -> Vec<f64> {
    let Some(mu) = mean(values.iter().copied()) else {
        return Vec::new();
    };
    let sd = (values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
    if sd == 0.0 {
        return values.to_vec();
    }
    values.iter().copied().filter(|v| (v - mu).abs() / sd <= z_max).collect()
}

/// Per-session canonical choices with sessions as raters and pairs as items.
pub fn alpha(votes: &[VoteRecord]) -> Option<f64> {
    let items: BTreeMap<&str, usize> = {
        let mut ids: Vec<&str> = votes.iter().map(|v| v.pair_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().enumerate().map(|(i, id)| (id, i)).collect()
    };
    let mut raters: BTreeMap<&str, Vec<Option<Choice>>> = BTreeMap::new();
    for v in votes {
        raters.entry(&v.session_id).or_insert_with(|| vec![None; items.len()])[items[v.pair_id.as_str()]] =
            Some(v.canonical_choice);
    }
    let ratings: Vec<Vec<Option<u8>>> = raters
        .into_values()
        .map(|r| r.into_iter().map(|c| c.map(|c| c as u8)).collect())
        .collect();
    krippendorff_alpha(&ratings).ok()
}

pub fn rating_stats(votes: &[VoteRecord]) -> RatingStats {
    let durations: Vec<f64> = votes.iter().map(|v| v.telemetry.duration_ms as f64 / 1000.0).collect();
    let kept = without_outliers(&durations, OUTLIER_Z);
    let mut sessions: Vec<&str> = votes.iter().map(|v| v.session_id.as_str()).collect();
    sessions.sort_unstable();
    sessions.dedup();
    RatingStats {
        n_votes: votes.len(),
        n_sessions: sessions.len(),
        duration_outliers: durations.len() - kept.len(),
        mean_duration_s: mean(kept),
        mean_frame_clicks: mean(votes.iter().map(|v| f64::from(v.telemetry.frame_clicks))),
        mean_element_clicks: mean(votes.iter().map(|v| f64::from(v.telemetry.element_clicks))),
        alpha: alpha(votes),
    }
}

/// One human-labeled pair per vote, in the orientation the rater saw.
pub fn export_pairs(votes: &[VoteRecord]) -> Vec<PreferencePair> {
    votes
        .iter()
        .map(|v| PreferencePair {
            pair_id: format!("{}/{}", v.pair_id, v.session_id),
            left_site: v.left_site.clone(),
            right_site: v.right_site.clone(),
            label: v.choice.label(),
            label_source: LabelSource::Human,
        })
        .collect()
}
