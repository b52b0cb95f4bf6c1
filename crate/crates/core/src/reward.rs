//! Predicted-score parsing, margin-calibrated per-site targets, rollout
//! rewards and rejection sampling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nav::{passes_filter, site_is_usable, FilterConfig, TraceMetrics};

pub const DEFAULT_MARGIN: f64 = 15.0;
/// Separator between a plain site id and the principle of its defect variant.
pub const DEFECT_SEPARATOR: char = '@';

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("site {0} has no filter-passing rollout with a parseable score")]
    NoContributingRollouts(String),
    #[error("margin must be finite and in (0, 100], got {0}")]
    InvalidMargin(f64),
    #[error("site mean must lie in [0, 100], got {0}")]
    MeanOutOfRange(f64),
    #[error("no rewarded rollouts to select from")]
    NothingToSelect,
}

/// Score from the last non-empty line, if it reads `Action: score(n)` with
/// `0 <= n <= 100`.
pub fn parse_score(text: &str) -> Option<u8> {
    let last = text.lines().rev().find(|l| !l.trim().is_empty())?.trim();
    let rest = last.strip_prefix("Action:")?.trim_start();
    let inner = rest.strip_prefix("score(")?.strip_suffix(')')?.trim();
    if inner.is_empty() || !inner.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let n: u32 = inner.parse().ok()?;
    (n <= 100).then_some(n as u8)
}

/// Per-rollout inputs to calibration: navigation metrics plus the parsed
/// assessment score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutEvaluation {
    pub rollout_id: String,
    pub site_id: String,
    pub metrics: TraceMetrics,
    pub predicted_score: Option<u8>,
}

impl RolloutEvaluation {
    pub fn contributes(&self, filter: &FilterConfig) -> bool {
        self.predicted_score.is_some() && passes_filter(&self.metrics, filter)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEstimate {
    pub site_id: String,
    pub mu: f64,
    pub n: usize,
}

/// Mean predicted score over the given scores.
pub fn estimate_from_scores(site_id: &str, scores: &[u8]) -> Result<ScoreEstimate, RewardError> {
    if scores.is_empty() {
        return Err(RewardError::NoContributingRollouts(site_id.to_string()));
    }
    let sum: u64 = scores.iter().map(|&s| u64::from(s)).sum();
    Ok(ScoreEstimate {
        site_id: site_id.to_string(),
        mu: sum as f64 / scores.len() as f64,
        n: scores.len(),
    })
}

/// Mean over the rollouts that pass the navigation filter and carry a score.
pub fn estimate_site_score(
    site_id: &str,
    rollouts: &[RolloutEvaluation],
    filter: &FilterConfig,
) -> Result<ScoreEstimate, RewardError> {
    let scores: Vec<u8> = rollouts
        .iter()
        .filter(|r| r.site_id == site_id && r.contributes(filter))
        .filter_map(|r| r.predicted_score)
        .collect();
    estimate_from_scores(site_id, &scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedTarget {
    pub plain_target: f64,
    pub defect_target: f64,
    pub mu0: f64,
    pub margin: f64,
    pub adjusted: bool,
    /// The adjusted targets were shifted back into `[0, 100]`.
    pub clamped: bool,
}

/// Nudge by ulps until the gap holds in floating point.
fn enforce_gap(mut plain: f64, mut defect: f64, margin: f64) -> (f64, f64) {
    while plain - defect < margin {
        if defect > 0.0 {
            defect = defect.next_down().max(0.0);
        } else {
            plain = plain.next_up();
        }
    }
    (plain, defect)
}

/// Targets for a (plain, defect) pair whose gap is at least `margin`.
pub fn calibrate(mu_p: f64, mu_d: f64, margin: f64) -> Result<CalibratedTarget, RewardError> {
    if !margin.is_finite() || margin <= 0.0 || margin > 100.0 {
        return Err(RewardError::InvalidMargin(margin));
    }
    for mu in [mu_p, mu_d] {
        if !(0.0..=100.0).contains(&mu) {
            return Err(RewardError::MeanOutOfRange(mu));
        }
    }
    let mu0 = (mu_p + mu_d) / 2.0;
    if mu_p - mu_d >= margin {
        return Ok(CalibratedTarget {
            plain_target: mu_p,
            defect_target: mu_d,
            mu0,
            margin,
            adjusted: false,
            clamped: false,
        });
    }
    let half = margin / 2.0;
    let (mut plain, mut defect) = (mu0 + half, mu0 - half);
    let mut clamped = false;
    if plain > 100.0 {
        (plain, defect) = (100.0, 100.0 - margin);
        clamped = true;
    } else if defect < 0.0 {
        (plain, defect) = (margin, 0.0);
        clamped = true;
    }
    (plain, defect) = enforce_gap(plain, defect, margin);
    Ok(CalibratedTarget {
        plain_target: plain,
        defect_target: defect,
        mu0,
        margin,
        adjusted: true,
        clamped,
    })
}

/// Maps the distance between a predicted score and its target to a reward.
pub trait RewardFn {
    fn reward(&self, predicted: f64, target: f64) -> f64;
}

/// `max(0, 1 - |predicted - target| / 100)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearProximity;

impl RewardFn for LinearProximity {
    fn reward(&self, predicted: f64, target: f64) -> f64 {
        (1.0 - (predicted - target).abs() / 100.0).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardedRollout {
    pub rollout_id: String,
    pub site_id: String,
    /// `None` when the rollout is excluded.
    pub reward: Option<f64>,
    pub target_used: f64,
    pub s_nav: f64,
}

pub fn assign_reward(
    rollout: &RolloutEvaluation,
    target: f64,
    filter: &FilterConfig,
    reward_fn: &dyn RewardFn,
) -> RewardedRollout {
    let reward = match rollout.predicted_score {
        Some(p) if passes_filter(&rollout.metrics, filter) => Some(reward_fn.reward(f64::from(p), target)),
        _ => None,
    };
    RewardedRollout {
        rollout_id: rollout.rollout_id.clone(),
        site_id: rollout.site_id.clone(),
        reward,
        target_used: target,
        s_nav: rollout.metrics.s_nav,
    }
}

/// Highest reward; ties go to the higher s_nav, then the lowest rollout id.
pub fn select_best(rollouts: &[RewardedRollout]) -> Result<&RewardedRollout, RewardError> {
    rollouts
        .iter()
        .filter_map(|r| r.reward.map(|w| (w, r)))
        .min_by(|(wa, a), (wb, b)| {
            wb.total_cmp(wa)
                .then(b.s_nav.total_cmp(&a.s_nav))
                .then(a.rollout_id.cmp(&b.rollout_id))
        })
        .map(|(_, r)| r)
        .ok_or(RewardError::NothingToSelect)
}

/// Plain parent of a defect-variant id, or `None` for a plain id.
pub fn plain_parent(site_id: &str) -> Option<&str> {
    site_id.split_once(DEFECT_SEPARATOR).map(|(p, _)| p)
}

pub fn defect_site_id(plain: &str, principle: &str) -> String {
    format!("{plain}{DEFECT_SEPARATOR}{principle}")
}

/// Every (plain, defect) pair whose both ids are present, sorted.
pub fn pair_sites<'a>(site_ids: impl IntoIterator<Item = &'a str>) -> Vec<(String, String)> {
    let ids: std::collections::BTreeSet<&str> = site_ids.into_iter().collect();
    ids.iter()
        .filter_map(|id| plain_parent(id).filter(|p| ids.contains(p)).map(|p| (p.to_string(), id.to_string())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTarget {
    pub plain_site: String,
    pub defect_site: String,
    pub target: CalibratedTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub margin: f64,
    pub filter: FilterConfig,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            margin: DEFAULT_MARGIN,
            filter: FilterConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOutcome {
    pub estimates: Vec<ScoreEstimate>,
    pub pairs: Vec<PairTarget>,
    /// Target per site used for its rollout rewards.
    pub site_targets: BTreeMap<String, f64>,
    /// Sites dropped by the site filter or lacking contributing rollouts.
    pub excluded_sites: Vec<String>,
    pub rewarded: Vec<RewardedRollout>,
    /// Best rollout per site, by site id.
    pub selected: BTreeMap<String, String>,
}

/// Site filter, per-site estimates, per-pair calibration, rewards and
/// selection over a whole evaluation set.
///
/// A defect site takes the defect target of its pair. A plain site takes the
/// mean of its plain targets over all of its calibrated pairs, or its own
/// estimate when none calibrated.
pub fn calibrate_sites(
    evaluations: &[RolloutEvaluation],
    cfg: &CalibrationConfig,
    reward_fn: &dyn RewardFn,
) -> Result<CalibrationOutcome, RewardError> {
    let mut by_site: BTreeMap<&str, Vec<&RolloutEvaluation>> = BTreeMap::new();
    for e in evaluations {
        by_site.entry(e.site_id.as_str()).or_default().push(e);
    }

    let mut estimates = BTreeMap::new();
    let mut excluded_sites = Vec::new();
    for (&site, rollouts) in &by_site {
        let usable = site_is_usable(rollouts.iter().map(|r| &r.metrics), &cfg.filter);
        let scores: Vec<u8> = rollouts
            .iter()
            .filter(|r| r.contributes(&cfg.filter))
            .filter_map(|r| r.predicted_score)
            .collect();
        match estimate_from_scores(site, &scores) {
            Ok(est) if usable => {
                estimates.insert(site.to_string(), est);
            }
            _ => excluded_sites.push(site.to_string()),
        }
    }

    let mut pairs = Vec::new();
    let mut plain_targets: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut site_targets = BTreeMap::new();
    for (plain, defect) in pair_sites(estimates.keys().map(String::as_str)) {
        let target = calibrate(estimates[&plain].mu, estimates[&defect].mu, cfg.margin)?;
        plain_targets.entry(plain.clone()).or_default().push(target.plain_target);
        site_targets.insert(defect.clone(), target.defect_target);
        pairs.push(PairTarget {
            plain_site: plain,
            defect_site: defect,
            target,
        });
    }
    for (site, est) in &estimates {
        if let Some(ts) = plain_targets.get(site) {
            site_targets.insert(site.clone(), ts.iter().sum::<f64>() / ts.len() as f64);
        } else {
            site_targets.entry(site.clone()).or_insert(est.mu);
        }
    }

    let mut rewarded = Vec::new();
    let mut selected = BTreeMap::new();
    for (site, &target) in &site_targets {
        let site_rewards: Vec<RewardedRollout> = by_site[site.as_str()]
            .iter()
            .map(|r| assign_reward(r, target, &cfg.filter, reward_fn))
            .collect();
        if let Ok(best) = select_best(&site_rewards) {
            selected.insert(site.clone(), best.rollout_id.clone());
        }
        rewarded.extend(site_rewards);
    }

    Ok(CalibrationOutcome {
        estimates: estimates.into_values().collect(),
        pairs,
        site_targets,
        excluded_sites,
        rewarded,
        selected,
    })
}
