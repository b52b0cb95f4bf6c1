//! Navigation-quality metrics over a rollout and the trace/site filters.
//!
//! Blank observations are dropped first (together with their actions). A
//! step reached through a scroll inherits the logical screen of the step it
//! scrolled from; any other step joins the first earlier cluster whose
//! representative hash is within the identity threshold, or opens a new one.
//! Transitions are labelled by the action of the step they leave from, and
//! scroll transitions are left out of both same-screen ratios.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::ActionClass;
use crate::hash::{is_blank_with, phash, ScreenHash, ScreenIdentity, DEFAULT_BLANK_EPSILON};
use crate::trace::Rollout;

pub const DEFAULT_MIN_S_NAV: f64 = 0.07;
pub const DEFAULT_MIN_STEPS: usize = 30;
pub const DEFAULT_MIN_PASSING_ROLLOUTS: usize = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NavError {
    #[error("rollout has no non-blank observations")]
    EmptyLogicalSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavConfig {
    pub identity: ScreenIdentity,
    pub blank_epsilon: f64,
    /// Scroll-reached steps inherit the pre-scroll logical screen.
    pub merge_scrolled: bool,
    /// Scroll transitions do not count towards the same-screen ratios.
    pub exclude_scroll_transitions: bool,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            identity: ScreenIdentity::default(),
            blank_epsilon: DEFAULT_BLANK_EPSILON,
            merge_scrolled: true,
            exclude_scroll_transitions: true,
        }
    }
}

/// What the metrics need to know about one raw step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservedStep {
    pub hash: ScreenHash,
    pub blank: bool,
    pub action: ActionClass,
}

pub fn observe_rollout(rollout: &Rollout, cfg: &NavConfig) -> Vec<ObservedStep> {
    rollout
        .steps()
        .iter()
        .map(|s| ObservedStep {
            hash: phash(&s.observation),
            blank: is_blank_with(&s.observation, cfg.blank_epsilon),
            action: s.action.kind.class(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalScreenSequence {
    /// Logical screen id per kept step, dense in `0..representatives.len()`.
    pub ids: Vec<usize>,
    /// Raw (0-based) step index of every kept step.
    pub kept: Vec<usize>,
    /// Action class of every kept step; entry `i` labels transition `i -> i+1`.
    pub actions: Vec<ActionClass>,
    pub representatives: Vec<ScreenHash>,
    pub raw_steps: usize,
}

impl LogicalScreenSequence {
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn unique_screens(&self) -> usize {
        self.representatives.len()
    }
}

pub fn logical_screens(steps: &[ObservedStep], cfg: &NavConfig) -> LogicalScreenSequence {
    let mut seq = LogicalScreenSequence {
        ids: Vec::new(),
        kept: Vec::new(),
        actions: Vec::new(),
        representatives: Vec::new(),
        raw_steps: steps.len(),
    };
    for (raw, step) in steps.iter().enumerate() {
        if step.blank {
            continue;
        }
        let via_scroll = seq.actions.last() == Some(&ActionClass::Scroll);
        let id = match seq.ids.last() {
            Some(&prev) if via_scroll && cfg.merge_scrolled => prev,
            _ => match seq
                .representatives
                .iter()
                .position(|r| cfg.identity.same(*r, step.hash))
            {
                Some(id) => id,
                None => {
                    seq.representatives.push(step.hash);
                    seq.representatives.len() - 1
                }
            },
        };
        seq.ids.push(id);
        seq.kept.push(raw);
        seq.actions.push(step.action);
    }
    seq
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricFlags {
    /// No counted transitions: `same_screen_ratio` defaulted to 0.
    pub no_transitions: bool,
    /// No counted click transitions: `same_after_clicks_ratio` defaulted to 0.
    pub no_clicks: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceMetrics {
    pub same_screen_ratio: f64,
    pub same_after_clicks_ratio: f64,
    pub unique_screen_ratio: f64,
    /// Raw step count, including blank and scroll steps.
    pub steps: usize,
    pub s_nav: f64,
    pub logical_len: usize,
    pub unique_screens: usize,
    pub transitions: usize,
    pub same_transitions: usize,
    pub click_transitions: usize,
    pub same_click_transitions: usize,
    pub flags: MetricFlags,
}

/// Navigation-quality score: `unique * (1 - same) * (1 - same_after_clicks)`.
pub fn s_nav(unique: f64, same: f64, same_after_clicks: f64) -> f64 {
    unique * (1.0 - same) * (1.0 - same_after_clicks)
}

pub fn metrics_from_sequence(seq: &LogicalScreenSequence, cfg: &NavConfig) -> Result<TraceMetrics, NavError> {
    if seq.is_empty() {
        return Err(NavError::EmptyLogicalSequence);
    }
    let mut transitions = 0;
    let mut same = 0;
    let mut clicks = 0;
    let mut same_clicks = 0;
    for i in 0..seq.ids.len() - 1 {
        let action = seq.actions[i];
        if action == ActionClass::Scroll && cfg.exclude_scroll_transitions {
            continue;
        }
        let unchanged = seq.ids[i] == seq.ids[i + 1];
        transitions += 1;
        same += usize::from(unchanged);
        if action == ActionClass::Click {
            clicks += 1;
            same_clicks += usize::from(unchanged);
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let same_screen_ratio = ratio(same, transitions);
    let same_after_clicks_ratio = ratio(same_clicks, clicks);
    let unique_screen_ratio = ratio(seq.unique_screens(), seq.ids.len());
    Ok(TraceMetrics {
        same_screen_ratio,
        same_after_clicks_ratio,
        unique_screen_ratio,
        steps: seq.raw_steps,
        s_nav: s_nav(unique_screen_ratio, same_screen_ratio, same_after_clicks_ratio),
        logical_len: seq.ids.len(),
        unique_screens: seq.unique_screens(),
        transitions,
        same_transitions: same,
        click_transitions: clicks,
        same_click_transitions: same_clicks,
        flags: MetricFlags {
            no_transitions: transitions == 0,
            no_clicks: clicks == 0,
        },
    })
}

pub fn compute_metrics(steps: &[ObservedStep], cfg: &NavConfig) -> Result<TraceMetrics, NavError> {
    metrics_from_sequence(&logical_screens(steps, cfg), cfg)
}

pub fn rollout_metrics(rollout: &Rollout, cfg: &NavConfig) -> Result<TraceMetrics, NavError> {
    compute_metrics(&observe_rollout(rollout, cfg), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_s_nav: f64,
    pub min_steps: usize,
    pub min_passing_rollouts: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_s_nav: DEFAULT_MIN_S_NAV,
            min_steps: DEFAULT_MIN_STEPS,
            min_passing_rollouts: DEFAULT_MIN_PASSING_ROLLOUTS,
        }
    }
}

/// Both thresholds are inclusive.
pub fn passes_filter(metrics: &TraceMetrics, cfg: &FilterConfig) -> bool {
    metrics.s_nav >= cfg.min_s_nav && metrics.steps >= cfg.min_steps
}

/// A site is kept when at least `min_passing_rollouts` of its rollouts pass.
pub fn site_is_usable<'a>(metrics: impl IntoIterator<Item = &'a TraceMetrics>, cfg: &FilterConfig) -> bool {
    metrics.into_iter().filter(|m| passes_filter(m, cfg)).count() >= cfg.min_passing_rollouts
}
