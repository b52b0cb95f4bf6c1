//! Canonical data model for agent interaction traces.

mod archive;

use std::io::Cursor;
use std::sync::Arc;

use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{Action, ActionRecord};
use crate::reward::parse_score;

pub use archive::{load_rollout, save_rollout, step_image_rel, ArchiveError, ArchiveSummary, MANIFEST_FILE};

/// Default maximum number of navigation steps per session.
pub const DEFAULT_BUDGET: u32 = 50;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("screenshot must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: u32, height: u32 },
    #[error("pixel buffer holds {got} bytes, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("step index {got} out of order, expected {expected}")]
    OutOfOrder { expected: u32, got: u32 },
    #[error("rollout already terminated")]
    Terminated,
    #[error("rollout budget of {budget} steps exhausted")]
    BudgetExceeded { budget: u32 },
    #[error("score action is only valid in the assessment turn")]
    ScoreOutsideAssessment,
    #[error("click ({x}, {y}) outside the {width}x{height} observation")]
    ClickOutOfBounds {
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },
    #[error("termination `stopped` requires the last action to be stop()")]
    StopMissing,
    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),
}

/// An RGB observation of the screen. Pixels are shared, so clones are cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct Screenshot {
    image: Arc<RgbImage>,
    captured_at_ms: u64,
}

impl Screenshot {
    pub fn new(image: RgbImage, captured_at_ms: u64) -> Result<Self, TraceError> {
        if image.width() == 0 || image.height() == 0 {
            return Err(TraceError::EmptyImage {
                width: image.width(),
                height: image.height(),
            });
        }
        Ok(Self {
            image: Arc::new(image),
            captured_at_ms,
        })
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>, captured_at_ms: u64) -> Result<Self, TraceError> {
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(TraceError::BufferSize {
                expected,
                got: pixels.len(),
            });
        }
        let image = RgbImage::from_raw(width, height, pixels).ok_or(TraceError::BufferSize {
            expected,
            got: 0,
        })?;
        Self::new(image, captured_at_ms)
    }

    pub fn from_png(bytes: &[u8], captured_at_ms: u64) -> Result<Self, TraceError> {
        let image = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgb8();
        Self::new(image, captured_at_ms)
    }

    /// Lossless PNG encoding; identical pixels always produce identical bytes.
    pub fn to_png(&self) -> Vec<u8> {
        encode_png(&self.image)
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    pub fn pixels(&self) -> &[u8] {
        self.image.as_raw()
    }

    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    pub fn captured_at_ms(&self) -> u64 {
        self.captured_at_ms
    }
}

pub(crate) fn encode_png(image: &RgbImage) -> Vec<u8> {
    use image::codecs::png::{CompressionType, FilterType, PngEncoder};
    use image::ImageEncoder;

    let mut out = Cursor::new(Vec::new());
    PngEncoder::new_with_quality(&mut out, CompressionType::Fast, FilterType::Sub)
        .write_image(
            image.as_raw(),
            image.width(),
            image.height(),
            image::ExtendedColorType::Rgb8,
        )
        .expect("in-memory PNG encoding of a valid RGB buffer");
    out.into_inner()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    /// 1-based position within the rollout.
    pub index: u32,
    /// The observation the policy saw before acting.
    pub observation: Screenshot,
    pub thought: String,
    pub action: ActionRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Stopped,
    BudgetExhausted,
    EnvironmentError,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Stopped => "stopped",
            Termination::BudgetExhausted => "budget_exhausted",
            Termination::EnvironmentError => "environment_error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "stopped" => Some(Termination::Stopped),
            "budget_exhausted" => Some(Termination::BudgetExhausted),
            "environment_error" => Some(Termination::EnvironmentError),
            _ => None,
        }
    }
}

/// Output of the final scoring turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assessment {
    pub issues_text: String,
    pub predicted_score: Option<u8>,
}

impl Assessment {
    pub fn from_text(text: impl Into<String>) -> Self {
        let issues_text = text.into();
        let predicted_score = parse_score(&issues_text);
        Self {
            issues_text,
            predicted_score,
        }
    }
}

/// One recorded usability-testing session.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub rollout_id: String,
    pub site_id: String,
    pub goal: String,
    pub budget: u32,
    steps: Vec<Step>,
    assessment: Option<Assessment>,
    termination: Option<Termination>,
}

impl Rollout {
    pub fn new(rollout_id: impl Into<String>, site_id: impl Into<String>, goal: impl Into<String>, budget: u32) -> Self {
        Self {
            rollout_id: rollout_id.into(),
            site_id: site_id.into(),
            goal: goal.into(),
            budget,
            steps: Vec::new(),
            assessment: None,
            termination: None,
        }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn assessment(&self) -> Option<&Assessment> {
        self.assessment.as_ref()
    }

    pub fn termination(&self) -> Option<Termination> {
        self.termination
    }

    pub fn is_terminated(&self) -> bool {
        self.termination.is_some()
    }

    pub fn predicted_score(&self) -> Option<u8> {
        self.assessment.as_ref().and_then(|a| a.predicted_score)
    }

    pub fn append_step(&mut self, step: Step) -> Result<(), TraceError> {
        if self.termination.is_some() {
            return Err(TraceError::Terminated);
        }
        let expected = self.steps.len() as u32 + 1;
        if step.index != expected {
            return Err(TraceError::OutOfOrder {
                expected,
                got: step.index,
            });
        }
        if expected > self.budget {
            return Err(TraceError::BudgetExceeded { budget: self.budget });
        }
        match step.action.kind {
            Action::Score { .. } => return Err(TraceError::ScoreOutsideAssessment),
            Action::Click { x, y } if x >= step.observation.width() || y >= step.observation.height() => {
                return Err(TraceError::ClickOutOfBounds {
                    x,
                    y,
                    width: step.observation.width(),
                    height: step.observation.height(),
                })
            }
            _ => {}
        }
        self.steps.push(step);
        Ok(())
    }

    pub fn terminate(&mut self, termination: Termination) -> Result<(), TraceError> {
        if self.termination.is_some() {
            return Err(TraceError::Terminated);
        }
        if termination == Termination::Stopped
            && !matches!(self.steps.last().map(|s| &s.action.kind), Some(Action::Stop))
        {
            return Err(TraceError::StopMissing);
        }
        self.termination = Some(termination);
        Ok(())
    }

    pub fn set_assessment(&mut self, assessment: Assessment) {
        self.assessment = Some(assessment);
    }

    pub fn history(&self) -> SessionHistory {
        SessionHistory::from_steps(&self.steps)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub t: u32,
    pub thought_summary: String,
    pub action_text: String,
}

/// Text-only record of completed turns, sent to the policy alongside the
/// image window.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionHistory {
    pub records: Vec<HistoryRecord>,
}

/// Longest thought summary kept in the history, in characters.
pub const THOUGHT_SUMMARY_CHARS: usize = 240;

impl SessionHistory {
    pub fn from_steps(steps: &[Step]) -> Self {
        Self {
            records: steps
                .iter()
                .map(|s| HistoryRecord {
                    t: s.index,
                    thought_summary: condense_thought(&s.thought),
                    action_text: s.action.kind.to_string(),
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Serialize to the JSON text embedded in prompts.
    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("history serialization is infallible")
    }

    pub fn from_text(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Collapse whitespace and cap the length of a thought for the history.
pub fn condense_thought(thought: &str) -> String {
    let collapsed = thought.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.chars().count() <= THOUGHT_SUMMARY_CHARS {
        return collapsed;
    }
    let mut out: String = collapsed.chars().take(THOUGHT_SUMMARY_CHARS - 3).collect();
    out.push_str("...");
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::action::ScrollDirection;

    pub(crate) fn solid(width: u32, height: u32, rgb: [u8; 3], ts: u64) -> Screenshot {
        Screenshot::new(RgbImage::from_pixel(width, height, image::Rgb(rgb)), ts).unwrap()
    }

    pub(crate) fn step(index: u32, action: Action) -> Step {
        Step {
            index,
            observation: solid(8, 8, [index as u8, 0, 0], index as u64 * 10),
            thought: format!("thinking at {index}"),
            action: ActionRecord::synthesized(action),
        }
    }

    #[test]
    fn screenshot_rejects_zero_dimensions() {
        assert!(matches!(
            Screenshot::new(RgbImage::new(0, 4), 0),
            Err(TraceError::EmptyImage { .. })
        ));
        assert!(matches!(
            Screenshot::from_raw(2, 2, vec![0; 11], 0),
            Err(TraceError::BufferSize { expected: 12, got: 11 })
        ));
    }

    #[test]
    fn append_to_empty_rollout() {
        let mut r = Rollout::new("r", "s", "g", DEFAULT_BUDGET);
        r.append_step(step(1, Action::Wait { ms: 1 })).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.history().len(), 1);
    }

    #[test]
    fn append_beyond_budget_fails() {
        let mut r = Rollout::new("r", "s", "g", DEFAULT_BUDGET);
        for i in 1..=50 {
            r.append_step(step(i, Action::Wait { ms: 1 })).unwrap();
        }
        assert!(matches!(
            r.append_step(step(51, Action::Wait { ms: 1 })),
            Err(TraceError::BudgetExceeded { budget: 50 })
        ));
    }

    #[test]
    fn append_out_of_order_fails() {
        let mut r = Rollout::new("r", "s", "g", DEFAULT_BUDGET);
        r.append_step(step(1, Action::Stop)).unwrap();
        assert!(matches!(
            r.append_step(step(3, Action::Stop)),
            Err(TraceError::OutOfOrder { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn append_after_termination_fails() {
        let mut r = Rollout::new("r", "s", "g", DEFAULT_BUDGET);
        r.append_step(step(1, Action::Stop)).unwrap();
        r.terminate(Termination::Stopped).unwrap();
        assert!(matches!(
            r.append_step(step(2, Action::Stop)),
            Err(TraceError::Terminated)
        ));
    }

    #[test]
    fn stopped_requires_stop_action() {
        let mut r = Rollout::new("r", "s", "g", DEFAULT_BUDGET);
        r.append_step(step(1, Action::Wait { ms: 1 })).unwrap();
        assert!(matches!(r.terminate(Termination::Stopped), Err(TraceError::StopMissing)));
        r.terminate(Termination::BudgetExhausted).unwrap();
    }

    #[test]
    fn score_and_out_of_bounds_clicks_are_rejected() {
        let mut r = Rollout::new("r", "s", "g", DEFAULT_BUDGET);
        assert!(matches!(
            r.append_step(step(1, Action::Score { value: 3 })),
            Err(TraceError::ScoreOutsideAssessment)
        ));
        assert!(matches!(
            r.append_step(step(1, Action::Click { x: 8, y: 0 })),
            Err(TraceError::ClickOutOfBounds { .. })
        ));
        r.append_step(step(
            1,
            Action::Scroll {
                direction: ScrollDirection::Down,
                amount: 1,
            },
        ))
        .unwrap();
    }

    #[test]
    fn history_round_trips_through_text() {
        let mut r = Rollout::new("r", "s", "g", DEFAULT_BUDGET);
        r.append_step(step(1, Action::Type { text: "a \"b\"\tc".into() })).unwrap();
        r.append_step(step(2, Action::Click { x: 1, y: 2 })).unwrap();
        let h = r.history();
        assert_eq!(SessionHistory::from_text(&h.to_text()).unwrap(), h);
    }

    #[test]
    fn thought_summary_is_capped() {
        let long = "word ".repeat(200);
        let s = condense_thought(&long);
        assert_eq!(s.chars().count(), THOUGHT_SUMMARY_CHARS);
        assert!(s.ends_with("..."));
        assert_eq!(condense_thought("  a \n b  "), "a b");
    }
}
