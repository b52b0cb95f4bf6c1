//! Sliding-window supervised training examples and the JSONL dataset writer.
//!
//! Each navigation step `t` becomes one example whose input holds the goal,
//! the text history of steps `1..t` and the screenshots of steps
//! `max(1, t - 4)..=t`; its target is the step's thought and action line. A
//! rollout with an assessment adds one example for the scoring turn.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::prompts::{self, IMAGE_TOKEN};
use crate::harness::{SessionConfig, DEFAULT_WINDOW};
use crate::sha256_hex;
use crate::trace::{step_image_rel, Rollout, SessionHistory};

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const DATASET_MANIFEST_FILE: &str = "dataset.manifest.json";
pub const IMAGES_DIR: &str = "images";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("rollout {0} has no steps")]
    EmptyRollout(String),
    #[error("no examples to write")]
    NoExamples,
    #[error("image referenced by an example is missing: {0}")]
    MissingImage(PathBuf),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportConfig {
    pub include_assessment: bool,
    pub window: u32,
    pub grounding: String,
    pub eval_prompt: String,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            include_assessment: true,
            window: DEFAULT_WINDOW,
            grounding: prompts::DEFAULT_GROUNDING.to_string(),
            eval_prompt: prompts::DEFAULT_EVAL_PROMPT.to_string(),
        }
    }
}

impl From<&SessionConfig> for ExportConfig {
    fn from(s: &SessionConfig) -> Self {
        Self {
            include_assessment: s.assess,
            window: s.window,
            grounding: s.grounding.clone(),
            eval_prompt: s.eval_prompt.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleKind {
    Step,
    Assessment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub site_id: String,
    pub rollout_id: String,
    /// Step index; `T + 1` for the assessment example.
    pub t: u32,
    pub kind: ExampleKind,
    pub history: SessionHistory,
    /// Steps whose screenshots form the image window, oldest first.
    pub image_steps: Vec<u32>,
    /// Source screenshot files, aligned with `image_steps`.
    pub images: Vec<PathBuf>,
    pub system: String,
    pub user_text: String,
    pub output: String,
}

/// Examples for one rollout whose screenshots live in the archive at
/// `archive_dir`.
pub fn export(rollout: &Rollout, archive_dir: &Path, cfg: &ExportConfig) -> Result<Vec<TrainingExample>, ExportError> {
    if rollout.is_empty() {
        return Err(ExportError::EmptyRollout(rollout.rollout_id.clone()));
    }
    let history = rollout.history();
    let image_paths = |steps: &[u32]| -> Vec<PathBuf> { steps.iter().map(|&s| archive_dir.join(step_image_rel(s))).collect() };
    let mut out = Vec::with_capacity(rollout.len() + 1);
    for step in rollout.steps() {
        let t = step.index;
        let prior = SessionHistory {
            records: history.records[..t as usize - 1].to_vec(),
        };
        let prompt = prompts::step_prompt(&cfg.grounding, &rollout.goal, &prior, t, rollout.budget, cfg.window);
        let image_steps: Vec<u32> = prompt.image_steps.clone().collect();
        out.push(TrainingExample {
            site_id: rollout.site_id.clone(),
            rollout_id: rollout.rollout_id.clone(),
            t,
            kind: ExampleKind::Step,
            history: prior,
            images: image_paths(&image_steps),
            image_steps,
            system: prompt.system,
            user_text: prompt.user_text,
            output: format!("Thought: {}\n{}", step.thought, step.action.raw_text),
        });
    }
    if let (true, Some(assessment)) = (cfg.include_assessment, rollout.assessment()) {
        let steps = rollout.len() as u32;
        let prompt = prompts::assessment_prompt(&cfg.grounding, &rollout.goal, &cfg.eval_prompt, &history, steps, cfg.window);
        let image_steps: Vec<u32> = prompt.image_steps.clone().collect();
        out.push(TrainingExample {
            site_id: rollout.site_id.clone(),
            rollout_id: rollout.rollout_id.clone(),
            t: steps + 1,
            kind: ExampleKind::Assessment,
            history,
            images: image_paths(&image_steps),
            image_steps,
            system: prompt.system,
            user_text: prompt.user_text,
            output: assessment.issues_text.clone(),
        });
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct JsonMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct JsonRecord<'a> {
    messages: [JsonMessage<'a>; 3],
    images: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset: String,
    pub examples: usize,
    pub assessment_examples: usize,
    pub images: usize,
    pub sha256: String,
}

fn sanitize(component: &str) -> String {
    component.replace(['/', '\\'], "_")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write `examples` as `dataset.jsonl` plus copied screenshots under
/// `images/`, ordered by (site_id, rollout_id, t).
pub fn write_dataset(examples: &[TrainingExample], out_dir: &Path) -> Result<DatasetManifest, ExportError> {
    if examples.is_empty() {
        return Err(ExportError::NoExamples);
    }
    for ex in examples {
        if let Some(missing) = ex.images.iter().find(|p| !p.is_file()) {
            return Err(ExportError::MissingImage(missing.clone()));
        }
    }
    let mut ordered: Vec<&TrainingExample> = examples.iter().collect();
    ordered.sort_by(|a, b| (&a.site_id, &a.rollout_id, a.t).cmp(&(&b.site_id, &b.rollout_id, b.t)));

    fs::create_dir_all(out_dir.join(IMAGES_DIR)).map_err(io_err(out_dir))?;
    let mut body = Vec::new();
    let mut copied = std::collections::BTreeSet::new();
    for ex in &ordered {
        let mut rels = Vec::with_capacity(ex.images.len());
        for (src, step) in ex.images.iter().zip(&ex.image_steps) {
            let rel = format!(
                "{IMAGES_DIR}/{}/{}/{step:03}.png",
                sanitize(&ex.site_id),
                sanitize(&ex.rollout_id)
            );
            if copied.insert(rel.clone()) {
                let dest = out_dir.join(&rel);
                if let Some(parent) = dest.parent() {
                    fs::create_dir_all(parent).map_err(io_err(parent))?;
                }
                fs::copy(src, &dest).map_err(io_err(src))?;
            }
            rels.push(rel);
        }
        let user = format!("{}{}", IMAGE_TOKEN.repeat(rels.len()), ex.user_text);
        let record = JsonRecord {
            messages: [
                JsonMessage {
                    role: "system",
                    content: &ex.system,
                },
                JsonMessage {
                    role: "user",
                    content: &user,
                },
                JsonMessage {
                    role: "assistant",
                    content: &ex.output,
                },
            ],
            images: rels,
        };
        serde_json::to_writer(&mut body, &record).expect("serializing plain strings cannot fail");
        body.push(b'\n');
    }

    let dataset_path = out_dir.join(DATASET_FILE);
    fs::write(&dataset_path, &body).map_err(io_err(&dataset_path))?;
    let manifest = DatasetManifest {
        dataset: DATASET_FILE.to_string(),
        examples: ordered.len(),
        assessment_examples: ordered.iter().filter(|e| e.kind == ExampleKind::Assessment).count(),
        images: copied.len(),
        sha256: sha256_hex(&body),
    };
    let manifest_path = out_dir.join(DATASET_MANIFEST_FILE);
    let mut f = fs::File::create(&manifest_path).map_err(io_err(&manifest_path))?;
    serde_json::to_writer_pretty(&mut f, &manifest).expect("manifest serialization cannot fail");
    f.write_all(b"\n").map_err(io_err(&manifest_path))?;
    Ok(manifest)
}
