//! Session driver: observe, assemble the prompt, query the policy, parse and
//! apply the action, and finish with the scoring turn.

pub mod prompts;
mod scorer;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{parse_action, split_response, Action, ActionParseError, ActionRecord};
use crate::trace::{Assessment, Rollout, Screenshot, Step, Termination, TraceError, DEFAULT_BUDGET};

pub use scorer::ReflectiveScorer;

pub const DEFAULT_WINDOW: u32 = 5;
/// Action logged when the policy fails to produce one twice in a row.
pub const FALLBACK_WAIT_MS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContentPart {
    Text(String),
    Image(Screenshot),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub role: Role,
    pub content: Vec<ContentPart>,
}

impl Message {
    pub fn text(role: Role, text: impl Into<String>) -> Self {
        Self {
            role,
            content: vec![ContentPart::Text(text.into())],
        }
    }

    pub fn images(&self) -> impl Iterator<Item = &Screenshot> {
        self.content.iter().filter_map(|p| match p {
            ContentPart::Image(s) => Some(s),
            ContentPart::Text(_) => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Turn {
    /// Navigation step `t` (1-based).
    Step(u32),
    Assessment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRequest {
    pub turn: Turn,
    /// 0 for the first query of a turn, 1 for the re-prompt.
    pub attempt: u32,
    pub messages: Vec<Message>,
}

impl PolicyRequest {
    pub fn images(&self) -> impl Iterator<Item = &Screenshot> {
        self.messages.iter().flat_map(Message::images)
    }

    /// The newest image in the request, i.e. the current screen.
    pub fn current_screen(&self) -> Option<&Screenshot> {
        self.images().last()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("policy transport failed after {attempts} attempt(s): {detail}")]
    Transport { attempts: u32, detail: String },
    #[error("policy response malformed: {0}")]
    Protocol(String),
}

/// Text generator conditioned on role-tagged text and image messages.
pub trait Policy {
    fn generate(&mut self, request: &PolicyRequest) -> Result<String, PolicyError>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn generate(&mut self, request: &PolicyRequest) -> Result<String, PolicyError> {
        (**self).generate(request)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("environment unreachable: {0}")]
    Unreachable(String),
    #[error("environment rejected action: {0}")]
    Rejected(String),
    #[error("environment protocol error: {0}")]
    Protocol(String),
}

/// Something that shows screens and accepts actions.
pub trait Environment {
    fn observe(&mut self) -> Result<Screenshot, EnvError>;
    fn apply(&mut self, action: &Action) -> Result<(), EnvError>;
    /// Return to the initial screen.
    fn reset(&mut self) -> Result<(), EnvError>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn observe(&mut self) -> Result<Screenshot, EnvError> {
        (**self).observe()
    }
    fn apply(&mut self, action: &Action) -> Result<(), EnvError> {
        (**self).apply(action)
    }
    fn reset(&mut self) -> Result<(), EnvError> {
        (**self).reset()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub goal_template: String,
    /// Value for `{DATE}`; today's UTC date when absent.
    pub date: Option<String>,
    pub budget: u32,
    pub window: u32,
    pub eval_prompt: String,
    pub grounding: String,
    /// Pause after each applied action.
    pub step_delay_ms: u64,
    pub assess: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            goal_template: prompts::DEFAULT_GOAL_TEMPLATE.to_string(),
            date: None,
            budget: DEFAULT_BUDGET,
            window: DEFAULT_WINDOW,
            eval_prompt: prompts::DEFAULT_EVAL_PROMPT.to_string(),
            grounding: prompts::DEFAULT_GROUNDING.to_string(),
            step_delay_ms: 0,
            assess: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("window must be at least 1")]
    ZeroWindow,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.budget == 0 {
            return Err(ConfigError::ZeroBudget);
        }
        if self.window == 0 {
            return Err(ConfigError::ZeroWindow);
        }
        Ok(())
    }

    pub fn resolved_date(&self) -> String {
        self.date
            .clone()
            .unwrap_or_else(|| time::OffsetDateTime::now_utc().date().to_string())
    }

    pub fn goal_text(&self) -> String {
        prompts::substitute_date(&self.goal_template, &self.resolved_date())
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("policy failed at {turn:?}: {source}")]
    Policy {
        turn: Turn,
        source: PolicyError,
        /// Steps recorded before the failure.
        partial: Box<Rollout>,
    },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AssessError {
    #[error("cannot assess a rollout without steps")]
    EmptyHistory,
    #[error("rollout is still running")]
    NotTerminated,
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

fn request_from(prompt: &prompts::TurnPrompt, window: &[Screenshot], turn: Turn) -> PolicyRequest {
    let mut user = Vec::with_capacity(window.len() + 1);
    user.extend(window.iter().cloned().map(ContentPart::Image));
    user.push(ContentPart::Text(prompt.user_text.clone()));
    PolicyRequest {
        turn,
        attempt: 0,
        messages: vec![
            Message::text(Role::System, prompt.system.clone()),
            Message {
                role: Role::User,
                content: user,
            },
        ],
    }
}

fn parse_navigation(text: &str, bounds: (u32, u32)) -> Result<ActionRecord, ActionParseError> {
    let record = parse_action(text, Some(bounds))?;
    if matches!(record.kind, Action::Score { .. }) {
        return Err(ActionParseError::UnknownAction("score is only valid in the assessment turn".into()));
    }
    Ok(record)
}

/// Identifiers stamped on the recorded rollout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionIds {
    pub rollout_id: String,
    pub site_id: String,
}

/// Run one usability-testing session and, if configured, its scoring turn.
///
/// An environment failure ends the session with `environment_error`. A
/// policy failure during navigation is returned with the partial rollout;
/// during the scoring turn it only leaves the assessment absent.
pub fn run_session(
    env: &mut dyn Environment,
    policy: &mut dyn Policy,
    cfg: &SessionConfig,
    ids: &SessionIds,
) -> Result<Rollout, SessionError> {
    cfg.validate()?;
    let goal = cfg.goal_text();
    let mut rollout = Rollout::new(ids.rollout_id.clone(), ids.site_id.clone(), goal.clone(), cfg.budget);
    if env.reset().is_err() {
        rollout.terminate(Termination::EnvironmentError)?;
        return Ok(rollout);
    }

    let window = cfg.window as usize;
    let mut recent: Vec<Screenshot> = Vec::with_capacity(window);
    for t in 1..=cfg.budget {
        let observation = match env.observe() {
            Ok(o) => o,
            Err(_) => {
                rollout.terminate(Termination::EnvironmentError)?;
                break;
            }
        };
        if recent.len() == window {
            recent.remove(0);
        }
        recent.push(observation.clone());

        let prompt = prompts::step_prompt(&cfg.grounding, &goal, &rollout.history(), t, cfg.budget, cfg.window);
        let mut request = request_from(&prompt, &recent, Turn::Step(t));
        let bounds = (observation.width(), observation.height());

        let (thought, record) = {
            let first = generate(policy, &request, Turn::Step(t), &rollout)?;
            match parse_navigation(&first, bounds) {
                Ok(record) => (split_response(&first).0, record),
                Err(err) => {
                    request.attempt = 1;
                    request.messages.push(Message::text(Role::Assistant, first));
                    request.messages.push(Message::text(
                        Role::User,
                        format!("{} ({err}). Reply again and end with exactly one line `Action: <action>`.", prompts::REPROMPT_TEXT),
                    ));
                    let second = generate(policy, &request, Turn::Step(t), &rollout)?;
                    match parse_navigation(&second, bounds) {
                        Ok(record) => (split_response(&second).0, record),
                        Err(_) => (
                            split_response(&second).0,
                            ActionRecord::synthesized(Action::Wait { ms: FALLBACK_WAIT_MS }),
                        ),
                    }
                }
            }
        };

        let kind = record.kind.clone();
        rollout.append_step(Step {
            index: t,
            observation,
            thought,
            action: record,
        })?;
        if kind == Action::Stop {
            rollout.terminate(Termination::Stopped)?;
            break;
        }
        if env.apply(&kind).is_err() {
            rollout.terminate(Termination::EnvironmentError)?;
            break;
        }
        if cfg.step_delay_ms > 0 {
            std::thread::sleep(Duration::from_millis(cfg.step_delay_ms));
        }
    }
    if !rollout.is_terminated() {
        rollout.terminate(Termination::BudgetExhausted)?;
    }

    if cfg.assess && !rollout.is_empty() {
        if let Ok(assessment) = assess(&rollout, policy, cfg) {
            rollout.set_assessment(assessment);
        }
    }
    Ok(rollout)
}

fn generate(policy: &mut dyn Policy, request: &PolicyRequest, turn: Turn, rollout: &Rollout) -> Result<String, SessionError> {
    policy.generate(request).map_err(|source| SessionError::Policy {
        turn,
        source,
        partial: Box::new(rollout.clone()),
    })
}

/// Send the scoring prompt with the full session history.
pub fn assess(rollout: &Rollout, policy: &mut dyn Policy, cfg: &SessionConfig) -> Result<Assessment, AssessError> {
    if rollout.is_empty() {
        return Err(AssessError::EmptyHistory);
    }
    if !rollout.is_terminated() {
        return Err(AssessError::NotTerminated);
    }
    let steps = rollout.len() as u32;
    let prompt = prompts::assessment_prompt(
        &cfg.grounding,
        &rollout.goal,
        &cfg.eval_prompt,
        &rollout.history(),
        steps,
        cfg.window,
    );
    let window: Vec<Screenshot> = prompt
        .image_steps
        .clone()
        .map(|t| rollout.steps()[t as usize - 1].observation.clone())
        .collect();
    let request = request_from(&prompt, &window, Turn::Assessment);
    let text = policy.generate(&request)?;
    Ok(Assessment::from_text(text))
}

/// Policy built from a closure; handy for fixtures.
pub struct FnPolicy<F>(pub F);

impl<F> Policy for FnPolicy<F>
where
    F: FnMut(&PolicyRequest) -> Result<String, PolicyError>,
{
    fn generate(&mut self, request: &PolicyRequest) -> Result<String, PolicyError> {
        (self.0)(request)
    }
}
