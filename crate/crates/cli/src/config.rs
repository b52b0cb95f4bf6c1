//! Pipeline configuration: a TOML file selected by `--config` or
//! `UXPIPE_CONFIG`, overridden by subcommand flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uxpipe_core::hash::{ScreenIdentity, DEFAULT_HAMMING_THRESHOLD};
use uxpipe_core::harness::{SessionConfig, DEFAULT_WINDOW};
use uxpipe_core::nav::{FilterConfig, NavConfig, DEFAULT_MIN_PASSING_ROLLOUTS, DEFAULT_MIN_STEPS, DEFAULT_MIN_S_NAV};
use uxpipe_core::reward::DEFAULT_MARGIN;
use uxpipe_core::trace::DEFAULT_BUDGET;

use crate::CliError;

pub const CONFIG_ENV: &str = "UXPIPE_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub sites: PathBuf,
    pub traces: PathBuf,
    pub datasets: PathBuf,
    pub reports: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            sites: "sites".into(),
            traces: "traces".into(),
            datasets: "datasets".into(),
            reports: "reports".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub s_nav: f64,
    pub min_steps: usize,
    pub min_passing_rollouts: usize,
    pub hamming: u32,
    pub margin: f64,
    pub budget: u32,
    pub window: u32,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            s_nav: DEFAULT_MIN_S_NAV,
            min_steps: DEFAULT_MIN_STEPS,
            min_passing_rollouts: DEFAULT_MIN_PASSING_ROLLOUTS,
            hamming: DEFAULT_HAMMING_THRESHOLD,
            margin: DEFAULT_MARGIN,
            budget: DEFAULT_BUDGET,
            window: DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Endpoints {
    /// Chat-completion server used by `--policy model`.
    pub policy: String,
    pub model: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub backoff_ms: u64,
}

impl Default for Endpoints {
    fn default() -> Self {
        let chat = uxpipe_net::ChatConfig::default();
        Self {
            policy: chat.base_url,
            model: chat.model,
            timeout_ms: chat.timeout_ms,
            max_retries: chat.max_retries,
            backoff_ms: chat.backoff_ms,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub sim: u64,
    pub benchmark: u64,
    pub arena: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Session {
    /// Fixed `{DATE}` value; today's UTC date when absent.
    pub date: Option<String>,
    pub step_delay_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub thresholds: Thresholds,
    pub endpoints: Endpoints,
    pub seeds: Seeds,
    pub session: Session,
}

impl PipelineConfig {
    /// Parse `path`, or return the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.thresholds;
        let bad = |name: &str, v: &dyn std::fmt::Display| Err(CliError::Usage(format!("thresholds.{name} must be positive, got {v}")));
        if !(t.s_nav > 0.0 && t.s_nav.is_finite()) {
            return bad("s_nav", &t.s_nav);
        }
        if !(t.margin > 0.0 && t.margin <= 100.0) {
            return Err(CliError::Usage(format!("thresholds.margin must lie in (0, 100], got {}", t.margin)));
        }
        for (name, v) in [
            ("min_steps", t.min_steps as u64),
            ("min_passing_rollouts", t.min_passing_rollouts as u64),
            ("hamming", u64::from(t.hamming)),
            ("budget", u64::from(t.budget)),
            ("window", u64::from(t.window)),
        ] {
            if v == 0 {
                return bad(name, &v);
            }
        }
        if self.endpoints.timeout_ms == 0 {
            return Err(CliError::Usage("endpoints.timeout_ms must be positive".into()));
        }
        Ok(())
    }

    pub fn nav(&self) -> NavConfig {
        NavConfig {
            identity: ScreenIdentity {
                threshold: self.thresholds.hamming,
            },
            ..NavConfig::default()
        }
    }

    pub fn filter(&self) -> FilterConfig {
        FilterConfig {
            min_s_nav: self.thresholds.s_nav,
            min_steps: self.thresholds.min_steps,
            min_passing_rollouts: self.thresholds.min_passing_rollouts,
        }
    }

    pub fn session(&self, assess: bool) -> SessionConfig {
        SessionConfig {
            date: self.session.date.clone(),
            budget: self.thresholds.budget,
            window: self.thresholds.window,
            step_delay_ms: self.session.step_delay_ms,
            assess,
            ..SessionConfig::default()
        }
    }

    pub fn chat(&self) -> uxpipe_net::ChatConfig {
        uxpipe_net::ChatConfig {
            base_url: self.endpoints.policy.clone(),
            model: self.endpoints.model.clone(),
            timeout_ms: self.endpoints.timeout_ms,
            max_retries: self.endpoints.max_retries,
            backoff_ms: self.endpoints.backoff_ms,
            ..uxpipe_net::ChatConfig::default()
        }
    }

    /// One-line rendering for the run log.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
