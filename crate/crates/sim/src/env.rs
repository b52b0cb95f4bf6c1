use std::sync::Arc;

use uxpipe_core::harness::{EnvError, Environment};
use uxpipe_core::{Action, Screenshot};

use crate::render::render_state;
use crate::site::SimSite;
use crate::state::{Outcome, SiteState};

/// Virtual milliseconds that pass per applied action.
pub const ACTION_MS: u64 = 1000;

/// Simulated browser on one site with a deterministic virtual clock.
#[derive(Debug, Clone)]
pub struct SimEnvironment {
    site: Arc<SimSite>,
    state: SiteState,
    clock_ms: u64,
}

impl SimEnvironment {
    pub fn new(site: Arc<SimSite>) -> Self {
        let state = SiteState::initial(&site);
        Self { site, state, clock_ms: 0 }
    }

    pub fn site(&self) -> &SimSite {
        &self.site
    }

    pub fn state(&self) -> &SiteState {
        &self.state
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    /// Apply an action and report what it did.
    pub fn step(&mut self, action: &Action) -> Result<Outcome, EnvError> {
        if matches!(action, Action::Stop | Action::Score { .. }) {
            return Err(EnvError::Rejected(format!("`{action}` is not a browser action")));
        }
        let outcome = self.state.apply(&self.site, action);
        self.clock_ms += ACTION_MS;
        if let Action::Wait { ms } = action {
            self.clock_ms += ms;
        }
        Ok(outcome)
    }
}

impl Environment for SimEnvironment {
    fn observe(&mut self) -> Result<Screenshot, EnvError> {
        render_state(&self.site, &self.state, self.clock_ms).map_err(|e| EnvError::Protocol(e.to_string()))
    }

    fn apply(&mut self, action: &Action) -> Result<(), EnvError> {
        self.step(action).map(|_| ())
    }

    fn reset(&mut self) -> Result<(), EnvError> {
        self.state = SiteState::initial(&self.site);
        self.clock_ms = 0;
        Ok(())
    }
}
