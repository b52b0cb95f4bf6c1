//! Deterministic state-graph websites rendered to pixels, with defect
//! injectors and scripted policies for driving the agent harness offline.

pub mod bundle;
pub mod defect;
pub mod env;
pub mod generate;
pub mod policies;
pub mod render;
pub mod site;
pub mod state;

use thiserror::Error;
use uxpipe_core::DefectPrinciple;

pub use bundle::write_static_bundle;
pub use defect::{has_signature, inject_defect};
pub use env::SimEnvironment;
pub use generate::{generate_site, plain_site_id};
pub use policies::{FlowFollower, Looper, SystematicExplorer};
pub use render::{render, render_state};
pub use site::{SimSite, Template, MAIN_FLOW};
pub use state::SiteState;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("unknown template `{0}` (expected shop, booking, forum or jobs)")]
    UnknownTemplate(String),
    #[error("site already carries a {0} defect")]
    AlreadyDefective(DefectPrinciple),
    #[error("node {0} does not exist")]
    InvalidNode(u32),
    #[error("scroll offset {scroll} exceeds node {node}'s maximum of {max}")]
    InvalidScroll { node: u32, scroll: u32, max: u32 },
    #[error("invalid site: {0}")]
    Invalid(String),
    #[error("cannot parse site file: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(String),
}

/// Generate a site and optionally inject one defect.
pub fn build_site(seed: u64, template: Template, defect: Option<(DefectPrinciple, u64)>) -> Result<SimSite, SimError> {
    let plain = generate_site(seed, template);
    match defect {
        Some((p, defect_seed)) => inject_defect(&plain, p, defect_seed),
        None => Ok(plain),
    }
}
