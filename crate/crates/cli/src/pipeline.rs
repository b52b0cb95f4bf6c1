//! `rollout`, `score-traces`, `calibrate` and `export`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use clap::Args;
use serde::{Deserialize, Serialize};
use uxpipe_core::export::{export as export_rollout, write_dataset, ExportConfig, DATASET_FILE};
use uxpipe_core::harness::{run_session, Environment, Policy, ReflectiveScorer, SessionIds};
use uxpipe_core::nav::{passes_filter, rollout_metrics, TraceMetrics};
use uxpipe_core::reward::{calibrate_sites, CalibrationConfig, LinearProximity, RolloutEvaluation};
use uxpipe_core::trace::{load_rollout, save_rollout, Termination, MANIFEST_FILE};
use uxpipe_net::{ChatPolicy, HttpEnvironment};
use uxpipe_sim::{FlowFollower, Looper, SimEnvironment, SimSite, SystematicExplorer, MAIN_FLOW};

use crate::io::{emit, par_map, read_jsonl, to_line};
use crate::sim::resolve_site;
use crate::{CliError, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scripted {
    Flow,
    Explorer,
    Looper,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySpec {
    Scripted(Scripted),
    /// Chat-completion endpoint; `None` uses `endpoints.policy`.
    Model(Option<String>),
}

impl FromStr for PolicySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scripted:flow" => Ok(PolicySpec::Scripted(Scripted::Flow)),
            "scripted:explorer" => Ok(PolicySpec::Scripted(Scripted::Explorer)),
            "scripted:looper" => Ok(PolicySpec::Scripted(Scripted::Looper)),
            "model" => Ok(PolicySpec::Model(None)),
            url if url.starts_with("http://") || url.starts_with("https://") => Ok(PolicySpec::Model(Some(url.into()))),
            other => Err(format!(
                "unknown policy `{other}` (expected scripted:flow, scripted:explorer, scripted:looper, model or a URL)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnvSpec {
    Sim,
    Url(String),
}

impl FromStr for EnvSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sim" => Ok(EnvSpec::Sim),
            url if url.starts_with("http://") || url.starts_with("https://") => Ok(EnvSpec::Url(url.into())),
            other => Err(format!("unknown environment `{other}` (expected sim or a URL)")),
        }
    }
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long, default_value = "sim")]
    pub env: EnvSpec,
    #[arg(long, default_value = "scripted:explorer")]
    pub policy: PolicySpec,
    /// Site file or id under `paths.sites` (repeatable). With a URL
    /// environment and a model policy any label is accepted.
    #[arg(long = "site", required = true)]
    pub sites: Vec<String>,
    #[arg(long)]
    pub budget: Option<u32>,
    /// Archive root; defaults to `paths.traces`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rollouts per site.
    #[arg(long, default_value_t = 1)]
    pub rollouts: u32,
    /// Skip the scoring turn.
    #[arg(long)]
    pub no_assess: bool,
    /// `{DATE}` value; overrides `session.date`.
    #[arg(long)]
    pub date: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub site_id: String,
    pub rollout_id: String,
    pub steps: usize,
    pub termination: Option<Termination>,
    pub predicted_score: Option<u8>,
    pub archive: PathBuf,
}

fn scripted(kind: Scripted, site: Arc<SimSite>) -> Box<dyn Policy + Send> {
    match kind {
        Scripted::Flow => Box::new(FlowFollower::new(site, MAIN_FLOW)),
        Scripted::Explorer => Box::new(SystematicExplorer::new(site)),
        Scripted::Looper => Box::new(Looper::new(site)),
    }
}

struct Target {
    label: String,
    site: Option<Arc<SimSite>>,
}

pub fn rollout(cfg: &PipelineConfig, a: RolloutArgs, jobs: usize, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    if let Some(b) = a.budget {
        cfg.thresholds.budget = b;
    }
    if a.date.is_some() {
        cfg.session.date = a.date.clone();
    }
    cfg.validate()?;
    if a.rollouts == 0 {
        return Err(CliError::Usage("--rollouts must be at least 1".into()));
    }
    let needs_site = a.env == EnvSpec::Sim || matches!(a.policy, PolicySpec::Scripted(_));
    let mut targets = Vec::new();
    for s in &a.sites {
        targets.push(if needs_site {
            let site = resolve_site(&cfg, s)?;
            Target {
                label: site.site_id.clone(),
                site: Some(Arc::new(site)),
            }
        } else {
            Target {
                label: s.clone(),
                site: None,
            }
        });
    }
    let chat = match &a.policy {
        PolicySpec::Model(url) => {
            let mut c = cfg.chat();
            if let Some(u) = url {
                c.base_url = u.clone();
            }
            Some(ChatPolicy::new(c)?)
        }
        PolicySpec::Scripted(_) => None,
    };
    let session = cfg.session(!a.no_assess);
    let root = a.out.clone().unwrap_or_else(|| cfg.paths.traces.clone());
    // A remote environment holds one session at a time.
    let jobs = if matches!(a.env, EnvSpec::Url(_)) { 1 } else { jobs };

    let tasks: Vec<(&Target, u32)> = targets.iter().flat_map(|t| (0..a.rollouts).map(move |k| (t, k))).collect();
    let results = par_map(jobs, tasks, |(target, k)| -> Result<RolloutRecord, CliError> {
        let mut env: Box<dyn Environment> = match &a.env {
            EnvSpec::Sim => Box::new(SimEnvironment::new(Arc::clone(target.site.as_ref().expect("sim sites are loaded")))),
            EnvSpec::Url(u) => Box::new(HttpEnvironment::new(u.clone(), cfg.endpoints.timeout_ms)?),
        };
        let mut policy: Box<dyn Policy + Send> = match (&a.policy, &chat) {
            (PolicySpec::Scripted(kind), _) => {
                let inner = scripted(*kind, Arc::clone(target.site.as_ref().expect("scripted policies need a site")));
                if session.assess {
                    Box::new(ReflectiveScorer::with_config(inner, cfg.nav()))
                } else {
                    inner
                }
            }
            (PolicySpec::Model(_), Some(c)) => Box::new(c.clone()),
            (PolicySpec::Model(_), None) => unreachable!("model policy is built above"),
        };
        let ids = SessionIds {
            rollout_id: format!("r{k:03}"),
            site_id: target.label.clone(),
        };
        let rollout = run_session(env.as_mut(), policy.as_mut(), &session, &ids)?;
        let dir = root.join(&target.label).join(&ids.rollout_id);
        save_rollout(&rollout, &dir).map_err(CliError::data)?;
        Ok(RolloutRecord {
            site_id: rollout.site_id.clone(),
            rollout_id: rollout.rollout_id.clone(),
            steps: rollout.len(),
            termination: rollout.termination(),
            predicted_score: rollout.predicted_score(),
            archive: dir,
        })
    });
    let mut records = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    records.sort_by(|x, y| (&x.site_id, &x.rollout_id).cmp(&(&y.site_id, &y.rollout_id)));
    let lines: Vec<String> = records.iter().map(to_line).collect();
    emit(&lines, None, out)?;
    if let Some(e) = first_err {
        return Err(e);
    }
    if let Some(r) = records.iter().find(|r| r.termination == Some(Termination::EnvironmentError)) {
        let msg = format!("rollout {}/{} lost its environment", r.site_id, r.rollout_id);
        return Err(match a.env {
            EnvSpec::Url(_) => CliError::Transport(msg),
            EnvSpec::Sim => CliError::Data(msg),
        });
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ScoreTracesArgs {
    /// Directory searched recursively for rollout archives.
    pub trace_dir: PathBuf,
    /// Write records here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub site_id: String,
    pub rollout_id: String,
    pub archive: PathBuf,
    pub steps: usize,
    pub termination: Option<Termination>,
    pub predicted_score: Option<u8>,
    pub passes: bool,
    pub metrics: Option<TraceMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn find_archives(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !root.is_dir() {
        return Err(CliError::Data(format!("{} is not a directory", root.display())));
    }
    let mut dirs: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.file_name() == MANIFEST_FILE)
        .filter_map(|e| e.path().parent().map(Path::to_path_buf))
        .collect();
    dirs.sort();
    Ok(dirs)
}

pub fn score_traces(cfg: &PipelineConfig, a: ScoreTracesArgs, jobs: usize, out: &mut dyn Write) -> Result<(), CliError> {
    let archives = find_archives(&a.trace_dir)?;
    let nav = cfg.nav();
    let filter = cfg.filter();
    let results = par_map(jobs, archives, |dir| -> Result<ScoreRecord, CliError> {
        let rollout = load_rollout(&dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        let (metrics, error) = match rollout_metrics(&rollout, &nav) {
            Ok(m) => (Some(m), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Ok(ScoreRecord {
            site_id: rollout.site_id.clone(),
            rollout_id: rollout.rollout_id.clone(),
            archive: dir,
            steps: rollout.len(),
            termination: rollout.termination(),
            predicted_score: rollout.predicted_score(),
            passes: metrics.as_ref().is_some_and(|m| passes_filter(m, &filter)),
            metrics,
            error,
        })
    });
    let mut records = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    records.sort_by(|x, y| (&x.site_id, &x.rollout_id).cmp(&(&y.site_id, &y.rollout_id)));
    let lines: Vec<String> = records.iter().map(to_line).collect();
    emit(&lines, a.out.as_deref(), out)
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Output of `score-traces`.
    pub metrics_file: PathBuf,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum CalibrationRecord {
    Site {
        site_id: String,
        mu: f64,
        n: usize,
        target: f64,
    },
    Excluded {
        site_id: String,
    },
    Pair {
        plain_site: String,
        defect_site: String,
        mu0: f64,
        plain_target: f64,
        defect_target: f64,
        adjusted: bool,
        clamped: bool,
    },
    Rollout {
        site_id: String,
        rollout_id: String,
        archive: PathBuf,
        reward: Option<f64>,
        target: f64,
        s_nav: f64,
        selected: bool,
    },
}

pub fn calibrate(cfg: &PipelineConfig, a: CalibrateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    if let Some(m) = a.margin {
        cfg.thresholds.margin = m;
    }
    cfg.validate()?;
    let scored: Vec<ScoreRecord> = read_jsonl(&a.metrics_file)?;
    let mut archives = BTreeMap::new();
    let mut evaluations = Vec::new();
    for r in scored {
        let Some(metrics) = r.metrics else { continue };
        archives.insert((r.site_id.clone(), r.rollout_id.clone()), r.archive.clone());
        evaluations.push(RolloutEvaluation {
            rollout_id: r.rollout_id,
            site_id: r.site_id,
            metrics,
            predicted_score: r.predicted_score,
        });
    }
    let cal = CalibrationConfig {
        margin: cfg.thresholds.margin,
        filter: cfg.filter(),
    };
    let outcome = calibrate_sites(&evaluations, &cal, &LinearProximity).map_err(CliError::data)?;

    let mut records = Vec::new();
    for est in &outcome.estimates {
        records.push(CalibrationRecord::Site {
            site_id: est.site_id.clone(),
            mu: est.mu,
            n: est.n,
            target: outcome.site_targets[&est.site_id],
        });
    }
    for site in &outcome.excluded_sites {
        records.push(CalibrationRecord::Excluded { site_id: site.clone() });
    }
    for p in &outcome.pairs {
        records.push(CalibrationRecord::Pair {
            plain_site: p.plain_site.clone(),
            defect_site: p.defect_site.clone(),
            mu0: p.target.mu0,
            plain_target: p.target.plain_target,
            defect_target: p.target.defect_target,
            adjusted: p.target.adjusted,
            clamped: p.target.clamped,
        });
    }
    let mut rewarded: Vec<_> = outcome.rewarded.iter().collect();
    rewarded.sort_by(|x, y| (&x.site_id, &x.rollout_id).cmp(&(&y.site_id, &y.rollout_id)));
    for r in rewarded {
        records.push(CalibrationRecord::Rollout {
            site_id: r.site_id.clone(),
            rollout_id: r.rollout_id.clone(),
            archive: archives[&(r.site_id.clone(), r.rollout_id.clone())].clone(),
            reward: r.reward,
            target: r.target_used,
            s_nav: r.s_nav,
            selected: outcome.selected.get(&r.site_id) == Some(&r.rollout_id),
        });
    }
    let lines: Vec<String> = records.iter().map(to_line).collect();
    emit(&lines, a.out.as_deref(), out)
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Output of `calibrate`; its selected rollouts are exported.
    pub selected_rollouts: PathBuf,
    pub out_dir: PathBuf,
    #[arg(long)]
    pub window: Option<u32>,
    /// Leave out the scoring-turn example.
    #[arg(long)]
    pub no_assessment: bool,
}

pub fn export(cfg: &PipelineConfig, a: ExportArgs, jobs: usize, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    if let Some(w) = a.window {
        cfg.thresholds.window = w;
    }
    cfg.validate()?;
    if a.out_dir.join(DATASET_FILE).exists() {
        return Err(CliError::Data(format!("{} already holds a dataset", a.out_dir.display())));
    }
    let records: Vec<CalibrationRecord> = read_jsonl(&a.selected_rollouts)?;
    let archives: Vec<PathBuf> = records
        .into_iter()
        .filter_map(|r| match r {
            CalibrationRecord::Rollout {
                archive, selected: true, ..
            } => Some(archive),
            _ => None,
        })
        .collect();
    if archives.is_empty() {
        return Err(CliError::Data(format!("{} selects no rollouts", a.selected_rollouts.display())));
    }
    let mut ecfg = ExportConfig::from(&cfg.session(!a.no_assessment));
    ecfg.window = cfg.thresholds.window;
    let results = par_map(jobs, archives, |dir| {
        let rollout = load_rollout(&dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        export_rollout(&rollout, &dir, &ecfg).map_err(CliError::data)
    });
    let mut examples = Vec::new();
    for r in results {
        examples.extend(r?);
    }
    let manifest = write_dataset(&examples, &a.out_dir).map_err(CliError::data)?;
    emit(&[to_line(&manifest)], None, out)
}
