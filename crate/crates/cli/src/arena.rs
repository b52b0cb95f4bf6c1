//! `arena serve | stats | export`.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use clap::{Args, Subcommand};
use uxpipe_arena::{export_pairs, rating_stats, router, Arena};
use uxpipe_core::bench::PreferencePair;

use crate::io::{emit, read_jsonl, to_line};
use crate::{CliError, PipelineConfig};

#[derive(Debug, Args)]
pub struct ArenaArgs {
    #[command(subcommand)]
    pub action: ArenaAction,
}

#[derive(Debug, Subcommand)]
pub enum ArenaAction {
    /// Serve the arena API and site bundles.
    Serve {
        /// Pool of preference pairs.
        #[arg(long)]
        pairs: PathBuf,
        /// Append-only vote log, replayed on start.
        #[arg(long)]
        log: PathBuf,
        /// Directory with one static bundle per site id.
        #[arg(long)]
        sites: Option<PathBuf>,
        #[arg(long, default_value_t = 8091)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Rating statistics from a vote log.
    Stats {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        log: PathBuf,
    },
    /// Human-labeled pairs, one per vote.
    Export {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn replay(cfg: &PipelineConfig, pairs: &Path, log: &Path) -> Result<Arena, CliError> {
    let pool: Vec<PreferencePair> = read_jsonl(pairs)?;
    Arena::replay(pool, cfg.seeds.arena, log).map_err(CliError::data)
}

pub fn arena(cfg: &PipelineConfig, a: ArenaArgs, out: &mut dyn Write) -> Result<(), CliError> {
    match a.action {
        ArenaAction::Serve {
            pairs,
            log,
            sites,
            port,
            host,
        } => {
            let pool: Vec<PreferencePair> = read_jsonl(&pairs)?;
            let arena = Arena::open(pool, cfg.seeds.arena, &log).map_err(CliError::data)?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| CliError::Usage(format!("bad address: {e}")))?;
            let app = router(Arc::new(Mutex::new(arena)), sites.as_deref());
            let server = uxpipe_net::spawn_router(app, addr).map_err(|e| CliError::Transport(e.to_string()))?;
            emit(&[serde_json::json!({"listening": server.base_url()}).to_string()], None, out)?;
            let _ = out.flush();
            loop {
                std::thread::park();
            }
        }
        ArenaAction::Stats { pairs, log } => {
            let arena = replay(cfg, &pairs, &log)?;
            emit(&[to_line(&rating_stats(arena.votes()))], None, out)
        }
        ArenaAction::Export { pairs, log, out: path } => {
            let arena = replay(cfg, &pairs, &log)?;
            let lines: Vec<String> = export_pairs(arena.votes()).iter().map(to_line).collect();
            emit(&lines, path.as_deref(), out)
        }
    }
}
