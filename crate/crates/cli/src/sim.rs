//! `simgen`, `simserve` and `hash`.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use serde::{Deserialize, Serialize};
use uxpipe_core::bench::pairs::{build_benchmark_with, sources_from_site_ids, VARIANTS_PER_SOURCE};
use uxpipe_core::hash::phash_image;
use uxpipe_core::DefectPrinciple;
use uxpipe_sim::{build_site, write_static_bundle, SimSite, Template};

use crate::io::{emit, par_map, to_line};
use crate::{CliError, PipelineConfig};

#[derive(Debug, Args)]
pub struct SimgenArgs {
    /// First site seed; defaults to `seeds.sim`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Consecutive seeds to generate.
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(long)]
    pub template: Template,
    /// Also write this defect variant of every site (repeatable).
    #[arg(long = "defect")]
    pub defects: Vec<DefectPrinciple>,
    /// Seed for defect placement; defaults to the site seed.
    #[arg(long)]
    pub defect_seed: Option<u64>,
    /// Output directory; defaults to `paths.sites`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a browsable HTML bundle per site under this directory.
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Write (plain, variant) preference pairs over the generated sites.
    #[arg(long)]
    pub pairs_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteRecord {
    pub site_id: String,
    pub path: PathBuf,
    pub nodes: usize,
    pub defect: Option<DefectPrinciple>,
}

pub fn site_path(dir: &Path, site_id: &str) -> PathBuf {
    dir.join(format!("{site_id}.json"))
}

/// A site given as a file path, or as an id under `paths.sites`.
pub fn resolve_site(cfg: &PipelineConfig, arg: &str) -> Result<SimSite, CliError> {
    let direct = Path::new(arg);
    let path = if direct.is_file() {
        direct.to_path_buf()
    } else {
        site_path(&cfg.paths.sites, arg)
    };
    SimSite::load(&path).map_err(|e| CliError::Data(format!("site `{arg}`: {e}")))
}

fn write_once(path: &Path, text: &str) -> Result<(), CliError> {
    match std::fs::read_to_string(path) {
        Ok(existing) if existing == text => Ok(()),
        Ok(_) => Err(CliError::Data(format!("refusing to overwrite {} with different content", path.display()))),
        Err(_) => std::fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display()))),
    }
}

pub fn simgen(cfg: &PipelineConfig, a: SimgenArgs, jobs: usize, out: &mut dyn Write) -> Result<(), CliError> {
    if a.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let dir = a.out.clone().unwrap_or_else(|| cfg.paths.sites.clone());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let first = a.seed.unwrap_or(cfg.seeds.sim);
    let mut variants: Vec<Option<DefectPrinciple>> = vec![None];
    let mut defects = a.defects.clone();
    defects.sort();
    defects.dedup();
    variants.extend(defects.iter().copied().map(Some));
    let tasks: Vec<(u64, Option<DefectPrinciple>)> = (first..first + a.count)
        .flat_map(|s| variants.iter().map(move |&d| (s, d)))
        .collect();
    let results = par_map(jobs, tasks, |(seed, defect)| -> Result<SiteRecord, CliError> {
        let site = build_site(seed, a.template, defect.map(|p| (p, a.defect_seed.unwrap_or(seed)))).map_err(CliError::data)?;
        let path = site_path(&dir, &site.site_id);
        write_once(&path, &site.to_text())?;
        if let Some(bundles) = &a.bundle {
            write_static_bundle(&site, &bundles.join(&site.site_id)).map_err(CliError::data)?;
        }
        Ok(SiteRecord {
            site_id: site.site_id.clone(),
            path,
            nodes: site.nodes.len(),
            defect,
        })
    });
    let mut records = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    records.sort_by(|x, y| x.site_id.cmp(&y.site_id));
    if let Some(pairs_path) = &a.pairs_out {
        if defects.is_empty() {
            return Err(CliError::Usage("--pairs-out needs at least one --defect".into()));
        }
        let sources = sources_from_site_ids(records.iter().map(|r| r.site_id.as_str()));
        let bench = build_benchmark_with(&sources, cfg.seeds.benchmark, defects.len().min(VARIANTS_PER_SOURCE))
            .map_err(CliError::data)?;
        let lines: Vec<String> = bench.pairs.iter().map(to_line).collect();
        emit(&lines, Some(pairs_path), out)?;
    }
    let lines: Vec<String> = records.iter().map(to_line).collect();
    emit(&lines, None, out)
}

#[derive(Debug, Args)]
pub struct SimserveArgs {
    /// Site file, or a site id under `paths.sites`.
    #[arg(long)]
    pub site: String,
    #[arg(long, default_value_t = 8090)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

pub fn simserve(cfg: &PipelineConfig, a: SimserveArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let site = Arc::new(resolve_site(cfg, &a.site)?);
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("bad address: {e}")))?;
    let server = uxpipe_net::spawn_simserve(Arc::clone(&site), addr).map_err(|e| CliError::Transport(e.to_string()))?;
    let line = serde_json::json!({"site_id": site.site_id, "listening": server.base_url()});
    emit(&[line.to_string()], None, out)?;
    let _ = out.flush();
    loop {
        std::thread::park();
    }
}

#[derive(Debug, Args)]
pub struct HashArgs {
    pub image: PathBuf,
}

pub fn hash(a: HashArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let img = image::open(&a.image).map_err(|e| CliError::Data(format!("{}: {e}", a.image.display())))?;
    let h = phash_image(&img.to_rgb8()).map_err(CliError::data)?;
    emit(&[h.to_string()], None, out)
}
