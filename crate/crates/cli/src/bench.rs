//! `bench`: AUC, agreement rate and score difference over preference pairs.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::Value;
use uxpipe_core::bench::{critique_report, evaluate, CritiqueRecord, PreferencePair, ScoreMap, SiteDedup};

use crate::io::{emit, read_jsonl, to_line};
use crate::{CliError, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dedup {
    SiteRole,
    PerPair,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Preference pairs, one per line.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Per-site scores (`{"site_id", "score"}`) or `score-traces` output,
    /// averaged per site.
    #[arg(long)]
    pub scores: PathBuf,
    /// Also write the report record here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "model")]
    pub label: String,
    /// Verified critique records for the per-category precision table.
    #[arg(long)]
    pub critique: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Dedup::SiteRole)]
    pub dedup: Dedup,
}

/// Site scores from either accepted line shape.
pub fn load_scores(lines: &[Value]) -> Result<ScoreMap, CliError> {
    let mut acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut direct = ScoreMap::new();
    for (i, v) in lines.iter().enumerate() {
        let site = v
            .get("site_id")
            .and_then(Value::as_str)
            .ok_or_else(|| CliError::Data(format!("scores line {}: missing site_id", i + 1)))?;
        if let Some(s) = v.get("score") {
            direct.insert(site.to_string(), s.as_f64());
        } else if let Some(s) = v.get("predicted_score") {
            let entry = acc.entry(site.to_string()).or_default();
            if let Some(x) = s.as_f64() {
                entry.push(x);
            }
        } else {
            return Err(CliError::Data(format!("scores line {}: needs `score` or `predicted_score`", i + 1)));
        }
    }
    for (site, xs) in acc {
        let mean = (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        direct.entry(site).or_insert(mean);
    }
    Ok(direct)
}

pub fn bench(_cfg: &PipelineConfig, a: BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let pairs: Vec<PreferencePair> = read_jsonl(&a.pairs)?;
    if pairs.is_empty() {
        return Err(CliError::Data(format!("{} holds no pairs", a.pairs.display())));
    }
    let scores = load_scores(&read_jsonl::<Value>(&a.scores)?)?;
    let table = match &a.critique {
        Some(p) => Some(critique_report(&read_jsonl::<CritiqueRecord>(p)?)),
        None => None,
    };
    let dedup = match a.dedup {
        Dedup::SiteRole => SiteDedup::BySiteRole,
        Dedup::PerPair => SiteDedup::PerPair,
    };
    let report = evaluate(&a.label, &pairs, &scores, dedup, table.as_ref());
    if let Some(p) = &a.out {
        emit(&[to_line(&report)], Some(p), out)?;
    }
    out.write_all(report.render().as_bytes()).map_err(|e| CliError::Data(format!("stdout: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn scores_accept_both_shapes() {
        let lines = vec![
            json!({"site_id": "a", "score": 70}),
            json!({"site_id": "b", "score": null}),
            json!({"site_id": "c", "rollout_id": "r0", "predicted_score": 60}),
            json!({"site_id": "c", "rollout_id": "r1", "predicted_score": 80}),
            json!({"site_id": "d", "rollout_id": "r0", "predicted_score": null}),
        ];
        let m = load_scores(&lines).unwrap();
        assert_eq!(m["a"], Some(70.0));
        assert_eq!(m["b"], None);
        assert_eq!(m["c"], Some(70.0));
        assert_eq!(m["d"], None);
        assert!(load_scores(&[json!({"score": 1})]).is_err());
    }
}
