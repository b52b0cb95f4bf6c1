use std::collections::{BTreeMap, HashMap};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BenchError;

/// Defect variants drawn per source site.
pub const VARIANTS_PER_SOURCE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLabel {
    Left,
    Right,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    GroundTruth,
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub pair_id: String,
    pub left_site: String,
    pub right_site: String,
    pub label: PairLabel,
    pub label_source: LabelSource,
}

impl PreferencePair {
    /// (chosen, rejected) site ids, or `None` for a tie.
    pub fn chosen_rejected(&self) -> Option<(&str, &str)> {
        match self.label {
            PairLabel::Left => Some((&self.left_site, &self.right_site)),
            PairLabel::Right => Some((&self.right_site, &self.left_site)),
            PairLabel::Tie => None,
        }
    }
}

/// One plain source site and all of its defect variants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub plain: String,
    pub variants: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Benchmark {
    /// Every site in the benchmark, sorted.
    pub sites: Vec<String>,
    pub pairs: Vec<PreferencePair>,
}

/// One plain site and four seeded variants per source, each variant paired
/// with its plain parent on a random side.
pub fn build_benchmark(sources: &[SourceEntry], seed: u64) -> Result<Benchmark, BenchError> {
    build_benchmark_with(sources, seed, VARIANTS_PER_SOURCE)
}

/// [`build_benchmark`] drawing `per_source` variants from each source.
pub fn build_benchmark_with(sources: &[SourceEntry], seed: u64, per_source: usize) -> Result<Benchmark, BenchError> {
    let mut ordered: Vec<&SourceEntry> = sources.iter().collect();
    ordered.sort_by(|a, b| a.plain.cmp(&b.plain));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sites = Vec::new();
    let mut pairs = Vec::new();
    for src in ordered {
        let mut variants: Vec<&String> = src.variants.iter().collect();
        variants.sort();
        variants.dedup();
        if variants.len() < per_source {
            return Err(BenchError::TooFewVariants {
                source_site: src.plain.clone(),
                found: variants.len(),
                needed: per_source,
            });
        }
        let mut chosen: Vec<&String> = variants.choose_multiple(&mut rng, per_source).copied().collect();
        chosen.sort();
        sites.push(src.plain.clone());
        for variant in chosen {
            sites.push(variant.clone());
            let plain_left = rng.random_bool(0.5);
            let (left_site, right_site, label) = if plain_left {
                (src.plain.clone(), variant.clone(), PairLabel::Left)
            } else {
                (variant.clone(), src.plain.clone(), PairLabel::Right)
            };
            pairs.push(PreferencePair {
                pair_id: format!("gt-{:04}", pairs.len()),
                left_site,
                right_site,
                label,
                label_source: LabelSource::GroundTruth,
            });
        }
    }
    sites.sort();
    Ok(Benchmark { sites, pairs })
}

/// Group defect-variant ids (`plain@principle`) under their plain parents.
pub fn sources_from_site_ids<'a>(site_ids: impl IntoIterator<Item = &'a str>) -> Vec<SourceEntry> {
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut variants = Vec::new();
    for id in site_ids {
        match crate::reward::plain_parent(id) {
            Some(_) => variants.push(id.to_string()),
            None => {
                map.entry(id.to_string()).or_default();
            }
        }
    }
    for v in variants {
        let parent = crate::reward::plain_parent(&v).expect("variant ids carry a parent");
        if let Some(list) = map.get_mut(parent) {
            list.push(v);
        }
    }
    map.into_iter()
        .map(|(plain, variants)| SourceEntry { plain, variants })
        .collect()
}

/// Whether the labeled side wins: a strictly higher score, or the only
/// score present. Ties and double absences count as incorrect.
pub fn judge_pair(pair: &PreferencePair, score_left: Option<f64>, score_right: Option<f64>) -> Result<bool, BenchError> {
    let left_wins = match (score_left, score_right) {
        (Some(l), Some(r)) if l > r => Some(true),
        (Some(l), Some(r)) if r > l => Some(false),
        (Some(_), Some(_)) => None,
        (Some(_), None) => Some(true),
        (None, Some(_)) => Some(false),
        (None, None) => None,
    };
    match pair.label {
        PairLabel::Tie => Err(BenchError::TieLabel(pair.pair_id.clone())),
        PairLabel::Left => Ok(left_wins == Some(true)),
        PairLabel::Right => Ok(left_wins == Some(false)),
    }
}

pub type ScoreMap = HashMap<String, Option<f64>>;

fn lookup(scores: &ScoreMap, site: &str) -> Option<f64> {
    scores.get(site).copied().flatten()
}

/// Fraction of non-tie pairs judged correct; `None` without such pairs.
pub fn agreement_rate(pairs: &[PreferencePair], scores: &ScoreMap) -> Option<f64> {
    let judged: Vec<bool> = pairs
        .iter()
        .filter(|p| p.label != PairLabel::Tie)
        .map(|p| judge_pair(p, lookup(scores, &p.left_site), lookup(scores, &p.right_site)).expect("ties filtered"))
        .collect();
    if judged.is_empty() {
        return None;
    }
    Some(judged.iter().filter(|&&c| c).count() as f64 / judged.len() as f64)
}

/// Mean of chosen minus rejected score over non-tie pairs with both scores.
pub fn mean_delta(pairs: &[PreferencePair], scores: &ScoreMap) -> Option<f64> {
    let deltas: Vec<f64> = pairs
        .iter()
        .filter_map(|p| {
            let (c, r) = p.chosen_rejected()?;
            Some(lookup(scores, c)? - lookup(scores, r)?)
        })
        .collect();
    if deltas.is_empty() {
        return None;
    }
    Some(deltas.iter().sum::<f64>() / deltas.len() as f64)
}
