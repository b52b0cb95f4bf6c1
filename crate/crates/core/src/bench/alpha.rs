//! Krippendorff's alpha for nominal ratings with missing entries.

use std::collections::BTreeMap;

use super::BenchError;

/// `alpha = 1 - (n - 1) * sum_{c != k} o_ck / sum_{c != k} n_c * n_k` from
/// the coincidence matrix `o`, where every item rated by `m >= 2` raters adds
/// `1 / (m - 1)` for each ordered pair of its ratings.
///
/// `ratings[r][u]` is rater `r`'s label for item `u`. Items with fewer than
/// two ratings are not pairable and are ignored.
pub fn krippendorff_alpha<T: Ord + Clone>(ratings: &[Vec<Option<T>>]) -> Result<f64, BenchError> {
    let items = ratings.iter().map(Vec::len).max().unwrap_or(0);
    let mut coincidence: BTreeMap<(T, T), f64> = BTreeMap::new();
    let mut pairable = 0;
    for u in 0..items {
        let values: Vec<&T> = ratings.iter().filter_map(|r| r.get(u).and_then(Option::as_ref)).collect();
        let m = values.len();
        if m < 2 {
            continue;
        }
        pairable += 1;
        let w = 1.0 / (m - 1) as f64;
        for (i, a) in values.iter().enumerate() {
            for (j, b) in values.iter().enumerate() {
                if i != j {
                    *coincidence.entry(((*a).clone(), (*b).clone())).or_default() += w;
                }
            }
        }
    }
    if pairable == 0 {
        return Err(BenchError::NoPairableItems);
    }

    let mut marginals: BTreeMap<&T, f64> = BTreeMap::new();
    let mut disagreement = 0.0;
    for ((c, k), &o) in &coincidence {
        *marginals.entry(c).or_default() += o;
        if c != k {
            disagreement += o;
        }
    }
    let n: f64 = marginals.values().sum();
    let sq: f64 = marginals.values().map(|v| v * v).sum();
    let expected = n * n - sq;
    if expected == 0.0 {
        return Err(BenchError::NoVariation);
    }
    Ok(1.0 - (n - 1.0) * disagreement / expected)
}
