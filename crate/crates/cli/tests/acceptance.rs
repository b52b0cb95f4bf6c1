//! Acceptance suite: one PASS/FAIL line per criterion, each checked against
//! an oracle written here rather than against the library's own helpers.
//!
//! Run with `cargo test -p uxpipe-cli --test acceptance -- --nocapture`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uxpipe_core::action::ActionClass;
use uxpipe_core::bench::{
    auc_pr, critique_report, evaluate, judge_pair, krippendorff_alpha, CritiqueRecord, LabelSource, PairLabel, PreferencePair,
    ScoreMap, ScoredSite, SiteDedup, SiteKind, SiteRole, Verdict,
};
use uxpipe_core::bench::critique::format_cell;
use uxpipe_core::export::{export, write_dataset, ExampleKind, ExportConfig};
use uxpipe_core::harness::{run_session, FnPolicy, PolicyRequest, ReflectiveScorer, SessionConfig, SessionIds, Turn};
use uxpipe_core::hash::{phash, phash_image, same_screen};
use uxpipe_core::nav::{compute_metrics, rollout_metrics, NavConfig, ObservedStep};
use uxpipe_core::reward::calibrate;
use uxpipe_core::trace::{save_rollout, Termination};
use uxpipe_core::{sha256_hex, DefectPrinciple, Rollout, ScreenHash};
use uxpipe_sim::{generate_site, inject_defect, render, FlowFollower, SimEnvironment, SimSite, SystematicExplorer, Template, MAIN_FLOW};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

#[test]
fn acceptance() {
    let criteria = [
        Criterion { name: "s_nav oracle", limit: Duration::from_secs(10), run: s_nav_oracle },
        Criterion { name: "phash", limit: Duration::from_secs(120), run: phash_suite },
        Criterion { name: "calibration", limit: Duration::from_secs(1), run: calibration_suite },
        Criterion { name: "ap", limit: Duration::from_secs(5), run: ap_suite },
        Criterion { name: "end-to-end", limit: Duration::from_secs(180), run: end_to_end },
        Criterion { name: "export shape", limit: Duration::from_secs(30), run: export_shape },
        Criterion { name: "harness contract", limit: Duration::from_secs(60), run: harness_contract },
        Criterion { name: "judge rules", limit: Duration::from_secs(1), run: judge_rules },
        Criterion { name: "krippendorff alpha", limit: Duration::from_secs(1), run: alpha_suite },
        Criterion { name: "critique report", limit: Duration::from_secs(1), run: critique_suite },
    ];
    let mut failures = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let verdict = match &outcome {
            Ok(_) if took <= c.limit => "PASS",
            _ => "FAIL",
        };
        let detail = match &outcome {
            Ok(d) if took <= c.limit => d.clone(),
            Ok(_) => "over time limit".to_string(),
            Err(e) => e.clone(),
        };
        println!("{verdict} {} ({:.2}s / limit {}s): {detail}", c.name, took.as_secs_f64(), c.limit.as_secs());
        if verdict == "FAIL" {
            failures.push(c.name);
        }
    }
    assert!(failures.is_empty(), "failed: {failures:?}");
}

// ---------------------------------------------------------------- s_nav

#[derive(Debug, Clone, Copy)]
struct Frame {
    screen: u8,
    noise_bits: u8,
    blank: bool,
    action: ActionClass,
}

/// Six screens on disjoint 10-bit masks; up to two noise bits high in the
/// word keep copies of one screen within distance 4 of each other.
fn frame_hash(f: &Frame) -> ScreenHash {
    let base = 0x3FFu64 << (10 * u64::from(f.screen));
    let noise = [0, 1u64 << 63, (1u64 << 63) | (1u64 << 61)][usize::from(f.noise_bits)];
    ScreenHash(base ^ noise)
}

struct Expected {
    same: f64,
    same_clicks: f64,
    unique: f64,
    s_nav: f64,
}

/// Enumerate every adjacent pair of kept frames and count outcomes by the
/// action that produced the move.
fn enumerate_transitions(frames: &[Frame]) -> Option<Expected> {
    let kept: Vec<Frame> = frames.iter().copied().filter(|f| !f.blank).collect();
    if kept.is_empty() {
        return None;
    }
    let mut logical: Vec<u8> = Vec::with_capacity(kept.len());
    for (i, f) in kept.iter().enumerate() {
        let inherited = i > 0 && kept[i - 1].action == ActionClass::Scroll;
        logical.push(if inherited { logical[i - 1] } else { f.screen });
    }
    let unique = logical.iter().collect::<BTreeSet<_>>().len() as f64 / logical.len() as f64;

    let mut all = (0u32, 0u32);
    let mut clicks = (0u32, 0u32);
    for (w, via) in logical.windows(2).zip(kept.iter().map(|f| f.action)) {
        if via == ActionClass::Scroll {
            continue;
        }
        let stayed = u32::from(w[0] == w[1]);
        all = (all.0 + 1, all.1 + stayed);
        if via == ActionClass::Click {
            clicks = (clicks.0 + 1, clicks.1 + stayed);
        }
    }
    let ratio = |(n, k): (u32, u32)| if n == 0 { 0.0 } else { f64::from(k) / f64::from(n) };
    let (same, same_clicks) = (ratio(all), ratio(clicks));
    Some(Expected {
        same,
        same_clicks,
        unique,
        s_nav: unique * (1.0 - same) * (1.0 - same_clicks),
    })
}

fn observed(frames: &[Frame]) -> Vec<ObservedStep> {
    frames
        .iter()
        .map(|f| ObservedStep {
            hash: frame_hash(f),
            blank: f.blank,
            action: f.action,
        })
        .collect()
}

fn clicks_over(screens: &[u8]) -> Vec<Frame> {
    screens
        .iter()
        .map(|&screen| Frame {
            screen,
            noise_bits: 0,
            blank: false,
            action: ActionClass::Click,
        })
        .collect()
}

fn s_nav_oracle() -> Outcome {
    let cfg = NavConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5A7);
    let mut compared = 0;
    for trace in 0..100 {
        let len = rng.random_range(1..=60);
        let screens = rng.random_range(1..=6u8);
        let frames: Vec<Frame> = (0..len)
            .map(|_| Frame {
                screen: rng.random_range(0..screens),
                noise_bits: rng.random_range(0..3),
                blank: rng.random_bool(0.1),
                action: match rng.random_range(0..10) {
                    0..=5 => ActionClass::Click,
                    6 | 7 => ActionClass::Scroll,
                    _ => ActionClass::Other,
                },
            })
            .collect();
        let got = compute_metrics(&observed(&frames), &cfg);
        match (enumerate_transitions(&frames), got) {
            (None, Err(_)) => {}
            (Some(e), Ok(m)) => {
                compared += 1;
                for (what, want, have) in [
                    ("same", e.same, m.same_screen_ratio),
                    ("same_clicks", e.same_clicks, m.same_after_clicks_ratio),
                    ("unique", e.unique, m.unique_screen_ratio),
                    ("s_nav", e.s_nav, m.s_nav),
                ] {
                    ensure!((want - have).abs() <= 1e-12, "trace {trace}: {what} {have} != {want}");
                }
            }
            (e, m) => return Err(format!("trace {trace}: oracle {} vs library {m:?}", e.is_some())),
        }
    }
    for (screens, want) in [([0, 0, 0, 0], 0.0), ([0, 1, 2, 3], 1.0), ([0, 1, 1, 2], 1.0 / 3.0)] {
        let m = compute_metrics(&observed(&clicks_over(&screens)), &cfg).map_err(|e| e.to_string())?;
        ensure!((m.s_nav - want).abs() <= f64::EPSILON, "{screens:?}: s_nav {} != {want}", m.s_nav);
    }
    Ok(format!("{compared} traces agree, hand examples 0, 1, 1/3"))
}

// ---------------------------------------------------------------- phash

fn seeded_sites(n: u64) -> Vec<SimSite> {
    (0..n).map(|s| generate_site(s, Template::ALL[s as usize % 4])).collect()
}

fn add_noise(img: &RgbImage, fraction: f64, rng: &mut ChaCha8Rng) -> RgbImage {
    let mut out = img.clone();
    let (w, h) = out.dimensions();
    let count = (f64::from(w * h) * fraction).round() as u32;
    for _ in 0..count {
        let (x, y) = (rng.random_range(0..w), rng.random_range(0..h));
        out.put_pixel(x, y, Rgb([rng.random(), rng.random(), rng.random()]));
    }
    out
}

fn phash_suite() -> Outcome {
    for gray in [0u8, 37, 128, 255] {
        let h = phash_image(&RgbImage::from_pixel(320, 200, Rgb([gray, gray, gray]))).map_err(|e| e.to_string())?;
        ensure!(h == ScreenHash(0), "constant {gray} hashed to {h}");
    }

    let mut corpus = Vec::new();
    for site in seeded_sites(25) {
        for node in site.nodes.iter().take(4) {
            corpus.push(render(&site, node.id, 0).map_err(|e| e.to_string())?);
        }
    }
    ensure!(corpus.len() == 100, "corpus holds {} images", corpus.len());
    let hashes: Vec<ScreenHash> = corpus.iter().map(phash).collect();
    for (i, (shot, &h)) in corpus.iter().zip(&hashes).enumerate() {
        ensure!(phash(shot) == h && h.distance(h) == 0 && same_screen(h, h), "image {i} not reflexive");
    }
    for i in 0..hashes.len() {
        for j in i + 1..hashes.len() {
            let (a, b) = (hashes[i], hashes[j]);
            ensure!(a.distance(b) == b.distance(a) && same_screen(a, b) == same_screen(b, a), "images {i},{j} asymmetric");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xD1CE);
    let mut matched = 0;
    for (shot, &h) in corpus.iter().zip(&hashes) {
        let noisy = phash_image(&add_noise(shot.image(), 0.01, &mut rng)).map_err(|e| e.to_string())?;
        matched += usize::from(same_screen(h, noisy));
    }
    let rate = matched as f64 / corpus.len() as f64;
    ensure!(rate >= 0.95, "noise same-screen rate {rate}");

    let mut pairs = 0;
    for site in seeded_sites(10) {
        let node_hashes: Vec<ScreenHash> = site
            .nodes
            .iter()
            .map(|n| render(&site, n.id, 0).map(|s| phash(&s)))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for i in 0..node_hashes.len() {
            for j in i + 1..node_hashes.len() {
                pairs += 1;
                ensure!(!same_screen(node_hashes[i], node_hashes[j]), "{}: nodes {i} and {j} collide", site.site_id);
            }
        }
    }
    Ok(format!("noise rate {:.0}%, {pairs} distinct node pairs separated", rate * 100.0))
}

// ---------------------------------------------------------------- calibration

fn calibration_suite() -> Outcome {
    const MARGIN: f64 = 15.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0xCA1);
    let (mut adjusted, mut clamped) = (0, 0);
    for _ in 0..1000 {
        let mu_p = f64::from(rng.random_range(0..=200u32)) * 0.5;
        let mu_d = f64::from(rng.random_range(0..=200u32)) * 0.5;
        let c = calibrate(mu_p, mu_d, MARGIN).map_err(|e| e.to_string())?;
        let gap = c.plain_target - c.defect_target;
        ensure!(gap >= MARGIN, "({mu_p},{mu_d}): gap {gap}");
        ensure!((0.0..=100.0).contains(&c.plain_target) && (0.0..=100.0).contains(&c.defect_target), "({mu_p},{mu_d}) out of range");
        if mu_p - mu_d >= MARGIN {
            ensure!(!c.adjusted && c.plain_target == mu_p && c.defect_target == mu_d, "({mu_p},{mu_d}) moved");
            continue;
        }
        adjusted += 1;
        ensure!(c.adjusted, "({mu_p},{mu_d}) not flagged adjusted");
        ensure!((gap - MARGIN).abs() <= 1e-12, "({mu_p},{mu_d}): adjusted gap {gap}");
        if c.clamped {
            clamped += 1;
        } else {
            let mid = (c.plain_target + c.defect_target) / 2.0;
            ensure!((mid - (mu_p + mu_d) / 2.0).abs() <= 1e-12, "({mu_p},{mu_d}): midpoint {mid}");
        }
    }
    let c = calibrate(60.0, 55.0, MARGIN).map_err(|e| e.to_string())?;
    ensure!(c.plain_target == 65.0 && c.defect_target == 50.0, "(60,55) gave ({}, {})", c.plain_target, c.defect_target);
    Ok(format!("1000 points, {adjusted} adjusted, {clamped} clamped"))
}

// ---------------------------------------------------------------- AP

fn scored(labels: &[bool], scores: &[Option<f64>]) -> Vec<ScoredSite> {
    labels
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(i, (&chosen, &s))| ScoredSite {
            site_id: format!("x{i}"),
            predicted_score: s,
            role: if chosen { SiteRole::Chosen } else { SiteRole::Rejected },
        })
        .collect()
}

/// Sum over distinct thresholds of recall gain times precision, predicting
/// positive every instance at or above the threshold.
fn threshold_ap(labels: &[bool], scores: &[Option<f64>]) -> f64 {
    let s: Vec<f64> = scores.iter().map(|x| x.unwrap_or(-1.0)).collect();
    let positives = labels.iter().filter(|&&l| l).count() as f64;
    let mut thresholds = s.clone();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (mut ap, mut last_recall) = (0.0, 0.0);
    for th in thresholds {
        let above: Vec<usize> = (0..s.len()).filter(|&i| s[i] >= th).collect();
        let tp = above.iter().filter(|&&i| labels[i]).count() as f64;
        let recall = tp / positives;
        ap += (recall - last_recall) * tp / above.len() as f64;
        last_recall = recall;
    }
    ap
}

fn ap_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA9);
    for case in 0..500 {
        let n = rng.random_range(2..=8);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<Option<f64>> = (0..n)
            .map(|_| (!rng.random_bool(0.1)).then(|| f64::from(rng.random_range(0..5u8)) * 10.0))
            .collect();
        let got = auc_pr(&scored(&labels, &scores)).map_err(|e| e.to_string())?;
        let want = threshold_ap(&labels, &scores);
        ensure!((got - want).abs() <= 1e-9, "case {case}: {labels:?} {scores:?}: {got} != {want}");
    }
    let perfect = auc_pr(&scored(&[true, true, false, false], &[Some(90.0), Some(70.0), Some(40.0), Some(10.0)]))
        .map_err(|e| e.to_string())?;
    ensure!(perfect == 1.0, "perfect separation gave {perfect}");
    let four = auc_pr(&scored(&[true, false, true, false], &[Some(0.9), Some(0.8), Some(0.7), Some(0.1)])).map_err(|e| e.to_string())?;
    ensure!((four - 5.0 / 6.0).abs() <= 1e-12, "4-item case gave {four}");
    Ok(format!("500 cases match, 4-item case {four:.4}"))
}

// ---------------------------------------------------------------- end to end

fn session_cfg(assess: bool) -> SessionConfig {
    SessionConfig {
        date: Some("2025-03-01".into()),
        assess,
        ..SessionConfig::default()
    }
}

fn ids(site: &SimSite, tag: &str) -> SessionIds {
    SessionIds {
        rollout_id: format!("{}-{tag}", site.site_id),
        site_id: site.site_id.clone(),
    }
}

/// (same_after_clicks_ratio, predicted score) of one scored flow-following session.
fn scored_flow(site: SimSite) -> Result<(f64, Option<u8>), String> {
    let site = Arc::new(site);
    let mut env = SimEnvironment::new(Arc::clone(&site));
    let mut policy = ReflectiveScorer::new(FlowFollower::new(Arc::clone(&site), MAIN_FLOW));
    let r = run_session(&mut env, &mut policy, &session_cfg(true), &ids(&site, "flow")).map_err(|e| e.to_string())?;
    let m = rollout_metrics(&r, &NavConfig::default()).map_err(|e| e.to_string())?;
    Ok((m.same_after_clicks_ratio, r.predicted_score()))
}

fn end_to_end() -> Outcome {
    let mut scores = ScoreMap::new();
    let mut pairs = Vec::new();
    let mut separated = 0;
    for seed in 0..20u64 {
        let plain = generate_site(seed, Template::ALL[seed as usize % 4]);
        let defect = inject_defect(&plain, DefectPrinciple::Feedback, seed).map_err(|e| e.to_string())?;
        let (plain_id, defect_id) = (plain.site_id.clone(), defect.site_id.clone());
        let (sac_p, score_p) = scored_flow(plain)?;
        let (sac_d, score_d) = scored_flow(defect)?;
        separated += usize::from(sac_d > sac_p);
        scores.insert(plain_id.clone(), score_p.map(f64::from));
        scores.insert(defect_id.clone(), score_d.map(f64::from));
        let plain_left = seed % 2 == 0;
        pairs.push(PreferencePair {
            pair_id: format!("e2e-{seed:02}"),
            left_site: if plain_left { plain_id.clone() } else { defect_id.clone() },
            right_site: if plain_left { defect_id } else { plain_id },
            label: if plain_left { PairLabel::Left } else { PairLabel::Right },
            label_source: LabelSource::GroundTruth,
        });
    }
    ensure!(separated >= 19, "defect sites separated in only {separated}/20 pairs");
    let report = evaluate("scripted", &pairs, &scores, SiteDedup::BySiteRole, None);
    ensure!(report.auc_pr == Some(1.0), "AP {:?}", report.auc_pr);
    ensure!(report.agreement_rate == Some(1.0), "agreement {:?}", report.agreement_rate);
    Ok(format!("{separated}/20 separated, AP 1.0, agreement 100%"))
}

// ---------------------------------------------------------------- export

fn scored_rollout(site: &Arc<SimSite>, tag: &str, assess: bool, explorer: bool) -> Result<Rollout, String> {
    let mut env = SimEnvironment::new(Arc::clone(site));
    let cfg = session_cfg(assess);
    let r = if explorer {
        let mut p = ReflectiveScorer::new(SystematicExplorer::new(Arc::clone(site)));
        run_session(&mut env, &mut p, &cfg, &ids(site, tag))
    } else {
        let mut p = ReflectiveScorer::new(FlowFollower::new(Arc::clone(site), MAIN_FLOW));
        run_session(&mut env, &mut p, &cfg, &ids(site, tag))
    };
    r.map_err(|e| e.to_string())
}

/// SHA-256 over every file under `dir`, keyed by relative path.
fn tree_checksum(dir: &Path) -> String {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(dir).expect("readable dir") {
            let p = entry.expect("dir entry").path();
            if p.is_dir() {
                walk(&p, out);
            } else {
                out.push(p);
            }
        }
    }
    let mut files = Vec::new();
    walk(dir, &mut files);
    files.sort();
    let mut buf = Vec::new();
    for f in files {
        buf.extend_from_slice(f.strip_prefix(dir).unwrap().to_string_lossy().as_bytes());
        buf.push(0);
        buf.extend_from_slice(&std::fs::read(&f).expect("readable file"));
    }
    sha256_hex(&buf)
}

fn export_shape() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let site = Arc::new(generate_site(1, Template::Shop));
    let rollout = scored_rollout(&site, "long", true, true)?;
    ensure!(rollout.len() == 50 && rollout.assessment().is_some(), "rollout has {} steps", rollout.len());
    let archive = tmp.path().join("archive");
    save_rollout(&rollout, &archive).map_err(|e| e.to_string())?;
    let cfg = ExportConfig::from(&session_cfg(true));
    let examples = export(&rollout, &archive, &cfg).map_err(|e| e.to_string())?;
    ensure!(examples.len() == 51, "{} examples", examples.len());
    for ex in &examples {
        let want = match ex.kind {
            ExampleKind::Step => ex.t.min(5),
            ExampleKind::Assessment => 5,
        };
        ensure!(ex.image_steps.len() == want as usize, "t={} has {} images", ex.t, ex.image_steps.len());
        ensure!(ex.image_steps.last() == Some(&ex.t.min(50)), "t={} window ends at {:?}", ex.t, ex.image_steps.last());
    }

    let a = write_dataset(&examples, &tmp.path().join("a")).map_err(|e| e.to_string())?;
    let b = write_dataset(&examples, &tmp.path().join("b")).map_err(|e| e.to_string())?;
    ensure!(a == b, "manifests differ");
    ensure!(tree_checksum(&tmp.path().join("a")) == tree_checksum(&tmp.path().join("b")), "dataset trees differ");

    let mut checked = 0;
    for seed in 0..6u64 {
        let plain = generate_site(seed, Template::ALL[seed as usize % 4]);
        let defect = inject_defect(&plain, DefectPrinciple::Feedback, seed).map_err(|e| e.to_string())?;
        for (k, site) in [plain, defect].into_iter().enumerate() {
            let site = Arc::new(site);
            for assess in [true, false] {
                let tag = format!("{seed}-{k}-{assess}");
                let r = scored_rollout(&site, &tag, assess, false)?;
                let dir = tmp.path().join(&tag);
                save_rollout(&r, &dir).map_err(|e| e.to_string())?;
                let n = export(&r, &dir, &ExportConfig::from(&session_cfg(assess))).map_err(|e| e.to_string())?.len();
                ensure!((r.len()..=r.len() + 1).contains(&n), "{tag}: {n} examples for {} steps", r.len());
                checked += 1;
            }
        }
    }
    Ok(format!("51 examples, identical double export, {checked} rollouts within [steps, steps+1]"))
}

// ---------------------------------------------------------------- harness

fn harness_contract() -> Outcome {
    let site = Arc::new(generate_site(4, Template::Booking));
    let cfg = session_cfg(false);

    let mut stop_at_12 = FnPolicy(|req: &PolicyRequest| {
        Ok(match req.turn {
            Turn::Step(12) => "Thought: enough\nAction: stop()".to_string(),
            _ => "Thought: look around\nAction: scroll(down, 1)".to_string(),
        })
    });
    let r = run_session(&mut SimEnvironment::new(Arc::clone(&site)), &mut stop_at_12, &cfg, &ids(&site, "stop"))
        .map_err(|e| e.to_string())?;
    ensure!(r.len() == 12 && r.termination() == Some(Termination::Stopped), "stop run: {} steps, {:?}", r.len(), r.termination());

    let mut never = FnPolicy(|_: &PolicyRequest| Ok("Action: click(960, 540)".to_string()));
    let r = run_session(&mut SimEnvironment::new(Arc::clone(&site)), &mut never, &cfg, &ids(&site, "never"))
        .map_err(|e| e.to_string())?;
    ensure!(
        r.len() == 50 && r.termination() == Some(Termination::BudgetExhausted),
        "endless run: {} steps, {:?}",
        r.len(),
        r.termination()
    );

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut sums = Vec::new();
    for k in 0..2 {
        let r = scored_rollout(&site, "replay", true, true)?;
        ensure!(r.len() <= 50, "{} steps", r.len());
        let dir = tmp.path().join(format!("run{k}"));
        save_rollout(&r, &dir).map_err(|e| e.to_string())?;
        sums.push(tree_checksum(&dir));
    }
    ensure!(sums[0] == sums[1], "archive checksums differ");
    Ok(format!("stop at 12, budget 50, replay checksum {}", &sums[0][..12]))
}

// ---------------------------------------------------------------- judge

fn judge_rules() -> Outcome {
    let pair = |label| PreferencePair {
        pair_id: "j".into(),
        left_site: "plain".into(),
        right_site: "plain@feedback".into(),
        label,
        label_source: LabelSource::GroundTruth,
    };
    let left = pair(PairLabel::Left);
    for (l, r, want) in [
        (Some(80.0), Some(40.0), true),
        (Some(60.0), Some(60.0), false),
        (None, Some(40.0), false),
        (Some(55.0), None, true),
    ] {
        let got = judge_pair(&left, l, r).map_err(|e| e.to_string())?;
        ensure!(got == want, "({l:?},{r:?}) judged {got}");
    }
    ensure!(judge_pair(&pair(PairLabel::Right), Some(80.0), Some(40.0)) == Ok(false), "right label misjudged");
    ensure!(judge_pair(&pair(PairLabel::Tie), Some(80.0), Some(40.0)).is_err(), "tie label accepted");
    Ok("higher wins, equal loses, missing votes for the other, tie label errors".into())
}

// ---------------------------------------------------------------- alpha

/// Coincidence matrix built unit by unit from ordered rater pairs.
fn coincidence_alpha(ratings: &[Vec<Option<char>>]) -> f64 {
    let units = ratings[0].len();
    let mut o: BTreeMap<(char, char), f64> = BTreeMap::new();
    for u in 0..units {
        let vals: Vec<char> = ratings.iter().filter_map(|r| r[u]).collect();
        let m = vals.len();
        if m < 2 {
            continue;
        }
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    *o.entry((vals[i], vals[j])).or_default() += 1.0 / (m - 1) as f64;
                }
            }
        }
    }
    let mut n_c: BTreeMap<char, f64> = BTreeMap::new();
    for (&(c, _), &v) in &o {
        *n_c.entry(c).or_default() += v;
    }
    let n: f64 = n_c.values().sum();
    let observed: f64 = o.iter().filter(|((c, k), _)| c != k).map(|(_, v)| v).sum();
    let mut expected = 0.0;
    for (c, nc) in &n_c {
        for (k, nk) in &n_c {
            if c != k {
                expected += nc * nk;
            }
        }
    }
    1.0 - (n - 1.0) * observed / expected
}

fn alpha_suite() -> Outcome {
    let perfect = vec![
        vec![Some('a'), Some('b'), Some('a'), None, Some('b')],
        vec![Some('a'), Some('b'), Some('a'), Some('b'), Some('b')],
        vec![None, Some('b'), Some('a'), Some('b'), None],
    ];
    let a = krippendorff_alpha(&perfect).map_err(|e| e.to_string())?;
    ensure!(a == 1.0, "perfect agreement gave {a}");

    let four = vec![vec![Some('A'), Some('A'), Some('B'), Some('B')], vec![Some('A'), Some('B'), Some('B'), Some('A')]];
    let got = krippendorff_alpha(&four).map_err(|e| e.to_string())?;
    let want = coincidence_alpha(&four);
    ensure!((got - want).abs() <= 1e-9, "4-item case {got} vs oracle {want}");
    ensure!((want - 0.125).abs() <= 1e-12, "oracle gave {want}");

    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    for case in 0..200 {
        let raters = rng.random_range(2..=4);
        let units = rng.random_range(3..=12);
        let ratings: Vec<Vec<Option<char>>> = (0..raters)
            .map(|_| (0..units).map(|_| (!rng.random_bool(0.15)).then(|| ['L', 'R', 'T'][rng.random_range(0..3)])).collect())
            .collect();
        let want = coincidence_alpha(&ratings);
        match krippendorff_alpha(&ratings) {
            Ok(got) => ensure!((got - want).abs() <= 1e-9, "case {case}: {got} vs {want}"),
            Err(_) => ensure!(!want.is_finite(), "case {case}: library refused but oracle gave {want}"),
        }
    }
    Ok(format!("perfect 1.0, 4-item case {got:.3}, 200 random cases"))
}

// ---------------------------------------------------------------- critique

fn critique_suite() -> Outcome {
    use DefectPrinciple::*;
    // (category, plain tp, plain fp, defect tp, defect fp, plain cell, defect cell)
    let rows = [
        (Consistency, 1, 1, 9, 1, "50%", "90%"),
        (Feedback, 18, 19, 95, 52, "49%", "65%"),
        (Dialog, 0, 1, 1, 0, "0%", "100%"),
        (Prevention, 3, 0, 25, 8, "100%", "76%"),
        (Control, 14, 3, 44, 22, "82%", "67%"),
        (Reversal, 0, 0, 1, 0, "--", "100%"),
        (Memory, 0, 0, 2, 1, "--", "67%"),
        (Hierarchy, 6, 3, 40, 1, "67%", "98%"),
    ];
    let mut records = Vec::new();
    let mut push = |category, kind, verdict, n: u32| {
        for i in 0..n {
            records.push(CritiqueRecord {
                site_id: format!("{category}-{kind:?}-{i}"),
                site_kind: kind,
                issue: format!("issue {i}"),
                category,
                verified: Some(verdict),
            });
        }
    };
    for &(cat, ptp, pfp, dtp, dfp, _, _) in &rows {
        push(cat, SiteKind::Plain, Verdict::TruePositive, ptp);
        push(cat, SiteKind::Plain, Verdict::FalsePositive, pfp);
        push(cat, SiteKind::DefectAugmented, Verdict::TruePositive, dtp);
        push(cat, SiteKind::DefectAugmented, Verdict::FalsePositive, dfp);
    }
    let table = critique_report(&records);
    for &(cat, _, _, _, _, plain, defect) in &rows {
        let got = (format_cell(table.precision(cat, SiteKind::Plain)), format_cell(table.precision(cat, SiteKind::DefectAugmented)));
        ensure!(got.0 == plain && got.1 == defect, "{cat}: {got:?} != ({plain}, {defect})");
    }
    Ok("16 cells reproduce".into())
}
