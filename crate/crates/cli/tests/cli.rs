use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn uxpipe(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uxpipe"))
        .args(args)
        .current_dir(dir)
        .env_remove("UXPIPE_CONFIG")
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = uxpipe(dir, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn lines(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn simgen_writes_a_site_file() {
    let d = tempfile::tempdir().unwrap();
    let out = ok(d.path(), &["simgen", "--seed", "7", "--template", "shop"]);
    let recs = lines(&out);
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["site_id"], "shop-7");
    let site = uxpipe_sim::SimSite::load(&d.path().join("sites/shop-7.json")).unwrap();
    assert_eq!(site, uxpipe_sim::generate_site(7, uxpipe_sim::Template::Shop));
    // Regenerating identical content is allowed.
    ok(d.path(), &["simgen", "--seed", "7", "--template", "shop"]);
}

#[test]
fn exit_codes_follow_failure_class() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    let o = uxpipe(p, &["bench", "--scores", "s.jsonl"]);
    assert_eq!(code(&o), 1, "missing --pairs is a usage error");
    assert_eq!(code(&uxpipe(p, &["frobnicate"])), 1);
    assert_eq!(code(&uxpipe(p, &["simgen", "--seed", "1", "--template", "castle"])), 1);
    assert_eq!(code(&uxpipe(p, &["--help"])), 0);

    std::fs::write(p.join("bad.toml"), "[thresholds]\nbudget = 0\n").unwrap();
    assert_eq!(code(&uxpipe(p, &["--config", "bad.toml", "hash", "x.png"])), 1);

    assert_eq!(code(&uxpipe(p, &["bench", "--pairs", "none.jsonl", "--scores", "none.jsonl"])), 2);
    assert_eq!(code(&uxpipe(p, &["hash", "missing.png"])), 2);
    assert_eq!(code(&uxpipe(p, &["score-traces", "no-such-dir"])), 2);

    ok(p, &["simgen", "--seed", "1", "--template", "jobs"]);
    let o = uxpipe(p, &["rollout", "--env", "http://127.0.0.1:9", "--site", "jobs-1", "--budget", "3"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_file_is_resolved_and_echoed() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("cfg.toml"), "[paths]\nsites = \"generated\"\n[seeds]\nsim = 11\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_uxpipe"))
        .args(["simgen", "--template", "forum"])
        .current_dir(d.path())
        .env("UXPIPE_CONFIG", "cfg.toml")
        .env("RUST_LOG", "info")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(d.path().join("generated/forum-11.json").is_file());
    let log = String::from_utf8_lossy(&o.stderr);
    assert!(log.contains("resolved config"), "{log}");
    assert!(log.contains("\"sites\":\"generated\""));
    assert!(log.contains("\"margin\":15.0") && log.contains("\"budget\":50"));
}

#[test]
fn hash_prints_sixteen_hex_digits() {
    let d = tempfile::tempdir().unwrap();
    let site = uxpipe_sim::generate_site(2, uxpipe_sim::Template::Booking);
    let shot = uxpipe_sim::render(&site, site.entry, 0).unwrap();
    std::fs::write(d.path().join("s.png"), shot.to_png()).unwrap();
    let out = ok(d.path(), &["hash", "s.png"]);
    let h = out.trim();
    assert_eq!(h.len(), 16);
    assert_eq!(h, uxpipe_core::hash::phash(&shot).to_string());
}

fn chain(root: &Path, jobs: &str) -> (String, Vec<u8>) {
    std::fs::create_dir_all(root).unwrap();
    ok(root, &["simgen", "--seed", "5", "--template", "booking", "--defect", "feedback", "--pairs-out", "pairs.jsonl"]);
    ok(
        root,
        &[
            "--jobs", jobs, "rollout", "--site", "booking-5", "--site", "booking-5@feedback", "--rollouts", "3", "--date", "2025-03-01",
        ],
    );
    ok(root, &["--jobs", jobs, "score-traces", "traces", "--out", "scores.jsonl"]);
    ok(root, &["calibrate", "scores.jsonl", "--margin", "15", "--out", "cal.jsonl"]);
    let manifest = ok(root, &["--jobs", jobs, "export", "cal.jsonl", "dataset"]);
    let sha = lines(&manifest)[0]["sha256"].as_str().unwrap().to_string();
    (sha, std::fs::read(root.join("dataset/dataset.jsonl")).unwrap())
}

#[test]
fn full_chain_is_byte_identical_across_runs() {
    let d = tempfile::tempdir().unwrap();
    let (sha_a, data_a) = chain(&d.path().join("a"), "1");
    let (sha_b, data_b) = chain(&d.path().join("b"), "4");
    assert_eq!(sha_a, sha_b);
    assert_eq!(data_a, data_b);
    assert_eq!(uxpipe_core::sha256_hex(&data_a), sha_a);
    let examples = data_a.iter().filter(|&&b| b == b'\n').count();
    assert_eq!(examples, 2 * 51, "one selected 50-step rollout per site plus its assessment");

    let a = d.path().join("a");
    let o = uxpipe(&a, &["export", "cal.jsonl", "dataset"]);
    assert_eq!(code(&o), 2, "export refuses to overwrite a dataset");

    let cal = lines(&std::fs::read_to_string(a.join("cal.jsonl")).unwrap());
    let pair = cal.iter().find(|r| r["record"] == "pair").unwrap();
    let gap = pair["plain_target"].as_f64().unwrap() - pair["defect_target"].as_f64().unwrap();
    assert!(gap >= 15.0);

    let report = ok(&a, &["bench", "--pairs", "pairs.jsonl", "--scores", "scores.jsonl", "--label", "scripted", "--out", "report.jsonl"]);
    assert!(report.starts_with("Model"));
    let rec = lines(&std::fs::read_to_string(a.join("report.jsonl")).unwrap());
    assert_eq!(rec[0]["n_pairs"], 1);
}

#[test]
fn arena_log_tools() {
    use std::sync::{Arc, Mutex};
    use uxpipe_arena::{Arena, Choice, Telemetry, Vote};
    use uxpipe_core::bench::{LabelSource, PairLabel, PreferencePair};

    let d = tempfile::tempdir().unwrap();
    let pool: Vec<PreferencePair> = (0..30)
        .map(|i| PreferencePair {
            pair_id: format!("p{i:02}"),
            left_site: format!("s{i}"),
            right_site: format!("s{i}@memory"),
            label: PairLabel::Left,
            label_source: LabelSource::GroundTruth,
        })
        .collect();
    let body: String = pool.iter().map(|p| serde_json::to_string(p).unwrap() + "\n").collect();
    std::fs::write(d.path().join("pool.jsonl"), body).unwrap();
    let log = d.path().join("votes.jsonl");
    let arena = Arc::new(Mutex::new(Arena::open(pool, 0, &log).unwrap()));
    {
        let mut a = arena.lock().unwrap();
        for _ in 0..2 {
            let s = a.create_session(None).unwrap();
            for p in s.pairs.iter().take(10) {
                a.record_vote(Vote {
                    pair_id: p.pair_id.clone(),
                    session_id: s.session_id.clone(),
                    choice: if p.swapped { Choice::Right } else { Choice::Left },
                    telemetry: Telemetry {
                        duration_ms: 30_000,
                        frame_clicks: 2,
                        element_clicks: 6,
                        expanded_left: true,
                        expanded_right: true,
                    },
                })
                .unwrap();
            }
        }
    }
    let stats = lines(&ok(d.path(), &["arena", "stats", "--pairs", "pool.jsonl", "--log", "votes.jsonl"]));
    assert_eq!(stats[0]["n_votes"], 20);
    assert_eq!(stats[0]["mean_duration_s"], 30.0);
    let exported = lines(&ok(d.path(), &["arena", "export", "--pairs", "pool.jsonl", "--log", "votes.jsonl"]));
    assert_eq!(exported.len(), 20);
    assert!(exported.iter().all(|p| p["label_source"] == "human"));
}
