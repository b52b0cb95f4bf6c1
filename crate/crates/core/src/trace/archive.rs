//! Directory-based rollout archive.
//!
//! ```text
//! <rollout>/
//!   manifest            header lines (`#key<TAB>value`) then one line per step:
//!                       t, action_text, image_path, thought_path, captured_at_ms, sha256(png)
//!   goal.txt
//!   steps/001.png ...
//!   thoughts/001.txt ...
//!   assessment.txt      present iff the scoring turn completed
//! ```
//!
//! Files other than the manifest are write-once: saving again over an
//! existing archive leaves matching files untouched and refuses to replace
//! files whose content differs.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{Assessment, Rollout, Screenshot, Step, Termination, TraceError};
use crate::action::{parse_call, ActionRecord};
use crate::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest";
const MAGIC: &str = "#uxpipe-rollout\tv1";
const GOAL_FILE: &str = "goal.txt";
const ASSESSMENT_FILE: &str = "assessment.txt";

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt manifest line {line}: {reason}")]
    CorruptManifest { line: usize, reason: String },
    #[error("missing file referenced by manifest: {0}")]
    MissingFile(PathBuf),
    #[error("checksum mismatch for {path}: manifest {expected}, file {actual}")]
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        actual: String,
    },
    #[error("refusing to overwrite {0} with different content")]
    WouldOverwrite(PathBuf),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveSummary {
    pub dir: PathBuf,
    pub screenshots: usize,
    pub has_assessment: bool,
    /// Files actually written by this save (already-present identical files
    /// are skipped).
    pub files_written: usize,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ArchiveError + '_ {
    move |source| ArchiveError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_field(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '\\' => out.push('\\'),
            't' => out.push('\t'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            _ => return None,
        }
    }
    Some(out)
}

/// Write `bytes` to `path` unless an identical file already exists.
/// Returns whether a write happened.
fn write_once(path: &Path, bytes: &[u8]) -> Result<bool, ArchiveError> {
    match fs::read(path) {
        Ok(existing) if existing == bytes => return Ok(false),
        Ok(_) => return Err(ArchiveError::WouldOverwrite(path.to_path_buf())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(io_err(path)(e)),
    }
    fs::write(path, bytes).map_err(io_err(path))?;
    Ok(true)
}

fn step_stem(t: u32) -> String {
    format!("{t:03}")
}

/// Path of step `t`'s screenshot, relative to the archive directory.
pub fn step_image_rel(t: u32) -> String {
    format!("steps/{}.png", step_stem(t))
}

/// Persist `rollout` under `dir`, creating it if needed.
pub fn save_rollout(rollout: &Rollout, dir: &Path) -> Result<ArchiveSummary, ArchiveError> {
    fs::create_dir_all(dir.join("steps")).map_err(io_err(dir))?;
    fs::create_dir_all(dir.join("thoughts")).map_err(io_err(dir))?;

    let mut written = 0;
    let mut manifest = String::new();
    manifest.push_str(MAGIC);
    manifest.push('\n');
    for (key, value) in [
        ("rollout_id", escape_field(&rollout.rollout_id)),
        ("site_id", escape_field(&rollout.site_id)),
        ("budget", rollout.budget.to_string()),
        (
            "termination",
            rollout.termination.map(Termination::as_str).unwrap_or("-").to_string(),
        ),
        ("goal", GOAL_FILE.to_string()),
    ] {
        manifest.push_str(&format!("#{key}\t{value}\n"));
    }
    written += usize::from(write_once(&dir.join(GOAL_FILE), rollout.goal.as_bytes())?);

    for step in &rollout.steps {
        let stem = step_stem(step.index);
        let image_rel = step_image_rel(step.index);
        let thought_rel = format!("thoughts/{stem}.txt");
        let png = step.observation.to_png();
        written += usize::from(write_once(&dir.join(&image_rel), &png)?);
        written += usize::from(write_once(&dir.join(&thought_rel), step.thought.as_bytes())?);
        manifest.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            step.index,
            escape_field(&step.action.raw_text),
            image_rel,
            thought_rel,
            step.observation.captured_at_ms(),
            sha256_hex(&png),
        ));
    }

    if let Some(assessment) = &rollout.assessment {
        let bytes = assessment.issues_text.as_bytes();
        written += usize::from(write_once(&dir.join(ASSESSMENT_FILE), bytes)?);
        manifest.push_str(&format!("#assessment\t{ASSESSMENT_FILE}\t{}\n", sha256_hex(bytes)));
    }

    // The manifest is the only mutable file; replace it atomically.
    let manifest_path = dir.join(MANIFEST_FILE);
    let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(manifest.as_bytes()).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, &manifest_path).map_err(io_err(&manifest_path))?;

    Ok(ArchiveSummary {
        dir: dir.to_path_buf(),
        screenshots: rollout.steps.len(),
        has_assessment: rollout.assessment.is_some(),
        files_written: written,
    })
}

fn read_file(dir: &Path, rel: &str) -> Result<Vec<u8>, ArchiveError> {
    let path = dir.join(rel);
    fs::read(&path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ArchiveError::MissingFile(path.clone())
        } else {
            io_err(&path)(e)
        }
    })
}

fn read_text(dir: &Path, rel: &str, line: usize) -> Result<String, ArchiveError> {
    String::from_utf8(read_file(dir, rel)?).map_err(|_| ArchiveError::CorruptManifest {
        line,
        reason: format!("{rel} is not UTF-8"),
    })
}

/// Load a rollout previously written by [`save_rollout`].
pub fn load_rollout(dir: &Path) -> Result<Rollout, ArchiveError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = fs::read_to_string(&manifest_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ArchiveError::MissingFile(manifest_path.clone())
        } else {
            io_err(&manifest_path)(e)
        }
    })?;
    let corrupt = |line: usize, reason: &str| ArchiveError::CorruptManifest {
        line,
        reason: reason.to_string(),
    };

    let mut lines = manifest.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(corrupt(1, "missing archive header")),
    }

    let mut rollout_id = None;
    let mut site_id = None;
    let mut budget = None;
    let mut termination = None;
    let mut goal = None;
    let mut steps = Vec::new();
    let mut assessment = None;

    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if let Some(key) = fields[0].strip_prefix('#') {
            let value = fields.get(1).copied().ok_or_else(|| corrupt(n, "header without value"))?;
            match key {
                "rollout_id" => rollout_id = unescape_field(value),
                "site_id" => site_id = unescape_field(value),
                "budget" => budget = Some(value.parse::<u32>().map_err(|_| corrupt(n, "bad budget"))?),
                "termination" => {
                    termination = match value {
                        "-" => None,
                        v => Some(Termination::parse(v).ok_or_else(|| corrupt(n, "bad termination"))?),
                    }
                }
                "goal" => goal = Some(read_text(dir, value, n)?),
                "assessment" => {
                    let text = read_text(dir, value, n)?;
                    if let Some(expected) = fields.get(2) {
                        let actual = sha256_hex(text.as_bytes());
                        if actual != *expected {
                            return Err(ArchiveError::ChecksumMismatch {
                                path: dir.join(value),
                                expected: expected.to_string(),
                                actual,
                            });
                        }
                    }
                    assessment = Some(Assessment::from_text(text));
                }
                _ => return Err(corrupt(n, &format!("unknown header `{key}`"))),
            }
            continue;
        }

        if fields.len() != 6 {
            return Err(corrupt(n, "step record must have 6 fields"));
        }
        let index: u32 = fields[0].parse().map_err(|_| corrupt(n, "bad step index"))?;
        let expected_index = steps.len() as u32 + 1;
        if index != expected_index {
            return Err(corrupt(n, &format!("step index {index}, expected {expected_index}")));
        }
        let raw_text = unescape_field(fields[1]).ok_or_else(|| corrupt(n, "bad escape in action"))?;
        let kind = parse_call(&raw_text).map_err(|e| corrupt(n, &e.to_string()))?;
        let png = read_file(dir, fields[2])?;
        let actual = sha256_hex(&png);
        if actual != fields[5] {
            return Err(ArchiveError::ChecksumMismatch {
                path: dir.join(fields[2]),
                expected: fields[5].to_string(),
                actual,
            });
        }
        let captured_at: u64 = fields[4].parse().map_err(|_| corrupt(n, "bad timestamp"))?;
        let observation = Screenshot::from_png(&png, captured_at)?;
        let thought = read_text(dir, fields[3], n)?;
        steps.push(Step {
            index,
            observation,
            thought,
            action: ActionRecord { kind, raw_text },
        });
    }

    let mut rollout = Rollout::new(
        rollout_id.ok_or_else(|| corrupt(0, "missing rollout_id"))?,
        site_id.ok_or_else(|| corrupt(0, "missing site_id"))?,
        goal.ok_or_else(|| corrupt(0, "missing goal"))?,
        budget.ok_or_else(|| corrupt(0, "missing budget"))?,
    );
    if steps.len() > rollout.budget as usize {
        return Err(corrupt(0, "more steps than budget"));
    }
    rollout.steps = steps;
    rollout.termination = termination;
    rollout.assessment = assessment;
    Ok(rollout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{Action, ScrollDirection};
    use crate::trace::tests::{solid, step};
    use proptest::prelude::*;

    fn sample(n: u32, with_assessment: bool) -> Rollout {
        let mut r = Rollout::new("site-1-r0", "site\t1", "Conduct a test.\nLine two", 50);
        for i in 1..=n {
            let mut s = step(i, Action::Click { x: i % 8, y: 0 });
            s.thought = format!("Thought {i}\twith tab\nand newline \\ backslash");
            r.append_step(s).unwrap();
        }
        if with_assessment {
            r.set_assessment(Assessment::from_text("- issue\nAction: score(42)"));
        }
        r
    }

    #[test]
    fn round_trip_and_manifest_count() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = sample(50, true);
        r.terminate(Termination::BudgetExhausted).unwrap();
        let summary = save_rollout(&r, dir.path()).unwrap();
        assert_eq!(summary.screenshots, 50);
        let manifest = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let step_lines = manifest.lines().filter(|l| !l.starts_with('#')).count();
        let assessment_lines = manifest.lines().filter(|l| l.starts_with("#assessment")).count();
        assert_eq!(step_lines, 50);
        assert_eq!(assessment_lines, 1);
        let loaded = load_rollout(dir.path()).unwrap();
        assert_eq!(loaded, r);
        assert_eq!(loaded.predicted_score(), Some(42));
    }

    #[test]
    fn missing_image_is_named() {
        let dir = tempfile::tempdir().unwrap();
        save_rollout(&sample(3, false), dir.path()).unwrap();
        fs::remove_file(dir.path().join("steps/002.png")).unwrap();
        match load_rollout(dir.path()) {
            Err(ArchiveError::MissingFile(p)) => assert!(p.ends_with("steps/002.png")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tampered_image_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        save_rollout(&sample(2, false), dir.path()).unwrap();
        let other = solid(8, 8, [9, 9, 9], 0).to_png();
        fs::write(dir.path().join("steps/001.png"), other).unwrap();
        assert!(matches!(
            load_rollout(dir.path()),
            Err(ArchiveError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn corrupt_manifest_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        save_rollout(&sample(2, false), dir.path()).unwrap();
        fs::write(dir.path().join(MANIFEST_FILE), "garbage\n").unwrap();
        assert!(matches!(
            load_rollout(dir.path()),
            Err(ArchiveError::CorruptManifest { .. })
        ));
    }

    #[test]
    fn resave_is_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = sample(3, false);
        save_rollout(&r, dir.path()).unwrap();
        let before: Vec<String> = (1..=3)
            .map(|i| sha256_hex(&fs::read(dir.path().join(format!("steps/{i:03}.png"))).unwrap()))
            .collect();
        r.append_step(step(4, Action::Stop)).unwrap();
        let summary = save_rollout(&r, dir.path()).unwrap();
        // goal + 3 existing steps untouched; only step 4's png and thought are new
        assert_eq!(summary.files_written, 2);
        for (i, h) in before.iter().enumerate() {
            let now = sha256_hex(&fs::read(dir.path().join(format!("steps/{:03}.png", i + 1))).unwrap());
            assert_eq!(&now, h);
        }

        // A different rollout cannot clobber existing screenshots.
        let mut other = Rollout::new("site-1-r0", "site\t1", "Conduct a test.\nLine two", 50);
        let mut s = step(1, Action::Stop);
        s.observation = solid(8, 8, [200, 1, 1], 0);
        other.append_step(s).unwrap();
        assert!(matches!(
            save_rollout(&other, dir.path()),
            Err(ArchiveError::WouldOverwrite(_))
        ));
    }

    fn arb_action() -> impl Strategy<Value = Action> {
        prop_oneof![
            (0u32..16, 0u32..12).prop_map(|(x, y)| Action::Click { x, y }),
            "[ -~\t]{0,20}".prop_map(|text| Action::Type { text }),
            (any::<bool>(), 1u32..5).prop_map(|(up, amount)| Action::Scroll {
                direction: if up { ScrollDirection::Up } else { ScrollDirection::Down },
                amount
            }),
            (0u64..5000).prop_map(|ms| Action::Wait { ms }),
        ]
    }

    fn arb_rollout() -> impl Strategy<Value = Rollout> {
        (
            prop::collection::vec(
                (arb_action(), "\\PC{0,30}", prop::collection::vec(any::<u8>(), 16 * 12 * 3), 0u64..1_000_000),
                0..6,
            ),
            prop::option::of("[ -~\n]{0,40}"),
            "[a-z0-9-]{1,12}",
            any::<bool>(),
        )
            .prop_map(|(steps, assessment, id, stop)| {
                let mut r = Rollout::new(id.clone(), format!("site-{id}"), "goal", 50);
                let n = steps.len();
                for (i, (action, thought, pixels, ts)) in steps.into_iter().enumerate() {
                    let action = if stop && i + 1 == n { Action::Stop } else { action };
                    r.append_step(Step {
                        index: i as u32 + 1,
                        observation: Screenshot::from_raw(16, 12, pixels, ts).unwrap(),
                        thought,
                        action: ActionRecord::synthesized(action),
                    })
                    .unwrap();
                }
                if stop && n > 0 {
                    r.terminate(Termination::Stopped).unwrap();
                }
                if let Some(text) = assessment {
                    r.set_assessment(Assessment::from_text(text));
                }
                r
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn load_inverts_save(r in arb_rollout()) {
            let dir = tempfile::tempdir().unwrap();
            save_rollout(&r, dir.path()).unwrap();
            let loaded = load_rollout(dir.path()).unwrap();
            prop_assert_eq!(loaded, r);
        }
    }
}
