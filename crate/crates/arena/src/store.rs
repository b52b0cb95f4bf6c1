//! Session assignment and the append-only vote log.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use uxpipe_core::bench::{PairLabel, PreferencePair};

use crate::ArenaError;

pub const PAIRS_PER_SESSION: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Left,
    Right,
    Tie,
}

impl Choice {
    pub fn flipped(self) -> Self {
        match self {
            Choice::Left => Choice::Right,
            Choice::Right => Choice::Left,
            Choice::Tie => Choice::Tie,
        }
    }

    pub fn label(self) -> PairLabel {
        match self {
            Choice::Left => PairLabel::Left,
            Choice::Right => PairLabel::Right,
            Choice::Tie => PairLabel::Tie,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Telemetry {
    pub duration_ms: u64,
    pub frame_clicks: u32,
    pub element_clicks: u32,
    pub expanded_left: bool,
    pub expanded_right: bool,
}

/// Vote body as submitted by a client; `choice` refers to the sides as
/// displayed in that session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vote {
    pub pair_id: String,
    pub session_id: String,
    pub choice: Choice,
    pub telemetry: Telemetry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedPair {
    pub pair_id: String,
    /// Sides are shown in reverse of the pool orientation.
    pub swapped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArenaSession {
    pub session_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant: Option<String>,
    pub pairs: Vec<AssignedPair>,
}

impl ArenaSession {
    pub fn pair_ids(&self) -> Vec<String> {
        self.pairs.iter().map(|p| p.pair_id.clone()).collect()
    }

    pub fn assigned(&self, pair_id: &str) -> Option<&AssignedPair> {
        self.pairs.iter().find(|p| p.pair_id == pair_id)
    }
}

/// A persisted vote with the sites as displayed and the choice mapped back
/// to the pool orientation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub session_id: String,
    pub pair_id: String,
    pub left_site: String,
    pub right_site: String,
    pub choice: Choice,
    pub canonical_choice: Choice,
    pub telemetry: Telemetry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Session(ArenaSession),
    Vote(VoteRecord),
}

/// In-memory arena state over a fixed pool, optionally mirrored to a JSONL
/// log that [`Arena::replay`] can rebuild it from.
#[derive(Debug)]
pub struct Arena {
    pool: BTreeMap<String, PreferencePair>,
    seed: u64,
    assigned: BTreeMap<String, u32>,
    sessions: BTreeMap<String, ArenaSession>,
    voted: BTreeSet<(String, String)>,
    votes: Vec<VoteRecord>,
    log: Option<(PathBuf, File)>,
}

impl Arena {
    pub fn new(pool: Vec<PreferencePair>, seed: u64) -> Result<Self, ArenaError> {
        let mut map = BTreeMap::new();
        for p in pool {
            let id = p.pair_id.clone();
            if map.insert(id.clone(), p).is_some() {
                return Err(ArenaError::DuplicatePairId(id));
            }
        }
        let assigned = map.keys().map(|k| (k.clone(), 0)).collect();
        Ok(Self {
            pool: map,
            seed,
            assigned,
            sessions: BTreeMap::new(),
            voted: BTreeSet::new(),
            votes: Vec::new(),
            log: None,
        })
    }

    /// Rebuild from `log` (if it exists) and keep appending to it.
    pub fn open(pool: Vec<PreferencePair>, seed: u64, log: &Path) -> Result<Self, ArenaError> {
        let mut arena = if log.exists() {
            Self::replay(pool, seed, log)?
        } else {
            Self::new(pool, seed)?
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(log)
            .map_err(|e| ArenaError::Io(format!("{}: {e}", log.display())))?;
        arena.log = Some((log.to_path_buf(), file));
        Ok(arena)
    }

    /// State reconstructed from a log without attaching it for writing.
    pub fn replay(pool: Vec<PreferencePair>, seed: u64, log: &Path) -> Result<Self, ArenaError> {
        let mut arena = Self::new(pool, seed)?;
        let file = File::open(log).map_err(|e| ArenaError::Io(format!("{}: {e}", log.display())))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| ArenaError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let event: LogEvent =
                serde_json::from_str(&line).map_err(|e| ArenaError::Log(format!("line {}: {e}", i + 1)))?;
            match event {
                LogEvent::Session(s) => arena.admit_session(s)?,
                LogEvent::Vote(v) => {
                    let vote = Vote {
                        pair_id: v.pair_id.clone(),
                        session_id: v.session_id.clone(),
                        choice: v.choice,
                        telemetry: v.telemetry,
                    };
                    if arena.check_vote(&vote)? != v {
                        return Err(ArenaError::Log(format!("line {}: vote does not match its session", i + 1)));
                    }
                    arena.admit_vote(v);
                }
            }
        }
        Ok(arena)
    }

    pub fn pool(&self) -> impl Iterator<Item = &PreferencePair> {
        self.pool.values()
    }

    pub fn pair(&self, pair_id: &str) -> Option<&PreferencePair> {
        self.pool.get(pair_id)
    }

    pub fn session(&self, session_id: &str) -> Option<&ArenaSession> {
        self.sessions.get(session_id)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &ArenaSession> {
        self.sessions.values()
    }

    pub fn votes(&self) -> &[VoteRecord] {
        &self.votes
    }

    pub fn has_voted(&self, session_id: &str, pair_id: &str) -> bool {
        self.voted.contains(&(session_id.to_string(), pair_id.to_string()))
    }

    /// Times each pair has been assigned to a session.
    pub fn assignment_counts(&self) -> &BTreeMap<String, u32> {
        &self.assigned
    }

    /// Assign the 30 least-assigned pairs, ties broken by a seeded shuffle,
    /// each shown in a random orientation.
    pub fn create_session(&mut self, participant: Option<String>) -> Result<ArenaSession, ArenaError> {
        if self.pool.len() < PAIRS_PER_SESSION {
            return Err(ArenaError::PoolExhausted {
                available: self.pool.len(),
            });
        }
        let index = self.sessions.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut ids: Vec<&String> = self.pool.keys().collect();
        ids.shuffle(&mut rng);
        ids.sort_by_key(|id| self.assigned[*id]);
        let pairs = ids[..PAIRS_PER_SESSION]
            .iter()
            .map(|id| AssignedPair {
                pair_id: (*id).clone(),
                swapped: rand::Rng::random_bool(&mut rng, 0.5),
            })
            .collect();
        let session = ArenaSession {
            session_id: format!("s{index:06}"),
            participant,
            pairs,
        };
        self.append(&LogEvent::Session(session.clone()))?;
        self.admit_session(session.clone())?;
        Ok(session)
    }

    /// Validate and persist a vote.
    pub fn record_vote(&mut self, vote: Vote) -> Result<VoteRecord, ArenaError> {
        let record = self.check_vote(&vote)?;
        self.append(&LogEvent::Vote(record.clone()))?;
        self.admit_vote(record.clone());
        Ok(record)
    }

    fn check_vote(&self, vote: &Vote) -> Result<VoteRecord, ArenaError> {
        let session = self
            .sessions
            .get(&vote.session_id)
            .ok_or_else(|| ArenaError::UnknownSession(vote.session_id.clone()))?;
        let assigned = session.assigned(&vote.pair_id).ok_or_else(|| ArenaError::NotAssigned {
            session_id: vote.session_id.clone(),
            pair_id: vote.pair_id.clone(),
        })?;
        let t = vote.telemetry;
        if !(t.expanded_left && t.expanded_right) {
            return Err(ArenaError::NotExpanded {
                left: t.expanded_left,
                right: t.expanded_right,
            });
        }
        if self.has_voted(&vote.session_id, &vote.pair_id) {
            return Err(ArenaError::DuplicateVote {
                session_id: vote.session_id.clone(),
                pair_id: vote.pair_id.clone(),
            });
        }
        let pair = &self.pool[&vote.pair_id];
        let (left_site, right_site, canonical_choice) = if assigned.swapped {
            (pair.right_site.clone(), pair.left_site.clone(), vote.choice.flipped())
        } else {
            (pair.left_site.clone(), pair.right_site.clone(), vote.choice)
        };
        Ok(VoteRecord {
            session_id: vote.session_id.clone(),
            pair_id: vote.pair_id.clone(),
            left_site,
            right_site,
            choice: vote.choice,
            canonical_choice,
            telemetry: t,
        })
    }

    fn admit_session(&mut self, session: ArenaSession) -> Result<(), ArenaError> {
        for p in &session.pairs {
            let count = self
                .assigned
                .get_mut(&p.pair_id)
                .ok_or_else(|| ArenaError::UnknownPair(p.pair_id.clone()))?;
            *count += 1;
        }
        self.sessions.insert(session.session_id.clone(), session);
        Ok(())
    }

    fn admit_vote(&mut self, record: VoteRecord) {
        self.voted.insert((record.session_id.clone(), record.pair_id.clone()));
        self.votes.push(record);
    }

    fn append(&mut self, event: &LogEvent) -> Result<(), ArenaError> {
        let Some((path, file)) = self.log.as_mut() else {
            return Ok(());
        };
        let mut line = serde_json::to_string(event).expect("log events serialize");
        line.push('\n');
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| ArenaError::Io(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use uxpipe_core::bench::LabelSource;

    fn pool(n: usize) -> Vec<PreferencePair> {
        (0..n)
            .map(|i| PreferencePair {
                pair_id: format!("p{i:03}"),
                left_site: format!("a{i}"),
                right_site: format!("b{i}"),
                label: PairLabel::Left,
                label_source: LabelSource::GroundTruth,
            })
            .collect()
    }

    fn expanded() -> Telemetry {
        Telemetry {
            duration_ms: 40_000,
            frame_clicks: 3,
            element_clicks: 5,
            expanded_left: true,
            expanded_right: true,
        }
    }

    #[test]
    fn sessions_hold_thirty_distinct_pairs() {
        let mut a = Arena::new(pool(100), 1).unwrap();
        let s = a.create_session(None).unwrap();
        let ids: BTreeSet<_> = s.pair_ids().into_iter().collect();
        assert_eq!(ids.len(), 30);
        assert!(matches!(
            Arena::new(pool(29), 1).unwrap().create_session(None),
            Err(ArenaError::PoolExhausted { available: 29 })
        ));
    }

    #[test]
    fn two_sessions_over_thirty_pairs_cover_each_twice() {
        let mut a = Arena::new(pool(30), 3).unwrap();
        for _ in 0..2 {
            let s = a.create_session(None).unwrap();
            for p in &s.pairs {
                a.record_vote(Vote {
                    pair_id: p.pair_id.clone(),
                    session_id: s.session_id.clone(),
                    choice: Choice::Left,
                    telemetry: expanded(),
                })
                .unwrap();
            }
        }
        let mut per_pair: BTreeMap<&str, u32> = BTreeMap::new();
        for v in a.votes() {
            *per_pair.entry(&v.pair_id).or_default() += 1;
        }
        assert_eq!(per_pair.len(), 30);
        assert!(per_pair.values().all(|&c| c == 2));
    }

    #[test]
    fn gating_assignment_and_duplicates() {
        let mut a = Arena::new(pool(40), 2).unwrap();
        let s = a.create_session(Some("anon-1".into())).unwrap();
        let unassigned = a.pool().map(|p| p.pair_id.clone()).find(|id| s.assigned(id).is_none()).unwrap();
        let mut vote = Vote {
            pair_id: s.pairs[0].pair_id.clone(),
            session_id: s.session_id.clone(),
            choice: Choice::Right,
            telemetry: Telemetry {
                expanded_right: false,
                ..expanded()
            },
        };
        assert!(matches!(
            a.record_vote(vote.clone()),
            Err(ArenaError::NotExpanded { left: true, right: false })
        ));
        vote.telemetry.expanded_right = true;
        let rec = a.record_vote(vote.clone()).unwrap();
        assert!(matches!(a.record_vote(vote.clone()), Err(ArenaError::DuplicateVote { .. })));
        let pair = a.pair(&rec.pair_id).unwrap();
        if s.pairs[0].swapped {
            assert_eq!((rec.left_site.as_str(), rec.canonical_choice), (pair.right_site.as_str(), Choice::Left));
        } else {
            assert_eq!((rec.left_site.as_str(), rec.canonical_choice), (pair.left_site.as_str(), Choice::Right));
        }
        assert!(matches!(
            a.record_vote(Vote {
                pair_id: unassigned,
                ..vote.clone()
            }),
            Err(ArenaError::NotAssigned { .. })
        ));
        assert!(matches!(
            a.record_vote(Vote {
                session_id: "nope".into(),
                ..vote
            }),
            Err(ArenaError::UnknownSession(_))
        ));
        assert_eq!(a.votes().len(), 1);
    }

    #[test]
    fn orientation_is_mixed() {
        let mut a = Arena::new(pool(30), 5).unwrap();
        let s = a.create_session(None).unwrap();
        let swapped = s.pairs.iter().filter(|p| p.swapped).count();
        assert!((5..=25).contains(&swapped), "{swapped} of 30 swapped");
    }
}
