use proptest::prelude::*;
use uxpipe_arena::{rating_stats, Arena, Choice, Telemetry, Vote};
use uxpipe_core::bench::{LabelSource, PairLabel, PreferencePair};

fn pool(n: usize) -> Vec<PreferencePair> {
    (0..n)
        .map(|i| PreferencePair {
            pair_id: format!("p{i:03}"),
            left_site: format!("l{i}"),
            right_site: format!("r{i}"),
            label: PairLabel::Right,
            label_source: LabelSource::GroundTruth,
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn assignment_stays_balanced(sessions in 1usize..8, extra in 0usize..120, seed in any::<u64>()) {
        let size = (30 + extra).min(30 * sessions);
        let mut a = Arena::new(pool(size), seed).unwrap();
        for _ in 0..sessions {
            a.create_session(None).unwrap();
        }
        let counts: Vec<u32> = a.assignment_counts().values().copied().collect();
        prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }

    #[test]
    fn only_expanded_votes_persist_and_replay_matches(
        seed in any::<u64>(),
        votes in prop::collection::vec((0usize..2, 0usize..30, 0u8..3, any::<bool>(), any::<bool>(), 1u64..200_000), 1..80),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("log.jsonl");
        let mut a = Arena::open(pool(40), seed, &log).unwrap();
        let sessions = [a.create_session(None).unwrap(), a.create_session(None).unwrap()];
        for (s, p, c, l, r, ms) in votes {
            let session = &sessions[s];
            let _ = a.record_vote(Vote {
                pair_id: session.pairs[p].pair_id.clone(),
                session_id: session.session_id.clone(),
                choice: [Choice::Left, Choice::Right, Choice::Tie][c as usize],
                telemetry: Telemetry { duration_ms: ms, frame_clicks: 1, element_clicks: 2, expanded_left: l, expanded_right: r },
            });
        }
        prop_assert!(a.votes().iter().all(|v| v.telemetry.expanded_left && v.telemetry.expanded_right));
        let replayed = Arena::replay(pool(40), seed, &log).unwrap();
        prop_assert_eq!(replayed.votes(), a.votes());
        prop_assert_eq!(rating_stats(replayed.votes()), rating_stats(a.votes()));
    }
}
