//! Synthetic melodies whose trees follow a fixed attachment rule, used to
//! check that the parser can fit a known structure.
//!
//! Every element except the last depends on the nearest later element that
//! sits on a strictly stronger metrical position (smaller inverse
//! strength), or on the last element if there is none. The last element is
//! the root. All arcs point rightwards, so trees are single-sided, and two
//! arcs never cross: an arc `i -> h` skips only elements no stronger than
//! `i`, and those attach at or before `h`.

use num_rational::Rational64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::{bar_positions, inverse_metrical_strength, EventSequence, NoteEvent};
use crate::io::corpus::Piece;
use crate::tree::{DependencyTree, Head};

/// Heads produced by the attachment rule for the given inverse strengths.
pub fn attachment_rule(strengths: &[usize]) -> Vec<Head> {
    let n = strengths.len();
    (0..n)
        .map(|i| {
            if i + 1 == n {
                return Head::Root;
            }
            let target = (i + 1..n)
                .find(|&j| strengths[j] < strengths[i])
                .unwrap_or(n - 1);
            Head::Index(target)
        })
        .collect()
}

/// `count` melodies in 4/4 with lengths in `min_len..=max_len`.
pub fn generate_corpus(count: usize, min_len: usize, max_len: usize, seed: u64) -> Vec<Piece> {
    assert!(min_len >= 1 && min_len <= max_len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let choices = [
        Rational64::new(1, 8),
        Rational64::new(1, 4),
        Rational64::new(3, 8),
        Rational64::new(1, 2),
    ];
    (0..count)
        .map(|k| {
            let len = rng.gen_range(min_len..=max_len);
            let durations: Vec<Rational64> =
                (0..len).map(|_| *choices.choose(&mut rng).unwrap()).collect();
            let positions = bar_positions(&durations);
            let events: Vec<NoteEvent> = durations
                .iter()
                .zip(&positions)
                .map(|(&duration, &bar_position)| NoteEvent {
                    pitch: Some(rng.gen_range(55..80)),
                    duration,
                    bar_position,
                    ts_numerator: 4,
                })
                .collect();
            let strengths: Vec<usize> = positions
                .iter()
                .map(|&p| inverse_metrical_strength(p, 4).expect("4/4 has a template"))
                .collect();
            let tree = DependencyTree::new(attachment_rule(&strengths))
                .expect("the attachment rule always yields a tree");
            Piece {
                title: format!("synthetic-{:02}", k),
                time_signature: (4, 4),
                seq: EventSequence::Notes(events),
                tree: Some(tree),
            }
        })
        .collect()
}
