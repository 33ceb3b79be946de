//! Negative sampling by entity corruption.

use rand::Rng;

use crate::data::{FilterIndex, Triple};
use crate::model::Side;

/// Attempts per negative before a known true triple is accepted as-is.
pub const MAX_ATTEMPTS: usize = 100;

/// `l` corruptions of `triple`, replacing the entity in `side` with a uniform
/// draw. Draws that form a triple in `known` are redrawn.
pub fn sample_negatives<R: Rng + ?Sized>(
    triple: Triple,
    l: usize,
    side: Side,
    rng: &mut R,
    known: &FilterIndex,
    num_entities: usize,
) -> Vec<Triple> {
    let corrupt = |e: usize| match side {
        Side::Head => Triple { head: e, ..triple },
        Side::Tail => Triple { tail: e, ..triple },
    };
    (0..l)
        .map(|_| {
            let mut candidate = corrupt(rng.random_range(0..num_entities));
            for _ in 1..MAX_ATTEMPTS {
                if !known.contains(&candidate) {
                    break;
                }
                candidate = corrupt(rng.random_range(0..num_entities));
            }
            candidate
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn head_corruption_keeps_relation_and_tail() {
        let t = Triple::new(0, 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let negs = sample_negatives(t, 2, Side::Head, &mut rng, &FilterIndex::default(), 10);
        assert_eq!(negs.len(), 2);
        assert!(negs.iter().all(|n| n.relation == 1 && n.tail == 2));
        let negs = sample_negatives(t, 3, Side::Tail, &mut rng, &FilterIndex::default(), 10);
        assert!(negs.iter().all(|n| n.relation == 1 && n.head == 0));
    }

    #[test]
    fn rejection_leaves_the_only_free_slot() {
        let known: Vec<Triple> = (0..8).filter(|&h| h != 5).map(|h| Triple::new(h, 0, 3)).collect();
        let index = FilterIndex::from_triples(&known);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let negs = sample_negatives(Triple::new(0, 0, 3), 20, Side::Head, &mut rng, &index, 8);
        assert!(negs.iter().all(|n| n.head == 5));
    }

    #[test]
    fn bounded_when_everything_is_known() {
        let known: Vec<Triple> = (0..4).map(|t| Triple::new(0, 0, t)).collect();
        let index = FilterIndex::from_triples(&known);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let negs = sample_negatives(known[0], 3, Side::Tail, &mut rng, &index, 4);
        assert_eq!(negs.len(), 3);
    }

    #[test]
    fn seeded_runs_repeat() {
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            sample_negatives(Triple::new(1, 0, 2), 8, Side::Tail, &mut rng, &FilterIndex::default(), 100)
        };
        assert_eq!(draw(), draw());
    }
}
