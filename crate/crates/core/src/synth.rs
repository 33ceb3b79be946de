//! Synthetic knowledge graphs with planted relation patterns.
//!
//! The generators build small graphs where every held-out triple is implied
//! by a training triple through a known logical pattern, so link prediction
//! on the held-out split measures whether a model can express the pattern.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Interner, Triple, TripleStore, Vocab};

/// The rule that implies a held-out triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    /// `r(x, y) => r(y, x)`
    Symmetry,
    /// `r2(x, y) => r1(y, x)`
    Inversion,
    /// `r2(x, y) & r3(y, z) => r1(x, z)`
    Composition,
}

/// How many instances of each pattern to plant.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternMix {
    /// Disjoint entity pairs related in both directions.
    pub symmetric_pairs: usize,
    /// Edges whose reverse never holds.
    pub antisymmetric_edges: usize,
    /// Disjoint pairs `(x, y)` with `base(x, y)` and `inverse(y, x)`.
    pub inverse_pairs: usize,
    /// Chains `x -> y -> z` with a composed relation `x -> z`. Each entity
    /// starts, passes through and ends at most one chain.
    pub composition_chains: usize,
    /// Tails of the many-to-one relation.
    pub many_to_one_tails: usize,
    /// Heads attached to each many-to-one tail.
    pub heads_per_tail: usize,
    /// Fraction of implied triples withheld from training.
    pub holdout_fraction: f64,
}

impl Default for PatternMix {
    fn default() -> Self {
        Self {
            symmetric_pairs: 16,
            antisymmetric_edges: 20,
            inverse_pairs: 16,
            composition_chains: 12,
            many_to_one_tails: 4,
            heads_per_tail: 4,
            holdout_fraction: 0.3,
        }
    }
}

/// Relation ids by role, and every withheld triple with its premise rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub symmetric: usize,
    pub antisymmetric: usize,
    pub inverse_base: usize,
    pub inverse_target: usize,
    pub composition_first: usize,
    pub composition_second: usize,
    pub composition_target: usize,
    pub many_to_one: usize,
    pub implied: Vec<(Triple, Pattern)>,
}

pub const PATTERN_RELATIONS: [&str; 8] = [
    "symmetric",
    "antisymmetric",
    "inverse_base",
    "inverse_target",
    "composition_first",
    "composition_second",
    "composition_target",
    "many_to_one",
];

fn entity_vocab(n: usize) -> Interner {
    let mut interner = Interner::default();
    for i in 0..n {
        interner.intern(&format!("e{i}"));
    }
    interner
}

fn relation_vocab(names: &[&str]) -> Interner {
    let mut interner = Interner::default();
    for n in names {
        interner.intern(n);
    }
    interner
}

/// Splits withheld triples alternately into valid and test after shuffling.
fn split_heldout(rng: &mut ChaCha8Rng, mut heldout: Vec<(Triple, Pattern)>) -> (Vec<Triple>, Vec<(Triple, Pattern)>) {
    heldout.shuffle(rng);
    let mut valid = Vec::new();
    let mut test = Vec::new();
    for (i, item) in heldout.into_iter().enumerate() {
        if i % 2 == 0 {
            test.push(item);
        } else {
            valid.push(item.0);
        }
    }
    (valid, test)
}

/// Builds a pattern graph over `num_entities` entities (at least 10).
///
/// Each pattern draws its entities from a fresh shuffle, so instances of one
/// pattern are disjoint from each other while different patterns overlap.
/// Half of the withheld triples go to `valid`, half to `test`; both contain
/// only implied triples whose premises are in `train`.
pub fn generate_pattern_kg(
    num_entities: usize,
    mix: &PatternMix,
    seed: u64,
) -> (Vocab, TripleStore, GroundTruth) {
    assert!(num_entities >= 10, "need at least 10 entities");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<usize> = (0..num_entities).collect();
    let shuffled = |rng: &mut ChaCha8Rng| {
        let mut v = ids.clone();
        v.shuffle(rng);
        v
    };
    let gt_rel = |name: &str| PATTERN_RELATIONS.iter().position(|n| *n == name).expect("known relation");
    let (sym, anti, inv_base, inv_target, c1, c2, c3, n1) = (
        gt_rel("symmetric"),
        gt_rel("antisymmetric"),
        gt_rel("inverse_base"),
        gt_rel("inverse_target"),
        gt_rel("composition_first"),
        gt_rel("composition_second"),
        gt_rel("composition_target"),
        gt_rel("many_to_one"),
    );
    let mut train = Vec::new();
    let mut heldout = Vec::new();
    let withhold = |rng: &mut ChaCha8Rng| rng.random_bool(mix.holdout_fraction);

    let order = shuffled(&mut rng);
    let pairs = mix.symmetric_pairs.min(num_entities / 2);
    for p in 0..pairs {
        let (x, y) = (order[2 * p], order[2 * p + 1]);
        train.push(Triple::new(x, sym, y));
        if withhold(&mut rng) {
            heldout.push((Triple::new(y, sym, x), Pattern::Symmetry));
        } else {
            train.push(Triple::new(y, sym, x));
        }
    }

    let mut anti_edges = std::collections::HashSet::new();
    while anti_edges.len() < mix.antisymmetric_edges.min(num_entities * (num_entities - 1) / 2) {
        let x = rng.random_range(0..num_entities);
        let y = rng.random_range(0..num_entities);
        if x != y && !anti_edges.contains(&(y, x)) && anti_edges.insert((x, y)) {
            train.push(Triple::new(x, anti, y));
        }
    }

    let order = shuffled(&mut rng);
    for p in 0..mix.inverse_pairs.min(num_entities / 2) {
        let (x, y) = (order[2 * p], order[2 * p + 1]);
        train.push(Triple::new(x, inv_base, y));
        if withhold(&mut rng) {
            heldout.push((Triple::new(y, inv_target, x), Pattern::Inversion));
        } else {
            train.push(Triple::new(y, inv_target, x));
        }
    }

    // x -> y and y -> z are injective maps, so the only implied target
    // triples are the chains themselves.
    let (xs, ys, zs) = (shuffled(&mut rng), shuffled(&mut rng), shuffled(&mut rng));
    let chains = (0..num_entities)
        .map(|i| (xs[i], ys[i], zs[i]))
        .filter(|&(x, y, z)| x != y && y != z && x != z)
        .take(mix.composition_chains);
    for (x, y, z) in chains {
        train.push(Triple::new(x, c1, y));
        train.push(Triple::new(y, c2, z));
        if withhold(&mut rng) {
            heldout.push((Triple::new(x, c3, z), Pattern::Composition));
        } else {
            train.push(Triple::new(x, c3, z));
        }
    }

    let order = shuffled(&mut rng);
    let group = mix.heads_per_tail + 1;
    for g in 0..mix.many_to_one_tails.min(num_entities / group.max(1)) {
        let tail = order[g * group];
        for h in 1..group {
            train.push(Triple::new(order[g * group + h], n1, tail));
        }
    }

    let (valid, test) = split_heldout(&mut rng, heldout);
    let store = TripleStore {
        train,
        valid,
        test: test.iter().map(|(t, _)| *t).collect(),
        num_entities,
        num_relations: PATTERN_RELATIONS.len(),
    };
    let vocab = Vocab { entities: entity_vocab(num_entities), relations: relation_vocab(&PATTERN_RELATIONS) };
    let truth = GroundTruth {
        symmetric: sym,
        antisymmetric: anti,
        inverse_base: inv_base,
        inverse_target: inv_target,
        composition_first: c1,
        composition_second: c2,
        composition_target: c3,
        many_to_one: n1,
        implied: test,
    };
    (vocab, store, truth)
}

/// Shape of a graph dominated by many-to-one relations.
#[derive(Debug, Clone, PartialEq)]
pub struct ManyToOneMix {
    /// Number of tails each many-to-one relation points to.
    pub groups: usize,
    /// Heads attached to each tail.
    pub heads_per_group: usize,
    /// Independent many-to-one relations over the same heads, each with its
    /// own random grouping.
    pub many_to_one_relations: usize,
    /// Fraction of `partner_of` triples withheld.
    pub holdout_fraction: f64,
}

impl Default for ManyToOneMix {
    fn default() -> Self {
        Self { groups: 5, heads_per_group: 6, many_to_one_relations: 2, holdout_fraction: 0.4 }
    }
}

/// A graph where every head belongs to a group under each many-to-one
/// relation and also has a private partner entity.
///
/// `has_partner(h, p)` is always in train; the withheld split holds
/// `partner_of(p, h)` triples, implied by inversion. Ranking those requires
/// heads in the same group to stay distinguishable.
pub fn generate_many_to_one_kg(mix: &ManyToOneMix, seed: u64) -> (Vocab, TripleStore, Vec<(Triple, Pattern)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heads = mix.groups * mix.heads_per_group;
    let tails_per_rel = mix.groups;
    let num_entities = heads + heads + tails_per_rel * mix.many_to_one_relations;
    let head_id = |i: usize| i;
    let partner_id = |i: usize| heads + i;
    let tail_id = |rel: usize, g: usize| 2 * heads + rel * tails_per_rel + g;

    let mut names: Vec<String> = (0..mix.many_to_one_relations).map(|r| format!("member_of_{r}")).collect();
    names.push("has_partner".into());
    names.push("partner_of".into());
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let has_partner = mix.many_to_one_relations;
    let partner_of = has_partner + 1;

    let mut train = Vec::new();
    for rel in 0..mix.many_to_one_relations {
        let mut order: Vec<usize> = (0..heads).collect();
        order.shuffle(&mut rng);
        for (slot, &h) in order.iter().enumerate() {
            train.push(Triple::new(head_id(h), rel, tail_id(rel, slot / mix.heads_per_group)));
        }
    }
    let mut heldout = Vec::new();
    for h in 0..heads {
        train.push(Triple::new(head_id(h), has_partner, partner_id(h)));
        let inverse = Triple::new(partner_id(h), partner_of, head_id(h));
        if rng.random_bool(mix.holdout_fraction) {
            heldout.push((inverse, Pattern::Inversion));
        } else {
            train.push(inverse);
        }
    }
    let (valid, test) = split_heldout(&mut rng, heldout);
    let store = TripleStore {
        train,
        valid,
        test: test.iter().map(|(t, _)| *t).collect(),
        num_entities,
        num_relations: name_refs.len(),
    };
    let vocab = Vocab { entities: entity_vocab(num_entities), relations: relation_vocab(&name_refs) };
    (vocab, store, test)
}
