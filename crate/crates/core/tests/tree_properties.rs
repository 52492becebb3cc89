mod common;

use common::*;
use muparse::tree::{
    constituent_to_dep, dep_to_constituent, ConstituentNode, ConstituentTree, DependencyTree, Head,
    Side,
};
use proptest::prelude::*;

fn random_constituent(seed: u64, n: usize) -> ConstituentTree {
    use rand::Rng;
    fn build(r: &mut rand_chacha::ChaCha8Rng, lo: usize, hi: usize) -> ConstituentNode {
        if lo == hi {
            return ConstituentNode::Leaf(lo);
        }
        let split = r.gen_range(lo..hi);
        let side = if r.gen_bool(0.5) { Side::Left } else { Side::Right };
        ConstituentNode::internal(build(r, lo, split), build(r, split + 1, hi), side)
    }
    let mut r = rng(seed);
    ConstituentTree::new(build(&mut r, 0, n - 1)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn dep_const_dep_is_identity(seed in any::<u64>(), n in 1usize..=20) {
        let heads = random_single_sided(&mut rng(seed), n);
        let t = DependencyTree::new(heads).unwrap();
        let c = dep_to_constituent(&t).unwrap();
        prop_assert_eq!(c.leaf_count(), n);
        prop_assert_eq!(c.internal_count(), n - 1);
        prop_assert_eq!(constituent_to_dep(&c), t);
    }

    #[test]
    fn const_dep_const_is_identity(seed in any::<u64>(), n in 1usize..=20) {
        let c = random_constituent(seed, n);
        let t = constituent_to_dep(&c);
        prop_assert!(t.is_projective());
        // a double-sided head admits several splitting orders, so only
        // single-sided trees come back unchanged
        if t.has_double_sided() {
            prop_assert!(dep_to_constituent(&t).is_err());
        } else {
            prop_assert_eq!(dep_to_constituent(&t).unwrap(), c);
        }
    }

    #[test]
    fn projectivity_matches_crossing_oracle(seed in any::<u64>(), n in 1usize..=9) {
        let heads = random_tree(&mut rng(seed), n);
        let t = DependencyTree::new(heads.clone()).unwrap();
        prop_assert_eq!(t.is_projective(), non_crossing(&heads));
        prop_assert_eq!(t.has_double_sided(), double_sided(&heads));
    }

    #[test]
    fn root_at_an_end_when_single_sided(seed in any::<u64>(), n in 1usize..=20) {
        let t = DependencyTree::new(random_single_sided(&mut rng(seed), n)).unwrap();
        prop_assert!(t.root() == 0 || t.root() == n - 1);
    }

    #[test]
    fn spans_are_nested_and_complete(seed in any::<u64>(), n in 1usize..=20) {
        let c = random_constituent(seed, n);
        let spans = c.spans();
        // one span per internal node, outermost first
        prop_assert_eq!(spans.len(), n - 1);
        if n > 1 {
            prop_assert_eq!(spans[0], (0, n - 1));
        }
        for &(a, b) in &spans {
            for &(x, y) in &spans {
                let disjoint = b < x || y < a;
                let nested = (a <= x && y <= b) || (x <= a && b <= y);
                prop_assert!(disjoint || nested);
            }
        }
        // flipping primaries keeps spans, changes the dependency tree when n > 1
        prop_assert_eq!(c.flipped().spans(), spans);
        if n > 1 {
            prop_assert_ne!(constituent_to_dep(&c.flipped()), constituent_to_dep(&c));
        }
    }

    #[test]
    fn rest_stripping_round_trips(seed in any::<u64>(), n in 1usize..=12, rest_bits in any::<u32>()) {
        let compact = DependencyTree::new(random_tree(&mut rng(seed), n)).unwrap();
        // interleave up to n + 4 positions with rests
        let total = n + (rest_bits % 5) as usize;
        let mut rests = vec![true; total];
        let mut placed = 0;
        for (i, slot) in rests.iter_mut().enumerate() {
            let must = total - i == n - placed;
            if placed < n && (must || (rest_bits >> (i % 32)) & 1 == 0) {
                *slot = false;
                placed += 1;
            }
        }
        let spread = compact.with_rests(&rests).unwrap();
        prop_assert!((0..total).all(|i| spread.is_rest(i) == rests[i]));
        let (back, kept) = spread.strip_rests();
        prop_assert_eq!(back, compact);
        prop_assert_eq!(kept.len(), n);
    }
}

#[test]
fn projective_counts_agree_with_library() {
    for n in 1..=6 {
        let library = all_trees(n)
            .into_iter()
            .filter(|h| DependencyTree::new(h.clone()).unwrap().is_projective())
            .count();
        assert_eq!(library, all_projective_trees(n).len(), "n = {}", n);
    }
    // single-rooted projective trees on 1..4 nodes
    let counts: Vec<usize> = (1..=4).map(|n| all_projective_trees(n).len()).collect();
    assert_eq!(counts, vec![1, 2, 7, 30]);
}

#[test]
fn every_single_sided_projective_tree_converts() {
    for n in 1..=7 {
        for heads in all_projective_trees(n) {
            let t = DependencyTree::new(heads.clone()).unwrap();
            let result = dep_to_constituent(&t);
            if double_sided(&heads) {
                assert!(result.is_err());
            } else {
                assert_eq!(constituent_to_dep(&result.unwrap()), t);
            }
        }
    }
}

#[test]
fn rests_block_conversion_until_stripped() {
    let t = DependencyTree::new(vec![Head::Index(2), Head::None, Head::Root]).unwrap();
    assert!(dep_to_constituent(&t).is_err());
    assert!(dep_to_constituent(&t.strip_rests().0).is_ok());
}
