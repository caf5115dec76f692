//! Randomized properties checked against independent oracles: an exhaustive
//! tuple enumerator for the encryption, direct cell enumeration for the grid
//! geometry, and plain set algebra for the intersection kernel.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use proptest::prelude::*;

use nsum_psi::{
    colony_omega, compare, encrypt, encrypt_parallel, geometric_filter, intersect_sorted,
    key_count_bound, make_position_hash, score_elements, shapes::CandidateGrid, ElementId,
    OmegaSet, PrivateSet, Rect, DEFAULT_CONFIDENCE_THRESHOLD,
};

/// Exhaustive oracle: every `(sum, chosen values)` term over every
/// `n`-element subset and every per-element value choice. Recursive and
/// entirely separate from the production enumeration.
fn oracle_terms(omegas: &[Vec<u64>], n: usize) -> Vec<(u64, Vec<u64>)> {
    fn subsets(
        start: usize,
        omegas: &[Vec<u64>],
        n: usize,
        picked: &mut Vec<usize>,
        out: &mut Vec<(u64, Vec<u64>)>,
    ) {
        if picked.len() == n {
            choices(0, picked, omegas, &mut Vec::new(), out);
            return;
        }
        for next in start..omegas.len() {
            picked.push(next);
            subsets(next + 1, omegas, n, picked, out);
            picked.pop();
        }
    }

    fn choices(
        depth: usize,
        picked: &[usize],
        omegas: &[Vec<u64>],
        values: &mut Vec<u64>,
        out: &mut Vec<(u64, Vec<u64>)>,
    ) {
        if depth == picked.len() {
            out.push((values.iter().sum(), values.clone()));
            return;
        }
        for &value in &omegas[picked[depth]] {
            values.push(value);
            choices(depth + 1, picked, omegas, values, out);
            values.pop();
        }
    }

    let mut out = Vec::new();
    subsets(0, omegas, n, &mut Vec::new(), &mut out);
    out
}

fn private_set(omegas: &[Vec<u64>]) -> PrivateSet {
    let entries = omegas.iter().enumerate().map(|(k, values)| {
        (ElementId::new(format!("w{k}")).unwrap(), OmegaSet::new(values.iter().copied()))
    });
    PrivateSet::from_resolved(entries).unwrap()
}

/// Small instances with colliding sums likely: values in a narrow band.
fn arb_instance() -> impl Strategy<Value = (Vec<Vec<u64>>, u8)> {
    (1usize..=3)
        .prop_flat_map(|n| {
            let sets = prop::collection::vec(prop::collection::vec(0u64..200, 1..=4), n..=6);
            (sets, Just(n as u8))
        })
        .prop_map(|(sets, n)| {
            // Mirror the dedup the production type applies.
            let sets: Vec<Vec<u64>> = sets
                .into_iter()
                .map(|values| {
                    let mut values = values;
                    values.sort_unstable();
                    values.dedup();
                    values
                })
                .collect();
            (sets, n)
        })
}

proptest! {
    /// The production enumeration agrees exactly with the exhaustive oracle,
    /// and the term-count bound is met with equality iff no sums collide.
    #[test]
    fn encrypt_matches_exhaustive_oracle((omegas, level) in arb_instance()) {
        let set = private_set(&omegas);
        let (encrypted, index) = encrypt(&set, level).unwrap();

        let terms = oracle_terms(&omegas, level as usize);
        let expected_keys: BTreeSet<u64> = terms.iter().map(|(sum, _)| *sum).collect();
        let got: BTreeSet<u64> = encrypted.keys().iter().copied().collect();
        prop_assert_eq!(&got, &expected_keys);

        let sizes: Vec<usize> = omegas.iter().map(Vec::len).collect();
        let bound = key_count_bound(&sizes, level);
        prop_assert_eq!(bound, terms.len() as u128);
        prop_assert!((encrypted.len() as u128) <= bound);
        let collision_free = terms.len() == expected_keys.len();
        prop_assert_eq!(encrypted.len() as u128 == bound, collision_free);

        // Posting completeness: per key, the posting is exactly the multiset
        // of values over all producing tuples, n values per tuple.
        let mut by_key: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for (sum, values) in &terms {
            by_key.entry(*sum).or_default().extend(values.iter().copied());
        }
        let source: HashSet<u64> = omegas.iter().flatten().copied().collect();
        for (&key, expected) in &by_key {
            let mut posting = index.posting(key).unwrap().to_vec();
            posting.sort_unstable();
            let mut expected = expected.clone();
            expected.sort_unstable();
            prop_assert_eq!(&posting, &expected, "postings for key {}", key);
            prop_assert!(posting.iter().all(|v| source.contains(v)));
        }
    }

    /// Reordering the elements never changes the key set.
    #[test]
    fn keys_are_permutation_invariant(
        (omegas, level) in arb_instance(),
        seed in 0u64..1000,
    ) {
        let set = private_set(&omegas);
        let (base, _) = encrypt(&set, level).unwrap();

        let mut shuffled = omegas.clone();
        // Deterministic Fisher-Yates driven by the seed.
        let mut state = seed.wrapping_add(1);
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let j = (state >> 33) as usize % (i + 1);
            shuffled.swap(i, j);
        }
        let (permuted, _) = encrypt(&private_set(&shuffled), level).unwrap();
        prop_assert_eq!(base.keys(), permuted.keys());
    }

    /// Encrypting twice yields identical results, and every worker count
    /// yields results identical to the sequential path.
    #[test]
    fn encryption_is_deterministic_and_parallel_safe((omegas, level) in arb_instance()) {
        let set = private_set(&omegas);
        let first = encrypt(&set, level).unwrap();
        let second = encrypt(&set, level).unwrap();
        prop_assert_eq!(&first, &second);
        for workers in [2usize, 3, 7] {
            let parallel = encrypt_parallel(&set, level, workers).unwrap();
            prop_assert_eq!(&first, &parallel);
        }
    }

    /// The intersection kernel equals plain set intersection and is
    /// symmetric, across merge and gallop paths.
    #[test]
    fn sorted_intersection_is_exact_and_symmetric(
        a in prop::collection::btree_set(0u64..10_000, 0..400),
        b in prop::collection::btree_set(0u64..10_000, 0..40),
    ) {
        let a: Vec<u64> = a.into_iter().collect();
        let b: Vec<u64> = b.into_iter().collect();
        let expected: Vec<u64> = a.iter().copied().filter(|v| b.binary_search(v).is_ok()).collect();
        prop_assert_eq!(&intersect_sorted(&a, &b), &expected);
        prop_assert_eq!(&intersect_sorted(&b, &a), &expected);
    }

    /// Growing the recovered value set never lowers any element score.
    #[test]
    fn scores_grow_monotonically_with_y(
        (omegas, _) in arb_instance(),
        extra in prop::collection::btree_set(0u64..200, 0..20),
    ) {
        let set = private_set(&omegas);
        let smaller: Vec<u64> = extra.iter().copied().take(extra.len() / 2).collect();
        let larger: Vec<u64> = extra.into_iter().collect();
        let low = score_elements(&set, &smaller);
        let high = score_elements(&set, &larger);
        for ((id, s_low), (_, s_high)) in low.iter().zip(high.iter()) {
            prop_assert!(s_low <= s_high, "score for {} dropped: {} > {}", id, s_low, s_high);
        }
    }

    /// Two sets sharing at least `level` elements verbatim always intersect,
    /// and every shared element scores a full 1.0.
    #[test]
    fn shared_elements_are_never_missed(
        level in 1u8..=3,
        seed in 0u64..100_000,
    ) {
        let n = level as usize;
        let pool = nsum_psi::sample_synthetic_map(20, (1, 6), 1_000_000, seed).unwrap();
        let ids: Vec<ElementId> = pool.ids().cloned().collect();
        let shared = n + (seed as usize % 3);
        let mine: Vec<ElementId> = ids[..shared + 2].to_vec();
        let theirs: Vec<ElementId> =
            ids[..shared].iter().chain(ids[shared + 2..shared + 5].iter()).cloned().collect();

        let my_set = PrivateSet::resolve(&pool, &mine);
        let their_set = PrivateSet::resolve(&pool, &theirs);
        let (my_enc, my_index) = encrypt(&my_set, level).unwrap();
        let (their_enc, _) = encrypt(&their_set, level).unwrap();
        let report =
            compare(&my_set, &my_enc, &my_index, &their_enc, DEFAULT_CONFIDENCE_THRESHOLD)
                .unwrap();
        prop_assert!(!report.common_keys.is_empty());
        for (id, score) in &report.element_scores {
            if ids[..shared].contains(id) {
                prop_assert_eq!(*score, 1.0, "shared element {} scored {}", id, score);
            }
        }
    }

    /// Omega overlap of two colonies equals their geometric cell overlap,
    /// checked against direct cell enumeration.
    #[test]
    fn colony_omega_overlap_matches_cell_oracle(
        ax in 1u32..20, ay in 1u32..20, aw in 1u32..8, ah in 1u32..8,
        bx in 1u32..20, by in 1u32..20, bw in 1u32..8, bh in 1u32..8,
    ) {
        let hash = make_position_hash(30, 100_000_000, 4242).unwrap();
        let a = Rect::new(ax, ay, aw, ah);
        let b = Rect::new(bx, by, bw, bh);
        let map = colony_omega(&[a, b], &hash).unwrap();
        let omega_a = map.lookup("1");
        let omega_b = map.lookup("2");
        let shared = intersect_sorted(omega_a.values(), omega_b.values()).len();

        let cells_a: BTreeSet<(u32, u32)> = a.cells().collect();
        let overlap = b.cells().filter(|cell| cells_a.contains(cell)).count();
        prop_assert_eq!(shared, overlap);
    }

    /// Filtering is idempotent and only removes flags.
    #[test]
    fn geometric_filter_shrinks_and_settles(
        cells in prop::collection::btree_set((0u32..25, 0u32..25), 0..200),
        min_dim in 1u32..6,
    ) {
        let mut grid = CandidateGrid::empty(25);
        for (x, y) in cells {
            grid.set(x, y, true);
        }
        let once = geometric_filter(&grid, min_dim);
        prop_assert!(once.is_subset_of(&grid));
        let twice = geometric_filter(&once, min_dim);
        prop_assert_eq!(once, twice);
    }

    /// Position hashes are exact bijections onto their image.
    #[test]
    fn position_hash_round_trips(dim in 1u32..12, seed in 0u64..1000) {
        let hash = make_position_hash(dim, 1_000_000, seed).unwrap();
        let mut seen = BTreeSet::new();
        for cell in 1..=dim * dim {
            let value = hash.forward(cell).unwrap();
            prop_assert_eq!(hash.reverse(value), Some(cell));
            prop_assert!(seen.insert(value));
        }
        prop_assert_eq!(seen.len() as u32, dim * dim);
    }
}

/// Fixed cross-check from the randomized determinism family: a 10-element
/// set at level 3 over several worker counts.
#[test]
fn ten_element_triple_encryption_worker_sweep() {
    let map = nsum_psi::sample_synthetic_map(10, (2, 5), 10_000_000, 99).unwrap();
    let ids: Vec<ElementId> = map.ids().cloned().collect();
    let set = PrivateSet::resolve(&map, &ids);
    let (sequential, index) = encrypt(&set, 3).unwrap();
    for workers in [2usize, 7] {
        let (parallel, parallel_index) = encrypt_parallel(&set, 3, workers).unwrap();
        assert_eq!(sequential, parallel);
        assert_eq!(index, parallel_index);
    }
    let sizes: Vec<usize> = set.omega_sizes();
    assert!(sequential.len() as u128 <= key_count_bound(&sizes, 3));
}
