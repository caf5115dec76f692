//! n-sum encryption of a private set.
//!
//! A set of `N` elements, each mapped to an omega set, is encrypted at level
//! `n` into the set of all sums formed by picking `n` distinct elements and
//! one omega value from each. The sorted, deduplicated sums are the shareable
//! keys; the private inverted index remembers which values produced each key.

use std::collections::{BTreeSet, HashMap};
use std::thread;

use itertools::Itertools;
use thiserror::Error;

use crate::omega::{ElementId, ElementMap, OmegaSet};

#[derive(Debug, Error)]
pub enum EncryptError {
    #[error("encryption level must be at least 1")]
    LevelZero,
    #[error("private set has {available} usable elements, fewer than the level {level}")]
    TooFewElements { available: usize, level: u8 },
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("keys would overflow 64 bits: max omega value {max_value} summed {level} times")]
    KeyOverflow { max_value: u64, level: u8 },
    #[error("keys are not strictly ascending at position {position}")]
    UnsortedKeys { position: usize },
    #[error("duplicate element {0} in private set")]
    DuplicateElement(ElementId),
    #[error("element {0} resolves to an empty omega set")]
    EmptyOmega(ElementId),
}

/// A private set after resolution against the map: distinct elements in
/// first-occurrence order, each paired with its non-empty omega set. Elements
/// that resolved to nothing are kept aside for diagnostics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrivateSet {
    elements: Vec<ElementId>,
    omegas: Vec<OmegaSet>,
    dropped: Vec<ElementId>,
}

impl PrivateSet {
    /// Resolves `ids` against the map. Duplicates collapse to their first
    /// occurrence; ids with an empty lookup (unknown or stopword) are dropped
    /// and reported via [`PrivateSet::dropped`].
    pub fn resolve(map: &ElementMap, ids: &[ElementId]) -> PrivateSet {
        let mut seen = BTreeSet::new();
        let mut elements = Vec::new();
        let mut omegas = Vec::new();
        let mut dropped = Vec::new();
        for id in ids {
            if !seen.insert(id.clone()) {
                continue;
            }
            let omega = map.lookup(id.as_str());
            if omega.is_empty() {
                dropped.push(id.clone());
            } else {
                elements.push(id.clone());
                omegas.push(omega.clone());
            }
        }
        PrivateSet { elements, omegas, dropped }
    }

    /// Rebuilds a private set from already-resolved pairs (e.g. a stored
    /// sidecar). Elements must be distinct and omega sets non-empty.
    pub fn from_resolved(
        entries: impl IntoIterator<Item = (ElementId, OmegaSet)>,
    ) -> Result<PrivateSet, EncryptError> {
        let mut seen = BTreeSet::new();
        let mut elements = Vec::new();
        let mut omegas = Vec::new();
        for (id, omega) in entries {
            if omega.is_empty() {
                return Err(EncryptError::EmptyOmega(id));
            }
            if !seen.insert(id.clone()) {
                return Err(EncryptError::DuplicateElement(id));
            }
            elements.push(id);
            omegas.push(omega);
        }
        Ok(PrivateSet { elements, omegas, dropped: Vec::new() })
    }

    /// Number of usable elements, the `N` of the encryption precondition.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ElementId] {
        &self.elements
    }

    pub fn omegas(&self) -> &[OmegaSet] {
        &self.omegas
    }

    pub fn dropped(&self) -> &[ElementId] {
        &self.dropped
    }

    pub fn omega_sizes(&self) -> Vec<usize> {
        self.omegas.iter().map(OmegaSet::len).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ElementId, &OmegaSet)> {
        self.elements.iter().zip(self.omegas.iter())
    }
}

/// A level-n encryption: sorted unique sum keys plus source metadata.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncryptedSet {
    level: u8,
    keys: Vec<u64>,
    source_element_count: usize,
}

impl EncryptedSet {
    /// Wraps externally stored keys. They must already be strictly ascending.
    /// The source element count is not recorded in key files and reads back
    /// as 0.
    pub fn from_sorted_keys(level: u8, keys: Vec<u64>) -> Result<Self, EncryptError> {
        if level == 0 {
            return Err(EncryptError::LevelZero);
        }
        for position in 1..keys.len() {
            if keys[position - 1] >= keys[position] {
                return Err(EncryptError::UnsortedKeys { position });
            }
        }
        Ok(EncryptedSet { level, keys, source_element_count: 0 })
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn max_key(&self) -> Option<u64> {
        self.keys.last().copied()
    }

    pub fn source_element_count(&self) -> usize {
        self.source_element_count
    }
}

/// Private sidecar mapping each key to every omega value that contributed to
/// it, across all producing tuples (n values per tuple). Stored as a posting
/// list sorted by key.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InvertedIndex {
    postings: Vec<(u64, Vec<u64>)>,
}

impl InvertedIndex {
    pub fn from_postings(postings: HashMap<u64, Vec<u64>>) -> Self {
        let mut postings: Vec<(u64, Vec<u64>)> = postings.into_iter().collect();
        postings.sort_unstable_by_key(|&(key, _)| key);
        InvertedIndex { postings }
    }

    pub fn posting(&self, key: u64) -> Option<&[u64]> {
        self.postings
            .binary_search_by_key(&key, |&(k, _)| k)
            .ok()
            .map(|at| self.postings[at].1.as_slice())
    }

    pub fn len(&self) -> usize {
        self.postings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.postings.is_empty()
    }

    /// Keys in ascending order.
    pub fn keys(&self) -> impl Iterator<Item = u64> + '_ {
        self.postings.iter().map(|&(key, _)| key)
    }
}

/// Sequential n-sum encryption.
pub fn encrypt(set: &PrivateSet, level: u8) -> Result<(EncryptedSet, InvertedIndex), EncryptError> {
    encrypt_parallel(set, level, 1)
}

/// n-sum encryption with the tuple space split over `workers` threads.
/// Output is bitwise identical to the sequential path for any worker count:
/// workers take contiguous runs of the lexicographic tuple enumeration, emit
/// sorted key runs, and the merge is a k-way sorted union with postings
/// concatenated in worker order.
pub fn encrypt_parallel(
    set: &PrivateSet,
    level: u8,
    workers: usize,
) -> Result<(EncryptedSet, InvertedIndex), EncryptError> {
    if level == 0 {
        return Err(EncryptError::LevelZero);
    }
    if workers == 0 {
        return Err(EncryptError::NoWorkers);
    }
    let n = level as usize;
    let count = set.len();
    if count < n {
        return Err(EncryptError::TooFewElements { available: count, level });
    }
    let max_value = set.omegas.iter().filter_map(OmegaSet::max).max().unwrap_or(0);
    if max_value.checked_mul(level as u64).is_none() {
        return Err(EncryptError::KeyOverflow { max_value, level });
    }

    let combos: Vec<Vec<usize>> = (0..count).combinations(n).collect();
    let workers = workers.min(combos.len()).max(1);
    let chunk_size = combos.len().div_ceil(workers);

    let runs: Vec<PostingRun> = if workers == 1 {
        vec![encrypt_run(&set.omegas, &combos, n)]
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = combos
                .chunks(chunk_size)
                .map(|chunk| scope.spawn(|| encrypt_run(&set.omegas, chunk, n)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("encrypt worker panicked")).collect()
        })
    };

    let postings = merge_runs(runs);
    let keys: Vec<u64> = postings.iter().map(|&(key, _)| key).collect();

    Ok((
        EncryptedSet { level, keys, source_element_count: count },
        InvertedIndex { postings },
    ))
}

/// Per-worker output: `(key, posting)` entries sorted by key.
type PostingRun = Vec<(u64, Vec<u64>)>;

/// Enumerates every tuple of the given element combinations and groups the
/// terms into a posting run sorted by key. Within a key, values keep
/// enumeration order.
fn encrypt_run(omegas: &[OmegaSet], combos: &[Vec<usize>], n: usize) -> PostingRun {
    let mut sums: Vec<u64> = Vec::new();
    let mut values: Vec<u64> = Vec::new();
    let mut lists: Vec<&[u64]> = Vec::new();
    for combo in combos {
        lists.clear();
        lists.extend(combo.iter().map(|&i| omegas[i].values()));
        for_each_tuple(&lists, &mut |sum, tuple| {
            sums.push(sum);
            values.extend_from_slice(tuple);
        });
    }

    // Sort terms by sum with the enumeration index as tiebreak, which keeps
    // equal-sum terms in enumeration order.
    let mut order: Vec<usize> = (0..sums.len()).collect();
    order.sort_unstable_by_key(|&term| (sums[term], term));

    let mut postings: Vec<(u64, Vec<u64>)> = Vec::new();
    for &term in &order {
        let sum = sums[term];
        let tuple = &values[term * n..(term + 1) * n];
        match postings.last_mut() {
            Some((key, posting)) if *key == sum => posting.extend_from_slice(tuple),
            _ => postings.push((sum, tuple.to_vec())),
        }
    }
    postings
}

/// Merges per-worker posting runs into one run: a k-way sorted union where
/// equal keys concatenate their postings in worker order.
fn merge_runs(runs: Vec<PostingRun>) -> PostingRun {
    if runs.len() == 1 {
        return runs.into_iter().next().expect("one run");
    }
    let total: usize = runs.iter().map(Vec::len).sum();
    let mut iters: Vec<_> = runs.into_iter().map(|run| run.into_iter().peekable()).collect();
    let mut merged: Vec<(u64, Vec<u64>)> = Vec::with_capacity(total);
    loop {
        let mut min_key = None;
        for iter in iters.iter_mut() {
            if let Some(&(key, _)) = iter.peek() {
                min_key = Some(min_key.map_or(key, |m: u64| m.min(key)));
            }
        }
        let Some(min_key) = min_key else { break };
        let mut posting: Option<Vec<u64>> = None;
        for iter in iters.iter_mut() {
            if matches!(iter.peek(), Some(&(key, _)) if key == min_key) {
                let (_, values) = iter.next().expect("peeked entry");
                posting = Some(match posting {
                    // Single-run keys move their posting without copying.
                    None => values,
                    Some(mut merged_values) => {
                        merged_values.extend_from_slice(&values);
                        merged_values
                    }
                });
            }
        }
        merged.push((min_key, posting.expect("at least one run held the key")));
    }
    merged
}

/// Odometer over the cartesian product of non-empty value lists, rightmost
/// position fastest. Calls `f(sum, values)` for every tuple.
fn for_each_tuple(lists: &[&[u64]], f: &mut impl FnMut(u64, &[u64])) {
    debug_assert!(lists.iter().all(|list| !list.is_empty()));
    let n = lists.len();
    let mut indices = vec![0usize; n];
    let mut values: Vec<u64> = lists.iter().map(|list| list[0]).collect();
    loop {
        f(values.iter().sum(), &values);
        let mut position = n;
        loop {
            if position == 0 {
                return;
            }
            position -= 1;
            indices[position] += 1;
            if indices[position] == lists[position].len() {
                indices[position] = 0;
                values[position] = lists[position][0];
            } else {
                values[position] = lists[position][indices[position]];
                break;
            }
        }
    }
}

/// Pre-deduplication term count: the sum over all n-element subsets of the
/// product of their omega sizes (the elementary symmetric polynomial `e_n`).
/// An upper bound on the key count, met with equality iff no sums collide.
pub fn key_count_bound(omega_sizes: &[usize], level: u8) -> u128 {
    let n = level as usize;
    let mut e = vec![0u128; n + 1];
    e[0] = 1;
    for &size in omega_sizes {
        let size = size as u128;
        for j in (1..=n).rev() {
            e[j] = e[j].saturating_add(e[j - 1].saturating_mul(size));
        }
    }
    e[n]
}
