//! Intersection of encrypted sets and score recovery.
//!
//! Two parties compare by intersecting their sorted key lists; each side then
//! maps the common keys through its private inverted index to the recovered
//! value set `Y` and scores every element by how much of its omega set shows
//! up in `Y`. Matching is fuzzy: `Y` may contain false positives, never false
//! negatives.

use thiserror::Error;

use crate::encrypt::{EncryptedSet, InvertedIndex, PrivateSet};
use crate::omega::ElementId;

/// Overlap fraction above which a match is flagged high-confidence. For small
/// pair-sum encryptions, overlaps past this point are empirically free of
/// false positives.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.01;

/// Size ratio at which key intersection switches from a linear merge to
/// galloping search.
const GALLOP_RATIO: usize = 16;

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("cannot compare encryptions of different levels ({mine} vs {theirs})")]
    LevelMismatch { mine: u8, theirs: u8 },
    #[error("inverted index has no posting for key {key}; the sidecar does not match the key set")]
    MissingPosting { key: u64 },
}

/// One side's view of a comparison.
#[derive(Clone, Debug)]
pub struct MatchReport {
    /// Keys present in both encryptions, ascending.
    pub common_keys: Vec<u64>,
    /// `|common| / |my keys|`.
    pub my_overlap_fraction: f64,
    /// The recovered value set `Y`: sorted unique omega values mapped back
    /// from the common keys.
    pub recovered_values: Vec<u64>,
    /// Per-element score `|Y ∩ omega| / |omega|`, in element order, zero
    /// scores included.
    pub element_scores: Vec<(ElementId, f64)>,
    /// Whether the overlap fraction exceeded the threshold.
    pub high_confidence: bool,
}

/// Sorted unique keys present in both encryptions. Levels must match.
pub fn intersect_keys(a: &EncryptedSet, b: &EncryptedSet) -> Result<Vec<u64>, CompareError> {
    if a.level() != b.level() {
        return Err(CompareError::LevelMismatch { mine: a.level(), theirs: b.level() });
    }
    Ok(intersect_sorted(a.keys(), b.keys()))
}

/// Intersection of two sorted, duplicate-free slices: linear merge, or
/// galloping search from the smaller side when the sizes are lopsided.
pub fn intersect_sorted(a: &[u64], b: &[u64]) -> Vec<u64> {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if small.is_empty() {
        return Vec::new();
    }
    if large.len() / small.len() >= GALLOP_RATIO {
        gallop_intersect(small, large)
    } else {
        merge_intersect(small, large)
    }
}

fn merge_intersect(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn gallop_intersect(small: &[u64], large: &[u64]) -> Vec<u64> {
    let mut out = Vec::new();
    let mut base = 0;
    for &needle in small {
        if base >= large.len() {
            break;
        }
        // Exponential probe from the last match position, then binary search
        // inside the bracketed window.
        let rest = &large[base..];
        let mut bound = 1usize;
        while bound < rest.len() && rest[bound] < needle {
            bound <<= 1;
        }
        let lo = bound >> 1;
        let window = &rest[lo..(bound + 1).min(rest.len())];
        match window.binary_search(&needle) {
            Ok(pos) => {
                out.push(needle);
                base += lo + pos + 1;
            }
            Err(pos) => {
                base += lo + pos;
            }
        }
    }
    out
}

/// Union of postings over the common keys: the recovered value set `Y`,
/// sorted and deduplicated. Every common key must exist in the index, since
/// the caller intersected its own key set.
pub fn recover(common: &[u64], index: &InvertedIndex) -> Result<Vec<u64>, CompareError> {
    let mut values = Vec::new();
    for &key in common {
        let posting = index.posting(key).ok_or(CompareError::MissingPosting { key })?;
        values.extend_from_slice(posting);
    }
    values.sort_unstable();
    values.dedup();
    Ok(values)
}

/// Scores every element of the set: `|Y ∩ omega| / |omega|`. `y` must be
/// sorted.
pub fn score_elements(set: &PrivateSet, y: &[u64]) -> Vec<(ElementId, f64)> {
    set.iter()
        .map(|(id, omega)| {
            let hits = omega.values().iter().filter(|v| y.binary_search(v).is_ok()).count();
            (id.clone(), hits as f64 / omega.len() as f64)
        })
        .collect()
}

/// Full one-sided comparison pipeline: intersect keys, recover `Y` through
/// the private index, score the elements.
pub fn compare(
    mine: &PrivateSet,
    my_encryption: &EncryptedSet,
    my_index: &InvertedIndex,
    theirs: &EncryptedSet,
    threshold: f64,
) -> Result<MatchReport, CompareError> {
    let common = intersect_keys(my_encryption, theirs)?;
    let recovered = recover(&common, my_index)?;
    let element_scores = score_elements(mine, &recovered);
    let my_overlap_fraction = if my_encryption.is_empty() {
        0.0
    } else {
        common.len() as f64 / my_encryption.len() as f64
    };
    Ok(MatchReport {
        high_confidence: my_overlap_fraction > threshold,
        common_keys: common,
        my_overlap_fraction,
        recovered_values: recovered,
        element_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encrypt::tests::{word_map, MESSAGE_1_KEYS, MESSAGE_2_KEYS};
    use crate::encrypt::{encrypt, EncryptedSet, PrivateSet};
    use crate::omega::ElementId;

    const COMMON_KEYS: [u64; 11] = [
        4014517, 4187533, 4222605, 4295796, 4395621, 4468812, 8300783, 8473799, 11572772,
        11780860, 11854051,
    ];

    /// The six values shared between the two fixture messages.
    const RECOVERED: [u64; 6] = [371264, 544280, 3643253, 3851341, 3924532, 7929519];

    fn ids(words: &[&str]) -> Vec<ElementId> {
        words.iter().map(|w| ElementId::new(*w).unwrap()).collect()
    }

    fn encrypted_pair() -> (PrivateSet, EncryptedSet, crate::encrypt::InvertedIndex, EncryptedSet)
    {
        let map = word_map();
        let mine = PrivateSet::resolve(&map, &ids(&["laser", "reheat", "cappuccino"]));
        let theirs = PrivateSet::resolve(&map, &ids(&["laser", "reheat", "espresso"]));
        let (my_enc, my_index) = encrypt(&mine, 2).unwrap();
        let (their_enc, _) = encrypt(&theirs, 2).unwrap();
        (mine, my_enc, my_index, their_enc)
    }

    #[test]
    fn intersection_of_the_fixture_messages() {
        let (_, my_enc, _, their_enc) = encrypted_pair();
        assert_eq!(my_enc.keys(), &MESSAGE_1_KEYS);
        assert_eq!(their_enc.keys(), &MESSAGE_2_KEYS);
        let common = intersect_keys(&my_enc, &their_enc).unwrap();
        assert_eq!(common, COMMON_KEYS);
    }

    #[test]
    fn self_intersection_returns_all_keys() {
        let (_, my_enc, _, _) = encrypted_pair();
        assert_eq!(intersect_keys(&my_enc, &my_enc).unwrap(), my_enc.keys());
    }

    #[test]
    fn disjoint_sets_intersect_empty() {
        let a = EncryptedSet::from_sorted_keys(2, vec![1, 3, 5]).unwrap();
        let b = EncryptedSet::from_sorted_keys(2, vec![2, 4, 6]).unwrap();
        assert!(intersect_keys(&a, &b).unwrap().is_empty());
    }

    #[test]
    fn level_mismatch_is_rejected() {
        let a = EncryptedSet::from_sorted_keys(1, vec![1]).unwrap();
        let b = EncryptedSet::from_sorted_keys(2, vec![1]).unwrap();
        assert!(matches!(
            intersect_keys(&a, &b).unwrap_err(),
            CompareError::LevelMismatch { mine: 1, theirs: 2 }
        ));
    }

    #[test]
    fn recover_unions_postings_over_common_keys() {
        let (_, _, my_index, _) = encrypted_pair();
        let recovered = recover(&COMMON_KEYS, &my_index).unwrap();
        assert_eq!(recovered, RECOVERED);
        assert!(recover(&[], &my_index).unwrap().is_empty());
        // A single common key recovers exactly its posting.
        assert_eq!(recover(&[4014517], &my_index).unwrap(), vec![371264, 3643253]);
    }

    #[test]
    fn recover_rejects_keys_missing_from_the_index() {
        let (_, _, my_index, _) = encrypted_pair();
        assert!(matches!(
            recover(&[42], &my_index).unwrap_err(),
            CompareError::MissingPosting { key: 42 }
        ));
    }

    #[test]
    fn scores_are_recovered_fractions_per_element() {
        let (mine, _, _, _) = encrypted_pair();
        let scores = score_elements(&mine, &RECOVERED);
        let by_id: std::collections::HashMap<&str, f64> =
            scores.iter().map(|(id, s)| (id.as_str(), *s)).collect();
        assert_eq!(by_id["laser"], 1.0);
        assert_eq!(by_id["reheat"], 1.0);
        assert_eq!(by_id["cappuccino"], 0.5);

        let zeroed = score_elements(&mine, &[]);
        assert!(zeroed.iter().all(|(_, s)| *s == 0.0));
    }

    #[test]
    fn full_compare_reports_one_sided_overlap() {
        let (mine, my_enc, my_index, their_enc) = encrypted_pair();
        let report =
            compare(&mine, &my_enc, &my_index, &their_enc, DEFAULT_CONFIDENCE_THRESHOLD).unwrap();
        assert_eq!(report.common_keys, COMMON_KEYS);
        assert_eq!(report.my_overlap_fraction, 11.0 / 16.0);
        assert_eq!(report.recovered_values, RECOVERED);
        assert!(report.high_confidence);

        // The other side divides by its own key count.
        let map = word_map();
        let theirs = PrivateSet::resolve(&map, &ids(&["laser", "reheat", "espresso"]));
        let (their_enc2, their_index) = encrypt(&theirs, 2).unwrap();
        let other =
            compare(&theirs, &their_enc2, &their_index, &my_enc, DEFAULT_CONFIDENCE_THRESHOLD)
                .unwrap();
        assert_eq!(other.my_overlap_fraction, 11.0 / 21.0);
    }

    #[test]
    fn self_comparison_is_a_fixed_point() {
        let (mine, my_enc, my_index, _) = encrypted_pair();
        let report =
            compare(&mine, &my_enc, &my_index, &my_enc, DEFAULT_CONFIDENCE_THRESHOLD).unwrap();
        assert_eq!(report.my_overlap_fraction, 1.0);
        assert!(report.element_scores.iter().all(|(_, s)| *s == 1.0));
    }

    #[test]
    fn merge_and_gallop_paths_agree() {
        let large: Vec<u64> = (0..10_000).map(|i| i * 3).collect();
        let small: Vec<u64> = vec![0, 3, 4, 2_997, 29_997, 30_000];
        let expected: Vec<u64> = vec![0, 3, 2_997, 29_997];
        assert_eq!(intersect_sorted(&small, &large), expected);
        assert_eq!(intersect_sorted(&large, &small), expected);
        assert!(intersect_sorted(&[], &large).is_empty());
        assert_eq!(intersect_sorted(&large, &large), large);
    }
}
