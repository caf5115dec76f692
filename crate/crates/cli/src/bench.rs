//! Benchmark harness: key-count and timing sweeps across levels and message
//! sizes, and the confidence experiment relating overlap fraction to false
//! positives.
//!
//! All randomness flows from an explicit seed, so key counts and experiment
//! outcomes replay identically; only wall-clock columns vary between runs.

use std::collections::BTreeSet;
use std::time::Instant;

use nsum_psi::{
    compare, encrypt, encrypt_parallel, CompareError, ElementId, ElementMap, EncryptError,
    PrivateSet,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("word_count {word_count} must be at least the level {level}")]
    WordCountBelowLevel { word_count: usize, level: u8 },
    #[error("map holds {available} elements, fewer than the {needed} a trial draws")]
    MapTooSmall { available: usize, needed: usize },
    #[error("levels and word_counts must be non-empty and trials positive")]
    EmptyPlan,
    #[error(transparent)]
    Encrypt(#[from] EncryptError),
    #[error(transparent)]
    Compare(#[from] CompareError),
}

#[derive(Clone, Debug)]
pub struct SizeBenchConfig {
    pub levels: Vec<u8>,
    pub word_counts: Vec<usize>,
    pub trials: usize,
    pub workers: usize,
    pub seed: u64,
}

/// One CSV row per (level, word_count) cell: means plus medians over trials.
#[derive(Clone, Debug, Serialize)]
pub struct SizeCell {
    pub level: u8,
    pub word_count: usize,
    pub trials: usize,
    pub mean_key_count: f64,
    pub mean_encrypt_ms: f64,
    pub median_encrypt_ms: f64,
    pub mean_encrypt_parallel_ms: f64,
    pub median_encrypt_parallel_ms: f64,
    pub parallel_workers: usize,
    pub mean_compare_ms: f64,
    pub median_compare_ms: f64,
    pub mean_overlap_fraction: f64,
}

/// One CSV row per compared pair in the confidence experiment.
#[derive(Clone, Debug, Serialize)]
pub struct PairRecord {
    pub pair: usize,
    pub word_count: usize,
    pub level: u8,
    pub shared_words: usize,
    pub key_count: usize,
    pub encrypt_ms: f64,
    pub compare_ms: f64,
    pub overlap_fraction: f64,
    pub false_positive_count: usize,
    pub false_positive_flag: bool,
}

#[derive(Clone, Debug)]
pub struct ConfidenceConfig {
    pub pairs: usize,
    pub words_per_message: usize,
    pub level: u8,
    pub threshold: f64,
    /// Planted shared-word counts cycle through `0..=max_shared` so the
    /// overlap spectrum is actually populated.
    pub max_shared: usize,
    pub seed: u64,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Draws `count` distinct elements from the map.
fn sample_message(ids: &[ElementId], count: usize, rng: &mut ChaCha8Rng) -> Vec<ElementId> {
    sample(rng, ids.len(), count).iter().map(|i| ids[i].clone()).collect()
}

/// Runs the key-count / timing sweep.
pub fn run_size_bench(map: &ElementMap, cfg: &SizeBenchConfig) -> Result<Vec<SizeCell>, BenchError> {
    if cfg.levels.is_empty() || cfg.word_counts.is_empty() || cfg.trials == 0 {
        return Err(BenchError::EmptyPlan);
    }
    let ids: Vec<ElementId> = map.ids().cloned().collect();
    let needed = cfg.word_counts.iter().copied().max().unwrap_or(0) * 2;
    if ids.len() < needed {
        return Err(BenchError::MapTooSmall { available: ids.len(), needed });
    }
    let workers = cfg.workers.max(1);

    let mut cells = Vec::new();
    for &level in &cfg.levels {
        for &word_count in &cfg.word_counts {
            if word_count < level as usize {
                return Err(BenchError::WordCountBelowLevel { word_count, level });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(
                cfg.seed ^ (u64::from(level) << 32) ^ word_count as u64,
            );
            let mut key_counts = Vec::with_capacity(cfg.trials);
            let mut encrypt_times = Vec::with_capacity(cfg.trials);
            let mut parallel_times = Vec::with_capacity(cfg.trials);
            let mut compare_times = Vec::with_capacity(cfg.trials);
            let mut fractions = Vec::with_capacity(cfg.trials);

            for _ in 0..cfg.trials {
                let mine = sample_message(&ids, word_count, &mut rng);
                let my_set = PrivateSet::resolve(map, &mine);

                let start = Instant::now();
                let (my_enc, my_index) = encrypt(&my_set, level)?;
                encrypt_times.push(ms(start));

                let start = Instant::now();
                let (parallel_enc, _) = encrypt_parallel(&my_set, level, workers)?;
                parallel_times.push(ms(start));
                debug_assert_eq!(parallel_enc, my_enc);

                let theirs = sample_message(&ids, word_count, &mut rng);
                let their_set = PrivateSet::resolve(map, &theirs);
                let (their_enc, _) = encrypt(&their_set, level)?;

                let start = Instant::now();
                let report = compare(&my_set, &my_enc, &my_index, &their_enc, 0.01)?;
                compare_times.push(ms(start));

                key_counts.push(my_enc.len() as f64);
                fractions.push(report.my_overlap_fraction);
            }

            cells.push(SizeCell {
                level,
                word_count,
                trials: cfg.trials,
                mean_key_count: mean(&key_counts),
                mean_encrypt_ms: mean(&encrypt_times),
                median_encrypt_ms: median(&encrypt_times),
                mean_encrypt_parallel_ms: mean(&parallel_times),
                median_encrypt_parallel_ms: median(&parallel_times),
                parallel_workers: workers,
                mean_compare_ms: mean(&compare_times),
                median_compare_ms: median(&compare_times),
                mean_overlap_fraction: mean(&fractions),
            });
        }
    }
    Ok(cells)
}

/// Runs the confidence experiment: message pairs with a cycling number of
/// planted shared words, each reported with its overlap fraction and the
/// count of recovered values that are not truly common to both sides.
pub fn run_confidence(
    map: &ElementMap,
    cfg: &ConfidenceConfig,
) -> Result<Vec<PairRecord>, BenchError> {
    if cfg.pairs == 0 {
        return Err(BenchError::EmptyPlan);
    }
    if cfg.words_per_message < cfg.level as usize {
        return Err(BenchError::WordCountBelowLevel {
            word_count: cfg.words_per_message,
            level: cfg.level,
        });
    }
    let ids: Vec<ElementId> = map.ids().cloned().collect();
    let needed = cfg.words_per_message * 2;
    if ids.len() < needed {
        return Err(BenchError::MapTooSmall { available: ids.len(), needed });
    }
    let max_shared = cfg.max_shared.min(cfg.words_per_message);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::with_capacity(cfg.pairs);
    for pair in 0..cfg.pairs {
        let shared_words = pair % (max_shared + 1);

        let mine = sample_message(&ids, cfg.words_per_message, &mut rng);
        let mut theirs: Vec<ElementId> = mine[..shared_words].to_vec();
        while theirs.len() < cfg.words_per_message {
            let candidate = ids[rng.random_range(0..ids.len())].clone();
            if !mine.contains(&candidate) && !theirs.contains(&candidate) {
                theirs.push(candidate);
            }
        }

        let my_set = PrivateSet::resolve(map, &mine);
        let their_set = PrivateSet::resolve(map, &theirs);

        let start = Instant::now();
        let (my_enc, my_index) = encrypt(&my_set, cfg.level)?;
        let encrypt_ms = ms(start);
        let (their_enc, _) = encrypt(&their_set, cfg.level)?;

        let start = Instant::now();
        let report = compare(&my_set, &my_enc, &my_index, &their_enc, cfg.threshold)?;
        let compare_ms = ms(start);

        // A recovered value is a true positive only when both sides' omega
        // unions contain it.
        let my_values: BTreeSet<u64> =
            my_set.omegas().iter().flat_map(|o| o.values().iter().copied()).collect();
        let their_values: BTreeSet<u64> =
            their_set.omegas().iter().flat_map(|o| o.values().iter().copied()).collect();
        let false_positive_count = report
            .recovered_values
            .iter()
            .filter(|v| !(my_values.contains(v) && their_values.contains(v)))
            .count();

        records.push(PairRecord {
            pair,
            word_count: cfg.words_per_message,
            level: cfg.level,
            shared_words,
            key_count: my_enc.len(),
            encrypt_ms,
            compare_ms,
            overlap_fraction: report.my_overlap_fraction,
            false_positive_count,
            false_positive_flag: false_positive_count > 0,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nsum_psi::sample_synthetic_map;

    #[test]
    fn size_bench_reports_growing_key_counts() {
        let map = sample_synthetic_map(200, (2, 4), 1_000_000_000, 3).unwrap();
        let cfg = SizeBenchConfig {
            levels: vec![1, 2],
            word_counts: vec![2, 4, 8],
            trials: 3,
            workers: 2,
            seed: 11,
        };
        let cells = run_size_bench(&map, &cfg).unwrap();
        assert_eq!(cells.len(), 6);
        // Key counts grow with word count at fixed level, and with level at
        // fixed word count.
        for level_cells in cells.chunks(3) {
            assert!(level_cells[0].mean_key_count < level_cells[1].mean_key_count);
            assert!(level_cells[1].mean_key_count < level_cells[2].mean_key_count);
        }
        for (s1, s2) in cells[..3].iter().zip(&cells[3..]) {
            assert!(s1.mean_key_count < s2.mean_key_count);
        }
    }

    #[test]
    fn size_bench_key_counts_replay_per_seed() {
        let map = sample_synthetic_map(100, (1, 3), 1_000_000, 7).unwrap();
        let cfg = SizeBenchConfig {
            levels: vec![2],
            word_counts: vec![4],
            trials: 5,
            workers: 1,
            seed: 21,
        };
        let first = run_size_bench(&map, &cfg).unwrap();
        let second = run_size_bench(&map, &cfg).unwrap();
        assert_eq!(first[0].mean_key_count, second[0].mean_key_count);
        assert_eq!(first[0].mean_overlap_fraction, second[0].mean_overlap_fraction);
    }

    #[test]
    fn size_bench_validates_plan() {
        let map = sample_synthetic_map(50, (1, 3), 1_000_000, 7).unwrap();
        let bad = SizeBenchConfig {
            levels: vec![3],
            word_counts: vec![2],
            trials: 1,
            workers: 1,
            seed: 0,
        };
        assert!(matches!(
            run_size_bench(&map, &bad).unwrap_err(),
            BenchError::WordCountBelowLevel { word_count: 2, level: 3 }
        ));
    }

    #[test]
    fn confidence_pairs_cycle_planted_shares() {
        let map = sample_synthetic_map(500, (1, 3), 16_000_000, 13).unwrap();
        let cfg = ConfidenceConfig {
            pairs: 12,
            words_per_message: 6,
            level: 2,
            threshold: 0.01,
            max_shared: 3,
            seed: 17,
        };
        let records = run_confidence(&map, &cfg).unwrap();
        assert_eq!(records.len(), 12);
        let shares: Vec<usize> = records.iter().map(|r| r.shared_words).collect();
        assert_eq!(&shares[..4], &[0, 1, 2, 3]);
        // Pairs sharing two or more words overlap well past pairs sharing none.
        let none: f64 = records.iter().filter(|r| r.shared_words == 0).map(|r| r.overlap_fraction).sum();
        let lots: f64 = records.iter().filter(|r| r.shared_words >= 2).map(|r| r.overlap_fraction).sum();
        assert!(lots > none);
    }
}
