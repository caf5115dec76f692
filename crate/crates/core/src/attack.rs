//! Brute-force decryption attacks used to probe how much an encryption
//! leaks.
//!
//! Level-1 key sets fall to a linear walk over the map. Level-2 sets can be
//! attacked with a precomputed table of all pairwise sums, which is quadratic
//! in the domain size and guarded by an entry cap. Higher levels are only
//! estimated, never tabulated.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::encrypt::EncryptedSet;
use crate::omega::{ElementId, ElementMap, PositionHash};

/// Default ceiling on sum-table entries before construction is refused.
pub const DEFAULT_TABLE_CAP: u64 = 100_000_000;

/// Candidate sets larger than this are reported as a count plus a sample.
pub const CANDIDATE_DUMP_LIMIT: u64 = 1_000_000;

/// Sample size retained for oversized candidate sets.
pub const CANDIDATE_SAMPLE_SIZE: usize = 10_000;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("expected a level {expected} encryption, got level {got}")]
    WrongLevel { expected: u8, got: u8 },
    #[error(
        "sum table would hold about {estimate} entries, over the cap of {cap}; \
         pairwise tabulation is quadratic in the domain size"
    )]
    TableTooLarge { estimate: u128, cap: u64 },
    #[error("sum tables are only built for level 2, got level {0}")]
    UnsupportedTableLevel(u8),
}

/// Lookup table from every pairwise sum (self-pairs included) to the
/// domain identifiers that can produce it.
#[derive(Clone, Debug)]
pub struct SumTable {
    level: u8,
    domain: Vec<ElementId>,
    /// `(sum, slot_a, slot_b)` sorted by sum; slots index into `domain`.
    entries: Vec<(u64, u32, u32)>,
}

impl SumTable {
    /// Tabulates all pairwise value sums of a word map. Refused when the
    /// estimated entry count exceeds `cap`.
    pub fn from_map(map: &ElementMap, cap: u64) -> Result<SumTable, AttackError> {
        let domain: Vec<ElementId> = map.ids().cloned().collect();
        let omegas: Vec<&[u64]> =
            domain.iter().map(|id| map.lookup(id.as_str()).values()).collect();
        Self::build(domain, &omegas, cap)
    }

    /// Tabulates all pairwise sums of hashed grid cells; each cell is its own
    /// single-valued domain entry, identified by its decimal grid index.
    pub fn from_hash(hash: &PositionHash, cap: u64) -> Result<SumTable, AttackError> {
        let values: Vec<[u64; 1]> = hash.hashes().map(|h| [h]).collect();
        let domain: Vec<ElementId> =
            (1..=values.len()).map(ElementId::from).collect();
        let omegas: Vec<&[u64]> = values.iter().map(|v| v.as_slice()).collect();
        Self::build(domain, &omegas, cap)
    }

    fn build(domain: Vec<ElementId>, omegas: &[&[u64]], cap: u64) -> Result<SumTable, AttackError> {
        let total: u64 = omegas.iter().map(|v| v.len() as u64).sum();
        let estimate = table_entry_estimate(total, 2);
        if estimate > cap as u128 {
            return Err(AttackError::TableTooLarge { estimate, cap });
        }
        let mut entries: Vec<(u64, u32, u32)> = Vec::with_capacity(estimate as usize);
        for i in 0..omegas.len() {
            for (offset, &w_list) in omegas[i..].iter().enumerate() {
                let j = i + offset;
                for (vi, &v) in omegas[i].iter().enumerate() {
                    // Within one element, enumerate unordered value pairs
                    // once; self-pairs (v + v) stay in, matching the
                    // over-approximating attack convention.
                    let start = if i == j { vi } else { 0 };
                    for &w in &w_list[start..] {
                        entries.push((v + w, i as u32, j as u32));
                    }
                }
            }
        }
        entries.sort_unstable();
        Ok(SumTable { level: 2, domain, entries })
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    /// Number of distinct sums in the table.
    pub fn entry_count(&self) -> usize {
        let mut count = 0;
        let mut last = None;
        for &(sum, _, _) in &self.entries {
            if last != Some(sum) {
                count += 1;
                last = Some(sum);
            }
        }
        count
    }

    /// Number of tabulated pair terms (rows before grouping by sum).
    pub fn term_count(&self) -> usize {
        self.entries.len()
    }

    pub fn domain(&self) -> &[ElementId] {
        &self.domain
    }

    fn pair_range(&self, sum: u64) -> &[(u64, u32, u32)] {
        let lo = self.entries.partition_point(|&(s, _, _)| s < sum);
        let hi = self.entries.partition_point(|&(s, _, _)| s <= sum);
        &self.entries[lo..hi]
    }

    /// Identifiers able to contribute to `sum`, with repetition.
    pub fn contributors(&self, sum: u64) -> impl Iterator<Item = &ElementId> {
        self.pair_range(sum)
            .iter()
            .flat_map(move |&(_, a, b)| [&self.domain[a as usize], &self.domain[b as usize]])
    }
}

/// Pre-deduplication entry estimate for a level-n sum table over `total`
/// values: combinations with repetition, `C(total + n - 1, n)`.
pub fn table_entry_estimate(total_values: u64, level: u8) -> u128 {
    let n = level as u128;
    if n == 0 {
        return 1;
    }
    let t = total_values as u128;
    let mut numerator = 1u128;
    for i in 0..n {
        numerator = numerator.saturating_mul(t.saturating_add(i));
    }
    let mut denominator = 1u128;
    for i in 1..=n {
        denominator *= i;
    }
    numerator / denominator
}

/// Candidate identifiers flagged by an attack. Oversized sets keep a count
/// and an evenly strided sample instead of the full dump.
#[derive(Clone, Debug)]
pub enum Candidates {
    Full(BTreeSet<ElementId>),
    Counted { count: u64, sample: Vec<ElementId> },
}

impl Candidates {
    fn from_set(set: BTreeSet<ElementId>, limit: u64) -> Candidates {
        if set.len() as u64 <= limit {
            return Candidates::Full(set);
        }
        let count = set.len() as u64;
        let stride = set.len().div_ceil(CANDIDATE_SAMPLE_SIZE).max(1);
        let sample = set.into_iter().step_by(stride).collect();
        Candidates::Counted { count, sample }
    }

    pub fn count(&self) -> u64 {
        match self {
            Candidates::Full(set) => set.len() as u64,
            Candidates::Counted { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// The full set when small enough, otherwise the retained sample.
    pub fn known(&self) -> Box<dyn Iterator<Item = &ElementId> + '_> {
        match self {
            Candidates::Full(set) => Box::new(set.iter()),
            Candidates::Counted { sample, .. } => Box::new(sample.iter()),
        }
    }

    pub fn contains(&self, id: &ElementId) -> Option<bool> {
        match self {
            Candidates::Full(set) => Some(set.contains(id)),
            Candidates::Counted { .. } => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AttackResult {
    pub level: u8,
    pub candidates: Candidates,
}

/// Candidate accounting against a known victim set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttackScore {
    pub true_positive_count: u64,
    pub false_positive_count: u64,
}

impl AttackResult {
    /// Splits the candidates against ground truth. For counted results the
    /// split is extrapolated from the retained sample.
    pub fn against_truth(&self, truth: &BTreeSet<ElementId>) -> AttackScore {
        match &self.candidates {
            Candidates::Full(set) => {
                let true_positive_count =
                    set.iter().filter(|id| truth.contains(*id)).count() as u64;
                AttackScore {
                    true_positive_count,
                    false_positive_count: set.len() as u64 - true_positive_count,
                }
            }
            Candidates::Counted { count, sample } => {
                if sample.is_empty() {
                    return AttackScore { true_positive_count: 0, false_positive_count: *count };
                }
                let hits = sample.iter().filter(|id| truth.contains(*id)).count() as u64;
                let true_positive_count = hits * *count / sample.len() as u64;
                AttackScore {
                    true_positive_count,
                    false_positive_count: *count - true_positive_count,
                }
            }
        }
    }
}

/// Linear attack on a level-1 encryption: flags every map element whose full
/// omega set is contained in the published keys. Empty lookups (unknown
/// entries, stopwords) never qualify.
pub fn attack_s1(s1: &EncryptedSet, map: &ElementMap) -> Result<AttackResult, AttackError> {
    if s1.level() != 1 {
        return Err(AttackError::WrongLevel { expected: 1, got: s1.level() });
    }
    let keys = s1.keys();
    let mut candidates = BTreeSet::new();
    for id in map.ids() {
        let omega = map.lookup(id.as_str());
        if !omega.is_empty() && omega.values().iter().all(|v| keys.binary_search(v).is_ok()) {
            candidates.insert(id.clone());
        }
    }
    Ok(AttackResult { level: 1, candidates: Candidates::from_set(candidates, CANDIDATE_DUMP_LIMIT) })
}

/// Pair-table attack on a level-2 encryption: every identifier that can
/// contribute to any published key is flagged.
pub fn attack_s2(s2: &EncryptedSet, table: &SumTable) -> Result<AttackResult, AttackError> {
    attack_s2_with_limit(s2, table, CANDIDATE_DUMP_LIMIT)
}

/// As [`attack_s2`], with an explicit candidate dump limit.
pub fn attack_s2_with_limit(
    s2: &EncryptedSet,
    table: &SumTable,
    limit: u64,
) -> Result<AttackResult, AttackError> {
    if s2.level() != 2 {
        return Err(AttackError::WrongLevel { expected: 2, got: s2.level() });
    }
    if table.level() != 2 {
        return Err(AttackError::UnsupportedTableLevel(table.level()));
    }
    let mut flagged = vec![false; table.domain.len()];
    for &key in s2.keys() {
        for &(_, a, b) in table.pair_range(key) {
            flagged[a as usize] = true;
            flagged[b as usize] = true;
        }
    }
    let candidates: BTreeSet<ElementId> = flagged
        .iter()
        .zip(table.domain.iter())
        .filter(|(&hit, _)| hit)
        .map(|(_, id)| id.clone())
        .collect();
    Ok(AttackResult { level: 2, candidates: Candidates::from_set(candidates, limit) })
}

/// Fraction of flagged candidates that are not in the ground-truth set:
/// `|candidates \ truth| / |candidates|`, 0 for an empty candidate set. For
/// counted results the rate is estimated from the retained sample.
pub fn false_positive_rate(result: &AttackResult, truth: &BTreeSet<ElementId>) -> f64 {
    match &result.candidates {
        Candidates::Full(set) => {
            if set.is_empty() {
                return 0.0;
            }
            let false_hits = set.iter().filter(|id| !truth.contains(*id)).count();
            false_hits as f64 / set.len() as f64
        }
        Candidates::Counted { count, sample } => {
            if *count == 0 || sample.is_empty() {
                return 0.0;
            }
            let false_hits = sample.iter().filter(|id| !truth.contains(*id)).count();
            false_hits as f64 / sample.len() as f64
        }
    }
}
