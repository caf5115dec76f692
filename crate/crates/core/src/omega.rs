//! The element map `M: x -> Omega_x` and its constructors.
//!
//! Every element of a private set is mapped to a finite set of integers in
//! `[0, i_max]` (its omega set). Word maps are loaded from text files, grid
//! worlds get a randomized position hash, and benchmarks use synthetic maps.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::shapes::Rect;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("failed to read map file: {0}")]
    Io(#[from] std::io::Error),
    #[error("map file line {line}: {problem}")]
    MalformedLine { line: usize, problem: String },
    #[error("map file contains no entries")]
    EmptyMapFile,
    #[error("element id must be non-empty")]
    EmptyElementId,
    #[error("element id {0:?} contains whitespace")]
    InvalidElementId(String),
    #[error("omega value {value} exceeds the ceiling i_max = {i_max}")]
    ValueAboveCeiling { value: u64, i_max: u64 },
    #[error("i_max must be positive")]
    ZeroCeiling,
    #[error("world_dim must be positive")]
    ZeroWorldDim,
    #[error("cannot build an injective hash: {cells} grid cells but i_max = {i_max}")]
    HashDomainTooSmall { cells: u64, i_max: u64 },
    #[error("hash sampling gave up after {attempts} attempts; i_max is too tight for the grid")]
    HashSamplingExhausted { attempts: u64 },
    #[error(
        "colony at ({x}, {y}) of size {width}x{height} lies outside the {world_dim}x{world_dim} grid"
    )]
    ColonyOutsideGrid { x: u32, y: u32, width: u32, height: u32, world_dim: u32 },
    #[error("omega size range {lo}..={hi} is invalid for i_max = {i_max}")]
    BadOmegaSizeRange { lo: usize, hi: usize, i_max: u64 },
    #[error("message has an unterminated quote")]
    UnclosedQuote,
}

/// An opaque element token: a word, or a decimal-rendered grid/colony number.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementId(String);

impl ElementId {
    /// Tokens must be non-empty and free of whitespace so they survive the
    /// whitespace-delimited map file format.
    pub fn new(token: impl Into<String>) -> Result<Self, MapError> {
        let token = token.into();
        if token.is_empty() {
            return Err(MapError::EmptyElementId);
        }
        if token.chars().any(char::is_whitespace) {
            return Err(MapError::InvalidElementId(token));
        }
        Ok(ElementId(token))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ElementId {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, MapError> {
        ElementId::new(s)
    }
}

/// Numbered elements (colonies, grid cells) render as decimal text.
impl From<usize> for ElementId {
    fn from(index: usize) -> Self {
        ElementId(index.to_string())
    }
}

impl Borrow<str> for ElementId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// One omega set: strictly ascending, duplicate-free integers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OmegaSet {
    values: Vec<u64>,
}

static EMPTY_OMEGA: OmegaSet = OmegaSet { values: Vec::new() };

impl OmegaSet {
    pub fn new(values: impl IntoIterator<Item = u64>) -> Self {
        let mut values: Vec<u64> = values.into_iter().collect();
        values.sort_unstable();
        values.dedup();
        OmegaSet { values }
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, value: u64) -> bool {
        self.values.binary_search(&value).is_ok()
    }

    pub fn max(&self) -> Option<u64> {
        self.values.last().copied()
    }
}

impl FromIterator<u64> for OmegaSet {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        OmegaSet::new(iter)
    }
}

/// The map `M` from element ids to omega sets, with its value ceiling and
/// the stopword list that blanks out ignored tokens.
#[derive(Clone, Debug)]
pub struct ElementMap {
    entries: BTreeMap<ElementId, OmegaSet>,
    i_max: u64,
    stopwords: BTreeSet<ElementId>,
}

impl ElementMap {
    /// Builds a map from explicit entries. With `i_max = None` the ceiling is
    /// the largest value observed (1 for an empty map).
    pub fn from_entries(
        entries: impl IntoIterator<Item = (ElementId, OmegaSet)>,
        stopwords: impl IntoIterator<Item = ElementId>,
        i_max: Option<u64>,
    ) -> Result<Self, MapError> {
        let entries: BTreeMap<ElementId, OmegaSet> = entries.into_iter().collect();
        let observed = entries.values().filter_map(OmegaSet::max).max().unwrap_or(0);
        let i_max = match i_max {
            Some(0) => return Err(MapError::ZeroCeiling),
            Some(ceiling) => {
                if observed > ceiling {
                    return Err(MapError::ValueAboveCeiling { value: observed, i_max: ceiling });
                }
                ceiling
            }
            None => observed.max(1),
        };
        Ok(ElementMap { entries, i_max, stopwords: stopwords.into_iter().collect() })
    }

    /// Loads the whitespace-delimited text format: one record per line, an
    /// element token followed by its decimal omega values. A repeated token
    /// overrides the earlier record.
    pub fn load_file(path: impl AsRef<Path>, stopwords: &[ElementId]) -> Result<Self, MapError> {
        let text = fs::read_to_string(path)?;
        let mut entries: BTreeMap<ElementId, OmegaSet> = BTreeMap::new();
        for (index, line) in text.lines().enumerate() {
            let line_no = index + 1;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let id = ElementId::new(token)?;
            let mut values = Vec::new();
            for field in fields {
                let value: u64 = field.parse().map_err(|_| MapError::MalformedLine {
                    line: line_no,
                    problem: format!("expected a decimal integer, got {field:?}"),
                })?;
                values.push(value);
            }
            if values.is_empty() {
                return Err(MapError::MalformedLine {
                    line: line_no,
                    problem: format!("entry {token:?} has no values"),
                });
            }
            if entries.insert(id, OmegaSet::new(values)).is_some() {
                log::warn!("map file line {line_no}: duplicate entry for {token:?}, overriding");
            }
        }
        if entries.is_empty() {
            return Err(MapError::EmptyMapFile);
        }
        Self::from_entries(entries, stopwords.iter().cloned(), None)
    }

    /// Returns the omega set for `id`, or the empty set for unknown ids and
    /// stopwords.
    pub fn lookup(&self, id: &str) -> &OmegaSet {
        if self.stopwords.contains(id) {
            return &EMPTY_OMEGA;
        }
        self.entries.get(id).unwrap_or(&EMPTY_OMEGA)
    }

    pub fn i_max(&self) -> u64 {
        self.i_max
    }

    /// Replaces the ceiling; it must still cover every stored value.
    pub fn with_i_max(mut self, i_max: u64) -> Result<Self, MapError> {
        if i_max == 0 {
            return Err(MapError::ZeroCeiling);
        }
        let observed = self.entries.values().filter_map(OmegaSet::max).max().unwrap_or(0);
        if observed > i_max {
            return Err(MapError::ValueAboveCeiling { value: observed, i_max });
        }
        self.i_max = i_max;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &ElementId> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ElementId, &OmegaSet)> {
        self.entries.iter()
    }

    /// Total number of stored omega values, the `T` of attack-cost estimates.
    pub fn total_value_count(&self) -> u64 {
        self.entries.values().map(|omega| omega.len() as u64).sum()
    }
}

/// Grid linearization used throughout the rectangle world: `x + world_dim * y`.
pub fn grid_index(world_dim: u32, x: u32, y: u32) -> u32 {
    x + world_dim * y
}

/// Inverse of [`grid_index`].
pub fn grid_coords(world_dim: u32, index: u32) -> (u32, u32) {
    (index % world_dim, index / world_dim)
}

/// How hash values are spread over `[1, i_max]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HashDistribution {
    /// Flat priors over the whole range.
    #[default]
    Uniform,
    /// Density proportional to `1/sqrt(x) + 1/sqrt(i_max - x)`: mass piles up
    /// at both ends of the range, which flattens the spectrum of pairwise
    /// sums.
    EdgeWeighted,
}

/// Injective map from grid indices `1..=world_dim^2` to integers in
/// `[1, i_max]`, with its exact inverse.
#[derive(Clone, Debug)]
pub struct PositionHash {
    world_dim: u32,
    i_max: u64,
    forward: Vec<u64>,
    reverse: HashMap<u64, u32>,
}

impl PositionHash {
    pub fn world_dim(&self) -> u32 {
        self.world_dim
    }

    pub fn i_max(&self) -> u64 {
        self.i_max
    }

    pub fn cell_count(&self) -> u32 {
        self.world_dim * self.world_dim
    }

    /// Hash value for a grid index in `1..=world_dim^2`.
    pub fn forward(&self, grid_index: u32) -> Option<u64> {
        if grid_index == 0 {
            return None;
        }
        self.forward.get(grid_index as usize - 1).copied()
    }

    /// Grid index for a hash value, when the value is in the image.
    pub fn reverse(&self, hash: u64) -> Option<u32> {
        self.reverse.get(&hash).copied()
    }

    pub fn hashes(&self) -> impl Iterator<Item = u64> + '_ {
        self.forward.iter().copied()
    }
}

/// Samples an injective position hash with flat priors. Deterministic per
/// seed.
pub fn make_position_hash(world_dim: u32, i_max: u64, seed: u64) -> Result<PositionHash, MapError> {
    make_position_hash_with(world_dim, i_max, seed, HashDistribution::Uniform)
}

/// As [`make_position_hash`], with a choice of value distribution.
pub fn make_position_hash_with(
    world_dim: u32,
    i_max: u64,
    seed: u64,
    distribution: HashDistribution,
) -> Result<PositionHash, MapError> {
    if world_dim == 0 {
        return Err(MapError::ZeroWorldDim);
    }
    if i_max == 0 {
        return Err(MapError::ZeroCeiling);
    }
    let cells = u64::from(world_dim) * u64::from(world_dim);
    if cells > i_max {
        return Err(MapError::HashDomainTooSmall { cells, i_max });
    }

    const ATTEMPTS_PER_CELL: u64 = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut forward = Vec::with_capacity(cells as usize);
    let mut reverse = HashMap::with_capacity(cells as usize);
    for index in 1..=cells {
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > ATTEMPTS_PER_CELL {
                return Err(MapError::HashSamplingExhausted { attempts: index * ATTEMPTS_PER_CELL });
            }
            let value = match distribution {
                HashDistribution::Uniform => rng.random_range(1..=i_max),
                HashDistribution::EdgeWeighted => sample_edge_weighted(&mut rng, i_max),
            };
            if value >= 1 && value <= i_max && !reverse.contains_key(&value) {
                reverse.insert(value, index as u32);
                forward.push(value);
                break;
            }
        }
    }
    Ok(PositionHash { world_dim, i_max, forward, reverse })
}

/// Inverse-CDF draw from the density `1/sqrt(x) + 1/sqrt(i_max - x)`.
fn sample_edge_weighted(rng: &mut ChaCha8Rng, i_max: u64) -> u64 {
    let ceiling = i_max as f64;
    let u: f64 = rng.random();
    let s = (2.0 * u - 1.0) * ceiling.sqrt();
    let a = 0.5 * (s + (2.0 * ceiling - s * s).sqrt());
    (a * a).round() as u64
}

/// Maps numbered colonies to the hashed values of the grid cells they cover.
/// Colony `k` (1-based) becomes element `"k"`.
pub fn colony_omega(colonies: &[Rect], hash: &PositionHash) -> Result<ElementMap, MapError> {
    let dim = hash.world_dim();
    let mut entries = Vec::with_capacity(colonies.len());
    for (index, colony) in colonies.iter().enumerate() {
        if !colony.fits_inside(dim) {
            return Err(MapError::ColonyOutsideGrid {
                x: colony.x,
                y: colony.y,
                width: colony.width,
                height: colony.height,
                world_dim: dim,
            });
        }
        let mut values = Vec::with_capacity(colony.area() as usize);
        for i in 0..colony.width {
            for j in 0..colony.height {
                let cell = grid_index(dim, colony.x + i, colony.y + j);
                values.push(hash.forward(cell).expect("colony cell inside hashed grid"));
            }
        }
        entries.push((ElementId::from(index + 1), OmegaSet::new(values)));
    }
    ElementMap::from_entries(entries, [], Some(hash.i_max()))
}

/// Synthetic map for benchmarks: `word_count` elements named `w0, w1, ...`,
/// each with an omega set of uniformly drawn size and values. Deterministic
/// per seed. Duplicate draws are deduplicated, so sets may come out slightly
/// smaller than drawn.
pub fn sample_synthetic_map(
    word_count: usize,
    omega_size_range: (usize, usize),
    i_max: u64,
    seed: u64,
) -> Result<ElementMap, MapError> {
    if i_max == 0 {
        return Err(MapError::ZeroCeiling);
    }
    let (lo, hi) = omega_size_range;
    if lo < 1 || lo > hi || hi as u64 > i_max {
        return Err(MapError::BadOmegaSizeRange { lo, hi, i_max });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(word_count);
    for k in 0..word_count {
        let size = rng.random_range(lo..=hi);
        let values = (0..size).map(|_| rng.random_range(0..=i_max));
        entries.push((ElementId::new(format!("w{k}"))?, OmegaSet::new(values)));
    }
    ElementMap::from_entries(entries, [], Some(i_max))
}

/// Splits a message into element tokens: whitespace boundaries with
/// shell-style quoting, lowercased. No lemmatization or punctuation handling.
pub fn tokenize(message: &str) -> Result<Vec<ElementId>, MapError> {
    let words = shlex::split(message).ok_or(MapError::UnclosedQuote)?;
    words
        .into_iter()
        .filter(|word| !word.is_empty())
        .map(|word| ElementId::new(word.to_lowercase()))
        .collect()
}
