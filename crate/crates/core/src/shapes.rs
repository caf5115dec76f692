//! Rectangle-world demo: two parties place colonies on a shared grid and
//! privately discover where they overlap.
//!
//! Each colony becomes an element whose omega set is the hashed values of the
//! cells it covers. After the encrypted comparison, recovered values map back
//! to candidate overlap cells; a geometric filter then strips most
//! combinatorial false positives, since genuine overlap must sit inside
//! minimum-sized rectangles.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::compare::{compare, CompareError, DEFAULT_CONFIDENCE_THRESHOLD};
use crate::encrypt::{encrypt, EncryptError, EncryptedSet, InvertedIndex, PrivateSet};
use crate::omega::{colony_omega, grid_coords, ElementId, MapError, PositionHash};

#[derive(Debug, Error)]
pub enum ShapeError {
    #[error("n_colonies must be positive")]
    NoColonies,
    #[error("colony size bounds invalid: min_dim {min_dim}, max_dim {max_dim}")]
    BadSizeBounds { min_dim: u32, max_dim: u32 },
    #[error("world_dim {world_dim} must exceed max_dim {max_dim} to keep colonies inside borders")]
    WorldTooSmall { world_dim: u32, max_dim: u32 },
    #[error(
        "placed {placed} of {requested} colonies after {attempts} attempts; \
         reduce the colony count or enlarge the world"
    )]
    PackingFailed { placed: usize, requested: usize, attempts: u64 },
    #[error("worlds have different dimensions ({a} vs {b})")]
    DimensionMismatch { a: u32, b: u32 },
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Encrypt(#[from] EncryptError),
    #[error(transparent)]
    Compare(#[from] CompareError),
}

/// An axis-aligned colony: lower corner plus extent, covering the cells
/// `x..x+width` by `y..y+height`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl Rect {
    pub fn new(x: u32, y: u32, width: u32, height: u32) -> Rect {
        Rect { x, y, width, height }
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }

    /// Covered cells, column by column.
    pub fn cells(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.width).flat_map(move |i| (0..self.height).map(move |j| (self.x + i, self.y + j)))
    }

    pub fn contains_cell(&self, cx: u32, cy: u32) -> bool {
        cx >= self.x && cx < self.x + self.width && cy >= self.y && cy < self.y + self.height
    }

    /// Overlap of covered cells, if any.
    pub fn cell_intersection(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.width).min(other.x + other.width);
        let y1 = (self.y + self.height).min(other.y + other.height);
        if x0 < x1 && y0 < y1 {
            Some(Rect::new(x0, y0, x1 - x0, y1 - y0))
        } else {
            None
        }
    }

    /// Closed-interval overlap test used during placement: touching borders
    /// count, so placed colonies are never even adjacent.
    pub fn touches(&self, other: &Rect) -> bool {
        u64::from(self.x) + u64::from(self.width) >= u64::from(other.x)
            && u64::from(self.x) <= u64::from(other.x) + u64::from(other.width)
            && u64::from(self.y) + u64::from(self.height) >= u64::from(other.y)
            && u64::from(self.y) <= u64::from(other.y) + u64::from(other.height)
    }

    /// Inside the bordered grid: coordinates start at 1 and the far edge
    /// stays within `world_dim`.
    pub fn fits_inside(&self, world_dim: u32) -> bool {
        self.x >= 1
            && self.y >= 1
            && self.width >= 1
            && self.height >= 1
            && u64::from(self.x) + u64::from(self.width) <= u64::from(world_dim)
            && u64::from(self.y) + u64::from(self.height) <= u64::from(world_dim)
    }
}

/// One party's grid world: colony placements plus the generation bounds.
#[derive(Clone, Debug)]
pub struct World {
    world_dim: u32,
    min_dim: u32,
    max_dim: u32,
    colonies: Vec<Rect>,
}

impl World {
    pub fn world_dim(&self) -> u32 {
        self.world_dim
    }

    pub fn min_dim(&self) -> u32 {
        self.min_dim
    }

    pub fn max_dim(&self) -> u32 {
        self.max_dim
    }

    pub fn colonies(&self) -> &[Rect] {
        &self.colonies
    }

    /// Grid with every colony cell flagged.
    pub fn coverage(&self) -> CandidateGrid {
        let mut grid = CandidateGrid::empty(self.world_dim);
        for colony in &self.colonies {
            for (x, y) in colony.cells() {
                grid.set(x, y, true);
            }
        }
        grid
    }
}

const PLACEMENT_ATTEMPTS_PER_COLONY: u64 = 10_000;

/// Places `n_colonies` mutually non-touching rectangles by rejection
/// sampling. Sizes are uniform in `min_dim..=max_dim`; lower corners keep a
/// `max_dim` margin from the far borders. Deterministic per seed.
pub fn random_world(
    n_colonies: usize,
    world_dim: u32,
    min_dim: u32,
    max_dim: u32,
    seed: u64,
) -> Result<World, ShapeError> {
    if n_colonies == 0 {
        return Err(ShapeError::NoColonies);
    }
    if min_dim == 0 || min_dim > max_dim {
        return Err(ShapeError::BadSizeBounds { min_dim, max_dim });
    }
    if world_dim <= max_dim {
        return Err(ShapeError::WorldTooSmall { world_dim, max_dim });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut colonies: Vec<Rect> = Vec::with_capacity(n_colonies);
    let mut total_attempts = 0u64;
    while colonies.len() < n_colonies {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS_PER_COLONY {
            total_attempts += 1;
            let candidate = Rect::new(
                rng.random_range(1..=world_dim - max_dim),
                rng.random_range(1..=world_dim - max_dim),
                rng.random_range(min_dim..=max_dim),
                rng.random_range(min_dim..=max_dim),
            );
            if colonies.iter().all(|existing| !candidate.touches(existing)) {
                colonies.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(ShapeError::PackingFailed {
                placed: colonies.len(),
                requested: n_colonies,
                attempts: total_attempts,
            });
        }
    }
    Ok(World { world_dim, min_dim, max_dim, colonies })
}

/// Per-cell boolean grid, linearized as `x + world_dim * y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateGrid {
    world_dim: u32,
    flags: Vec<bool>,
}

impl CandidateGrid {
    pub fn empty(world_dim: u32) -> CandidateGrid {
        CandidateGrid { world_dim, flags: vec![false; (world_dim as usize).pow(2)] }
    }

    pub fn world_dim(&self) -> u32 {
        self.world_dim
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        if x >= self.world_dim || y >= self.world_dim {
            return false;
        }
        self.flags[(x + self.world_dim * y) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let dim = self.world_dim;
        assert!(x < dim && y < dim, "cell ({x}, {y}) outside {dim}x{dim} grid");
        self.flags[(x + dim * y) as usize] = value;
    }

    pub fn flag_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn flagged_cells(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.flags
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(i, _)| grid_coords(self.world_dim, i as u32))
    }

    pub fn is_subset_of(&self, other: &CandidateGrid) -> bool {
        self.world_dim == other.world_dim
            && self.flags.iter().zip(&other.flags).all(|(&a, &b)| !a || b)
    }

    /// Cells flagged here but not in `other`.
    pub fn count_flagged_not_in(&self, other: &CandidateGrid) -> usize {
        self.flags.iter().zip(&other.flags).filter(|(&a, &b)| a && !b).count()
    }

    /// Plain-text portable graymap: flagged cells black on white.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> io::Result<()> {
        let dim = self.world_dim;
        writeln!(out, "P2\n{dim} {dim}\n255")?;
        for y in 0..dim {
            let row: Vec<&str> =
                (0..dim).map(|x| if self.get(x, y) { "0" } else { "255" }).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Encrypts a world's colonies under the shared position hash: colony `k`
/// becomes element `"k"` with the hashed cells it covers as omega set.
pub fn encrypt_world(
    world: &World,
    hash: &PositionHash,
    level: u8,
) -> Result<(PrivateSet, EncryptedSet, InvertedIndex), ShapeError> {
    let map = colony_omega(world.colonies(), hash)?;
    let ids: Vec<ElementId> = (1..=world.colonies().len()).map(ElementId::from).collect();
    let set = PrivateSet::resolve(&map, &ids);
    let (encrypted, index) = encrypt(&set, level)?;
    Ok((set, encrypted, index))
}

/// Runs the private comparison from `mine`'s side and flags every cell whose
/// hashed value is recovered from the key intersection. Flags over-cover the
/// true geometric intersection but never miss it when overlaps have partners
/// elsewhere on the grid.
pub fn psi_overlap(
    mine: &World,
    their_encrypted: &EncryptedSet,
    shared_hash: &PositionHash,
    level: u8,
) -> Result<CandidateGrid, ShapeError> {
    let (set, encrypted, index) = encrypt_world(mine, shared_hash, level)?;
    let report = compare(&set, &encrypted, &index, their_encrypted, DEFAULT_CONFIDENCE_THRESHOLD)?;
    let dim = shared_hash.world_dim();
    let mut grid = CandidateGrid::empty(dim);
    for &value in &report.recovered_values {
        if let Some(cell) = shared_hash.reverse(value) {
            // Recovered values come from colony cells, whose indices always
            // have coordinates; the guard covers foreign or corner indices.
            let (x, y) = grid_coords(dim, cell);
            if x < dim && y < dim {
                grid.set(x, y, true);
            }
        }
    }
    Ok(grid)
}

/// Which all-flagged regions let a candidate cell survive filtering.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FilterMode {
    /// A `min_dim` x `min_dim` all-flagged square.
    #[default]
    Square,
    /// Any all-flagged `a x b` rectangle with `a * b >= min_dim`.
    MinArea,
}

/// Strict square filter; see [`geometric_filter_with_mode`].
pub fn geometric_filter(grid: &CandidateGrid, min_dim: u32) -> CandidateGrid {
    geometric_filter_with_mode(grid, min_dim, FilterMode::Square)
}

/// Keeps a flagged cell only when it belongs to a fully flagged window of
/// the required shape. With `min_dim <= 1` every flagged cell qualifies.
pub fn geometric_filter_with_mode(
    grid: &CandidateGrid,
    min_dim: u32,
    mode: FilterMode,
) -> CandidateGrid {
    if min_dim <= 1 {
        return grid.clone();
    }
    let shapes: Vec<(u32, u32)> = match mode {
        FilterMode::Square => vec![(min_dim, min_dim)],
        FilterMode::MinArea => {
            let mut shapes: Vec<(u32, u32)> =
                (1..=min_dim).map(|a| (a, min_dim.div_ceil(a))).collect();
            shapes.dedup();
            shapes
        }
    };
    let mut survivors = CandidateGrid::empty(grid.world_dim());
    for (w, h) in shapes {
        mark_full_windows(grid, w, h, &mut survivors);
    }
    survivors
}

/// Marks in `out` every cell of every `w x h` window that is entirely
/// flagged in `grid`.
fn mark_full_windows(grid: &CandidateGrid, w: u32, h: u32, out: &mut CandidateGrid) {
    let dim = grid.world_dim();
    if w > dim || h > dim {
        return;
    }
    // Prefix sums over the flag grid so each window test is O(1).
    let stride = dim as usize + 1;
    let mut prefix = vec![0u32; stride * stride];
    for y in 0..dim as usize {
        for x in 0..dim as usize {
            let flagged = grid.get(x as u32, y as u32) as u32;
            prefix[(y + 1) * stride + x + 1] =
                prefix[y * stride + x + 1] + prefix[(y + 1) * stride + x] + flagged
                    - prefix[y * stride + x];
        }
    }
    let window_sum = |x: usize, y: usize, w: usize, h: usize| {
        prefix[(y + h) * stride + x + w] + prefix[y * stride + x]
            - prefix[y * stride + x + w]
            - prefix[(y + h) * stride + x]
    };
    let (w, h) = (w as usize, h as usize);
    for y in 0..=(dim as usize - h) {
        for x in 0..=(dim as usize - w) {
            if window_sum(x, y, w, h) == (w * h) as u32 {
                for j in 0..h {
                    for i in 0..w {
                        out.set((x + i) as u32, (y + j) as u32, true);
                    }
                }
            }
        }
    }
}

/// Ground-truth oracle: flags exactly the cells covered by a colony of each
/// world, by direct rectangle arithmetic.
pub fn true_intersection(a: &World, b: &World) -> Result<CandidateGrid, ShapeError> {
    if a.world_dim() != b.world_dim() {
        return Err(ShapeError::DimensionMismatch { a: a.world_dim(), b: b.world_dim() });
    }
    let mut grid = CandidateGrid::empty(a.world_dim());
    for mine in a.colonies() {
        for theirs in b.colonies() {
            if let Some(overlap) = mine.cell_intersection(theirs) {
                for (x, y) in overlap.cells() {
                    grid.set(x, y, true);
                }
            }
        }
    }
    Ok(grid)
}

/// Per-colony fraction of cells flagged in the filtered grid.
pub fn shape_score(world: &World, filtered: &CandidateGrid) -> Vec<f64> {
    world
        .colonies()
        .iter()
        .map(|colony| {
            let flagged = colony.cells().filter(|&(x, y)| filtered.get(x, y)).count();
            flagged as f64 / colony.area() as f64
        })
        .collect()
}

/// CSV dump of every cell: coordinates plus raw/filtered/truth flags.
pub fn write_cell_csv<W: Write>(
    mut out: W,
    raw: &CandidateGrid,
    filtered: &CandidateGrid,
    truth: &CandidateGrid,
) -> io::Result<()> {
    writeln!(out, "x,y,flagged_raw,flagged_filtered,truth")?;
    let dim = raw.world_dim();
    for y in 0..dim {
        for x in 0..dim {
            writeln!(
                out,
                "{x},{y},{},{},{}",
                u8::from(raw.get(x, y)),
                u8::from(filtered.get(x, y)),
                u8::from(truth.get(x, y)),
            )?;
        }
    }
    Ok(())
}
