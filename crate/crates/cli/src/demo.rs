//! End-to-end rectangle-world demo: generate two private worlds over a shared
//! position hash, run the encrypted comparison from one side, filter the
//! candidates geometrically, and brute-force the counterparty's published
//! keys for contrast.

use nsum_psi::{
    attack_s2, encrypt_world, geometric_filter, grid_coords, make_position_hash_with,
    psi_overlap, shape_score, true_intersection, AttackError, CandidateGrid, HashDistribution,
    MapError, PositionHash, ShapeError, SumTable, World, DEFAULT_TABLE_CAP,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Attack(#[from] AttackError),
}

#[derive(Clone, Debug)]
pub struct DemoConfig {
    pub n_colonies: usize,
    pub world_dim: u32,
    pub min_dim: u32,
    pub max_dim: u32,
    pub i_max: u64,
    pub level: u8,
    pub seed: u64,
    /// Hash value distribution; the edge-weighted mode flattens the pair-sum
    /// spectrum for side-by-side comparison.
    pub distribution: HashDistribution,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            n_colonies: 10,
            world_dim: 50,
            min_dim: 5,
            max_dim: 10,
            i_max: 100_000_000,
            level: 2,
            seed: 1,
            distribution: HashDistribution::Uniform,
        }
    }
}

pub struct DemoArtifacts {
    pub raw: CandidateGrid,
    pub filtered: CandidateGrid,
    pub truth: CandidateGrid,
    /// Grid view of a brute-force attack on the counterparty's keys; empty
    /// unless the level is 2 (the only tabulated attack).
    pub attack: CandidateGrid,
    pub colony_scores: Vec<f64>,
    pub my_world: World,
    pub their_world: World,
    pub hash: PositionHash,
}

/// Runs the whole demo pipeline. Worlds derive their seeds from the config
/// seed, so a fixed seed reproduces every artifact byte for byte.
pub fn run_demo(cfg: &DemoConfig) -> Result<DemoArtifacts, DemoError> {
    let hash = make_position_hash_with(cfg.world_dim, cfg.i_max, cfg.seed, cfg.distribution)?;
    let my_world = nsum_psi::random_world(
        cfg.n_colonies,
        cfg.world_dim,
        cfg.min_dim,
        cfg.max_dim,
        cfg.seed.wrapping_add(1),
    )?;
    let their_world = nsum_psi::random_world(
        cfg.n_colonies,
        cfg.world_dim,
        cfg.min_dim,
        cfg.max_dim,
        cfg.seed.wrapping_add(2),
    )?;

    let (_, their_encrypted, _) = encrypt_world(&their_world, &hash, cfg.level)?;
    let raw = psi_overlap(&my_world, &their_encrypted, &hash, cfg.level)?;
    let filtered = geometric_filter(&raw, cfg.min_dim);
    let truth = true_intersection(&my_world, &their_world)?;
    let colony_scores = shape_score(&my_world, &filtered);

    let attack = if cfg.level == 2 {
        let table = SumTable::from_hash(&hash, DEFAULT_TABLE_CAP)?;
        let result = attack_s2(&their_encrypted, &table)?;
        let mut grid = CandidateGrid::empty(cfg.world_dim);
        for id in result.candidates.known() {
            if let Ok(cell) = id.as_str().parse::<u32>() {
                // The top hashed index (dim^2) has no (x, y) under the
                // x + dim*y linearization; no colony cell lives there.
                let (x, y) = grid_coords(cfg.world_dim, cell);
                if x < cfg.world_dim && y < cfg.world_dim {
                    grid.set(x, y, true);
                }
            }
        }
        grid
    } else {
        CandidateGrid::empty(cfg.world_dim)
    };

    Ok(DemoArtifacts {
        raw,
        filtered,
        truth,
        attack,
        colony_scores,
        my_world,
        their_world,
        hash,
    })
}
