//! Encrypt-once private set intersection over n-sum key sets.
//!
//! Each party maps its private elements to integer omega sets, encrypts the
//! whole set once into a flat list of sum keys, and from then on any pairwise
//! comparison is an ordinary sorted-set intersection. The private inverted
//! index maps common keys back to per-element match scores in `[0, 1]`.
//! Matching is fuzzy — false positives are possible, false negatives are not
//! — and the same fuzziness is what frustrates brute-force decryption of the
//! published keys.

pub mod attack;
pub mod compare;
pub mod encrypt;
pub mod omega;
pub mod shapes;

pub use attack::{
    attack_s1, attack_s2, false_positive_rate, table_entry_estimate, AttackError, AttackResult,
    AttackScore, Candidates, SumTable, DEFAULT_TABLE_CAP,
};
pub use compare::{
    compare, intersect_keys, intersect_sorted, recover, score_elements, CompareError, MatchReport,
    DEFAULT_CONFIDENCE_THRESHOLD,
};
pub use encrypt::{
    encrypt, encrypt_parallel, key_count_bound, EncryptError, EncryptedSet, InvertedIndex,
    PrivateSet,
};
pub use omega::{
    colony_omega, grid_coords, grid_index, make_position_hash, make_position_hash_with,
    sample_synthetic_map, tokenize, ElementId, ElementMap, HashDistribution, MapError, OmegaSet,
    PositionHash,
};
pub use shapes::{
    encrypt_world, geometric_filter, geometric_filter_with_mode, psi_overlap, random_world,
    shape_score, true_intersection, write_cell_csv, CandidateGrid, FilterMode, Rect, ShapeError,
    World,
};
