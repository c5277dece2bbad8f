//! Entropy of covers for random subshifts of finite type.
//!
//! The crate works on a finite driving system `(Ω, P, θ)` and a random
//! SFT bundle over it. It computes topological cover entropy, the two
//! measure-theoretic cover entropies `h⁻` and `h⁺`, the separated-set
//! witness measures, and checks the finite-horizon identities and
//! inequalities that relate them.

pub mod base;
pub mod covercomb;
pub mod coverlat;
pub mod entropy;
mod error;
pub mod harness;
pub mod instance;
mod linalg;
pub mod measures;

pub use base::{
    admissible_words, cycle_growth_rate, validate, Adjacency, Block, Diagnostics, ProbBase,
    Symbol, SymbolicBundle, Window, Word, WordCount,
};
pub use covercomb::{cover_count, maximal_multi_separated, min_subcover_count};
pub use coverlat::{join, pullback, range_join, PositionedCover};
pub use error::{Error, Result};
pub use instance::Instance;
pub use measures::{MarkovMeasure, WordMeasure};

/// Size guards shared by the combinatorial engines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Limits {
    /// Index tuples a single join may create before empty cells are pruned.
    pub join_max: u128,
    /// Largest set-cover universe solved exactly.
    pub cover_universe_max: usize,
    /// Largest number of candidate sets (after reduction) solved exactly.
    pub cover_elems_max: usize,
    /// Largest number of product-form partitions enumerated.
    pub enum_max: u128,
    /// Longest coordinate span ever materialized.
    pub horizon_max: usize,
    /// Largest block alphabet of a power system.
    pub block_alphabet_max: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            join_max: 1_000_000,
            cover_universe_max: 4096,
            cover_elems_max: 64,
            enum_max: 100_000,
            horizon_max: 32,
            block_alphabet_max: 4096,
        }
    }
}
