//! Sparsity metrics, forward simulation, the minimum-energy baseline and the
//! exhaustive L0 oracle used to check L0/L1 equivalence on small instances.

mod baseline;
mod oracle;
mod simulate;
mod sparsity;

pub use baseline::{min_energy_baseline, EnergyBaseline};
pub use oracle::{
    l0_oracle, optimal_face_dimension, verify_equivalence, EquivalenceReport, L0Oracle,
    EXHAUSTIVE_LIMIT, MAX_STORED_WITNESSES,
};
pub use simulate::{simulate_continuous, simulate_discrete, simulate_rk4};
pub use sparsity::{sparsity, weighted_l0, SparsityReport, DEFAULT_THRESHOLD};
