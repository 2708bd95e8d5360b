//! Discrete-time coined quantum walks on finite one-dimensional lattices.
//!
//! The crate simulates walks driven by the general `(ρ, θ, φ)` coin on
//! N-site lines (reflecting boundaries) and N-cycles (periodic boundary),
//! under either the spatial or the local direction convention. On top of
//! the simulator it certifies perfect transfer of an unknown coin qubit
//! from site 1 to the antipodal site, synthesizes the recovery coin that
//! restores the transferred state, classifies walk periodicity, and runs
//! parameter sweeps, fidelity maps and long-time peak analyses.

pub mod core;
pub mod error;
pub mod evolution;
pub mod operators;
pub mod pst;

pub use crate::core::{
    bloch_to_coin, canonical_angle, inner_product, localized_state, unitarity_residual, CoinBasis,
    CoinParameters, CoinState, DirectionConvention, Lattice, Topology, UnitaryOperator, WalkState,
};
pub use crate::error::{Error, Result};
pub use crate::evolution::{
    apply_coin, detect_periodicity, evolve, evolve_map, fidelity, n_periodicity,
    site_probability, transfer_block, PeriodicityResult, TransferBlock,
};
pub use crate::operators::{
    closed_form_recovery, coin_matrix, decompose_unitary2, phase_distance,
    recovery_from_transfer_block, shift_operator, step_operator, DecompositionResult, Matrix2,
    RecoveryCase,
};
pub use crate::pst::{
    check_pst, fidelity_map, flip_line_witness, peak_analysis, sample_bloch_states, sweep,
    verify_closed_forms, ClosedFormCheck, ClosedFormReport, FidelityMap, FlipLineWitness,
    PeakAnalysis, PstReport,
};
