// Copyright 2026 Handsoff Contributors
// SPDX-License-Identifier: Apache-2.0

//! Maximum hands-off control toolkit.
//!
//! Computes the sparsest admissible control driving an LTI plant to the
//! origin by solving the equivalent weighted-L1 (fuel-optimal) problem,
//! verifies the bang-off-bang structure of the result, packs the
//! switching signal into a compact bitstream for transmission, and
//! simulates the resulting networked loop over a lossy channel.
//!
//! Modules:
//! - [`model`]: exact linear-systems kernel (expm, ZOH, controllability,
//!   eigenvalues, propagation).
//! - [`solver`]: discretized reachability program, weighted-L1 solve,
//!   feasibility and minimum-time search, plus the exhaustive
//!   bang-off-bang oracle.
//! - [`structure`]: run-length switching signals, structural checks,
//!   theoretical bit budgets.
//! - [`codec`]: the bit-exact `.hoc` packet format.
//! - [`netsim`]: closed networked loop over a lossy channel.

pub mod codec;
pub mod model;
pub mod netsim;
pub mod solver;
pub mod structure;

pub use codec::{decode, encode, CodecError, EncodedControl};
pub use model::{
    discretize_zoh, expm, is_controllable, propagate_segment, spectral_info, DiscretizedSystem,
    ModelError, PlantModel, SpectralInfo,
};
pub use netsim::{run_closed_loop, sweep_bits, ChannelModel, SimConfig, SimError, SimTrace};
pub use solver::{
    build_reachability, check_feasible, l0_measure, l0_measure_per_channel, minimum_time,
    oracle_bang_off_bang, solve_l1, AdmmSettings, ControlProblem, OracleResult, SolveResult,
    SolveStatus, SolverError,
};
pub use structure::{
    extract_switching, theoretical_bits, verify_structure, ChannelSignal, StructureError,
    StructureReport, SwitchEvent, SwitchingSignal, Ternary,
};
