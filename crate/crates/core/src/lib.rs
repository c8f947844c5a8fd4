//! Single-particle dynamics of quadratic lattice models under periodic
//! resetting of part of the lattice.
//!
//! The state is tracked through the single-particle density matrix
//! `ρ_αβ = ⟨a†_α a_β⟩`. Between resets it evolves with the single-particle
//! propagator; at each reset a fixed set of entries is overwritten. The
//! remaining entries then obey an affine map whose fixed point is the
//! long-time state.

// `!(x < y)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod reset;
pub mod state;
pub mod steadystate;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
pub use model::{
    build_custom, build_open_chain, build_random, build_ring, diagonalize, Partition, QuadraticModel, Spectra,
    Statistics,
};
pub use reset::{build_map, ResetMode, ResetProtocol, StroboscopicMap};
pub use state::{thermal_spdm, Spdm};
pub use steadystate::{
    continuous_generator, fixed_point_continuous, fixed_point_discrete, map_spectrum, Classification,
    ContinuousGenerator, SolverConfig,
};
