//! Cat-state amplification in a dispersive qubit-cavity system.
//!
//! The crate builds the joint qubit-cavity Hilbert space, the
//! Jaynes-Cummings model with its dressed states, Gaussian two-tone drive
//! schedules and a Lindblad integrator, and composes them into the
//! amplification protocol together with its shift-operator theory.

pub mod error;
pub mod hamiltonian;
pub mod hilbert;
pub mod jc_model;
pub mod lindblad;
pub mod ode;
pub mod optimize;
pub mod protocol;
pub mod pulses;
pub mod states;
pub mod units;
pub mod wigner;

pub use error::{Error, Result};
pub use hilbert::{BasisDims, DensityOp, FockKet, OpMatrix, QuantumState, C64};
pub use jc_model::DeviceParams;
