//! Nonclassicality potentials of single-qubit (vacuum / one-photon) states.
//!
//! A qubit `σ(p, x)` is mixed with the vacuum on a beam splitter and the
//! entanglement, steering and Bell nonlocality of the resulting two-qubit
//! state are attributed to `σ` as its potentials. Besides the measures the
//! crate simulates the polarization-encoded linear-optics measurement of
//! that output state, reconstructs it from coincidence counts, fits it to
//! the imperfect-splitter family, and evaluates Wigner functions.
//!
//! Module map:
//!
//! * [`linalg`]: small dense complex matrices, Jacobi eigensolver, fidelity.
//! * [`states`]: `σ(p, x)`, beam-splitter outputs, reference states.
//! * [`measures`]: concurrence, steering, Bell nonlocality, potentials.
//! * [`wigner`]: displaced-parity Wigner functions on phase-space grids.
//! * [`simulator`]: optical transformation and Poisson coincidence counts.
//! * [`reconstruction`]: counts to density matrix, physicality repair.
//! * [`analysis`]: Bures fitting, fidelities, interpolation sweeps.

#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod format;
pub mod linalg;
pub mod measures;
pub mod random;
pub mod reconstruction;
pub mod simulator;
pub mod states;
pub mod wigner;

pub use error::{Error, Result};
pub use linalg::{bures_distance, fidelity, ComplexMatrix, DensityMatrix, Tolerances, C64};
pub use measures::{measure_triple, potentials, MeasureTriple};
pub use states::{BeamSplitter, QubitState};
