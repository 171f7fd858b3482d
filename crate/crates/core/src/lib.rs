//! Hard instances for Hamiltonian learning from real-time evolution, an exact
//! desk-scale simulator for interleaved controlled evolution, and numerical
//! certificates for the spectral, Fourier and combinatorial facts the lower
//! bounds rest on.
//!
//! Conventions shared by every module:
//!
//! * Qubit `q` (0-based) is bit `q` of a computational-basis index, of a Pauli
//!   mask and of a Fourier subset mask.
//! * Basis index `b` corresponds to the sign vector `x` with `x_q = (-1)^(b_q)`,
//!   so `chi_S(x) = (-1)^popcount(S & b)`.
//! * Single-qubit `Y = i X Z`.

pub mod combinatorics;
pub mod error;
pub mod evolution;
pub mod fourier;
pub mod game;
pub mod linalg;
pub mod local_case;
pub mod pauli;
pub mod seeding;
pub mod subsets;
pub mod worst_case;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Guard constant used wherever a bound is only known up to an unspecified
/// `O(1)` factor. Reported alongside every ratio it gates.
pub const GUARD: f64 = 16.0;
