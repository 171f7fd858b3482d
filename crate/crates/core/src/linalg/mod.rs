//! Dense complex linear algebra at desk scale: Hermitian eigendecomposition by
//! cyclic Jacobi rotations, exact unitary exponentials, operator norms, and the
//! numerical checks of the diagonal-dominance perturbation bound and of the
//! derivative formula for matrix exponentials.

mod derivative;
mod eig;
mod expm;
mod matrix;
mod perturbation;

pub use derivative::{
    gauss_legendre, verify_derivative_identity, verify_derivative_identity_with, DerivativeCheck,
    DerivativeConfig,
};
pub use eig::{eig_hermitian, eigvals_hermitian, Eigh, MAX_EIG_DIM};
pub use expm::{
    block2_distance, block2_exp, expm_unitary, opnorm, opnorm_diff_exp, DiffExp,
};
pub use matrix::{mat2, mat2_opnorm, CMatrix, HermitianMatrix, Mat2, HERMITIAN_TOL};
pub use perturbation::{
    perturbation_sweep, random_zero_diagonal_hermitian, sample_gapped_diagonal, SweepConfig,
    SweepReport, SweepRow,
};
