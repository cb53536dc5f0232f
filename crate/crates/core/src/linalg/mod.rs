//! Dense complex linear algebra for small square matrices.

pub mod branch;
pub mod eigen;
pub mod expm;
pub mod logm;
pub mod matrix;
pub mod svd;
pub mod sylvester;

pub use branch::{power_base, BranchedBase};
pub use eigen::{eigen_decomposition, eigenvalues, schur, EigenDecomposition, Schur, Spectrum};
pub use expm::{exp_frechet, exp_two_pi_i, matrix_exp};
pub use logm::{integer_separation, matrix_log_near, schlicht_radius};
pub use matrix::{ComplexMatrix, Lu};
pub use svd::{numerical_rank, singular_values};
pub use sylvester::{
    ad_matrix, ad_operator_spectrum, efsol_bound, efsolr_bound, efsolr_constant, pairwise_differences,
    sylvester_solve, AdResolvent, SylvesterSolution,
};

/// `AB − BA`.
pub fn commutator<T: crate::scalar::Real>(
    a: &ComplexMatrix<T>,
    b: &ComplexMatrix<T>,
) -> crate::error::Result<ComplexMatrix<T>> {
    a.try_commutator(b)
}
