//! Polynomial chaos expansion of a lognormal-type random coefficient.
//!
//! The coefficient `kappa(x, omega) = phi(gamma(x, omega))` is a pointwise
//! transform of a Gaussian field `gamma`. Its chaos coefficients are projected
//! onto the leading KLE modes of `kappa` and assembled into a tensor train whose
//! first block is spatial.

mod coeffs;
mod hermite;
mod kle;
mod multiindex;
mod transform;

pub use coeffs::{build_kappa_tt, sparse_pce_direct, PceEvaluator};
pub use hermite::{factorial, gauss_hermite, hermite_values, ln_factorial, triple, HermiteTools};
pub use kle::{
    discrete_kle, discrete_kle_with, trapezoid_grid, Correlation, FieldModel, KleBasis, KlePairs,
    GAMMA_PSD_TOLERANCE, PSD_TOLERANCE,
};
pub use multiindex::{binomial, MultiIndexSet, SPARSE_LIMIT};
pub use transform::{gamma_covariance, inverse_beta_reg, BetaMarginal, TransformPhi};
