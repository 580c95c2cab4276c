//! Moments, sensitivity indices and level-set functionals of a TT response surface.

mod csv;
mod functional;
mod moments;
mod sobol;

pub use csv::{write_covariance, write_field, write_frequency, write_sobol};
pub use functional::{
    characteristic, max_estimate, reduce, reduce_to_grid, Characteristic, Interval, MaxEstimate, SpatialFunctional,
    CLASSIFICATION_SAMPLES,
};
pub use moments::{
    coefficient, covariance, covariance_error, mean, surface_eval, surface_grid, variance, CovarianceFactor, ThetaGrid,
    COVARIANCE_LIMIT, THETA_LIMIT,
};
pub use sobol::{sobol_index, SobolAnalysis, SobolIndex, SobolSpec, SOBOL_LIMIT};

#[cfg(test)]
mod tests;
