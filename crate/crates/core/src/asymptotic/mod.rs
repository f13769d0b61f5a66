//! Asymptotic null distribution of CvM_{n,q}: a weighted sum of
//! independent chi-squared variables, its coefficients, Imhof tail
//! probabilities, and critical values.

pub mod coefficients;
mod imhof;
mod mixture;

pub use coefficients::{
    coef_closed_form, coef_quadrature_oracle, coef_spectral, coef_spectral_range, dof, dof_f64,
    QuadratureOracle,
};
pub use imhof::{
    critical_value, default_probability_grid, imhof_tail, truncation_error_profile, ImhofEvaluator,
    IMHOF_ABS_TOL,
};
pub use mixture::{build_mixture, load_or_build_mixture, ChiSqMixture, MIXTURE_SCHEMA_VERSION};
