//! Uniformity tests on the hypersphere Ω_q built around the projected
//! Cramér–von Mises statistic.
//!
//! The crate covers the statistic itself ([`cvm`]), its asymptotic null law
//! as a weighted chi-squared series with Imhof tail probabilities
//! ([`asymptotic`]), Monte Carlo calibration and the baseline tests
//! ([`engine`]), and data ingestion ([`io`]).

pub mod asymptotic;
pub mod cvm;
pub mod engine;
pub mod error;
pub mod io;
pub mod numeric;
pub mod projected;
pub mod sphere;

pub use error::{Error, Result};
pub use sphere::{DirectionalSample, RngStream, UnitVector};
