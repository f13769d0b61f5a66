//! Direct numerical evaluation of
//! n ∫_{Ω_q} ∫ (F_{n,γ}(x) − F_q(x))² dF_q(x) ν_q(dγ)
//! for small samples on the circle and the sphere.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::projected::ProjectedUniform;
use crate::sphere::{dot, DirectionalSample};

/// Quadrature resolution over the projection directions γ.
///
/// For q = 1 only `azimuth` is used (periodic trapezoid in the angle of γ).
/// For q = 2 γ is parameterized by (z, φ) with z = cos(polar angle), so
/// ν_2(dγ) = dz dφ / 4π, and a midpoint product grid is used.
#[derive(Debug, Clone, Copy)]
pub struct DefinitionGrid {
    pub azimuth: usize,
    pub polar: usize,
}

impl Default for DefinitionGrid {
    fn default() -> Self {
        Self {
            azimuth: 1 << 16,
            polar: 1 << 10,
        }
    }
}

/// n ∫₀¹ (G_n(u) − u)² du for the empirical cdf G_n of `u` (sorted in place).
///
/// Between consecutive order statistics G_n is constant, so each piece is
/// integrated exactly.
fn projected_cvm(u: &mut [f64]) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let cube = |x: f64| x * x * x;
    let mut lo = 0.0;
    let mut acc = 0.0;
    for (i, &hi) in u.iter().chain(std::iter::once(&1.0)).enumerate() {
        let level = i as f64 / n;
        acc += (cube(level - lo) - cube(level - hi)) / 3.0;
        lo = hi;
    }
    n * acc
}

pub fn cvm_definition_oracle(s: &DirectionalSample, grid: DefinitionGrid) -> Result<f64> {
    let dist = ProjectedUniform::new(s.q())?;
    let n = s.n();
    let mut u = vec![0.0; n];
    let eval = |gamma: &[f64], u: &mut Vec<f64>| {
        for (slot, x) in u.iter_mut().zip(s.points()) {
            *slot = dist.cdf(dot(x, gamma));
        }
        projected_cvm(u)
    };
    match s.q() {
        1 => {
            let m = grid.azimuth.max(8);
            let mut acc = 0.0;
            for j in 0..m {
                let phi = 2.0 * PI * j as f64 / m as f64;
                acc += eval(&[phi.cos(), phi.sin()], &mut u);
            }
            Ok(acc / m as f64)
        }
        2 => {
            let nz = grid.polar.max(8);
            let nphi = (2 * grid.polar).max(8);
            let mut acc = 0.0;
            for iz in 0..nz {
                let z = -1.0 + (2.0 * iz as f64 + 1.0) / nz as f64;
                let r = (1.0 - z * z).sqrt();
                let mut ring = 0.0;
                for ip in 0..nphi {
                    let phi = 2.0 * PI * (ip as f64 + 0.5) / nphi as f64;
                    ring += eval(&[r * phi.cos(), r * phi.sin(), z], &mut u);
                }
                acc += ring / nphi as f64;
            }
            Ok(acc / nz as f64)
        }
        q => Err(Error::Unsupported(format!(
            "definition oracle is implemented for q = 1, 2 only (got q = {q})"
        ))),
    }
}
