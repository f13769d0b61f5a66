//! The pairwise kernel ψ_q of the projected Cramér–von Mises statistic.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::integrate_breaks;
use crate::projected::ProjectedUniform;

/// Default absolute tolerance for the q ≥ 4 quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// Number of θ-grid points in a memoized kernel table.
pub const TABLE_POINTS: usize = 4096;

const MAX_PANELS: usize = 4000;

// Below this distance from π, (π−θ)·tan(θ/2) is replaced by its limit 2.
const PI_LIMIT_BAND: f64 = 1e-8;

/// Evaluates ψ_q(θ) for a fixed dimension q.
#[derive(Debug, Clone)]
pub struct KernelEvaluator {
    q: usize,
    quad_tol: f64,
    dist: ProjectedUniform,
    dist_lower: Option<ProjectedUniform>,
    table: Option<Arc<KernelTable>>,
}

impl KernelEvaluator {
    pub fn new(q: usize) -> Result<Self> {
        Self::with_tolerance(q, DEFAULT_QUAD_TOL)
    }

    pub fn with_tolerance(q: usize, quad_tol: f64) -> Result<Self> {
        if !(quad_tol > 0.0) {
            return Err(Error::domain("quadrature tolerance must be positive"));
        }
        let dist = ProjectedUniform::new(q)?;
        let dist_lower = if q >= 4 {
            Some(ProjectedUniform::new(q - 1)?)
        } else {
            None
        };
        Ok(Self {
            q,
            quad_tol,
            dist,
            dist_lower,
            table: None,
        })
    }

    /// Evaluator that answers q ≥ 4 queries from a cubic-interpolated table.
    /// For q ≤ 3 the closed forms are already cheap and no table is built.
    pub fn memoized(q: usize) -> Result<Self> {
        let mut k = Self::new(q)?;
        if q >= 4 {
            k.table = Some(Arc::new(KernelTable::build(&k, TABLE_POINTS)?));
        }
        Ok(k)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    pub fn is_memoized(&self) -> bool {
        self.table.is_some()
    }

    /// ψ_q(θ) for θ ∈ [0, π]. Always computed directly, never from the table.
    pub fn psi(&self, theta: f64) -> Result<f64> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::domain(format!("angle {theta} outside [0, π]")));
        }
        match self.q {
            1 => Ok(psi1(theta)),
            2 => Ok(0.5 - 0.25 * (0.5 * theta).sin()),
            3 => {
                let half_sin = (0.5 * theta).sin();
                Ok(psi3(theta, PI - theta, half_sin * half_sin))
            }
            _ => self.psi_quadrature(theta),
        }
    }

    /// ψ_q(arccos c), using the memo table when present.
    #[inline]
    pub fn psi_cos(&self, c: f64) -> Result<f64> {
        let c = c.clamp(-1.0, 1.0);
        match self.q {
            1 => Ok(psi1(c.acos())),
            // sin(θ/2) = √((1 − cos θ)/2)
            2 => Ok(0.5 - 0.25 * (0.5 * (1.0 - c)).sqrt()),
            // π − arccos(c) = arccos(−c) keeps precision near θ = π.
            3 => Ok(psi3(c.acos(), (-c).acos(), 0.5 * (1.0 - c))),
            _ => match &self.table {
                Some(t) => Ok(t.eval(c.acos())),
                None => self.psi_quadrature(c.acos()),
            },
        }
    }

    /// −3/4 + θ/2π + 2F_q(cos(θ/2))² − 4∫₀^{cos(θ/2)} F_q(t) F_{q−1}(t tan(θ/2)/√(1−t²)) dF_q(t).
    ///
    /// The integral is taken over s = t·tan(θ/2)/√(1−t²) ∈ [0, 1], where
    /// t = s/√(s²+T²) with T = tan(θ/2). Then dF_q(t) = r^q/(B √(s²+T²)) ds
    /// with r = T/√(s²+T²) and B = B(1/2, q/2).
    fn psi_quadrature(&self, theta: f64) -> Result<f64> {
        let fq = &self.dist;
        let flow = self.dist_lower.as_ref().expect("q >= 4 has a lower projected law");
        if theta == 0.0 {
            return Ok(0.5);
        }
        if PI - theta <= 0.0 {
            return Ok(0.25);
        }
        let half = 0.5 * theta;
        let c = half.cos();
        let tan_half = half.tan();
        let q = self.q as i32;
        let inv_beta = 1.0 / fq.beta_norm();
        let integrand = |s: f64| {
            let rho = s.hypot(tan_half);
            let t = s / rho;
            let r = tan_half / rho;
            fq.cdf(t) * flow.cdf(s) * r.powi(q) * inv_beta / rho
        };
        // For small θ the mass sits at s ~ T and decays like (T/s)^{q+1};
        // geometric breakpoints keep every panel's scale visible.
        let mut breaks = vec![0.0];
        let mut b = tan_half;
        while b < 1.0 {
            breaks.push(b);
            b *= 4.0;
        }
        breaks.push(1.0);
        let integral = integrate_breaks(integrand, &breaks, 0.25 * self.quad_tol, MAX_PANELS)
            .map_err(|e| Error::numerical(format!("psi_{}({theta}): {e}", self.q)))?
            .value;
        let fc = fq.cdf(c);
        Ok(-0.75 + theta / (2.0 * PI) + 2.0 * fc * fc - 4.0 * integral)
    }
}

#[inline]
fn psi1(theta: f64) -> f64 {
    let r = theta / (2.0 * PI);
    0.5 + r * (r - 1.0)
}

/// ψ_3 given θ, π − θ, and sin²(θ/2).
#[inline]
fn psi3(theta: f64, pi_minus: f64, half_sin_sq: f64) -> f64 {
    // (π−θ)·tan(θ/2) = e / tan(e/2) with e = π − θ; limit 2 as e → 0 with zero slope.
    let prod = if pi_minus < PI_LIMIT_BAND {
        2.0 - pi_minus * pi_minus / 6.0
    } else {
        pi_minus / (0.5 * pi_minus).tan()
    };
    psi1(theta) + (prod - 2.0 * half_sin_sq) / (4.0 * PI * PI)
}

/// ψ_q sampled on an equispaced θ-grid over [0, π], interpolated with
/// four-point Lagrange cubics.
#[derive(Debug)]
pub struct KernelTable {
    step: f64,
    values: Vec<f64>,
}

impl KernelTable {
    pub fn build(kernel: &KernelEvaluator, points: usize) -> Result<Self> {
        use rayon::prelude::*;
        if points < 4 {
            return Err(Error::domain("kernel table needs at least 4 points"));
        }
        let step = PI / (points - 1) as f64;
        let values = (0..points)
            .into_par_iter()
            .map(|i| kernel.psi((i as f64 * step).min(PI)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { step, values })
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let last = self.values.len() - 1;
        let x = (theta / self.step).clamp(0.0, last as f64);
        let i = (x.floor() as usize).clamp(1, last - 2) - 1;
        let u = x - i as f64;
        let [y0, y1, y2, y3] = [
            self.values[i],
            self.values[i + 1],
            self.values[i + 2],
            self.values[i + 3],
        ];
        // Lagrange basis on nodes 0, 1, 2, 3.
        let l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
        let l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
        let l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
        let l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
        y0 * l0 + y1 * l1 + y2 * l2 + y3 * l3
    }
}
