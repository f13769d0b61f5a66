//! The projected uniform distribution Π_q: the law of γ'U for U uniform
//! on Ω_q and any fixed unit vector γ.

use std::f64::consts::{FRAC_1_PI, PI};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const CF_MAX_ITER: usize = 2000;
const CF_EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// ln B(a, b).
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta function I_x(a, b).
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!("incomplete beta needs a, b > 0 (got {a}, {b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("incomplete beta needs 0 <= x <= 1 (got {x})")));
    }
    Ok(reg_inc_beta_unchecked(x, a, b, ln_beta(a, b)))
}

pub(crate) fn reg_inc_beta_unchecked(x: f64, a: f64, b: f64, ln_b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // The continued fraction converges fastest below the mean; use
    // I_x(a,b) = 1 - I_{1-x}(b,a) on the other side.
    if x > (a + 1.0) / (a + b + 2.0) {
        1.0 - beta_cf_scaled(1.0 - x, b, a, ln_b)
    } else {
        beta_cf_scaled(x, a, b, ln_b)
    }
}

/// x^a (1-x)^b / (a B(a,b)) times the continued fraction (modified Lentz).
fn beta_cf_scaled(x: f64, a: f64, b: f64, ln_b: f64) -> f64 {
    let front = (a * x.ln() + b * (-x).ln_1p() - ln_b).exp() / a;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    front * h
}

/// Π_q, the distribution of γ'U on [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedUniform {
    q: usize,
    ln_beta: f64,
}

impl ProjectedUniform {
    pub fn new(q: usize) -> Result<Self> {
        if q < 1 {
            return Err(Error::domain("sphere dimension q must be at least 1"));
        }
        Ok(Self {
            q,
            ln_beta: ln_beta(0.5, q as f64 / 2.0),
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// B(1/2, q/2).
    pub fn beta_norm(&self) -> f64 {
        self.ln_beta.exp()
    }

    /// F_q(x); x is clamped to [-1, 1].
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(-1.0, 1.0);
        match self.q {
            1 => 1.0 - x.acos() * FRAC_1_PI,
            2 => 0.5 * (x + 1.0),
            3 => 0.5 + (x * (1.0 - x * x).sqrt() + x.asin()) * FRAC_1_PI,
            q => {
                if x == 0.0 {
                    return 0.5;
                }
                let i = reg_inc_beta_unchecked(x * x, 0.5, q as f64 / 2.0, self.ln_beta);
                0.5 * (1.0 + x.signum() * i)
            }
        }
    }

    /// Density B(1/2, q/2)^{-1} (1 - t²)^{q/2 - 1}; +∞ at |t| = 1 when q = 1.
    pub fn pdf(&self, t: f64) -> f64 {
        if t.abs() > 1.0 {
            return 0.0;
        }
        match self.q {
            1 => {
                let s = 1.0 - t * t;
                if s <= 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / (PI * s.sqrt())
                }
            }
            2 => 0.5,
            q => ((q as f64 / 2.0 - 1.0) * (1.0 - t * t).ln() - self.ln_beta).exp(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate;

    #[test]
    fn incomplete_beta_anchors() {
        assert_eq!(reg_inc_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
        assert!((reg_inc_beta(0.5, 0.5, 0.5).unwrap() - 0.5).abs() < 1e-14);
        // I_x(1/2, 1) = √x
        for x in [0.01, 0.25, 0.5, 0.9, 0.999] {
            assert!((reg_inc_beta(x, 0.5, 1.0).unwrap() - x.sqrt()).abs() < 1e-14, "x={x}");
        }
        // I_x(1, b) = 1 - (1-x)^b
        for x in [0.1f64, 0.7] {
            assert!((reg_inc_beta(x, 1.0, 4.5).unwrap() - (1.0 - (1.0 - x).powf(4.5))).abs() < 1e-14);
        }
        assert!(reg_inc_beta(1.5, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn incomplete_beta_matches_quadrature() {
        for &(a, b) in &[(0.5, 1.5), (0.5, 2.5), (0.5, 5.0), (2.0, 3.5)] {
            let lb = ln_beta(a, b);
            for x in [0.05, 0.3, 0.6, 0.95] {
                let q = integrate(
                    |t: f64| ((a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln() - lb).exp(),
                    0.0,
                    x,
                    1e-15,
                    2000,
                )
                .unwrap();
                let v = reg_inc_beta(x, a, b).unwrap();
                assert!((v - q.value).abs() < 1e-13, "a={a} b={b} x={x}: {v} vs {}", q.value);
            }
        }
    }

    #[test]
    fn closed_form_cdfs() {
        let d2 = ProjectedUniform::new(2).unwrap();
        assert!((d2.cdf(0.5) - 0.75).abs() < 1e-15);
        let d1 = ProjectedUniform::new(1).unwrap();
        assert!((d1.cdf(0.5) - 2.0 / 3.0).abs() < 1e-15);
        for q in 1..=12 {
            let d = ProjectedUniform::new(q).unwrap();
            assert_eq!(d.cdf(0.0), 0.5);
            assert_eq!(d.cdf(-3.0), 0.0);
            assert_eq!(d.cdf(1.0), 1.0);
        }
        let d3 = ProjectedUniform::new(3).unwrap();
        let x: f64 = 0.3;
        let expect = (x * (1.0 - x * x).sqrt() + x.asin() + PI / 2.0) / PI;
        assert!((d3.cdf(x) - expect).abs() < 1e-14);
        assert!((expect - 0.688081).abs() < 1e-6);
        assert!(ProjectedUniform::new(0).is_err());
    }

    #[test]
    fn general_branch_agrees_with_closed_forms() {
        // Force the incomplete-beta route for the closed-form dimensions.
        for q in [1usize, 2, 3] {
            let d = ProjectedUniform::new(q).unwrap();
            for x in [-0.9, -0.2, 0.4, 0.99] {
                let i = reg_inc_beta(x * x, 0.5, q as f64 / 2.0).unwrap();
                let f = 0.5 * (1.0 + f64::signum(x) * i);
                assert!((d.cdf(x) - f).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn pdf_values_and_normalization() {
        assert_eq!(ProjectedUniform::new(2).unwrap().pdf(0.3), 0.5);
        assert!((ProjectedUniform::new(3).unwrap().pdf(0.0) - 2.0 / PI).abs() < 1e-14);
        let d1 = ProjectedUniform::new(1).unwrap();
        assert!((d1.pdf(0.0) - 1.0 / PI).abs() < 1e-15);
        assert_eq!(d1.pdf(1.0), f64::INFINITY);
        for q in 1..=10 {
            let d = ProjectedUniform::new(q).unwrap();
            // t = sin(φ) removes the q = 1 endpoint singularity.
            let mass = integrate(|p: f64| d.pdf(p.sin()) * p.cos(), -PI / 2.0, PI / 2.0, 1e-13, 1000)
                .unwrap()
                .value;
            assert!((mass - 1.0).abs() < 1e-10, "q={q}: {mass}");
        }
    }

    #[test]
    fn cdf_derivative_is_pdf() {
        let h = 1e-5;
        for q in 1..=10 {
            let d = ProjectedUniform::new(q).unwrap();
            for x in [-0.8, -0.3, 0.1, 0.6, 0.85] {
                let fd = (d.cdf(x + h) - d.cdf(x - h)) / (2.0 * h);
                let p = d.pdf(x);
                assert!(((fd - p) / p).abs() < 1e-6, "q={q} x={x}: {fd} vs {p}");
            }
        }
    }
}
