//! Gegenbauer coefficients b_{k,q} of the kernel ψ_q and the degrees of
//! freedom d_{k,q} of the asymptotic chi-squared components.
//!
//! Three independent routes are provided:
//! - [`coef_closed_form`]: explicit expressions (a terminating ₄F₃ for q ≥ 4);
//! - [`coef_spectral`]: exact evaluation through the Jacobi operator of the
//!   Gegenbauer family C^{(q+1)/2}, cheap for any k;
//! - [`QuadratureOracle`]: direct projection of ψ_q onto Chebyshev/Gegenbauer
//!   polynomials by Gauss–Legendre quadrature.

use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use statrs::function::gamma::ln_gamma;

use crate::cvm::KernelEvaluator;
use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre, CompensatedSum};
use crate::projected::ln_beta;

/// Above this ratio of Σ|term| to |Σ term| the f64 hypergeometric sum is
/// abandoned for exact rational arithmetic.
pub const HYPERGEOMETRIC_CONDITION_LIMIT: f64 = 1e7;

fn check_kq(k: usize, q: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::domain("coefficient index k must be at least 1"));
    }
    if q < 1 {
        return Err(Error::domain("sphere dimension q must be at least 1"));
    }
    Ok(())
}

fn binomial_u128(n: u128, r: u128) -> Option<u128> {
    let r = r.min(n - r.min(n));
    let mut acc: u128 = 1;
    for i in 1..=r {
        // acc * (n - r + i) is divisible by i at every step.
        acc = acc.checked_mul(n - r + i)? / i;
    }
    Some(acc)
}

/// d_{k,q} = C(q+k−2, q−1) + C(q+k−1, q−1), exactly.
pub fn dof(k: usize, q: usize) -> Result<u128> {
    check_kq(k, q)?;
    let (k, q) = (k as u128, q as u128);
    binomial_u128(q + k - 2, q - 1)
        .and_then(|a| binomial_u128(q + k - 1, q - 1).and_then(|b| a.checked_add(b)))
        .ok_or_else(|| Error::numerical(format!("d_(k={k},q={q}) overflows 128 bits")))
}

/// d_{k,q} as a float; exact while it is below 2^53.
pub fn dof_f64(k: usize, q: usize) -> f64 {
    // C(k+q−2, q−1) = Π_{i=1}^{q−1} (k−1+i)/i and C(k+q−1, q−1) = Π (k+i)/i.
    let (kf, mut a, mut b) = (k as f64, 1.0, 1.0);
    for i in 1..q {
        let i = i as f64;
        a *= (kf - 1.0 + i) / i;
        b *= (kf + i) / i;
    }
    if a.fract() != 0.0 || b.fract() != 0.0 {
        // Rounding crept in; integers below 2^53 are exact, so round back.
        if a < 9.0e15 {
            a = a.round();
        }
        if b < 9.0e15 {
            b = b.round();
        }
    }
    a + b
}

/// b_{k,q} from its explicit expressions.
pub fn coef_closed_form(k: usize, q: usize) -> Result<f64> {
    check_kq(k, q)?;
    let kf = k as f64;
    let pi2 = PI * PI;
    let b = match q {
        1 => 1.0 / (pi2 * kf * kf),
        2 => 1.0 / (2.0 * (2.0 * kf + 3.0) * (2.0 * kf - 1.0)),
        3 if k == 1 => 35.0 / (72.0 * pi2),
        3 => {
            (3.0 * kf * kf + 6.0 * kf + 4.0)
                / (kf * kf * (kf + 1.0) * (kf + 2.0) * (kf + 2.0))
                / (2.0 * pi2)
        }
        _ => closed_form_hypergeometric(k, q)?,
    };
    Ok(b)
}

fn closed_form_hypergeometric(k: usize, q: usize) -> Result<f64> {
    let qf = q as f64;
    let kf = k as f64;
    let ln_pref = 2.0 * (qf - 1.0).ln() + (2.0 * kf + qf - 1.0).ln() + 3.0 * ln_gamma((qf - 1.0) / 2.0)
        + ln_gamma(1.5 * qf)
        - (8.0 * PI).ln()
        - 2.0 * qf.ln()
        - 3.0 * ln_gamma(qf / 2.0)
        - ln_gamma((3.0 * qf + 1.0) / 2.0);
    let series = TerminatingSeries::for_kernel(k, q).sum()?;
    let b = ln_pref.exp() * series;
    if !(b > 0.0) {
        return Err(Error::numerical(format!(
            "closed-form b_(k={k},q={q}) evaluated to non-positive {b:e}"
        )));
    }
    Ok(b)
}

/// A terminating generalized hypergeometric series pFq(a; b; 1) with
/// half-integer parameters, one upper parameter a non-positive integer.
#[derive(Debug, Clone)]
pub struct TerminatingSeries {
    /// Parameters as (numerator, denominator).
    upper: Vec<(i64, i64)>,
    lower: Vec<(i64, i64)>,
    terms: usize,
}

impl TerminatingSeries {
    /// ₄F₃(1−k, q+k, (q+1)/2, 3q/2; q+1, q/2+1, (3q+1)/2; 1).
    pub fn for_kernel(k: usize, q: usize) -> Self {
        let (k, q) = (k as i64, q as i64);
        Self {
            upper: vec![(1 - k, 1), (q + k, 1), (q + 1, 2), (3 * q, 2)],
            lower: vec![(q + 1, 1), (q + 2, 2), (3 * q + 1, 2)],
            terms: k as usize,
        }
    }

    /// Sum in f64 with per-term log-magnitude bookkeeping and compensated
    /// accumulation; ill-conditioned sums are redone exactly.
    pub fn sum(&self) -> Result<f64> {
        let (value, condition) = self.sum_f64();
        if condition <= HYPERGEOMETRIC_CONDITION_LIMIT {
            Ok(value)
        } else {
            Ok(self.sum_exact())
        }
    }

    /// Returns the f64 sum and its condition estimate Σ|t_m| / |Σ t_m|.
    pub fn sum_f64(&self) -> (f64, f64) {
        let frac = |(n, d): (i64, i64)| n as f64 / d as f64;
        let mut ln_mag = 0.0f64;
        let mut sign = 1.0f64;
        let mut acc = CompensatedSum::new();
        let mut abs_total = 0.0;
        for m in 0..self.terms {
            let t = sign * ln_mag.exp();
            acc.add(t);
            abs_total += t.abs();
            let mf = m as f64;
            let mut ratio_sign = 1.0;
            let mut ln_ratio = -(mf + 1.0).ln();
            for &p in &self.upper {
                let v = frac(p) + mf;
                ratio_sign *= v.signum();
                ln_ratio += v.abs().ln();
            }
            for &p in &self.lower {
                let v = frac(p) + mf;
                ratio_sign *= v.signum();
                ln_ratio -= v.abs().ln();
            }
            if ratio_sign == 0.0 {
                break;
            }
            sign *= ratio_sign;
            ln_mag += ln_ratio;
        }
        let value = acc.value();
        (value, abs_total / value.abs())
    }

    /// Exact rational evaluation, rounded to f64 at the end.
    pub fn sum_exact(&self) -> f64 {
        let rat = |(n, d): (i64, i64)| BigRational::new(BigInt::from(n), BigInt::from(d));
        let upper: Vec<BigRational> = self.upper.iter().copied().map(rat).collect();
        let lower: Vec<BigRational> = self.lower.iter().copied().map(rat).collect();
        let mut term = BigRational::one();
        let mut total = BigRational::zero();
        for m in 0..self.terms {
            total += &term;
            let mr = BigRational::from_integer(BigInt::from(m));
            let mut num = BigRational::one();
            for a in &upper {
                num *= a + &mr;
            }
            let mut den = BigRational::from_integer(BigInt::from(m + 1));
            for b in &lower {
                den *= b + &mr;
            }
            if num.is_zero() {
                break;
            }
            term = term * num / den;
        }
        ratio_to_f64(&total)
    }
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    // Scale so numerator and denominator both fit comfortably in f64.
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift = |x: &BigInt, bits: i64| -> f64 {
        let drop = (bits - 60).max(0) as u64;
        (x >> drop).to_f64().unwrap_or(f64::NAN) * 2f64.powi(drop as i32)
    };
    if nb < 1000 && db < 1000 {
        return shift(r.numer(), nb) / shift(r.denom(), db);
    }
    let num_drop = (nb - 60).max(0);
    let den_drop = (db - 60).max(0);
    let n = (r.numer() >> num_drop as u64).to_f64().unwrap_or(f64::NAN);
    let d = (r.denom() >> den_drop as u64).to_f64().unwrap_or(f64::NAN);
    n / d * 2f64.powi((num_drop - den_drop) as i32)
}

/// Gegenbauer coefficients b_{1,q}, …, b_{K,q} for q ≥ 2 through the
/// multiplication-by-(1−t²) operator.
///
/// b_{k,q} = D_k / (k (k+q−1) C_k^{(q−1)/2}(1) B(1/2, q/2)²), where
/// D_k = ⟨e_{k−1}, M^{q−1} e_{k−1}⟩ and M = I − J² with J the Jacobi matrix
/// of the orthonormal Gegenbauer polynomials of order (q+1)/2. Only a band
/// of width 2q around k−1 is touched, so the cost is O(q²) per k.
pub fn coef_spectral_range(q: usize, k_max: usize) -> Result<Vec<f64>> {
    if q < 2 {
        return Err(Error::domain("the spectral route needs q >= 2"));
    }
    if k_max < 1 {
        return Ok(Vec::new());
    }
    let qf = q as f64;
    let beta_sq = (2.0 * ln_beta(0.5, qf / 2.0)).exp();
    let width = q;
    let len = 2 * width + 1;
    // a(n) couples orthonormal indices n−1 and n.
    let jacobi = |n: i64| -> f64 {
        if n <= 0 {
            0.0
        } else {
            let n = n as f64;
            (n * (n + qf) / ((2.0 * n + qf + 1.0) * (2.0 * n + qf - 1.0))).sqrt()
        }
    };
    let mut v = vec![0.0; len];
    let mut tv = vec![0.0; len];
    let mut ttv = vec![0.0; len];
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let center = k as i64 - 1;
        let index = |slot: usize| center + slot as i64 - width as i64;
        v.iter_mut().for_each(|x| *x = 0.0);
        v[width] = 1.0;
        let apply_j = |src: &[f64], dst: &mut [f64]| {
            for slot in 0..len {
                let i = index(slot);
                if i < 0 {
                    dst[slot] = 0.0;
                    continue;
                }
                let up = if slot + 1 < len { jacobi(i + 1) * src[slot + 1] } else { 0.0 };
                let down = if slot >= 1 { jacobi(i) * src[slot - 1] } else { 0.0 };
                dst[slot] = up + down;
            }
        };
        for _ in 0..(q - 1) / 2 {
            apply_j(&v, &mut tv);
            apply_j(&tv, &mut ttv);
            for (x, y) in v.iter_mut().zip(&ttv) {
                *x -= y;
            }
        }
        let norm_sq: f64 = v.iter().map(|x| x * x).sum();
        let d = if q % 2 == 1 {
            norm_sq
        } else {
            apply_j(&v, &mut tv);
            norm_sq - tv.iter().map(|x| x * x).sum::<f64>()
        };
        let kf = k as f64;
        // C_k^{(q−1)/2}(1) = C(k+q−2, q−2)
        let gegen_at_one: f64 = (1..q - 1).map(|i| (kf + i as f64) / i as f64).product();
        out.push(d / (kf * (kf + qf - 1.0) * gegen_at_one * beta_sq));
    }
    Ok(out)
}

/// Single coefficient through [`coef_spectral_range`].
pub fn coef_spectral(k: usize, q: usize) -> Result<f64> {
    check_kq(k, q)?;
    Ok(coef_spectral_range(q, k)?[k - 1])
}

/// C_k^λ(x) by the three-term recurrence.
pub fn gegenbauer(k: usize, lambda: f64, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut c0 = 1.0;
    let mut c1 = 2.0 * lambda * x;
    for n in 1..k {
        let nf = n as f64;
        let c2 = (2.0 * (nf + lambda) * x * c1 - (nf + 2.0 * lambda - 1.0) * c0) / (nf + 1.0);
        c0 = c1;
        c1 = c2;
    }
    c1
}

/// Normalizing constant c_{k,q} = ∫₀^π C_k^{(q−1)/2}(cos θ)² sin^{q−1}θ dθ.
pub fn gegenbauer_norm(k: usize, q: usize) -> f64 {
    let qf = q as f64;
    let kf = k as f64;
    ((3.0 - qf) * std::f64::consts::LN_2 + PI.ln() + ln_gamma(qf + kf - 1.0)
        - (qf + 2.0 * kf - 1.0).ln()
        - ln_gamma(kf + 1.0)
        - 2.0 * ln_gamma((qf - 1.0) / 2.0))
        .exp()
}

/// b_{k,q} by Gauss–Legendre projection of ψ_q, with the node count doubled
/// from 256 until successive values agree.
pub struct QuadratureOracle {
    q: usize,
    kernel: KernelEvaluator,
    levels: Vec<OracleLevel>,
}

struct OracleLevel {
    theta: Vec<f64>,
    weight_psi: Vec<f64>,
}

impl QuadratureOracle {
    /// Supported index range.
    pub const MAX_K: usize = 50;
    const START_NODES: usize = 256;
    const MAX_LEVELS: usize = 6;
    const REL_TOL: f64 = 1e-8;

    pub fn new(q: usize, kernel: KernelEvaluator) -> Result<Self> {
        if kernel.q() != q {
            return Err(Error::domain("kernel dimension does not match q"));
        }
        Ok(Self {
            q,
            kernel,
            levels: Vec::new(),
        })
    }

    fn level(&mut self, i: usize) -> Result<&OracleLevel> {
        use rayon::prelude::*;
        while self.levels.len() <= i {
            let n = Self::START_NODES << self.levels.len();
            let (x, w) = gauss_legendre(n);
            let theta: Vec<f64> = x.iter().map(|x| 0.5 * PI * (x + 1.0)).collect();
            let psi = theta
                .par_iter()
                .map(|&t| self.kernel.psi(t))
                .collect::<Result<Vec<_>>>()?;
            let weight_psi = w.iter().zip(&psi).map(|(w, p)| 0.5 * PI * w * p).collect();
            self.levels.push(OracleLevel { theta, weight_psi });
        }
        Ok(&self.levels[i])
    }

    fn project(&mut self, k: usize, level: usize) -> Result<f64> {
        let q = self.q;
        let lvl = self.level(level)?;
        let mut acc = CompensatedSum::new();
        if q == 1 {
            for (t, wp) in lvl.theta.iter().zip(&lvl.weight_psi) {
                // T_k(cos θ) = cos(kθ)
                acc.add(wp * (k as f64 * t).cos());
            }
            Ok(2.0 / PI * acc.value())
        } else {
            let lambda = (q as f64 - 1.0) / 2.0;
            for (t, wp) in lvl.theta.iter().zip(&lvl.weight_psi) {
                acc.add(wp * gegenbauer(k, lambda, t.cos()) * t.sin().powi(q as i32 - 1));
            }
            Ok(acc.value() / gegenbauer_norm(k, q))
        }
    }

    pub fn coef(&mut self, k: usize) -> Result<f64> {
        check_kq(k, self.q)?;
        if k > Self::MAX_K {
            return Err(Error::domain(format!(
                "quadrature oracle supports k <= {} (got {k})",
                Self::MAX_K
            )));
        }
        let mut prev = self.project(k, 0)?;
        for level in 1..Self::MAX_LEVELS {
            let next = self.project(k, level)?;
            if (next - prev).abs() <= Self::REL_TOL * next.abs().max(f64::MIN_POSITIVE) {
                return Ok(next);
            }
            prev = next;
        }
        Err(Error::numerical(format!(
            "quadrature oracle for b_(k={k},q={}) did not converge",
            self.q
        )))
    }
}

/// One-shot form of [`QuadratureOracle::coef`].
pub fn coef_quadrature_oracle(k: usize, q: usize, kernel: &KernelEvaluator) -> Result<f64> {
    QuadratureOracle::new(q, kernel.clone())?.coef(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degrees_of_freedom() {
        for k in 1..50 {
            assert_eq!(dof(k, 1).unwrap(), 2);
            assert_eq!(dof(k, 2).unwrap(), 2 * k as u128 + 1);
        }
        assert_eq!(dof(1, 2).unwrap(), 3);
        assert_eq!(dof(2, 3).unwrap(), 9);
        assert!(dof(0, 3).is_err());
        // 20th Catalan-style sanity: d_{k,3} = (k+1)²
        for k in 1..100 {
            assert_eq!(dof(k, 3).unwrap(), ((k + 1) * (k + 1)) as u128);
        }
        for (k, q) in [(1usize, 10usize), (25, 10), (1000, 7), (3, 1)] {
            assert_eq!(dof_f64(k, q), dof(k, q).unwrap() as f64);
        }
        assert!(dof(100_000, 10).is_err());
        assert!(dof_f64(100_000, 10) > 1e39);
    }

    #[test]
    fn closed_forms_low_dimensions() {
        let pi2 = PI * PI;
        assert!((coef_closed_form(1, 1).unwrap() - 1.0 / pi2).abs() < 1e-16);
        assert!((coef_closed_form(2, 2).unwrap() - 1.0 / 42.0).abs() < 1e-16);
        assert!((coef_closed_form(1, 3).unwrap() - 35.0 / (72.0 * pi2)).abs() < 1e-16);
        assert!((coef_closed_form(2, 3).unwrap() - 7.0 / (96.0 * pi2)).abs() < 1e-16);
        assert!((coef_closed_form(1, 2).unwrap() - 0.1).abs() < 1e-16);
    }

    #[test]
    fn hypergeometric_paths_agree() {
        for q in 4..=10 {
            for k in 1..=12 {
                let s = TerminatingSeries::for_kernel(k, q);
                let (v, cond) = s.sum_f64();
                let exact = s.sum_exact();
                let tol = 1e-15 * cond.max(1.0) * k as f64 * 8.0;
                assert!(((v - exact) / exact).abs() < tol.max(1e-14), "q={q} k={k} cond={cond}");
            }
        }
    }

    #[test]
    fn spectral_matches_closed_forms() {
        for q in 2..=10 {
            let spec = coef_spectral_range(q, 40).unwrap();
            for (i, s) in spec.iter().enumerate() {
                let c = coef_closed_form(i + 1, q).unwrap();
                // The f64 series loses about cond·eps before the exact fallback.
                let tol = if q <= 3 { 1e-12 } else { 1e-8 };
                assert!(((s - c) / c).abs() < tol, "q={q} k={}: {s:e} vs {c:e}", i + 1);
            }
        }
    }

    #[test]
    fn spectral_matches_high_precision_reference() {
        // 50-digit evaluations of the ₄F₃ closed form.
        let cases = [
            (4usize, 25usize, 7.17731623558376e-7),
            (5, 25, 8.33421201458686e-8),
            (10, 1, 0.0105077492213645),
            (10, 25, 2.41609274152975e-11),
        ];
        for (q, k, reference) in cases {
            let s = coef_spectral(k, q).unwrap();
            assert!(((s - reference) / reference).abs() < 1e-12, "q={q} k={k}");
            let c = coef_closed_form(k, q).unwrap();
            assert!(((c - reference) / reference).abs() < 1e-12, "q={q} k={k}");
        }
    }

    #[test]
    fn gegenbauer_special_cases() {
        // λ = 1/2 gives Legendre: P_2(x) = (3x² − 1)/2
        let x: f64 = 0.3;
        assert!((gegenbauer(2, 0.5, x) - (3.0 * x * x - 1.0) / 2.0).abs() < 1e-15);
        // λ = 1 gives Chebyshev U: U_3(cos t) = sin(4t)/sin(t)
        let t: f64 = 0.7;
        assert!((gegenbauer(3, 1.0, t.cos()) - (4.0 * t).sin() / t.sin()).abs() < 1e-13);
    }

    #[test]
    fn oracle_range_is_enforced() {
        let k = KernelEvaluator::new(2).unwrap();
        let mut o = QuadratureOracle::new(2, k).unwrap();
        assert!(o.coef(51).is_err());
        assert!((o.coef(1).unwrap() - 0.1).abs() < 1e-12);
    }
}
