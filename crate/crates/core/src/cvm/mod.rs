//! The projected Cramér–von Mises statistic CvM_{n,q} in its U-statistic
//! form, Watson's U_n², and a brute-force evaluation of the defining
//! projection integral used for verification.

mod kernel;
mod oracle;

pub use kernel::{KernelEvaluator, KernelTable, DEFAULT_QUAD_TOL, TABLE_POINTS};
pub use oracle::{cvm_definition_oracle, DefinitionGrid};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::sphere::{try_pairwise_sum, DirectionalSample};

/// CvM_{n,q} = (2/n) Σ_{i<j} ψ_q(arccos X_i'X_j) + (3 − 2n)/6.
pub fn cvm_statistic(s: &DirectionalSample, kernel: &KernelEvaluator) -> Result<f64> {
    if s.q() != kernel.q() {
        return Err(Error::domain(format!(
            "sample lives on Ω_{} but the kernel is for q = {}",
            s.q(),
            kernel.q()
        )));
    }
    let n = s.n() as f64;
    let pair_sum = try_pairwise_sum(s, |c| kernel.psi_cos(c))?;
    Ok(2.0 / n * pair_sum + (3.0 - 2.0 * n) / 6.0)
}

/// Watson's h(θ) = ½(θ²/4π² − θ/2π + 1/6).
pub fn watson_h(theta: f64) -> f64 {
    let r = theta / (2.0 * PI);
    0.5 * (r * r - r + 1.0 / 6.0)
}

/// Watson's U_n² = (1/n) Σ_{i,j} h(Θ_ij) for circular positions in radians,
/// diagonal terms included.
pub fn watson_statistic(angles: &[f64]) -> Result<f64> {
    let n = angles.len();
    if n == 0 {
        return Err(Error::domain("Watson statistic needs at least one angle"));
    }
    let two_pi = 2.0 * PI;
    let mut off = CompensatedSum::new();
    for (i, &a) in angles.iter().enumerate() {
        for &b in &angles[i + 1..] {
            let d = (a - b).rem_euclid(two_pi);
            off.add(watson_h(d.min(two_pi - d)));
        }
    }
    let nf = n as f64;
    Ok(watson_h(0.0) + 2.0 * off.value() / nf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{sample_uniform, RngStream};

    #[test]
    fn single_point_gives_one_sixth() {
        for q in 1..=5 {
            let s = sample_uniform(q, 1, RngStream::new(1, q as u64)).unwrap();
            let k = KernelEvaluator::new(q).unwrap();
            assert!((cvm_statistic(&s, &k).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn two_point_arithmetic() {
        let k = KernelEvaluator::new(1).unwrap();
        let anti = DirectionalSample::from_angles(&[0.3, 0.3 + PI]).unwrap();
        assert!((cvm_statistic(&anti, &k).unwrap() - 1.0 / 12.0).abs() < 1e-12);
        let orth = DirectionalSample::from_angles(&[0.0, PI / 2.0]).unwrap();
        assert!((cvm_statistic(&orth, &k).unwrap() - 7.0 / 48.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let s = sample_uniform(2, 5, RngStream::new(1, 0)).unwrap();
        let k = KernelEvaluator::new(3).unwrap();
        assert!(matches!(cvm_statistic(&s, &k), Err(Error::Domain(_))));
    }

    #[test]
    fn watson_small_cases() {
        assert!((watson_statistic(&[1.0]).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!((watson_statistic(&[0.0, PI / 2.0]).unwrap() - 7.0 / 96.0).abs() < 1e-15);
        assert!(watson_statistic(&[]).is_err());
    }

    #[test]
    fn watson_is_rotation_invariant() {
        let a = [0.1, 1.7, 2.2, 4.0, 5.9, 6.1];
        let base = watson_statistic(&a).unwrap();
        for shift in [0.5, 2.0, 10.0, -3.0] {
            let b: Vec<f64> = a.iter().map(|x| (x + shift).rem_euclid(2.0 * PI)).collect();
            assert!((watson_statistic(&b).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_identity_with_watson() {
        // ψ_1(θ) − 2h(θ) = 1/3
        let k = KernelEvaluator::new(1).unwrap();
        for i in 0..=1000 {
            let th = PI * i as f64 / 1000.0;
            assert!((k.psi(th).unwrap() - 2.0 * watson_h(th) - 1.0 / 3.0).abs() < 1e-14);
        }
    }
}
