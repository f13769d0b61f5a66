use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::sphere::{draw_uniform_into, sample_uniform, DirectionalSample, RngStream, UnitVector};

/// n draws from the von Mises–Fisher law with mean direction `mu` and
/// concentration `kappa` on Ω_q (Wood's rejection scheme).
pub fn sample_vmf(q: usize, n: usize, kappa: f64, mu: &UnitVector, rng: RngStream) -> Result<DirectionalSample> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::domain("kappa must be finite and non-negative"));
    }
    if mu.q() != q {
        return Err(Error::domain("mean direction has the wrong dimension"));
    }
    if kappa == 0.0 {
        return sample_uniform(q, n, rng);
    }
    let mut r = rng.rng();
    let p = (q + 1) as f64;
    let half = (p - 1.0) / 2.0;
    let b = (p - 1.0) / (2.0 * kappa + (4.0 * kappa * kappa + (p - 1.0).powi(2)).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + (p - 1.0) * (1.0 - x0 * x0).ln();
    let beta = Beta::new(half, half).map_err(|e| Error::numerical(e.to_string()))?;
    let m = mu.coords();
    let mut tangent = vec![0.0; q + 1];
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let w = loop {
            let z: f64 = beta.sample(&mut r);
            let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
            let u: f64 = r.gen();
            if kappa * w + (p - 1.0) * (1.0 - x0 * w).ln() - c >= u.ln() {
                break w;
            }
        };
        // Uniform direction orthogonal to mu.
        let v = loop {
            draw_uniform_into(&mut r, &mut tangent);
            let along: f64 = tangent.iter().zip(m).map(|(a, b)| a * b).sum();
            let mut v: Vec<f64> = tangent.iter().zip(m).map(|(t, mm)| t - along * mm).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                v.iter_mut().for_each(|x| *x /= norm);
                break v;
            }
        };
        let s = (1.0 - w * w).max(0.0).sqrt();
        rows.push(m.iter().zip(&v).map(|(mm, vv)| w * mm + s * vv).collect::<Vec<f64>>());
    }
    DirectionalSample::from_rows(&rows)
}
