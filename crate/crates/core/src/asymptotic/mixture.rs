use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::coefficients::{coef_closed_form, coef_spectral_range, dof_f64};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

pub const MIXTURE_SCHEMA_VERSION: u32 = 1;

/// Truncated null law Σ_{k≤K} w_k χ²_{d_k}.
///
/// Degrees of freedom are stored as floats: for q = 10 they pass 2^128
/// around k = 10^5. Use [`super::dof`] for exact values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSqMixture {
    pub version: u32,
    pub q: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub weights: Vec<f64>,
    pub dofs: Vec<f64>,
}

impl ChiSqMixture {
    pub fn new(q: usize, weights: Vec<f64>, dofs: Vec<f64>) -> Result<Self> {
        let m = Self {
            version: MIXTURE_SCHEMA_VERSION,
            q,
            k: weights.len(),
            weights,
            dofs,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        if self.version != MIXTURE_SCHEMA_VERSION {
            return Err(Error::Serde(format!(
                "mixture schema version {} is not supported",
                self.version
            )));
        }
        if self.weights.len() != self.k || self.dofs.len() != self.k || self.k == 0 {
            return Err(Error::domain("mixture needs K >= 1 weights and dofs"));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::domain("mixture weights must be positive and finite"));
        }
        if self.dofs.iter().any(|d| !(d.is_finite() && *d >= 1.0)) {
            return Err(Error::domain("mixture dofs must be at least 1"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    /// E[Q] = Σ w d.
    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.dofs).map(|(w, d)| w * d).collect::<CompensatedSum>().value()
    }

    /// Var[Q] = 2 Σ w² d.
    pub fn variance(&self) -> f64 {
        2.0 * self
            .weights
            .iter()
            .zip(&self.dofs)
            .map(|(w, d)| w * w * d)
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    /// First `k` components.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k {
            return Err(Error::domain(format!("cannot truncate K={} to {k}", self.k)));
        }
        Self::new(self.q, self.weights[..k].to_vec(), self.dofs[..k].to_vec())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}

/// Weights and dofs for k = 1..=K. Closed forms are used for q ≤ 3 and
/// the spectral route for q ≥ 4.
pub fn build_mixture(q: usize, k_max: usize) -> Result<ChiSqMixture> {
    if q < 1 {
        return Err(Error::domain("sphere dimension q must be at least 1"));
    }
    if k_max < 1 {
        return Err(Error::domain("truncation K must be at least 1"));
    }
    let coefs: Vec<f64> = if q <= 3 {
        (1..=k_max).map(|k| coef_closed_form(k, q)).collect::<Result<_>>()?
    } else {
        coef_spectral_range(q, k_max)?
    };
    let qf = q as f64;
    let mut weights = Vec::with_capacity(k_max);
    let mut dofs = Vec::with_capacity(k_max);
    for (i, b) in coefs.into_iter().enumerate() {
        let k = (i + 1) as f64;
        if q == 1 {
            weights.push(0.5 * b);
            dofs.push(2.0);
        } else {
            weights.push((qf - 1.0) / (qf - 1.0 + 2.0 * k) * b);
            dofs.push(dof_f64(i + 1, q));
        }
    }
    // Weights underflow for huge q and k; keep only representable ones.
    if let Some(cut) = weights.iter().position(|w| !(*w > 0.0)) {
        if cut == 0 {
            return Err(Error::numerical(format!("b_(1,{q}) is not positive")));
        }
        weights.truncate(cut);
        dofs.truncate(cut);
    }
    ChiSqMixture::new(q, weights, dofs)
}

fn cache_path(dir: &Path, q: usize, k: usize) -> PathBuf {
    dir.join(format!("mixture_q{q}_K{k}.json"))
}

/// Like [`build_mixture`], reading and writing `dir` when given. A corrupt
/// or mismatched cache file is rebuilt and replaced.
pub fn load_or_build_mixture(q: usize, k_max: usize, dir: Option<&Path>) -> Result<ChiSqMixture> {
    let Some(dir) = dir else {
        return build_mixture(q, k_max);
    };
    let path = cache_path(dir, q, k_max);
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(m) = ChiSqMixture::from_json(&text) {
            if m.q == q && m.k == k_max {
                return Ok(m);
            }
        }
    }
    let m = build_mixture(q, k_max)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(m.to_json()?.as_bytes()).map_err(|e| Error::io(&path, e))?;
    tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_approaches_one_sixth() {
        for q in [1, 2, 3, 10] {
            let m = build_mixture(q, 10_000).unwrap();
            assert!((m.mean() - 1.0 / 6.0).abs() < 2e-3, "q={q}: {}", m.mean());
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = build_mixture(7, 300).unwrap();
        let back = ChiSqMixture::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
        let bad = m.to_json().unwrap().replace("\"version\":1", "\"version\":9");
        assert!(ChiSqMixture::from_json(&bad).is_err());
    }

    #[test]
    fn huge_dofs_stay_finite() {
        let m = build_mixture(10, 100_000).unwrap();
        assert!(m.dofs.iter().all(|d| d.is_finite()));
        assert!(m.weights.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn cache_is_reused() {
        let dir = tempfile::tempdir().unwrap();
        let a = load_or_build_mixture(2, 50, Some(dir.path())).unwrap();
        let path = cache_path(dir.path(), 2, 50);
        assert!(path.exists());
        let b = load_or_build_mixture(2, 50, Some(dir.path())).unwrap();
        assert_eq!(a, b);
        std::fs::write(&path, "garbage").unwrap();
        let c = load_or_build_mixture(2, 50, Some(dir.path())).unwrap();
        assert_eq!(a, c);
    }
}
