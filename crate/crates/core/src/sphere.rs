//! Points on the hypersphere Ω_q ⊂ R^{q+1}, uniform sampling, and
//! pairwise great-circle angles.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Largest accepted deviation of an input vector's norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Default memory cap for materialized pairwise angles (bytes).
pub const DEFAULT_PAIRWISE_CAP_BYTES: usize = 512 << 20;

/// Surface area ω_q = 2π^{(q+1)/2} / Γ((q+1)/2) of Ω_q.
pub fn surface_area(q: usize) -> Result<f64> {
    if q < 1 {
        return Err(Error::domain("sphere dimension q must be at least 1"));
    }
    let h = (q as f64 + 1.0) / 2.0;
    Ok((std::f64::consts::LN_2 + h * std::f64::consts::PI.ln() - statrs::function::gamma::ln_gamma(h)).exp())
}

/// A point on Ω_q stored as q+1 Cartesian coordinates with unit norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes any non-zero vector of length ≥ 2.
    pub fn normalize(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::domain("a unit vector needs at least 2 coordinates"));
        }
        let norm = norm(&coords);
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::domain("cannot normalize a zero or non-finite vector"));
        }
        Ok(Self(coords.into_iter().map(|c| c / norm).collect()))
    }

    /// Accepts coordinates that are already (nearly) unit-norm.
    ///
    /// Norms off by more than [`NORM_TOLERANCE`] are rejected; smaller
    /// deviations are renormalized.
    pub fn from_unit(coords: Vec<f64>) -> Result<Self> {
        let n = norm(&coords);
        if !n.is_finite() || (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::domain(format!(
                "vector norm {n} deviates from 1 by more than {NORM_TOLERANCE}"
            )));
        }
        Self::normalize(coords)
    }

    /// Sphere dimension q (the vector has q+1 coordinates).
    pub fn q(&self) -> usize {
        self.0.len() - 1
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.0, &other.0)
    }
}

/// A sample X_1, ..., X_n on Ω_q, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalSample {
    dim: usize,
    data: Vec<f64>,
}

impl DirectionalSample {
    pub fn from_points(points: Vec<UnitVector>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::domain("a sample needs at least one point"))?;
        let dim = first.0.len();
        let mut data = Vec::with_capacity(dim * points.len());
        for (i, p) in points.iter().enumerate() {
            if p.0.len() != dim {
                return Err(Error::domain(format!(
                    "point {i} has dimension {} but the sample has {dim}",
                    p.0.len()
                )));
            }
            data.extend_from_slice(&p.0);
        }
        Ok(Self { dim, data })
    }

    /// Builds a sample from rows that are validated with [`UnitVector::from_unit`].
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let points = rows
            .iter()
            .map(|r| UnitVector::from_unit(r.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_points(points)
    }

    /// Circular sample (q = 1) from angles in radians.
    pub fn from_angles(angles: &[f64]) -> Result<Self> {
        let points = angles
            .iter()
            .map(|a| UnitVector::normalize(vec![a.cos(), a.sin()]))
            .collect::<Result<Vec<_>>>()?;
        Self::from_points(points)
    }

    pub(crate) fn from_raw(dim: usize, data: Vec<f64>) -> Self {
        debug_assert!(dim >= 2 && !data.is_empty() && data.len() % dim == 0);
        Self { dim, data }
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn q(&self) -> usize {
        self.dim - 1
    }

    /// Ambient dimension q+1.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_unit_vectors(&self) -> Vec<UnitVector> {
        self.points().map(|p| UnitVector(p.to_vec())).collect()
    }

    /// Applies a (q+1)×(q+1) row-major matrix to every point and renormalizes.
    pub fn transform(&self, matrix: &[f64]) -> Result<Self> {
        let d = self.dim;
        if matrix.len() != d * d {
            return Err(Error::domain("matrix size does not match sample dimension"));
        }
        let points = self
            .points()
            .map(|p| {
                let v = (0..d)
                    .map(|r| dot(&matrix[r * d..(r + 1) * d], p))
                    .collect();
                UnitVector::normalize(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_points(points)
    }
}

/// Seeded, reproducible random stream.
///
/// Identical `(seed, stream)` pairs reproduce identical draws; distinct
/// stream ids select independent ChaCha20 streams under the same key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Derived stream for replicate `index`, independent of scheduling.
    pub fn child(&self, index: u64) -> RngStream {
        RngStream {
            seed: splitmix64(self.seed ^ splitmix64(self.stream.wrapping_add(0x5851_F42D_4C95_7F2D))),
            stream: index,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws one uniform point on Ω_q into `out` (length q+1).
pub fn draw_uniform_into<R: rand::Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        for c in out.iter_mut() {
            *c = StandardNormal.sample(rng);
        }
        let n = norm(out);
        if n > 0.0 && n.is_finite() {
            out.iter_mut().for_each(|c| *c /= n);
            return;
        }
    }
}

/// `n` independent draws from the uniform distribution on Ω_q.
pub fn sample_uniform(q: usize, n: usize, rng: RngStream) -> Result<DirectionalSample> {
    let mut r = rng.rng();
    sample_uniform_with(q, n, &mut r)
}

pub fn sample_uniform_with<R: rand::Rng + ?Sized>(
    q: usize,
    n: usize,
    rng: &mut R,
) -> Result<DirectionalSample> {
    if q < 1 {
        return Err(Error::domain("sphere dimension q must be at least 1"));
    }
    if n < 1 {
        return Err(Error::domain("sample size n must be at least 1"));
    }
    let dim = q + 1;
    let mut data = vec![0.0; n * dim];
    for row in data.chunks_exact_mut(dim) {
        draw_uniform_into(rng, row);
    }
    Ok(DirectionalSample::from_raw(dim, data))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine of the angle between two points, clamped to [-1, 1].
#[inline]
pub fn clamped_cos(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0)
}

/// The n(n−1)/2 angles Θ_ij = arccos(X_i'X_j), i < j, in lexicographic order.
pub fn pairwise_angles(s: &DirectionalSample) -> Result<Vec<f64>> {
    pairwise_angles_capped(s, DEFAULT_PAIRWISE_CAP_BYTES)
}

/// As [`pairwise_angles`], refusing to materialize more than `cap_bytes`.
pub fn pairwise_angles_capped(s: &DirectionalSample, cap_bytes: usize) -> Result<Vec<f64>> {
    let n = s.n();
    if n < 2 {
        return Err(Error::domain("pairwise angles need n >= 2"));
    }
    let pairs = n * (n - 1) / 2;
    if pairs.saturating_mul(std::mem::size_of::<f64>()) > cap_bytes {
        return Err(Error::domain(format!(
            "{pairs} pairwise angles exceed the {cap_bytes}-byte cap; use pairwise_sum"
        )));
    }
    let rows: Vec<Vec<f64>> = (0..n - 1)
        .into_par_iter()
        .map(|i| {
            let xi = s.point(i);
            (i + 1..n).map(|j| clamped_cos(xi, s.point(j)).acos()).collect()
        })
        .collect();
    Ok(rows.concat())
}

/// Σ_{i<j} f(X_i'X_j) with the dot product clamped to [-1, 1].
///
/// Each row is summed sequentially with compensation and row totals are
/// combined in index order, so the result is bit-identical for any thread
/// count. Angles are never materialized.
pub fn pairwise_sum<F>(s: &DirectionalSample, f: F) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    try_pairwise_sum(s, |c| Ok(f(c))).expect("infallible kernel")
}

/// Fallible form of [`pairwise_sum`]; the first error aborts the sum.
pub fn try_pairwise_sum<F>(s: &DirectionalSample, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let n = s.n();
    if n < 2 {
        return Ok(0.0);
    }
    let row_sum = |i: usize| -> Result<CompensatedSum> {
        let xi = s.point(i);
        let mut acc = CompensatedSum::new();
        for j in i + 1..n {
            acc.add(f(clamped_cos(xi, s.point(j)))?);
        }
        Ok(acc)
    };
    // Small samples are dominated by scheduling overhead.
    let rows: Vec<CompensatedSum> = if n < 256 {
        (0..n - 1).map(row_sum).collect::<Result<_>>()?
    } else {
        (0..n - 1).into_par_iter().map(row_sum).collect::<Result<_>>()?
    };
    let mut total = CompensatedSum::new();
    for r in &rows {
        total.add(r.value());
    }
    Ok(total.value())
}
