use rand::Rng;
use rayon::prelude::*;

use super::null::{simulate_null, NullDistribution, Tail};
use super::{Method, TestName, TestOutcome};
use crate::error::{Error, Result};
use crate::projected::ProjectedUniform;
use crate::sphere::{dot, draw_uniform_into, DirectionalSample, RngStream, UnitVector};

pub const DEFAULT_CCF_DIRECTIONS: usize = 50;
const KOLMOGOROV_TERMS: usize = 100;

/// Directions γ_1, …, γ_k.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    directions: Vec<UnitVector>,
}

impl ProjectionSet {
    pub fn new(directions: Vec<UnitVector>) -> Result<Self> {
        let Some(first) = directions.first() else {
            return Err(Error::domain("a projection set needs at least one direction"));
        };
        if directions.iter().any(|d| d.q() != first.q()) {
            return Err(Error::domain("projection directions differ in dimension"));
        }
        Ok(Self { directions })
    }

    /// k directions drawn uniformly on Ω_q.
    pub fn draw<R: Rng + ?Sized>(q: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k < 1 {
            return Err(Error::domain("need at least one direction"));
        }
        let mut buf = vec![0.0; q + 1];
        let directions = (0..k)
            .map(|_| {
                draw_uniform_into(rng, &mut buf);
                UnitVector::normalize(buf.clone())
            })
            .collect::<Result<_>>()?;
        Self::new(directions)
    }

    pub fn k(&self) -> usize {
        self.directions.len()
    }

    pub fn q(&self) -> usize {
        self.directions[0].q()
    }

    pub fn directions(&self) -> &[UnitVector] {
        &self.directions
    }

    /// Applies a row-major (q+1)×(q+1) matrix to every direction.
    pub fn transform(&self, matrix: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = self.directions.iter().map(|d| d.coords().to_vec()).collect();
        let moved = DirectionalSample::from_rows(&rows)?.transform(matrix)?;
        Self::new(moved.to_unit_vectors())
    }
}

/// max_i max(i/n − U_(i), U_(i) − (i−1)/n) over sorted values in [0, 1].
fn ks_sorted_uniforms(u: &[f64]) -> f64 {
    let n = u.len() as f64;
    u.iter().enumerate().fold(0.0, |acc: f64, (i, &v)| {
        let i = i as f64;
        acc.max((i + 1.0) / n - v).max(v - i / n)
    })
}

fn ks_with(s: &DirectionalSample, gamma: &[f64], dist: &ProjectedUniform, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(s.points().map(|x| dist.cdf(dot(x, gamma))));
    buf.sort_by(f64::total_cmp);
    ks_sorted_uniforms(buf)
}

/// KS_{n,γ} = sup_x |F_{n,γ}(x) − F_q(x)| for the projections X_i'γ.
pub fn ks_projection_statistic(s: &DirectionalSample, gamma: &UnitVector) -> Result<f64> {
    if gamma.q() != s.q() {
        return Err(Error::domain("direction and sample dimensions differ"));
    }
    let dist = ProjectedUniform::new(s.q())?;
    Ok(ks_with(s, gamma.coords(), &dist, &mut Vec::with_capacity(s.n())))
}

/// P[K > λ] for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.0 {
        // Theta-function form, accurate where the alternating series is not.
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=KOLMOGOROV_TERMS)
            .map(|j| (-((2 * j - 1) as f64).powi(2) * c).exp())
            .sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=KOLMOGOROV_TERMS)
            .map(|j| {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * (j * j) as f64 * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// How per-direction KS p-values are obtained.
#[derive(Debug, Clone)]
pub enum KsPvalue {
    /// Kolmogorov limit at √n·stat.
    Asymptotic,
    /// Replicates of the KS statistic of n iid Uniform(0,1) values. Under
    /// the null F_q(X'γ) is exactly Uniform(0,1) for any fixed γ.
    MonteCarlo { reps: usize, rng: RngStream },
}

enum KsCalibration {
    Asymptotic(f64),
    Null(NullDistribution),
}

impl KsCalibration {
    fn new(n: usize, how: &KsPvalue) -> Result<Self> {
        Ok(match how {
            KsPvalue::Asymptotic => KsCalibration::Asymptotic((n as f64).sqrt()),
            KsPvalue::MonteCarlo { reps, rng } => KsCalibration::Null(ks_uniform_null(n, *reps, *rng)?),
        })
    }

    fn p_value(&self, stat: f64) -> f64 {
        match self {
            KsCalibration::Asymptotic(root_n) => kolmogorov_sf(root_n * stat),
            KsCalibration::Null(d) => d.p_value(stat, Tail::Upper),
        }
    }
}

fn ks_uniform_null(n: usize, reps: usize, rng: RngStream) -> Result<NullDistribution> {
    if n < 1 || reps < 1 {
        return Err(Error::domain("KS null needs n >= 1 and reps >= 1"));
    }
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.child(i as u64).rng();
            let mut u: Vec<f64> = (0..n).map(|_| r.gen::<f64>()).collect();
            u.sort_by(f64::total_cmp);
            ks_sorted_uniforms(&u)
        })
        .collect();
    Ok(NullDistribution::new(values))
}

/// p-value of a projected KS statistic.
pub fn ks_projection_pvalue(stat: f64, n: usize, how: &KsPvalue) -> Result<f64> {
    if !(stat >= 0.0) {
        return Err(Error::domain("KS statistic must be non-negative"));
    }
    if stat == 0.0 {
        return Ok(1.0);
    }
    Ok(KsCalibration::new(n, how)?.p_value(stat))
}

fn ccf_with(s: &DirectionalSample, dirs: &ProjectionSet, dist: &ProjectedUniform, cal: &KsCalibration) -> f64 {
    let mut buf = Vec::with_capacity(s.n());
    dirs.directions
        .iter()
        .map(|g| cal.p_value(ks_with(s, g.coords(), dist, &mut buf)))
        .fold(1.0, f64::min)
}

/// min over the directions of the per-direction KS p-values.
pub fn ccf_statistic(s: &DirectionalSample, dirs: &ProjectionSet, how: &KsPvalue) -> Result<f64> {
    if dirs.q() != s.q() {
        return Err(Error::domain("direction and sample dimensions differ"));
    }
    let dist = ProjectedUniform::new(s.q())?;
    Ok(ccf_with(s, dirs, &dist, &KsCalibration::new(s.n(), how)?))
}

fn direction_stream(rng: RngStream) -> RngStream {
    rng.child(u64::MAX)
}

fn ks_null_stream(rng: RngStream) -> RngStream {
    rng.child(u64::MAX - 1)
}

/// CCF test with k random directions drawn once from `rng`; the Monte
/// Carlo replicates reuse the same directions.
pub fn ccf_test(
    s: &DirectionalSample,
    k: usize,
    rng: RngStream,
    mc_reps: usize,
    per_direction: Method,
) -> Result<TestOutcome> {
    if mc_reps < 99 {
        return Err(Error::domain("CCF needs at least 99 Monte Carlo replicates"));
    }
    let (q, n) = (s.q(), s.n());
    let dirs = ProjectionSet::draw(q, k, &mut direction_stream(rng).rng())?;
    let how = match per_direction {
        Method::Asymptotic => KsPvalue::Asymptotic,
        Method::MonteCarlo => KsPvalue::MonteCarlo {
            reps: mc_reps,
            rng: ks_null_stream(rng),
        },
    };
    let cal = KsCalibration::new(n, &how)?;
    let dist = ProjectedUniform::new(q)?;
    let observed = ccf_with(s, &dirs, &dist, &cal);
    let null = simulate_null(q, n, mc_reps, rng, |x| Ok(ccf_with(x, &dirs, &dist, &cal)))?;
    Ok(TestOutcome {
        test: TestName::Ccf,
        statistic: observed,
        p_value: NullDistribution::new(null).p_value(observed, Tail::Lower),
        method: Method::MonteCarlo,
        replicates: Some(mc_reps),
        k: None,
        seed: Some(rng.seed),
        q,
        n,
        directions: Some(dirs.directions.iter().map(|d| d.coords().to_vec()).collect()),
    })
}

/// KS test along one random direction.
pub fn ks_test(s: &DirectionalSample, method: Method, rng: RngStream, mc_reps: usize) -> Result<TestOutcome> {
    let (q, n) = (s.q(), s.n());
    let dirs = ProjectionSet::draw(q, 1, &mut direction_stream(rng).rng())?;
    let stat = ks_projection_statistic(s, &dirs.directions[0])?;
    let how = match method {
        Method::Asymptotic => KsPvalue::Asymptotic,
        Method::MonteCarlo => KsPvalue::MonteCarlo { reps: mc_reps, rng },
    };
    Ok(TestOutcome {
        test: TestName::Ks,
        statistic: stat,
        p_value: ks_projection_pvalue(stat, n, &how)?,
        method,
        replicates: (method == Method::MonteCarlo).then_some(mc_reps),
        k: None,
        seed: Some(rng.seed),
        q,
        n,
        directions: Some(vec![dirs.directions[0].coords().to_vec()]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_examples() {
        // n = 2, q = 2, projections ±1 → U = {0, 1}
        let s = DirectionalSample::from_rows(&[vec![0.0, 0.0, -1.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let g = UnitVector::normalize(vec![0.0, 0.0, 1.0]).unwrap();
        assert!((ks_projection_statistic(&s, &g).unwrap() - 0.5).abs() < 1e-15);
        // n = 1
        let v: f64 = 0.3;
        let s = DirectionalSample::from_rows(&[vec![(1.0 - v * v).sqrt(), 0.0, v]]).unwrap();
        let f = 0.5 * (v + 1.0);
        assert!((ks_projection_statistic(&s, &g).unwrap() - f.max(1.0 - f)).abs() < 1e-15);
        // U at the n-quantiles (i − ½)/n
        let n = 8;
        let u: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_sorted_uniforms(&u) - 0.5 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_values() {
        assert_eq!(kolmogorov_sf(0.0), 1.0);
        assert!((kolmogorov_sf(1.358) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        // Both series forms agree near the switch.
        let a = kolmogorov_sf(0.999_999_9);
        let b = kolmogorov_sf(1.0);
        assert!((a - b).abs() < 1e-6);
        assert!((kolmogorov_sf(1.0) - 0.269_999_671_677_73).abs() < 1e-10);
    }

    #[test]
    fn mc_floor() {
        let how = KsPvalue::MonteCarlo { reps: 199, rng: RngStream::new(1, 0) };
        assert_eq!(ks_projection_pvalue(1.0, 20, &how).unwrap(), 1.0 / 200.0);
        assert_eq!(ks_projection_pvalue(0.0, 20, &how).unwrap(), 1.0);
    }
}
