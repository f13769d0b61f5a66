use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use super::null::{simulate_null, NullDistribution, Tail};
use super::{Method, TestName, TestOutcome};
use crate::error::{Error, Result};
use crate::sphere::{pairwise_sum, DirectionalSample, RngStream};

/// R = (q+1) n ‖X̄‖².
pub fn rayleigh_statistic(s: &DirectionalSample) -> f64 {
    let n = s.n() as f64;
    let mut mean = vec![0.0; s.dim()];
    for x in s.points() {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    let norm_sq: f64 = mean.iter().map(|m| (m / n) * (m / n)).sum();
    (s.q() as f64 + 1.0) * n * norm_sq
}

fn monte_carlo<F>(s: &DirectionalSample, rng: RngStream, reps: usize, observed: f64, stat: F) -> Result<f64>
where
    F: Fn(&DirectionalSample) -> Result<f64> + Sync,
{
    if reps < 1 {
        return Err(Error::domain("Monte Carlo needs at least one replicate"));
    }
    let null = simulate_null(s.q(), s.n(), reps, rng, stat)?;
    Ok(NullDistribution::new(null).p_value(observed, Tail::Upper))
}

/// Rayleigh test; asymptotically χ²_{q+1}.
pub fn rayleigh_test(s: &DirectionalSample, method: Method, rng: RngStream, mc_reps: usize) -> Result<TestOutcome> {
    if s.n() < 2 {
        return Err(Error::domain("the Rayleigh test needs n >= 2"));
    }
    let stat = rayleigh_statistic(s);
    let p_value = match method {
        Method::Asymptotic => ChiSquared::new(s.q() as f64 + 1.0)
            .map_err(|e| Error::numerical(e.to_string()))?
            .sf(stat),
        Method::MonteCarlo => monte_carlo(s, rng, mc_reps, stat, |x| Ok(rayleigh_statistic(x)))?,
    };
    let mc = method == Method::MonteCarlo;
    Ok(TestOutcome {
        test: TestName::Rayleigh,
        statistic: stat,
        p_value,
        method,
        replicates: mc.then_some(mc_reps),
        k: None,
        seed: mc.then_some(rng.seed),
        q: s.q(),
        n: s.n(),
        directions: None,
    })
}

/// F_n = 4 A_n + G_n with
/// A_n = n/4 − (1/(nπ)) Σ_{i<j} Θ_ij and
/// G_n = n/2 − ((q−1)/(2n)) [Γ((q−1)/2)/Γ(q/2)]² Σ_{i<j} sin Θ_ij.
pub fn gine_fn_statistic(s: &DirectionalSample) -> Result<f64> {
    let q = s.q();
    if q < 2 {
        return Err(Error::Unsupported("Giné's G_n needs q >= 2".into()));
    }
    let n = s.n() as f64;
    let qf = q as f64;
    let theta_sum = pairwise_sum(s, f64::acos);
    let sin_sum = pairwise_sum(s, |c| (1.0 - c * c).max(0.0).sqrt());
    let ratio = (ln_gamma((qf - 1.0) / 2.0) - ln_gamma(qf / 2.0)).exp();
    let a_n = n / 4.0 - theta_sum / (n * std::f64::consts::PI);
    let g_n = n / 2.0 - (qf - 1.0) / (2.0 * n) * ratio * ratio * sin_sum;
    Ok(4.0 * a_n + g_n)
}

/// Giné F_n test, Monte Carlo p-values only.
pub fn gine_fn_test(s: &DirectionalSample, rng: RngStream, mc_reps: usize) -> Result<TestOutcome> {
    if s.n() < 2 {
        return Err(Error::domain("the Giné test needs n >= 2"));
    }
    let stat = gine_fn_statistic(s)?;
    Ok(TestOutcome {
        test: TestName::GineFn,
        statistic: stat,
        p_value: monte_carlo(s, rng, mc_reps, stat, gine_fn_statistic)?,
        method: Method::MonteCarlo,
        replicates: Some(mc_reps),
        k: None,
        seed: Some(rng.seed),
        q: s.q(),
        n: s.n(),
        directions: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rayleigh_examples() {
        let rows = vec![vec![0.0, 1.0, 0.0]; 7];
        let s = DirectionalSample::from_rows(&rows).unwrap();
        assert!((rayleigh_statistic(&s) - 21.0).abs() < 1e-12);
        let s = DirectionalSample::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 0.6, 0.8],
            vec![0.0, -0.6, -0.8],
        ])
        .unwrap();
        let t = rayleigh_test(&s, Method::Asymptotic, RngStream::new(0, 0), 0).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn gine_examples() {
        // Two antipodal points on Ω_2: A_2 = 2/4 − π/(2π) = 0, sin Θ = 0.
        let s = DirectionalSample::from_rows(&[vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]]).unwrap();
        assert!((gine_fn_statistic(&s).unwrap() - 1.0).abs() < 1e-12);
        let c = DirectionalSample::from_angles(&[0.0, 1.0]).unwrap();
        assert!(matches!(gine_fn_statistic(&c), Err(Error::Unsupported(_))));
    }
}
