use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};

use super::null::{simulate_null, NullDistribution, Tail};
use super::{Method, TestName, TestOutcome};
use crate::asymptotic::{load_or_build_mixture, ImhofEvaluator};
use crate::cvm::{cvm_statistic, KernelEvaluator};
use crate::error::{Error, Result};
use crate::sphere::{DirectionalSample, RngStream};

/// Default truncation for asymptotic p-values.
pub const DEFAULT_K: usize = 10_000;

/// Directory for cached mixtures, read from the environment.
pub const CACHE_DIR_ENV: &str = "HYPERUNIF_CACHE_DIR";

type Cache<K, V> = OnceLock<Mutex<HashMap<K, Arc<V>>>>;

fn cached<K, V, F>(cache: &'static Cache<K, V>, key: K, build: F) -> Result<Arc<V>>
where
    K: std::hash::Hash + Eq + Copy,
    F: FnOnce() -> Result<V>,
{
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = map.lock().unwrap().get(&key) {
        return Ok(Arc::clone(v));
    }
    let v = Arc::new(build()?);
    Ok(Arc::clone(map.lock().unwrap().entry(key).or_insert(v)))
}

/// Process-wide memoized kernel for dimension q.
pub fn shared_kernel(q: usize) -> Result<Arc<KernelEvaluator>> {
    static KERNELS: Cache<usize, KernelEvaluator> = OnceLock::new();
    cached(&KERNELS, q, || KernelEvaluator::memoized(q))
}

/// Process-wide tail evaluator for the (q, K) mixture.
pub fn asymptotic_evaluator(q: usize, k: usize) -> Result<Arc<ImhofEvaluator>> {
    static EVALUATORS: Cache<(usize, usize), ImhofEvaluator> = OnceLock::new();
    cached(&EVALUATORS, (q, k), || {
        let dir = std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from);
        ImhofEvaluator::new(&load_or_build_mixture(q, k, dir.as_deref())?)
    })
}

/// Asymptotic p-value of an observed CvM_{n,q}.
pub fn cvm_pvalue_asymptotic(stat: f64, q: usize, k: usize) -> Result<f64> {
    if stat <= 0.0 {
        return Ok(1.0);
    }
    asymptotic_evaluator(q, k)?.tail(stat)
}

/// CvM test with asymptotic (truncation K) or Monte Carlo p-values.
pub fn cvm_test(
    s: &DirectionalSample,
    method: Method,
    k: usize,
    rng: RngStream,
    mc_reps: usize,
) -> Result<TestOutcome> {
    if s.n() < 2 {
        return Err(Error::domain("the CvM test needs n >= 2"));
    }
    let (q, n) = (s.q(), s.n());
    let kernel = shared_kernel(q)?;
    let stat = cvm_statistic(s, &kernel)?;
    let p_value = match method {
        Method::Asymptotic => cvm_pvalue_asymptotic(stat, q, k)?,
        Method::MonteCarlo => {
            if mc_reps < 1 {
                return Err(Error::domain("Monte Carlo needs at least one replicate"));
            }
            let null = simulate_null(q, n, mc_reps, rng, |x| cvm_statistic(x, &kernel))?;
            NullDistribution::new(null).p_value(stat, Tail::Upper)
        }
    };
    let mc = method == Method::MonteCarlo;
    Ok(TestOutcome {
        test: TestName::Cvm,
        statistic: stat,
        p_value,
        method,
        replicates: mc.then_some(mc_reps),
        k: (!mc).then_some(k),
        seed: mc.then_some(rng.seed),
        q,
        n,
        directions: None,
    })
}
