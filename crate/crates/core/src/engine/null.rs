use rayon::prelude::*;

use crate::error::Result;
use crate::sphere::{sample_uniform, DirectionalSample, RngStream};

/// Which tail of the statistic counts as extreme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Upper,
    Lower,
}

/// Sorted null replicates of a statistic.
#[derive(Debug, Clone)]
pub struct NullDistribution {
    sorted: Vec<f64>,
}

impl NullDistribution {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self { sorted: values }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// (1 + #{replicates at least as extreme}) / (M + 1).
    pub fn p_value(&self, observed: f64, tail: Tail) -> f64 {
        let count = match tail {
            Tail::Upper => self.sorted.len() - self.sorted.partition_point(|v| *v < observed),
            Tail::Lower => self.sorted.partition_point(|v| *v <= observed),
        };
        (1 + count) as f64 / (self.sorted.len() + 1) as f64
    }
}

/// Evaluates `stat` on `reps` uniform samples of size n on Ω_q. Replicate i
/// uses `rng.child(i)`, so the output does not depend on thread count.
pub fn simulate_null<F>(q: usize, n: usize, reps: usize, rng: RngStream, stat: F) -> Result<Vec<f64>>
where
    F: Fn(&DirectionalSample) -> Result<f64> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|i| stat(&sample_uniform(q, n, rng.child(i as u64))?))
        .collect()
}
