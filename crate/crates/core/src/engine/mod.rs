//! Test orchestration: the CvM test, projected KS and CCF tests, the
//! Rayleigh and Giné F_n baselines, Monte Carlo calibration, and a von
//! Mises–Fisher generator for power studies.

mod calibrate;
mod classic;
mod cvm_test;
mod ks;
mod null;
mod vmf;

use serde::{Deserialize, Serialize};

pub use calibrate::{
    calibrate_critical_values, quantile_type7, read_null_table_csv, render_null_table_csv, write_null_table_csv,
    NullRow,
};
pub use classic::{gine_fn_statistic, gine_fn_test, rayleigh_statistic, rayleigh_test};
pub use cvm_test::{asymptotic_evaluator, CACHE_DIR_ENV, cvm_pvalue_asymptotic, cvm_test, shared_kernel, DEFAULT_K};
pub use ks::{
    ccf_statistic, ccf_test, kolmogorov_sf, ks_projection_pvalue, ks_projection_statistic, ks_test,
    KsPvalue, ProjectionSet, DEFAULT_CCF_DIRECTIONS,
};
pub use null::{simulate_null, NullDistribution, Tail};
pub use vmf::sample_vmf;

/// Default number of Monte Carlo replicates.
pub const DEFAULT_MC_REPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestName {
    Cvm,
    Ks,
    Ccf,
    Rayleigh,
    GineFn,
}

impl TestName {
    pub fn as_str(&self) -> &'static str {
        match self {
            TestName::Cvm => "cvm",
            TestName::Ks => "ks",
            TestName::Ccf => "ccf",
            TestName::Rayleigh => "rayleigh",
            TestName::GineFn => "gine-fn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Cvm, Self::Ks, Self::Ccf, Self::Rayleigh, Self::GineFn]
            .into_iter()
            .find(|t| t.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Asymptotic,
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Asymptotic => "asymptotic",
            Method::MonteCarlo => "monte-carlo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "asymptotic" => Some(Method::Asymptotic),
            "monte-carlo" | "mc" => Some(Method::MonteCarlo),
            _ => None,
        }
    }
}

/// Result of one test. `directions` is filled for KS and CCF only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test: TestName,
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub replicates: Option<usize>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub q: usize,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<Vec<Vec<f64>>>,
}

impl TestOutcome {
    /// Checks the field invariants.
    pub fn validate(&self) -> crate::Result<()> {
        let ok_p = (0.0..=1.0).contains(&self.p_value);
        let ok_method = match self.method {
            Method::Asymptotic => self.k.is_some() || self.test != TestName::Cvm,
            Method::MonteCarlo => self.replicates.is_some() && self.seed.is_some(),
        };
        if ok_p && ok_method {
            Ok(())
        } else {
            Err(crate::Error::domain(format!("inconsistent outcome {self:?}")))
        }
    }
}
