use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cvm_test::shared_kernel;
use super::null::simulate_null;
use crate::cvm::cvm_statistic;
use crate::error::{Error, Result};
use crate::io::atomic_write;
use crate::sphere::RngStream;

/// One critical value. Asymptotic rows have no n (written as `inf`), M or
/// seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullRow {
    pub q: usize,
    pub n: Option<usize>,
    pub alpha: f64,
    pub critical_value: f64,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub seed: Option<u64>,
    /// Not part of the CSV table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
}

/// Type-7 quantile of sorted data: linear interpolation at h = (N−1)p.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Half the spread between order statistics at Np ± √(Np(1−p)).
fn quantile_se(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len() as f64;
    let d = (n * p * (1.0 - p)).sqrt();
    let at = |r: f64| sorted[(r.round().max(1.0) as usize).min(sorted.len()) - 1];
    0.5 * (at(n * p + d) - at(n * p - d))
}

/// (1−α)-quantiles of CvM_{n,q} from M uniform samples.
pub fn calibrate_critical_values(q: usize, n: usize, alphas: &[f64], m: usize, rng: RngStream) -> Result<Vec<NullRow>> {
    if m < 1000 {
        return Err(Error::domain("calibration needs M >= 1000"));
    }
    if n < 2 {
        return Err(Error::domain("calibration needs n >= 2"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {a}")));
    }
    let kernel = shared_kernel(q)?;
    let mut stats = simulate_null(q, n, m, rng, |s| cvm_statistic(s, &kernel))?;
    stats.sort_by(f64::total_cmp);
    Ok(alphas
        .iter()
        .map(|&alpha| NullRow {
            q,
            n: Some(n),
            alpha,
            critical_value: quantile_type7(&stats, 1.0 - alpha),
            m: Some(m),
            seed: Some(rng.seed),
            standard_error: Some(quantile_se(&stats, 1.0 - alpha)),
        })
        .collect())
}

const NULL_TABLE_HEADER: [&str; 6] = ["q", "n", "alpha", "critical_value", "M", "seed"];

/// CSV with header q,n,alpha,critical_value,M,seed.
pub fn render_null_table_csv(rows: &[NullRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(NULL_TABLE_HEADER)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        w.write_record([
            r.q.to_string(),
            r.n.map_or_else(|| "inf".to_string(), |n| n.to_string()),
            r.alpha.to_string(),
            r.critical_value.to_string(),
            opt(r.m.map(|v| v.to_string())),
            opt(r.seed.map(|v| v.to_string())),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Serde(e.to_string()))
}

pub fn write_null_table_csv(rows: &[NullRow], path: &Path) -> Result<()> {
    atomic_write(path, &render_null_table_csv(rows)?)
}

pub fn read_null_table_csv(path: &Path) -> Result<Vec<NullRow>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(NULL_TABLE_HEADER) {
        return Err(Error::Serde(format!("{}: unexpected null-table header", path.display())));
    }
    let bad = |v: &str| Error::Serde(format!("{}: bad field '{v}'", path.display()));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let opt = |i: usize| -> Result<Option<u64>> {
            match f(i) {
                "" | "inf" => Ok(None),
                v => v.parse().map(Some).map_err(|_| bad(v)),
            }
        };
        out.push(NullRow {
            q: f(0).parse().map_err(|_| bad(f(0)))?,
            n: opt(1)?.map(|v| v as usize),
            alpha: f(2).parse().map_err(|_| bad(f(2)))?,
            critical_value: f(3).parse().map_err(|_| bad(f(3)))?,
            m: opt(4)?.map(|v| v as usize),
            seed: opt(5)?,
            standard_error: None,
        });
    }
    Ok(out)
}
