//! Tail probabilities of Σ w_k χ²_{d_k} by numerical Fourier inversion:
//!
//! P[Q > x] = 1/2 + (1/π) ∫₀^∞ sin θ(u) / (u ρ(u)) du,
//! θ(u) = ½ Σ d_k atan(w_k u) − x u / 2,  ρ(u) = Π (1 + w_k² u²)^{d_k/4}.
//!
//! Both x-free parts, A(u) = ½ Σ d_k atan(w_k u) and 1/(u ρ(u)), are
//! tabulated once per mixture on Gauss–Kronrod nodes, so each tail costs
//! one sine per node. Components with w_k u small enter through power
//! series in precomputed suffix sums Σ d_k w_k^p.
//!
//! Mixtures with only a few components (a lone χ²_1, say) have an integrand
//! that decays too slowly for a plain cut at U. For those the tail beyond U
//! is taken from two integrations by parts against the oscillating phase,
//! with U chosen per x.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use super::mixture::{build_mixture, ChiSqMixture};
use crate::error::{Error, Result};
use crate::numeric::{brent, WG, WGK, XGK};

/// Absolute accuracy targeted for every tail probability.
pub const IMHOF_ABS_TOL: f64 = 1e-8;

/// Share of [`IMHOF_ABS_TOL`] spent on cutting the integral at U.
const TRUNCATION_BUDGET: f64 = 1e-9;
const SERIES_CUT: f64 = 0.1;
const SERIES_POWERS: usize = 16;
const MAX_LEVELS: usize = 9;
const MAX_PANELS: usize = 1 << 22;

struct Level {
    // Per node: u, Kronrod weight × g(u), Gauss weight × g(u), A(u).
    u: Vec<f64>,
    wk_g: Vec<f64>,
    wg_g: Vec<f64>,
    a: Vec<f64>,
}

/// Reusable tail evaluator for one mixture.
pub struct ImhofEvaluator {
    weights: Vec<f64>,
    dofs: Vec<f64>,
    // suffix[j][p−1] = Σ_{k ≥ j} d_k w_k^p over the sorted components.
    suffix: Vec<[f64; SERIES_POWERS]>,
    mean: f64,
    sd: f64,
    upper: f64,
    truncation: f64,
    base_panels: usize,
    total_dof: f64,
    oscillatory: bool,
    levels: Mutex<Vec<Arc<Level>>>,
}

impl ImhofEvaluator {
    pub fn new(mixture: &ChiSqMixture) -> Result<Self> {
        let mut order: Vec<usize> = (0..mixture.len()).collect();
        order.sort_by(|&a, &b| mixture.weights[b].total_cmp(&mixture.weights[a]));
        let weights: Vec<f64> = order.iter().map(|&i| mixture.weights[i]).collect();
        let dofs: Vec<f64> = order.iter().map(|&i| mixture.dofs[i]).collect();
        let mut suffix = vec![[0.0; SERIES_POWERS]; weights.len() + 1];
        for j in (0..weights.len()).rev() {
            let mut row = suffix[j + 1];
            let mut power = dofs[j];
            for slot in row.iter_mut() {
                power *= weights[j];
                *slot += power;
            }
            suffix[j] = row;
        }
        let mut ev = Self {
            weights,
            dofs,
            suffix,
            mean: mixture.mean(),
            sd: mixture.sd(),
            upper: 0.0,
            truncation: 0.0,
            base_panels: 0,
            total_dof: mixture.dofs.iter().sum(),
            oscillatory: false,
            levels: Mutex::new(Vec::new()),
        };
        ev.choose_upper_limit()?;
        Ok(ev)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    /// Upper integration limit and the bound on the neglected tail.
    pub fn upper_limit(&self) -> (f64, f64) {
        (self.upper, self.truncation)
    }

    /// (A(u), ln ρ(u))
    fn phase_and_log_modulus(&self, u: f64) -> (f64, f64) {
        let j = self.weights.partition_point(|w| w * u >= SERIES_CUT);
        let mut a = 0.0;
        let mut ln_rho = 0.0;
        for (w, d) in self.weights[..j].iter().zip(&self.dofs[..j]) {
            let z = w * u;
            a += 0.5 * d * z.atan();
            ln_rho += 0.25 * d * (z * z).ln_1p();
        }
        let s = &self.suffix[j];
        let u2 = u * u;
        // atan z = Σ (−1)^m z^{2m+1}/(2m+1); ln(1+z²) = Σ (−1)^{m+1} z^{2m}/m
        let mut upow = u;
        let mut sign = 1.0;
        for m in 0..SERIES_POWERS / 2 {
            let odd = 2 * m + 1;
            a += 0.5 * sign * upow * s[odd - 1] / odd as f64;
            upow *= u;
            ln_rho += 0.25 * sign * upow * s[odd] / (m + 1) as f64;
            upow = upow / u * u2;
            sign = -sign;
        }
        (a, ln_rho)
    }

    fn log_truncation_bound(&self, u: f64) -> f64 {
        let (_, ln_rho) = self.phase_and_log_modulus(u);
        let mut best = f64::INFINITY;
        let mut s = 0.0;
        let mut ln_c = 0.0;
        for (w, d) in self.weights.iter().zip(&self.dofs).take(64) {
            s += 0.5 * d;
            ln_c += 0.25 * d * (1.0 / (w * w * u * u)).ln_1p();
            best = best.min(ln_c - (PI * s).ln() - ln_rho);
        }
        best
    }

    fn choose_upper_limit(&mut self) -> Result<()> {
        let target = TRUNCATION_BUDGET.ln();
        let mut u = 1.0 / self.weights[0];
        let mut guard = 0;
        while self.log_truncation_bound(u) > target {
            u *= 2.0;
            guard += 1;
            if guard > 200 {
                self.oscillatory = true;
                return Ok(());
            }
        }
        // Tighten: bisect down between u/2 and u.
        let (mut lo, mut hi) = (0.5 * u, u);
        if guard > 0 {
            for _ in 0..30 {
                let mid = 0.5 * (lo + hi);
                if self.log_truncation_bound(mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        self.upper = hi;
        self.truncation = self.log_truncation_bound(hi).exp();
        let x_hint = self.mean + 12.0 * self.sd;
        let phase = 0.5 * hi * (self.mean + x_hint);
        self.base_panels = (phase.ceil() as usize).max(32);
        self.oscillatory = self.base_panels > MAX_PANELS >> 4;
        Ok(())
    }

    fn level(&self, i: usize) -> Result<Arc<Level>> {
        if let Some(l) = self.levels.lock().unwrap().get(i) {
            return Ok(Arc::clone(l));
        }
        let panels = self.base_panels << i;
        if panels > MAX_PANELS {
            return Err(Error::numerical(format!(
                "Imhof quadrature needs more than {MAX_PANELS} panels on [0, {:e}]; \
                 the mixture has too few components for its integrand to decay",
                self.upper
            )));
        }
        let level = Arc::new(self.build_level(self.upper, panels));
        let mut levels = self.levels.lock().unwrap();
        while levels.len() <= i {
            // Another thread may have filled lower levels meanwhile.
            if levels.len() == i {
                levels.push(Arc::clone(&level));
            } else {
                drop(levels);
                self.level(i - 1)?;
                levels = self.levels.lock().unwrap();
            }
        }
        Ok(Arc::clone(&levels[i]))
    }

    fn build_level(&self, upper: f64, panels: usize) -> Level {
        let n = panels * 21;
        let mut level = Level {
            u: Vec::with_capacity(n),
            wk_g: Vec::with_capacity(n),
            wg_g: Vec::with_capacity(n),
            a: Vec::with_capacity(n),
        };
        let width = upper / panels as f64;
        for p in 0..panels {
            let center = (p as f64 + 0.5) * width;
            let half = 0.5 * width;
            for j in 0..21 {
                let (offset, wk, wg) = if j < 10 {
                    let g = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
                    (-XGK[j], WGK[j], g)
                } else if j == 10 {
                    (0.0, WGK[10], 0.0)
                } else {
                    let jj = 20 - j;
                    let g = if jj % 2 == 1 { WG[jj / 2] } else { 0.0 };
                    (XGK[jj], WGK[jj], g)
                };
                let u = center + half * offset;
                let (a, ln_rho) = self.phase_and_log_modulus(u);
                let g = (-ln_rho).exp() / u * half;
                level.u.push(u);
                level.wk_g.push(wk * g);
                level.wg_g.push(wg * g);
                level.a.push(a);
            }
        }
        level
    }

    /// Cut point U for the by-parts tail at x, the tail value beyond U and
    /// the bound |h(U)| on what the two boundary terms miss.
    fn oscillatory_cut(&self, x: f64, target: f64) -> Result<(f64, f64, f64)> {
        let mut u = 1.0 / self.weights[0];
        for _ in 0..80 {
            let (a, ln_rho) = self.phase_and_log_modulus(u);
            let g = (-ln_rho).exp() / u;
            let theta = a - 0.5 * x * u;
            // (ln g)', θ', θ''
            let (mut lg1, mut t1, mut t2) = (-1.0 / u, -0.5 * x, 0.0);
            for (w, d) in self.weights.iter().zip(&self.dofs) {
                let z = 1.0 + w * w * u * u;
                lg1 -= 0.5 * d * w * w * u / z;
                t1 += 0.5 * d * w / z;
                t2 -= d * w * w * w * u / (z * z);
            }
            // Once θ' < 0 it stays negative, so the phase keeps turning.
            if t1 <= -0.25 * x {
                let h = g * (lg1 * t1 - t2) / t1.powi(3);
                if h.abs() <= target {
                    return Ok((u, g / t1 * theta.cos() - h * theta.sin(), h.abs()));
                }
            }
            u *= 2.0;
        }
        Err(Error::numerical(format!("no Imhof cut point found for x={x}")))
    }

    fn tail_oscillatory(&self, x: f64) -> Result<f64> {
        let int_budget = PI * IMHOF_ABS_TOL;
        let (upper, beyond, remainder) = self.oscillatory_cut(x, 0.1 * int_budget)?;
        let budget = 0.5 * (int_budget - remainder);
        let phase = 0.5 * upper * x + 0.25 * PI * self.total_dof;
        let mut panels = ((2.0 * phase).max(4.0 * upper * self.weights[0]).ceil() as usize).max(64);
        let mut last_err = f64::INFINITY;
        for _ in 0..MAX_LEVELS {
            if panels > MAX_PANELS {
                break;
            }
            let (value, err) = evaluate(&self.build_level(upper, panels), x);
            if err <= budget {
                return Ok((0.5 + (value + beyond) / PI).clamp(0.0, 1.0));
            }
            last_err = err / PI;
            panels *= 2;
        }
        Err(Error::numerical(format!(
            "Imhof integral at x={x} did not reach {IMHOF_ABS_TOL:e} (estimated error {last_err:e})"
        )))
    }

    /// P[Q > x] to absolute accuracy [`IMHOF_ABS_TOL`].
    pub fn tail(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::domain(format!("tail needs a finite x >= 0, got {x}")));
        }
        if x == 0.0 {
            return Ok(1.0);
        }
        if self.oscillatory {
            return self.tail_oscillatory(x);
        }
        let budget = PI * (IMHOF_ABS_TOL - self.truncation) * 0.5;
        let mut last_err = f64::INFINITY;
        for i in 0..MAX_LEVELS {
            let level = match self.level(i) {
                Ok(l) => l,
                Err(e) if i == 0 => return Err(e),
                Err(_) => break,
            };
            let (value, err) = evaluate(&level, x);
            if err <= budget {
                return Ok((0.5 + value / PI).clamp(0.0, 1.0));
            }
            last_err = err / PI;
        }
        Err(Error::numerical(format!(
            "Imhof integral at x={x} did not reach {IMHOF_ABS_TOL:e} (estimated error {last_err:e})"
        )))
    }

    /// Smallest x with P[Q > x] = alpha, to |tail − alpha| ≤ 1e-6.
    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let mut hi = self.mean + 20.0 * self.sd;
        let mut guard = 0;
        while self.tail(hi)? > alpha {
            hi *= 2.0;
            guard += 1;
            if guard > 20 {
                return Err(Error::numerical("could not bracket the critical value"));
            }
        }
        brent(|x| Ok(self.tail(x)? - alpha), 0.0, hi, 1e-12, 1e-7, 200)
    }
}

fn evaluate(level: &Level, x: f64) -> (f64, f64) {
    let half_x = 0.5 * x;
    let mut total = 0.0;
    let mut err = 0.0;
    for chunk in 0..level.u.len() / 21 {
        let r = chunk * 21..chunk * 21 + 21;
        let mut k = 0.0;
        let mut g = 0.0;
        for i in r {
            let s = (level.a[i] - half_x * level.u[i]).sin();
            k += level.wk_g[i] * s;
            g += level.wg_g[i] * s;
        }
        total += k;
        err += (k - g).abs();
    }
    (total, err)
}

/// P[Q > x] for a single mixture and point.
pub fn imhof_tail(mixture: &ChiSqMixture, x: f64) -> Result<f64> {
    ImhofEvaluator::new(mixture)?.tail(x)
}

/// Critical value of the mixture at level alpha.
pub fn critical_value(mixture: &ChiSqMixture, alpha: f64) -> Result<f64> {
    ImhofEvaluator::new(mixture)?.critical_value(alpha)
}

/// Probabilities i/201, i = 1..=200.
pub fn default_probability_grid() -> Vec<f64> {
    (1..=200).map(|i| i as f64 / 201.0).collect()
}

/// Pairs (P_K(x), |P_K(x) − P_Kref(x)|) over `x_grid`, which defaults to
/// the K-mixture quantiles of [`default_probability_grid`].
pub fn truncation_error_profile(
    q: usize,
    k_small: usize,
    k_ref: usize,
    x_grid: Option<&[f64]>,
) -> Result<Vec<(f64, f64)>> {
    if k_small < 1 || k_ref < k_small {
        return Err(Error::domain("need 1 <= K <= K_ref"));
    }
    let reference = build_mixture(q, k_ref)?;
    let small = reference.truncate(k_small.min(reference.len()))?;
    let small_ev = ImhofEvaluator::new(&small)?;
    let ref_ev = if small.len() == reference.len() {
        None
    } else {
        Some(ImhofEvaluator::new(&reference)?)
    };
    let xs: Vec<f64> = match x_grid {
        Some(xs) => xs.to_vec(),
        None => default_probability_grid()
            .into_iter()
            .map(|p| small_ev.critical_value(p))
            .collect::<Result<_>>()?,
    };
    xs.into_iter()
        .map(|x| {
            let p = small_ev.tail(x)?;
            let r = match &ref_ev {
                Some(ev) => ev.tail(x)?,
                None => p,
            };
            Ok((p, (p - r).abs()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotic::build_mixture;

    #[test]
    fn scaled_chi_square_matches_gamma_tail() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        // w χ²_20
        let w = 0.02;
        let m = ChiSqMixture::new(1, vec![w], vec![20.0]).unwrap();
        let ev = ImhofEvaluator::new(&m).unwrap();
        let chi = ChiSquared::new(20.0).unwrap();
        for x in [0.1, 0.3, 0.4, 0.6, 1.0] {
            let exact = chi.sf(x / w);
            assert!((ev.tail(x).unwrap() - exact).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn hypoexponential_mix() {
        // Σ a_i χ²_2 with distinct a_i: Σ_i Π_{j≠i} a_i/(a_i − a_j) e^{−x/(2a_i)}
        let a = [0.2, 0.1, 0.05, 0.03, 0.02, 0.01];
        let m = ChiSqMixture::new(1, a.to_vec(), vec![2.0; a.len()]).unwrap();
        let ev = ImhofEvaluator::new(&m).unwrap();
        for x in [0.05, 0.3, 0.8, 2.0] {
            let exact: f64 = a
                .iter()
                .enumerate()
                .map(|(i, ai)| {
                    let c: f64 = a
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, aj)| ai / (ai - aj))
                        .product();
                    c * (-x / (2.0 * ai)).exp()
                })
                .sum();
            assert!((ev.tail(x).unwrap() - exact).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn slowly_decaying_integrands() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let m = ChiSqMixture::new(1, vec![0.3], vec![2.0]).unwrap();
        let ev = ImhofEvaluator::new(&m).unwrap();
        for x in [0.05, 0.5, 2.0] {
            assert!((ev.tail(x).unwrap() - (-x / 0.6f64).exp()).abs() < 1e-8, "x={x}");
        }
        let chi1 = ChiSquared::new(1.0).unwrap();
        let ev = ImhofEvaluator::new(&ChiSqMixture::new(1, vec![1.0], vec![1.0]).unwrap()).unwrap();
        for x in [0.1, 1.0, 3.84, 10.0] {
            assert!((ev.tail(x).unwrap() - chi1.sf(x)).abs() < 1e-8, "x={x}");
        }
        let two = ChiSqMixture::new(1, vec![0.5, 0.25], vec![1.0, 1.0]).unwrap();
        let ev = ImhofEvaluator::new(&two).unwrap();
        let c = ev.critical_value(0.05).unwrap();
        assert!((ev.tail(c).unwrap() - 0.05).abs() < 1e-6);
        // A vanishing x needs an unbounded cut.
        assert!(matches!(ev.tail(1e-300), Err(Error::Numerical(_))));
    }

    #[test]
    fn table_critical_values() {
        let cases = [
            (1usize, [0.3035, 0.3737, 0.5368]),
            (2, [0.2769, 0.3291, 0.4469]),
            (3, [0.2607, 0.3029, 0.3963]),
            (10, [0.2207, 0.2414, 0.2848]),
        ];
        for (q, expected) in cases {
            let ev = ImhofEvaluator::new(&build_mixture(q, 10_000).unwrap()).unwrap();
            for (alpha, want) in [0.10, 0.05, 0.01].iter().zip(expected) {
                let got = ev.critical_value(*alpha).unwrap();
                assert!((got - want).abs() <= 5e-5 + 1e-12, "q={q} alpha={alpha}: {got}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        let m = build_mixture(2, 10).unwrap();
        assert!(imhof_tail(&m, -1.0).is_err());
        assert_eq!(imhof_tail(&m, 0.0).unwrap(), 1.0);
        assert!(critical_value(&m, 0.0).is_err());
        assert!(critical_value(&m, 1.0).is_err());
    }

    #[test]
    fn identical_truncations_have_zero_error() {
        let prof = truncation_error_profile(2, 20, 20, Some(&[0.1, 0.2])).unwrap();
        assert!(prof.iter().all(|(_, e)| *e == 0.0));
    }
}
