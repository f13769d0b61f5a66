#![allow(dead_code)]

use hyperunif::sphere::RngStream;
use rand::Rng;
use rand_distr::StandardNormal;

pub const ALPHAS: [f64; 3] = [0.10, 0.05, 0.01];

/// Published critical values: rows n = 25, 50, 100, 200, 400, ∞; columns q = 1..=10.
pub const REFERENCE_N: [Option<usize>; 6] = [Some(25), Some(50), Some(100), Some(200), Some(400), None];

pub const REFERENCE_CRITICAL_VALUES: [[[f64; 10]; 6]; 3] = [
    [
        [0.3015, 0.2752, 0.2588, 0.2481, 0.2401, 0.2343, 0.2295, 0.2256, 0.2223, 0.2193],
        [0.3026, 0.2760, 0.2600, 0.2490, 0.2411, 0.2351, 0.2302, 0.2264, 0.2229, 0.2201],
        [0.3029, 0.2765, 0.2605, 0.2496, 0.2416, 0.2355, 0.2307, 0.2268, 0.2234, 0.2206],
        [0.3032, 0.2769, 0.2608, 0.2498, 0.2419, 0.2357, 0.2309, 0.2270, 0.2236, 0.2207],
        [0.3036, 0.2769, 0.2608, 0.2502, 0.2423, 0.2360, 0.2311, 0.2272, 0.2237, 0.2209],
        [0.3035, 0.2769, 0.2607, 0.2498, 0.2419, 0.2358, 0.2309, 0.2269, 0.2236, 0.2207],
    ],
    [
        [0.3696, 0.3254, 0.2994, 0.2824, 0.2703, 0.2613, 0.2541, 0.2483, 0.2434, 0.2394],
        [0.3716, 0.3273, 0.3012, 0.2841, 0.2719, 0.2627, 0.2554, 0.2495, 0.2446, 0.2403],
        [0.3730, 0.3284, 0.3027, 0.2852, 0.2730, 0.2635, 0.2563, 0.2503, 0.2453, 0.2411],
        [0.3728, 0.3290, 0.3029, 0.2857, 0.2734, 0.2638, 0.2566, 0.2506, 0.2456, 0.2414],
        [0.3744, 0.3288, 0.3029, 0.2859, 0.2735, 0.2639, 0.2566, 0.2508, 0.2457, 0.2417],
        [0.3737, 0.3291, 0.3029, 0.2856, 0.2733, 0.2639, 0.2566, 0.2506, 0.2456, 0.2414],
    ],
    [
        [0.5220, 0.4360, 0.3868, 0.3561, 0.3349, 0.3186, 0.3062, 0.2958, 0.2876, 0.2805],
        [0.5306, 0.4412, 0.3920, 0.3601, 0.3384, 0.3219, 0.3090, 0.2983, 0.2903, 0.2830],
        [0.5339, 0.4451, 0.3948, 0.3626, 0.3400, 0.3235, 0.3105, 0.3002, 0.2915, 0.2842],
        [0.5359, 0.4467, 0.3962, 0.3642, 0.3405, 0.3238, 0.3112, 0.3006, 0.2916, 0.2843],
        [0.5368, 0.4463, 0.3968, 0.3635, 0.3409, 0.3242, 0.3114, 0.3006, 0.2921, 0.2849],
        [0.5368, 0.4469, 0.3963, 0.3639, 0.3413, 0.3244, 0.3113, 0.3008, 0.2921, 0.2848],
    ],
];

/// Reference critical value for α index, n (None = ∞) and q.
pub fn reference_cv(alpha_index: usize, n: Option<usize>, q: usize) -> f64 {
    let row = REFERENCE_N.iter().position(|r| *r == n).expect("n not in the reference grid");
    REFERENCE_CRITICAL_VALUES[alpha_index][row][q - 1]
}

/// Haar-random orthogonal matrix (row-major) by Gram–Schmidt on Gaussians.
pub fn random_rotation(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngStream::new(seed, 77).rng();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for r in &rows {
            let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= d * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            rows.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    rows.concat()
}

pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// One-sample Kolmogorov–Smirnov distance of `values` from Uniform(0,1).
pub fn ks_uniform_distance(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        acc.max((i as f64 + 1.0) / n - x).max(x - i as f64 / n)
    })
}
