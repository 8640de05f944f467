#![allow(dead_code)]

use crossover::construction::random_allocation;
use crossover::rng::substream;
use crossover::{Design, RngSeed};

/// Domain tag for test-only streams, kept apart from the library's tags.
const TEST_DOMAIN: u64 = 0x7e57;

/// Random-allocation design for the sweep, reproducible from `seed`.
pub fn sweep_design(n3: usize, n2: usize, weeks: usize, seed: u64) -> Design {
    let mut rng = substream(RngSeed(seed), TEST_DOMAIN, 0);
    random_allocation(n3, n2, weeks, &mut rng)
}

/// Every non-empty `(n3, n2, w)` with `n3 ≤ 5`, `n2 ≤ 3`, `1 ≤ w ≤ 6`.
pub fn sweep_shapes() -> Vec<(usize, usize, usize)> {
    let mut shapes = Vec::new();
    for n3 in 0..=5 {
        for n2 in 0..=3 {
            if n3 + n2 == 0 {
                continue;
            }
            for w in 1..=6 {
                shapes.push((n3, n2, w));
            }
        }
    }
    shapes
}

/// `count` sweep designs cycling through [`sweep_shapes`].
pub fn sweep(count: usize) -> Vec<Design> {
    let shapes = sweep_shapes();
    (0..count)
        .map(|i| {
            let (n3, n2, w) = shapes[i % shapes.len()];
            sweep_design(n3, n2, w, i as u64)
        })
        .collect()
}

/// Asymptotic Kolmogorov distribution tail `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * x * x).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// One-sample KS test against Uniform(0, 1): returns `(D, p)` using the
/// small-sample correction `(√n + 0.12 + 0.11/√n)·D`.
pub fn ks_uniform(sample: &[f64]) -> (f64, f64) {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let lo = v - i as f64 / n;
            let hi = (i + 1) as f64 / n - v;
            lo.max(hi)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    (d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d))
}
