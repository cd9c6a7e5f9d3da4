#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refcurve::survival::{Cohort, Group};

/// Definitional Nelson–Aalen, variance function and Kaplan–Meier at `s`,
/// recounting the risk set from scratch at every distinct event time.
pub fn brute(pairs: &[(f64, bool)], s: f64) -> (f64, f64, f64) {
    let n = pairs.len() as f64;
    let mut event_times: Vec<f64> = pairs.iter().filter(|p| p.1 && p.0 <= s).map(|p| p.0).collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();
    let (mut na, mut var, mut km) = (0.0, 0.0, 1.0);
    for t in event_times {
        let d = pairs.iter().filter(|p| p.1 && p.0 == t).count() as f64;
        let y = pairs.iter().filter(|p| p.0 >= t).count() as f64;
        na += d / y;
        var += d / (y * y);
        km *= 1.0 - d / y;
    }
    (na, n * var, km)
}

/// `N_B/n_B + (n_A n_B)^{-1} Σ_i Σ_j σ̂_A(X_i ∧ X_j)` by the double sum.
pub fn naive_sigma_sq(control: &[(f64, bool)], experimental: &[(f64, bool)]) -> f64 {
    let n_a = control.len() as f64;
    let n_b = experimental.len() as f64;
    let events = experimental.iter().filter(|p| p.1).count() as f64;
    let mut double = 0.0;
    for x in experimental {
        for y in experimental {
            double += brute(control, x.0.min(y.0)).1;
        }
    }
    events / n_b + double / (n_a * n_b)
}

/// Random small arm; times on a coarse grid so ties are common.
pub fn random_pairs(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<(f64, bool)> {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| (rng.gen_range(1..=8) as f64 * 0.25, rng.gen_bool(0.7)))
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cohort(group: Group, pairs: &[(f64, bool)]) -> Cohort {
    Cohort::from_pairs(group, pairs).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Exponential trial arm with uniform entry on `[0, a]` and analysis at `a + f`.
pub fn exponential_arm(rng: &mut ChaCha8Rng, n: usize, rate: f64, a: f64, f: f64, group: Group) -> Cohort {
    let pairs: Vec<(f64, bool)> = (0..n)
        .map(|_| {
            let censor = a + f - a * rng.gen::<f64>();
            let t = -(1.0 - rng.gen::<f64>()).ln() / rate;
            if t <= censor {
                (t, true)
            } else {
                (censor, false)
            }
        })
        .collect();
    cohort(group, &pairs)
}

/// One-sided Kolmogorov–Smirnov distance to N(0,1).
pub fn ks_distance(mut z: Vec<f64>) -> f64 {
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    z.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = refcurve::normal::cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Composite Simpson rule on `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for k in 1..n {
        s += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}
