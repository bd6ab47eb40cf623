//! Independent numerical oracles shared by the integration tests. None of
//! these call into the library's special-function code.

#![allow(dead_code)]

use leofl_core::fl::{fedavg, local_train, DatasetShard, ModelVector, TrainConfig};

/// Composite Simpson rule with `n` (rounded up to even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Adaptive Simpson with Richardson correction.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Bessel `J_n(x)` from its integral form `(1/π)∫₀^π cos(nτ − x sin τ) dτ`.
/// The integrand is smooth and periodic, so the trapezoid rule converges
/// geometrically.
pub fn bessel_integral(n: u32, x: f64) -> f64 {
    let steps = 2000;
    let h = std::f64::consts::PI / steps as f64;
    let g = |t: f64| (f64::from(n) * t - x * t.sin()).cos();
    let mut s = 0.5 * (g(0.0) + g(std::f64::consts::PI));
    for i in 1..steps {
        s += g(i as f64 * h);
    }
    s * h / std::f64::consts::PI
}

/// Plain ascending series for `1F1(a; b; z)`.
pub fn hyp1f1_series(a: f64, b: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..2000 {
        let k = k as f64;
        term *= (a + k) / (b + k) * z / (k + 1.0);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// One-sample Kolmogorov-Smirnov statistic `sup |F_n − F|`.
pub fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Textbook FedAvg loop: every shard trains from the current global model
/// each round and the results are averaged by data size.
pub fn reference_fedavg(
    shards: &[DatasetShard],
    train: &TrainConfig,
    initial: &ModelVector,
    seed: u64,
    rounds: usize,
) -> Vec<ModelVector> {
    let sizes: Vec<usize> = shards.iter().map(DatasetShard::len).collect();
    let mut w = initial.clone();
    (0..rounds)
        .map(|r| {
            let locals: Vec<ModelVector> = shards
                .iter()
                .map(|s| local_train(&w, s, train, r, seed).unwrap())
                .collect();
            w = fedavg(&locals, &sizes).unwrap();
            w.clone()
        })
        .collect()
}

pub fn max_abs_diff(a: &ModelVector, b: &ModelVector) -> f64 {
    a.weights
        .iter()
        .zip(&b.weights)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
