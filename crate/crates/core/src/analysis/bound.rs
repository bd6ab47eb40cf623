//! Problem constants and the convergence bound for local SGD with periodic
//! full-participation averaging.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::fl::{minimize_full_batch, Dataset, DatasetShard, LogisticModel, ModelVector};
use crate::seed::rng_for;

/// Safety factor applied to sampled suprema (σ_k, G).
pub const SAFETY_FACTOR: f64 = 1.2;
/// Gradient-norm tolerance of the optimum oracle.
pub const OPTIMUM_TOL: f64 = 1e-10;
/// Random probe points used to estimate σ_k and G.
const PROBES: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConstants {
    /// Smoothness `Λ`.
    pub smooth_l: f64,
    /// Strong convexity `ϱ`.
    pub strong_mu: f64,
    /// Per-satellite bound on the single-sample gradient standard deviation.
    pub sigma_k: Vec<f64>,
    /// Bound on the single-sample gradient norm.
    pub grad_g: f64,
    /// Heterogeneity gap `Γ = F* − Σ α_k F_k*`.
    pub gamma_gap: f64,
    /// Data shares `|D_k|/|D|`.
    pub alpha_k: Vec<f64>,
    /// Local SGD steps between synchronizations.
    pub local_e: usize,
    pub f_star: f64,
    pub w_star: ModelVector,
    /// `‖w⁰ − w*‖²`.
    pub initial_dist_sq: f64,
}

impl ConvergenceConstants {
    /// `υ = Λ/ϱ`.
    pub fn upsilon(&self) -> f64 {
        self.smooth_l / self.strong_mu
    }

    /// `δ = max{8υ, J}`.
    pub fn delta(&self) -> f64 {
        (8.0 * self.upsilon()).max(self.local_e as f64)
    }

    /// `Z = Σ α_k² σ_k² + 6ΛΓ + 8(J−1)² G²`.
    pub fn z(&self) -> f64 {
        let var: f64 = self
            .alpha_k
            .iter()
            .zip(&self.sigma_k)
            .map(|(a, s)| a * a * s * s)
            .sum();
        let j1 = self.local_e as f64 - 1.0;
        var + 6.0 * self.smooth_l * self.gamma_gap + 8.0 * j1 * j1 * self.grad_g * self.grad_g
    }

    /// Step size `ζ_β = 2 / (ϱ(δ + β))` for SGD step `β`.
    pub fn step_size(&self, beta: usize) -> f64 {
        2.0 / (self.strong_mu * (self.delta() + beta as f64))
    }
}

/// `(2υ/(δ+β)) · (Z/ϱ + 2Λ‖w⁰ − w*‖²)`.
pub fn theorem1_bound(c: &ConvergenceConstants, beta: usize) -> f64 {
    2.0 * c.upsilon() / (c.delta() + beta as f64)
        * (c.z() / c.strong_mu + 2.0 * c.smooth_l * c.initial_dist_sq)
}

/// Exact mean over the shard of `‖∇f_i − ∇F‖²` and `‖∇f_i‖²` at `w`.
fn gradient_moments(model: &LogisticModel, w: &ModelVector, data: &Dataset, l2: f64) -> (f64, f64) {
    let full = model.gradient(w, data, l2);
    let mut g = vec![0.0; full.len()];
    let (mut var, mut second) = (0.0, 0.0);
    for i in 0..data.len() {
        model.row_gradient(w, data, i, l2, &mut g);
        for (gi, fi) in g.iter().zip(&full) {
            var += (gi - fi) * (gi - fi);
            second += gi * gi;
        }
    }
    let n = data.len() as f64;
    (var / n, second / n)
}

/// Estimates the constants of the convergence bound.
///
/// `ϱ` is the L2 weight and `Λ = ϱ + max‖x̃‖²/2` over augmented feature rows
/// (the softmax Hessian has spectral norm at most 1/2). `σ_k` and `G` are the
/// largest exact per-shard moments over probe points (`w⁰`, `w*`, the shard
/// optima, and random points within 1.5 `‖w⁰ − w*‖` of `w*`), times
/// [`SAFETY_FACTOR`].
pub fn estimate_constants(
    dataset: &Dataset,
    shards: &[DatasetShard],
    l2_reg: f64,
    local_e: usize,
    initial: &ModelVector,
    seed: u64,
) -> Result<ConvergenceConstants> {
    if !(l2_reg > 0.0) {
        return Err(invalid(
            "l2_reg",
            "strong convexity needs a positive L2 weight",
        ));
    }
    if shards.is_empty() || shards.iter().any(|s| s.data.is_empty()) {
        return Err(invalid("shards", "need nonempty shards"));
    }
    if local_e == 0 {
        return Err(invalid("local_e", "must be at least 1"));
    }
    let model = LogisticModel::for_dataset(dataset);
    if initial.dim() != model.param_count() {
        return Err(invalid("initial", "dimension does not match the model"));
    }
    let total: usize = shards.iter().map(DatasetShard::len).sum();
    let alpha_k: Vec<f64> = shards
        .iter()
        .map(|s| s.len() as f64 / total as f64)
        .collect();

    let global = minimize_full_batch(dataset, l2_reg, OPTIMUM_TOL);
    let local: Vec<_> = shards
        .par_iter()
        .map(|s| minimize_full_batch(&s.data, l2_reg, OPTIMUM_TOL))
        .collect();
    let gamma_gap = (global.value
        - alpha_k
            .iter()
            .zip(&local)
            .map(|(a, o)| a * o.value)
            .sum::<f64>())
    .max(0.0);

    let smooth_l = l2_reg + 0.5 * dataset.max_augmented_norm_sq();
    let initial_dist_sq = initial.distance_sq(&global.w);

    let radius = 1.5 * initial_dist_sq.sqrt().max(1e-3);
    let mut rng = rng_for(seed, "bound-probes", &[]);
    let mut probes = vec![initial.clone(), global.w.clone()];
    probes.extend(local.iter().map(|o| o.w.clone()));
    for _ in 0..PROBES {
        let dir: Vec<f64> = (0..initial.dim())
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        let r = radius * rng.random::<f64>();
        let mut p = global.w.clone();
        p.add_scaled(r / norm, &ModelVector::from_vec(dir));
        probes.push(p);
    }
    let moments: Vec<(f64, f64)> = shards
        .par_iter()
        .map(|s| {
            probes
                .iter()
                .map(|w| gradient_moments(&model, w, &s.data, l2_reg))
                .fold((0.0_f64, 0.0_f64), |acc, m| {
                    (acc.0.max(m.0), acc.1.max(m.1))
                })
        })
        .collect();
    let sigma_k = moments.iter().map(|m| SAFETY_FACTOR * m.0.sqrt()).collect();
    let grad_g = SAFETY_FACTOR * moments.iter().map(|m| m.1).fold(0.0, f64::max).sqrt();

    Ok(ConvergenceConstants {
        smooth_l,
        strong_mu: l2_reg,
        sigma_k,
        grad_g,
        gamma_gap,
        alpha_k,
        local_e,
        f_star: global.value,
        w_star: global.w,
        initial_dist_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(j: usize) -> ConvergenceConstants {
        ConvergenceConstants {
            smooth_l: 2.0,
            strong_mu: 0.5,
            sigma_k: vec![0.0, 0.0],
            grad_g: 3.0,
            gamma_gap: 0.0,
            alpha_k: vec![0.5, 0.5],
            local_e: j,
            f_star: 0.0,
            w_star: ModelVector::zeros(1),
            initial_dist_sq: 4.0,
        }
    }

    #[test]
    fn term_dropout() {
        let c = toy(1);
        assert_eq!(c.z(), 0.0);
        let u = c.upsilon();
        let expect = 4.0 * u * c.smooth_l * c.initial_dist_sq / (c.delta() + 7.0);
        assert!((theorem1_bound(&c, 7) - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn halves_at_delta() {
        let c = toy(5);
        let d = c.delta();
        assert_eq!(d, 32.0);
        let ratio = theorem1_bound(&c, 0) / theorem1_bound(&c, d as usize);
        assert!((ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn decreasing_and_positive() {
        let c = toy(5);
        let mut prev = f64::INFINITY;
        for b in 0..500 {
            let v = theorem1_bound(&c, b);
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
    }
}
