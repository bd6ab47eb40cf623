//! Seeded local-SGD runs on the convex problem and empirical checks of the
//! one-step recursion, the variance bound, the local-drift bound, and the
//! final convergence bound.

use rand::Rng;
use rayon::prelude::*;

use super::bound::{theorem1_bound, ConvergenceConstants};
use crate::error::{invalid, Result};
use crate::fl::{DatasetShard, LogisticModel, ModelVector};
use crate::seed::rng_for;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `ζ_β = 2/(ϱ(δ+β))` from the constants.
    Decaying,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSgdConfig {
    pub local_steps: usize,
    pub total_steps: usize,
    pub repetitions: usize,
    pub l2_reg: f64,
    pub schedule: StepSchedule,
    pub seed: u64,
}

/// Per-step means over repetitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub step: usize,
    pub lr: f64,
    /// `E‖g − ḡ‖²`.
    pub variance: f64,
    /// `E Σ α_k ‖w̄ − w_k‖²`.
    pub divergence: f64,
    /// `E‖w̄ − w*‖²`.
    pub dist_sq: f64,
}

/// Optimality gap of the synchronized model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapPoint {
    pub step: usize,
    /// `E[F(w̄)] − F*` over repetitions.
    pub mean_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSgdTrace {
    pub schedule: StepSchedule,
    pub local_steps: usize,
    pub repetitions: usize,
    /// Steps `0..total_steps`, plus a final entry at `total_steps` whose
    /// `variance`/`divergence` are zero.
    pub steps: Vec<StepStats>,
    /// Step 0 and every synchronization step.
    pub gaps: Vec<GapPoint>,
}

struct RepTrace {
    variance: Vec<f64>,
    divergence: Vec<f64>,
    dist_sq: Vec<f64>,
    gaps: Vec<f64>,
}

fn weighted_mean(models: &[ModelVector], alpha: &[f64]) -> ModelVector {
    let mut out = ModelVector::zeros(models[0].dim());
    for (m, a) in models.iter().zip(alpha) {
        out.add_scaled(*a, m);
    }
    out
}

fn global_objective(
    model: &LogisticModel,
    w: &ModelVector,
    shards: &[DatasetShard],
    alpha: &[f64],
    l2: f64,
) -> f64 {
    shards
        .iter()
        .zip(alpha)
        .map(|(s, a)| a * model.objective(w, &s.data, l2))
        .sum()
}

fn run_rep(
    shards: &[DatasetShard],
    c: &ConvergenceConstants,
    cfg: &LocalSgdConfig,
    initial: &ModelVector,
    rep: usize,
) -> RepTrace {
    let model = LogisticModel::for_dataset(&shards[0].data);
    let alpha = &c.alpha_k;
    let k = shards.len();
    let p = initial.dim();
    let mut rngs: Vec<_> = (0..k)
        .map(|i| rng_for(cfg.seed, "local-sgd", &[rep as u64, i as u64]))
        .collect();
    let mut w: Vec<ModelVector> = vec![initial.clone(); k];
    let mut stoch = vec![vec![0.0; p]; k];
    let mut full = vec![0.0; p];
    let mut tr = RepTrace {
        variance: Vec::with_capacity(cfg.total_steps),
        divergence: Vec::with_capacity(cfg.total_steps),
        dist_sq: Vec::with_capacity(cfg.total_steps + 1),
        gaps: vec![global_objective(&model, initial, shards, alpha, cfg.l2_reg) - c.f_star],
    };
    for t in 0..cfg.total_steps {
        let lr = match cfg.schedule {
            StepSchedule::Decaying => c.step_size(t),
            StepSchedule::Constant(z) => z,
        };
        let synced = t % cfg.local_steps == 0;
        let w_bar = weighted_mean(&w, alpha);
        tr.dist_sq.push(w_bar.distance_sq(&c.w_star));
        tr.divergence.push(if synced {
            0.0
        } else {
            w.iter()
                .zip(alpha)
                .map(|(wk, a)| a * w_bar.distance_sq(wk))
                .sum()
        });
        let mut diff = vec![0.0; p];
        for i in 0..k {
            let data = &shards[i].data;
            let row = rngs[i].random_range(0..data.len());
            model.row_gradient(&w[i], data, row, cfg.l2_reg, &mut stoch[i]);
            model.loss_grad(&w[i], data, None, cfg.l2_reg, &mut full);
            for ((d, s), f) in diff.iter_mut().zip(&stoch[i]).zip(&full) {
                *d += alpha[i] * (s - f);
            }
        }
        tr.variance.push(diff.iter().map(|d| d * d).sum());
        for i in 0..k {
            for (wi, g) in w[i].weights.iter_mut().zip(&stoch[i]) {
                *wi -= lr * g;
            }
        }
        if (t + 1) % cfg.local_steps == 0 {
            let avg = weighted_mean(&w, alpha);
            w.iter_mut().for_each(|wk| *wk = avg.clone());
            tr.gaps
                .push(global_objective(&model, &avg, shards, alpha, cfg.l2_reg) - c.f_star);
        }
    }
    tr.dist_sq
        .push(weighted_mean(&w, alpha).distance_sq(&c.w_star));
    tr
}

/// Runs `repetitions` independent seeded local-SGD runs from `initial` and
/// averages the per-step quantities.
pub fn run_local_sgd(
    shards: &[DatasetShard],
    c: &ConvergenceConstants,
    cfg: &LocalSgdConfig,
    initial: &ModelVector,
) -> Result<LocalSgdTrace> {
    if cfg.local_steps == 0 || cfg.repetitions == 0 {
        return Err(invalid("local_steps/repetitions", "must be at least 1"));
    }
    if shards.len() != c.alpha_k.len() {
        return Err(invalid("shards", "one shard per data share"));
    }
    let reps: Vec<RepTrace> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|r| run_rep(shards, c, cfg, initial, r))
        .collect();
    let n = cfg.repetitions as f64;
    let mean = |f: &dyn Fn(&RepTrace) -> f64| {
        let mut s = CompensatedSum::default();
        reps.iter().for_each(|r| s.add(f(r)));
        s.value() / n
    };
    let mut steps = Vec::with_capacity(cfg.total_steps + 1);
    for t in 0..=cfg.total_steps {
        let last = t == cfg.total_steps;
        steps.push(StepStats {
            step: t,
            lr: match cfg.schedule {
                StepSchedule::Decaying => c.step_size(t),
                StepSchedule::Constant(z) => z,
            },
            variance: if last { 0.0 } else { mean(&|r| r.variance[t]) },
            divergence: if last {
                0.0
            } else {
                mean(&|r| r.divergence[t])
            },
            dist_sq: mean(&|r| r.dist_sq[t]),
        });
    }
    let gaps = (0..reps[0].gaps.len())
        .map(|i| GapPoint {
            step: i * cfg.local_steps,
            mean_gap: mean(&|r| r.gaps[i]),
        })
        .collect();
    Ok(LocalSgdTrace {
        schedule: cfg.schedule,
        local_steps: cfg.local_steps,
        repetitions: cfg.repetitions,
        steps,
        gaps,
    })
}

/// Outcome of one inequality over all checked steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCheck {
    pub checked: usize,
    pub held: usize,
    /// Smallest `rhs − lhs` seen, scaled by `rhs` when positive.
    pub worst_margin: f64,
}

impl LemmaCheck {
    fn new() -> Self {
        Self {
            checked: 0,
            held: 0,
            worst_margin: f64::INFINITY,
        }
    }

    fn record(&mut self, lhs: f64, rhs: f64) {
        self.checked += 1;
        if lhs <= rhs {
            self.held += 1;
        }
        let m = if rhs > 0.0 {
            (rhs - lhs) / rhs
        } else {
            rhs - lhs
        };
        self.worst_margin = self.worst_margin.min(m);
    }

    pub fn fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.held as f64 / self.checked as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    /// Set when the checks do not apply to the trace.
    pub skipped: Option<String>,
    /// `Δ^{β+1} ≤ (1 − ζ_β ϱ) Δ^β + ζ_β² Z`.
    pub one_step: LemmaCheck,
    /// `E‖g − ḡ‖² ≤ Σ α_k² σ_k²`.
    pub variance: LemmaCheck,
    /// `E Σ α_k ‖w̄ − w_k‖² ≤ 4 ζ_β² (E−1)² G²`.
    pub divergence: LemmaCheck,
}

/// Required fraction of steps at which each inequality holds.
pub const LEMMA_PASS_FRACTION: f64 = 0.95;

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.skipped.is_none()
            && [self.one_step, self.variance, self.divergence]
                .iter()
                .all(|c| c.fraction() >= LEMMA_PASS_FRACTION)
    }
}

/// Checks the three per-step inequalities on the repetition means.
pub fn verify_lemmas(trace: &LocalSgdTrace, c: &ConvergenceConstants) -> LemmaReport {
    let mut report = LemmaReport {
        skipped: None,
        one_step: LemmaCheck::new(),
        variance: LemmaCheck::new(),
        divergence: LemmaCheck::new(),
    };
    if let StepSchedule::Constant(z) = trace.schedule {
        report.skipped = Some(format!(
            "constant step size {z} does not satisfy the decaying-schedule precondition; lemma checks skipped"
        ));
        return report;
    }
    let var_rhs: f64 = c
        .alpha_k
        .iter()
        .zip(&c.sigma_k)
        .map(|(a, s)| a * a * s * s)
        .sum();
    let e1 = trace.local_steps as f64 - 1.0;
    let z = c.z();
    for w in trace.steps.windows(2) {
        let (cur, next) = (w[0], w[1]);
        let lr = cur.lr;
        report.one_step.record(
            next.dist_sq,
            (1.0 - lr * c.strong_mu) * cur.dist_sq + lr * lr * z,
        );
        report.variance.record(cur.variance, var_rhs);
        report.divergence.record(
            cur.divergence,
            4.0 * lr * lr * e1 * e1 * c.grad_g * c.grad_g,
        );
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPoint {
    pub step: usize,
    pub measured_gap: f64,
    pub bound: f64,
}

impl BoundPoint {
    pub fn holds(&self) -> bool {
        self.measured_gap <= self.bound
    }
}

/// Measured gap against the bound at every recorded synchronization step.
pub fn bound_curve(trace: &LocalSgdTrace, c: &ConvergenceConstants) -> Vec<BoundPoint> {
    trace
        .gaps
        .iter()
        .map(|g| BoundPoint {
            step: g.step,
            measured_gap: g.mean_gap,
            bound: theorem1_bound(c, g.step),
        })
        .collect()
}

/// Human-readable summary of a bound check.
pub fn summary_text(points: &[BoundPoint], report: &LemmaReport) -> String {
    let mut s = String::new();
    let held = points.iter().filter(|p| p.holds()).count();
    s.push_str(&format!(
        "bound held at {held}/{} recorded steps\n",
        points.len()
    ));
    if let Some(worst) = points
        .iter()
        .map(|p| p.bound / p.measured_gap.max(f64::MIN_POSITIVE))
        .reduce(f64::min)
    {
        s.push_str(&format!("smallest bound/measured ratio: {worst:.4}\n"));
    }
    match &report.skipped {
        Some(note) => s.push_str(&format!("lemmas: {note}\n")),
        None => {
            for (name, c) in [
                ("one-step recursion", report.one_step),
                ("variance", report.variance),
                ("local drift", report.divergence),
            ] {
                s.push_str(&format!(
                    "{name}: held {}/{} steps, worst relative margin {:.4}\n",
                    c.held, c.checked, c.worst_margin
                ));
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 10.0);
    }
}
