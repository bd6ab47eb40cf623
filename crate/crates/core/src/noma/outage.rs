//! Outage probability of the two-satellite (nearest/farthest) NOMA link.
//!
//! Monte-Carlo seeding: trials are processed in fixed chunks of
//! [`MC_CHUNK`]; chunk `c` draws from `rng_for(seed, "outage-mc", [c])`.
//! Chunks run in parallel and only integer counts are combined, so the result
//! is bit-identical to a sequential run.

use rayon::prelude::*;

use crate::channel::{sr_cdf, ShadowedRicianParams};
use crate::error::{invalid, Result};
use crate::seed::rng_for;

pub const MC_CHUNK: u64 = 1 << 16;

/// Nearest-satellite outage `F(γ/(a ρ))`.
pub fn outage_ns_closed(p: &ShadowedRicianParams, rho: f64, a_ns: f64, gamma_th: f64) -> f64 {
    let a = gamma_th / a_ns;
    let omega1 = 1.0 / rho;
    sr_cdf(a * omega1, p)
}

/// Farthest-satellite outage `F(E ω2)` with `E = γ/a` and
/// `ω2 = (ρ Σ |λ_i|² a_i + 1)/ρ` over the given (gain, coefficient) terms of
/// the stronger users.
pub fn outage_fs_closed(
    p: &ShadowedRicianParams,
    rho: f64,
    a_fs: f64,
    gamma_th: f64,
    interferer_terms: &[(f64, f64)],
) -> f64 {
    let e = gamma_th / a_fs;
    let interference: f64 = interferer_terms.iter().map(|(g, a)| g * a).sum();
    let omega2 = (rho * interference + 1.0) / rho;
    sr_cdf(e * omega2, p)
}

/// System outage `1 − (1 − OP_NS)(1 − OP_FS)`.
pub fn outage_system_closed(op_ns: f64, op_fs: f64) -> f64 {
    1.0 - (1.0 - op_ns) * (1.0 - op_fs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterferenceMode {
    /// The FS interference term uses the fixed `ns_interference_gain`, as in
    /// the closed form.
    Conditional,
    /// The FS interference term uses the NS gain drawn in the same trial.
    Unconditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutageMethod {
    ClosedForm,
    MonteCarlo,
}

/// Nearest/farthest pair at one transmit-power point. `rho_ns`/`rho_fs` are
/// the per-link SNRs `P_s·G/σ²` (equal to `ρ` when no link budget is folded
/// in); fading gains multiply them.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageScenario {
    pub ns: ShadowedRicianParams,
    pub fs: ShadowedRicianParams,
    pub rho_ns: f64,
    pub rho_fs: f64,
    pub a_ns: f64,
    pub a_fs: f64,
    pub gamma_ns: f64,
    pub gamma_fs: f64,
    /// NS small-scale gain used by the conditional interference term.
    pub ns_interference_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutageReport {
    pub op_ns: f64,
    pub op_fs: f64,
    pub op_system: f64,
    pub method: OutageMethod,
    /// Zero for closed form.
    pub trials: u64,
    /// `sqrt(p(1−p)/n)` of the system estimate (zero for closed form).
    pub std_err: f64,
    pub std_err_ns: f64,
    pub std_err_fs: f64,
}

impl OutageScenario {
    /// Interference seen by the FS expressed in FS-normalized units, so that
    /// the closed form can be evaluated with `rho_fs`.
    fn fs_interferers(&self) -> [(f64, f64); 1] {
        [(
            self.ns_interference_gain * self.rho_ns / self.rho_fs,
            self.a_ns,
        )]
    }

    pub fn closed_form(&self) -> OutageReport {
        let op_ns = outage_ns_closed(&self.ns, self.rho_ns, self.a_ns, self.gamma_ns);
        let op_fs = outage_fs_closed(
            &self.fs,
            self.rho_fs,
            self.a_fs,
            self.gamma_fs,
            &self.fs_interferers(),
        );
        OutageReport {
            op_ns,
            op_fs,
            op_system: outage_system_closed(op_ns, op_fs),
            method: OutageMethod::ClosedForm,
            trials: 0,
            std_err: 0.0,
            std_err_ns: 0.0,
            std_err_fs: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rho_ns", self.rho_ns),
            ("rho_fs", self.rho_fs),
            ("a_ns", self.a_ns),
            ("a_fs", self.a_fs),
        ] {
            if !(v > 0.0) {
                return Err(invalid(name, format!("{v} must be positive")));
            }
        }
        if self.gamma_ns < 0.0 || self.gamma_fs < 0.0 {
            return Err(invalid("gamma_th", "must be nonnegative"));
        }
        Ok(())
    }
}

fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Monte-Carlo outage estimate from the physical channel model (line of
/// sight plus scatter), independent of the closed-form CDF.
pub fn outage_monte_carlo(
    scenario: &OutageScenario,
    trials: u64,
    seed: u64,
    mode: InterferenceMode,
) -> Result<OutageReport> {
    scenario.validate()?;
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    let chunks = trials.div_ceil(MC_CHUNK);
    let s = scenario;
    let (ns_fail, fs_fail, sys_fail) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = MC_CHUNK.min(trials - c * MC_CHUNK);
            let mut rng = rng_for(seed, "outage-mc", &[c]);
            let mut counts = (0u64, 0u64, 0u64);
            for _ in 0..n {
                let g_ns = s.ns.sample_physical(&mut rng);
                let g_fs = s.fs.sample_physical(&mut rng);
                let sinr_ns = s.a_ns * s.rho_ns * g_ns;
                let interferer = match mode {
                    InterferenceMode::Conditional => s.ns_interference_gain,
                    InterferenceMode::Unconditional => g_ns,
                };
                let sinr_fs = s.a_fs * s.rho_fs * g_fs / (s.rho_ns * interferer * s.a_ns + 1.0);
                let ns_out = sinr_ns < s.gamma_ns;
                let fs_out = sinr_fs < s.gamma_fs;
                counts.0 += u64::from(ns_out);
                counts.1 += u64::from(fs_out);
                counts.2 += u64::from(ns_out || fs_out);
            }
            counts
        })
        .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let n = trials as f64;
    let (op_ns, op_fs, op_system) = (ns_fail as f64 / n, fs_fail as f64 / n, sys_fail as f64 / n);
    Ok(OutageReport {
        op_ns,
        op_fs,
        op_system,
        method: OutageMethod::MonteCarlo,
        trials,
        std_err: binomial_se(op_system, trials),
        std_err_ns: binomial_se(op_ns, trials),
        std_err_fs: binomial_se(op_fs, trials),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ShadowedRicianParams {
        ShadowedRicianParams::from_multipath_power(0.279, 2, 0.251).unwrap()
    }

    fn scenario(rho: f64, gamma: f64) -> OutageScenario {
        OutageScenario {
            ns: params(),
            fs: params(),
            rho_ns: rho,
            rho_fs: rho,
            a_ns: 0.25,
            a_fs: 0.75,
            gamma_ns: gamma,
            gamma_fs: gamma,
            ns_interference_gain: 0.53,
        }
    }

    #[test]
    fn closed_form_structure() {
        let p = params();
        assert!(
            (outage_ns_closed(&p, 40.0, 0.25, 3.0) - sr_cdf(3.0 / (0.25 * 40.0), &p)).abs() < 1e-12
        );
        assert!(outage_ns_closed(&p, 1e15, 0.25, 3.0) < 1e-12);
        assert_eq!(
            outage_fs_closed(&p, 40.0, 0.75, 3.0, &[]),
            outage_ns_closed(&p, 40.0, 0.75, 3.0)
        );
        assert!(outage_fs_closed(&p, 40.0, 0.75, 3.0, &[(1e12, 0.25)]) > 1.0 - 1e-12);
        assert!((outage_system_closed(0.01, 0.02) - 0.0298).abs() < 1e-15);
        assert_eq!(outage_system_closed(0.0, 0.0), 0.0);
    }

    #[test]
    fn zero_threshold_never_fails() {
        let r = outage_monte_carlo(
            &scenario(10.0, 0.0),
            20_000,
            3,
            InterferenceMode::Unconditional,
        )
        .unwrap();
        assert_eq!((r.op_ns, r.op_fs, r.op_system), (0.0, 0.0, 0.0));
    }

    #[test]
    fn deterministic_and_chunk_aligned() {
        let s = scenario(100.0, 3.0);
        let a = outage_monte_carlo(&s, 150_000, 9, InterferenceMode::Conditional).unwrap();
        let b = outage_monte_carlo(&s, 150_000, 9, InterferenceMode::Conditional).unwrap();
        assert_eq!(a, b);
        assert!(outage_monte_carlo(&s, 0, 9, InterferenceMode::Conditional).is_err());
    }
}
