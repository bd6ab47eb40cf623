//! Symbol-level QPSK over the NOMA superposition with real SIC (decoded
//! symbols are re-modulated and subtracted, so errors propagate).

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::group::NomaGroup;
use super::outage::MC_CHUNK;
use crate::channel::ShadowedRicianParams;
use crate::error::{invalid, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq)]
pub enum FadingMode {
    /// Coefficients fixed at `sqrt(gain)`.
    Fixed,
    /// Per-trial shadowed-Rician draw scaled so that `E|λ|² = gain`.
    ShadowedRician(ShadowedRicianParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerConfig {
    pub trials: u64,
    pub seed: u64,
    pub fading: FadingMode,
    /// Drop the receiver noise.
    pub noiseless: bool,
}

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn qpsk(bits: u32) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(
        if bits & 1 == 0 { s } else { -s },
        if bits & 2 == 0 { s } else { -s },
    )
}

fn hard_decision(z: Complex64) -> u32 {
    u32::from(z.re < 0.0) | (u32::from(z.im < 0.0) << 1)
}

/// Bit error rate per user, in the group's SIC order.
pub fn qpsk_ber_monte_carlo(group: &NomaGroup, cfg: &BerConfig) -> Result<Vec<f64>> {
    if group.is_empty() {
        return Err(invalid("group", "must contain at least one user"));
    }
    if cfg.trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    let k = group.len();
    let amp: Vec<f64> = group
        .users
        .iter()
        .map(|u| (u.power_coeff * group.snr_rho).sqrt())
        .collect();
    let chunks = cfg.trials.div_ceil(MC_CHUNK);
    let errors = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = MC_CHUNK.min(cfg.trials - c * MC_CHUNK);
            let mut rng = rng_for(cfg.seed, "qpsk-ber", &[c]);
            let mut errs = vec![0u64; k];
            let mut lambda = vec![Complex64::new(0.0, 0.0); k];
            let mut bits = vec![0u32; k];
            for _ in 0..n {
                let mut y = Complex64::new(0.0, 0.0);
                for (i, u) in group.users.iter().enumerate() {
                    lambda[i] = match &cfg.fading {
                        FadingMode::Fixed => Complex64::new(u.gain.sqrt(), 0.0),
                        FadingMode::ShadowedRician(p) => {
                            p.sample_coefficient(&mut rng) * (u.gain / p.mean()).sqrt()
                        }
                    };
                    bits[i] = rng.random_range(0..4);
                    y += lambda[i] * amp[i] * qpsk(bits[i]);
                }
                if !cfg.noiseless {
                    let s = std::f64::consts::FRAC_1_SQRT_2;
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    y += Complex64::new(s * re, s * im);
                }
                for i in 0..k {
                    let h = lambda[i] * amp[i];
                    let decided = if h.norm_sqr() > 0.0 {
                        hard_decision(y / h)
                    } else {
                        0
                    };
                    errs[i] += u64::from((decided ^ bits[i]).count_ones());
                    y -= h * qpsk(decided);
                }
            }
            errs
        })
        .reduce(
            || vec![0u64; k],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(errors
        .into_iter()
        .map(|e| e as f64 / (2.0 * cfg.trials as f64))
        .collect())
}
