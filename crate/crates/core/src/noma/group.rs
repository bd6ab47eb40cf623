use crate::constellation::SatelliteId;
use crate::error::{invalid, Result};

/// One satellite in a NOMA group.
#[derive(Debug, Clone, PartialEq)]
pub struct NomaUser {
    pub sat: SatelliteId,
    /// Channel power `|λ|²` (including any large-scale gain).
    pub gain: f64,
    pub power_coeff: f64,
    /// Target rate, bits/s/Hz.
    pub target_rate: f64,
    pub shell_index: usize,
}

impl NomaUser {
    pub fn new(sat: SatelliteId, gain: f64) -> Self {
        Self {
            sat,
            gain,
            power_coeff: 1.0,
            target_rate: 0.0,
            shell_index: sat.shell_index,
        }
    }
}

/// Users in SIC order (descending gain) sharing one transmit SNR `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NomaGroup {
    pub users: Vec<NomaUser>,
    pub snr_rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMode {
    /// 25/75 split for two users; inverse-gain ladder for more.
    Static,
    /// Coefficients proportional to squared distance.
    Dynamic,
}

/// How the SINR threshold follows from a target rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GammaForm {
    /// `2^{2R} − 1`.
    #[default]
    DoubleRate,
    /// `2^R − 1`.
    Conventional,
}

pub fn gamma_threshold(rate: f64, form: GammaForm) -> f64 {
    match form {
        GammaForm::DoubleRate => 2f64.powf(2.0 * rate) - 1.0,
        GammaForm::Conventional => 2f64.powf(rate) - 1.0,
    }
}

/// Sorts by descending gain; equal gains fall back to satellite order.
pub fn order_by_gain(mut users: Vec<NomaUser>, snr_rho: f64) -> NomaGroup {
    users.sort_by(|a, b| b.gain.total_cmp(&a.gain).then(a.sat.cmp(&b.sat)));
    NomaGroup { users, snr_rho }
}

/// Power coefficients for users listed in SIC order. `distances_m` is only
/// read in dynamic mode. Coefficients sum to 1.
pub fn allocate_power(gains: &[f64], distances_m: &[f64], mode: PowerMode) -> Result<Vec<f64>> {
    let n = gains.len();
    if n == 0 {
        return Err(invalid("users", "power allocation needs a nonempty group"));
    }
    let uniform = vec![1.0 / n as f64; n];
    let weights: Vec<f64> = match mode {
        PowerMode::Static => {
            if gains.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
                return Ok(uniform);
            }
            if n == 2 {
                return Ok(if gains[0] >= gains[1] {
                    vec![0.25, 0.75]
                } else {
                    vec![0.75, 0.25]
                });
            }
            gains.iter().map(|g| 1.0 / g).collect()
        }
        PowerMode::Dynamic => {
            if distances_m.len() != n {
                return Err(invalid(
                    "distances_m",
                    format!("{} distances for {n} users", distances_m.len()),
                ));
            }
            if distances_m.iter().any(|d| !d.is_finite() || *d < 0.0) {
                return Err(invalid("distances_m", "must be finite and nonnegative"));
            }
            distances_m.iter().map(|d| d * d).collect()
        }
    };
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Ok(uniform);
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

impl NomaGroup {
    /// Assigns power coefficients in place.
    pub fn allocate(&mut self, mode: PowerMode, distances_m: &[f64]) -> Result<()> {
        let gains: Vec<f64> = self.users.iter().map(|u| u.gain).collect();
        let a = allocate_power(&gains, distances_m, mode)?;
        for (u, a) in self.users.iter_mut().zip(a) {
            u.power_coeff = a;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn position_of(&self, sat: SatelliteId) -> Option<usize> {
        self.users.iter().position(|u| u.sat == sat)
    }
}

/// SINR of the `k`-th user (0-based, SIC order): interference comes from the
/// stronger users `i < k`.
pub fn sinr(group: &NomaGroup, k: usize) -> f64 {
    let rho = group.snr_rho;
    let u = &group.users[k];
    let signal = u.power_coeff * rho * u.gain;
    if k == 0 {
        return signal;
    }
    let interference: f64 = group.users[..k]
        .iter()
        .map(|v| v.gain * v.power_coeff)
        .sum();
    signal / (rho * interference + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// `log2(1 + SINR_k)` per user in SIC order, bits/s/Hz.
    pub per_user: Vec<f64>,
    pub total: f64,
}

pub fn sum_rate(group: &NomaGroup) -> RateReport {
    let per_user: Vec<f64> = (0..group.len())
        .map(|k| sinr(group, k).ln_1p() / std::f64::consts::LN_2)
        .collect();
    let total = per_user.iter().sum();
    RateReport { per_user, total }
}

/// `log2(1 + ρ Σ a_k |λ_k|²)`.
pub fn sum_rate_closed(group: &NomaGroup) -> f64 {
    let s: f64 = group.users.iter().map(|u| u.gain * u.power_coeff).sum();
    (group.snr_rho * s).ln_1p() / std::f64::consts::LN_2
}

/// High-SNR approximation `log2(ρ Σ a_k |λ_k|²)`.
pub fn sum_rate_high_snr(group: &NomaGroup) -> f64 {
    let s: f64 = group.users.iter().map(|u| u.gain * u.power_coeff).sum();
    (group.snr_rho * s).log2()
}
