use crate::error::{invalid, Result};
use crate::units::{db_to_linear, BOLTZMANN, SPEED_OF_LIGHT};

use super::special::bessel_j;

/// Satellite-to-PS link parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudgetParams {
    pub carrier_hz: f64,
    /// Satellite antenna peak gain (shaped by the beam pattern).
    pub tx_antenna_gain_dbi: f64,
    /// Parameter-server antenna gain.
    pub rx_antenna_gain_dbi: f64,
    /// Pointing error in degrees.
    pub pointing_error_deg: f64,
    pub aperture_diameter_m: f64,
    /// Beam-pattern argument `k_s`.
    pub beam_edge_constant: f64,
}

impl LinkBudgetParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz > 0.0) {
            return Err(invalid("carrier_hz", "must be positive"));
        }
        if !(self.aperture_diameter_m > 0.0) {
            return Err(invalid("aperture_diameter_m", "must be positive"));
        }
        // Zero means the user sits on boresight.
        if !(self.beam_edge_constant >= 0.0) {
            return Err(invalid("beam_edge_constant", "must be nonnegative"));
        }
        if self.pointing_error_deg < 0.0 {
            return Err(invalid("pointing_error_deg", "must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub temperature_k: f64,
    pub bandwidth_hz: f64,
}

/// Free-space path loss `(4π d f / c)²`, linear.
pub fn free_space_path_loss(distance_m: f64, carrier_hz: f64) -> f64 {
    let x = 4.0 * std::f64::consts::PI * distance_m * carrier_hz / SPEED_OF_LIGHT;
    x * x
}

/// Pointing loss `2.7211e-20 f² θ² D²` with θ in degrees, linear. The
/// constant carries the units, so θ = 0 gives 0 (clamped in [`shl_budget`]).
pub fn pointing_loss(carrier_hz: f64, pointing_error_deg: f64, aperture_diameter_m: f64) -> f64 {
    2.7211e-20 * carrier_hz.powi(2) * pointing_error_deg.powi(2) * aperture_diameter_m.powi(2)
}

/// Beam-pattern gain `G·(J1(k)/(2k) + 36·J3(k)/k³)²`.
pub fn beam_gain(peak_gain_linear: f64, k_s: f64) -> f64 {
    let bracket = if k_s.abs() < 1e-6 {
        // Small-argument limit: 1/4 + 36/48.
        1.0
    } else {
        bessel_j(1, k_s) / (2.0 * k_s) + 36.0 * bessel_j(3, k_s) / k_s.powi(3)
    };
    peak_gain_linear * bracket * bracket
}

/// Total linear gain of a satellite→PS link at the given distance.
pub fn shl_budget(link: &LinkBudgetParams, distance_m: f64) -> f64 {
    let g_rx = db_to_linear(link.rx_antenna_gain_dbi);
    let g_tx = beam_gain(
        db_to_linear(link.tx_antenna_gain_dbi),
        link.beam_edge_constant,
    );
    let l_fs = free_space_path_loss(distance_m, link.carrier_hz);
    let l_p = pointing_loss(
        link.carrier_hz,
        link.pointing_error_deg,
        link.aperture_diameter_m,
    )
    .max(1.0);
    g_rx * g_tx / (l_fs * l_p)
}

/// Thermal noise power `K_B·T·B` in watts.
pub fn noise_power(noise: &NoiseParams) -> Result<f64> {
    if !(noise.temperature_k > 0.0) {
        return Err(invalid("temperature_k", "must be positive"));
    }
    if !(noise.bandwidth_hz > 0.0) {
        return Err(invalid("bandwidth_hz", "must be positive"));
    }
    Ok(BOLTZMANN * noise.temperature_k * noise.bandwidth_hz)
}
