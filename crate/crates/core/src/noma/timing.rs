use crate::units::SPEED_OF_LIGHT;

/// Transmission plus propagation time of one model exchange, s.
/// Processing delays are omitted.
pub fn oma_exchange_time(model_bits: f64, rate_bps: f64, distance_m: f64) -> f64 {
    model_bits / rate_bps + distance_m / SPEED_OF_LIGHT
}
