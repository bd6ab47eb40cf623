//! Physical constants and dB/linear conversions.
//!
//! Every conversion between logarithmic and linear units goes through this
//! module; the rest of the crate works in linear SI units.

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Mean Earth radius, m.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
/// Gravitational parameter G·M of the Earth, m³/s².
pub const EARTH_GM: f64 = 3.98e14;
/// Length of the sidereal day, s.
pub const SIDEREAL_DAY_S: f64 = 86_164.1;
/// Earth rotation rate, rad/s.
pub const EARTH_ROTATION_RAD_S: f64 = 2.0 * std::f64::consts::PI / SIDEREAL_DAY_S;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.38e-23;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

pub fn watts_to_dbw(w: f64) -> f64 {
    linear_to_db(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_round_trip() {
        for db in [-130.0, -3.0, 0.0, 6.98, 178.46] {
            assert!((linear_to_db(db_to_linear(db)) - db).abs() < 1e-12);
        }
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((watts_to_dbm(1e-3)).abs() < 1e-12);
        assert!((watts_to_dbw(1.0)).abs() < 1e-15);
    }
}
