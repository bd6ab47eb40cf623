//! Walker-delta constellations on ideal circular orbits.
//!
//! Inertial frame: x toward the Greenwich meridian at t = 0, z along the
//! Earth's rotation axis. Satellites follow two-body circular motion; ground
//! and HAP nodes rotate with the Earth at the sidereal rate.

mod nodes;
mod visibility;

pub use nodes::{node_position, GroundNode, NodeKind};
pub use visibility::{
    elevation_deg, is_visible, slant_range, visibility_windows, visibility_windows_all,
    ContactPlan, VisibilityWindow, WindowOptions,
};

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::units::{EARTH_GM, EARTH_RADIUS_M};

/// One shell of a Walker-delta constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellSpec {
    pub altitude_m: f64,
    pub inclination_deg: f64,
    pub num_orbits: usize,
    pub sats_per_orbit: usize,
    /// Right ascension of the ascending node, one entry per orbit.
    pub raan_offsets_deg: Vec<f64>,
    /// Argument-of-latitude shift between adjacent orbits.
    pub phase_offset_deg: f64,
}

impl ShellSpec {
    /// Walker-delta defaults: RAANs equally spaced over 360° and phasing
    /// factor F = 1, i.e. adjacent orbits shifted by 360°/(L·K).
    pub fn walker(
        altitude_m: f64,
        inclination_deg: f64,
        num_orbits: usize,
        sats_per_orbit: usize,
    ) -> Self {
        let l = num_orbits.max(1) as f64;
        let total = (num_orbits * sats_per_orbit).max(1) as f64;
        Self {
            altitude_m,
            inclination_deg,
            num_orbits,
            sats_per_orbit,
            raan_offsets_deg: (0..num_orbits).map(|i| 360.0 * i as f64 / l).collect(),
            phase_offset_deg: 360.0 / total,
        }
    }

    pub fn validate(&self, shell: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConstellation(format!("shell {shell}: {msg}")));
        if !(self.altitude_m > 0.0 && self.altitude_m.is_finite()) {
            return bad(format!("altitude {} m must be positive", self.altitude_m));
        }
        if !(0.0..=90.0).contains(&self.inclination_deg) {
            return bad(format!(
                "inclination {}° outside [0, 90]",
                self.inclination_deg
            ));
        }
        if self.num_orbits == 0 {
            return bad("zero orbits".into());
        }
        if self.sats_per_orbit == 0 {
            return bad("zero satellites per orbit".into());
        }
        if self.raan_offsets_deg.len() != self.num_orbits {
            return bad(format!(
                "{} RAAN offsets for {} orbits",
                self.raan_offsets_deg.len(),
                self.num_orbits
            ));
        }
        if !self.phase_offset_deg.is_finite()
            || self.raan_offsets_deg.iter().any(|r| !r.is_finite())
        {
            return bad("non-finite angle".into());
        }
        Ok(())
    }
}

/// Satellite identity; ordering is lexicographic over (shell, orbit, slot).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SatelliteId {
    pub shell_index: usize,
    pub orbit_index: usize,
    pub slot_index: usize,
}

impl SatelliteId {
    pub const fn new(shell_index: usize, orbit_index: usize, slot_index: usize) -> Self {
        Self {
            shell_index,
            orbit_index,
            slot_index,
        }
    }

    pub fn orbit(&self) -> OrbitId {
        OrbitId {
            shell_index: self.shell_index,
            orbit_index: self.orbit_index,
        }
    }
}

impl fmt::Display for SatelliteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sat({},{},{})",
            self.shell_index, self.orbit_index, self.slot_index
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrbitId {
    pub shell_index: usize,
    pub orbit_index: usize,
}

impl fmt::Display for OrbitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "orbit({},{})", self.shell_index, self.orbit_index)
    }
}

/// Position and velocity in the inertial frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub position: Vec3,
    pub velocity: Vec3,
    pub epoch_s: f64,
}

/// Elements of a circular orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularOrbit {
    pub radius_m: f64,
    pub inclination_rad: f64,
    pub raan_rad: f64,
    /// Argument of latitude at t = 0.
    pub initial_arg_lat_rad: f64,
}

impl CircularOrbit {
    pub fn speed_m_s(&self) -> f64 {
        (EARTH_GM / self.radius_m).sqrt()
    }

    pub fn period_s(&self) -> f64 {
        2.0 * PI * self.radius_m / self.speed_m_s()
    }

    pub fn state_at(&self, t: f64) -> StateVector {
        let n = 2.0 * PI / self.period_s();
        let u = self.initial_arg_lat_rad + n * t;
        let (su, cu) = u.sin_cos();
        let (so, co) = self.raan_rad.sin_cos();
        let (si, ci) = self.inclination_rad.sin_cos();
        let r = self.radius_m;
        let position = Vec3::new(
            r * (co * cu - so * su * ci),
            r * (so * cu + co * su * ci),
            r * su * si,
        );
        let v = r * n;
        let velocity = Vec3::new(
            v * (-co * su - so * cu * ci),
            v * (-so * su + co * cu * ci),
            v * cu * si,
        );
        StateVector {
            position,
            velocity,
            epoch_s: t,
        }
    }
}

/// A built constellation: satellites in ascending `SatelliteId` order.
#[derive(Debug, Clone)]
pub struct Constellation {
    shells: Vec<ShellSpec>,
    ids: Vec<SatelliteId>,
    orbits: Vec<CircularOrbit>,
}

pub fn build_walker_delta(specs: &[ShellSpec]) -> Result<Constellation> {
    let mut ids = Vec::new();
    let mut orbits = Vec::new();
    for (s, spec) in specs.iter().enumerate() {
        spec.validate(s)?;
        let radius_m = EARTH_RADIUS_M + spec.altitude_m;
        let k = spec.sats_per_orbit as f64;
        for (o, raan) in spec.raan_offsets_deg.iter().enumerate() {
            for slot in 0..spec.sats_per_orbit {
                let u0 = 360.0 * slot as f64 / k + spec.phase_offset_deg * o as f64;
                ids.push(SatelliteId::new(s, o, slot));
                orbits.push(CircularOrbit {
                    radius_m,
                    inclination_rad: spec.inclination_deg.to_radians(),
                    raan_rad: raan.to_radians(),
                    initial_arg_lat_rad: u0.rem_euclid(360.0).to_radians(),
                });
            }
        }
    }
    Ok(Constellation {
        shells: specs.to_vec(),
        ids,
        orbits,
    })
}

impl Constellation {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn shells(&self) -> &[ShellSpec] {
        &self.shells
    }

    pub fn ids(&self) -> &[SatelliteId] {
        &self.ids
    }

    /// Dense index of `id`, if it belongs to this constellation.
    pub fn index_of(&self, id: SatelliteId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn elements(&self, id: SatelliteId) -> Option<&CircularOrbit> {
        self.index_of(id).map(|i| &self.orbits[i])
    }

    pub fn elements_at(&self, index: usize) -> &CircularOrbit {
        &self.orbits[index]
    }

    /// Orbits in ascending order with their member satellites in slot order.
    pub fn orbits(&self) -> Vec<(OrbitId, Vec<SatelliteId>)> {
        let mut out: Vec<(OrbitId, Vec<SatelliteId>)> = Vec::new();
        for id in &self.ids {
            match out.last_mut() {
                Some((o, members)) if *o == id.orbit() => members.push(*id),
                _ => out.push((id.orbit(), vec![*id])),
            }
        }
        out
    }

    pub fn sats_in_orbit(&self, orbit: OrbitId) -> usize {
        self.shells
            .get(orbit.shell_index)
            .map_or(0, |s| s.sats_per_orbit)
    }

    /// Straight-line distance between adjacent satellites of an orbit.
    pub fn isl_distance_m(&self, orbit: OrbitId) -> f64 {
        let spec = &self.shells[orbit.shell_index];
        let r = EARTH_RADIUS_M + spec.altitude_m;
        if spec.sats_per_orbit < 2 {
            return 0.0;
        }
        2.0 * r * (PI / spec.sats_per_orbit as f64).sin()
    }

    pub fn propagate(&self, id: SatelliteId, t: f64) -> Option<StateVector> {
        self.elements(id).map(|e| e.state_at(t))
    }

    pub fn position_at(&self, index: usize, t: f64) -> Vec3 {
        self.orbits[index].state_at(t).position
    }
}

/// Propagates one satellite; `None` if the id is not in the constellation.
pub fn propagate_satellite(
    constellation: &Constellation,
    id: SatelliteId,
    t: f64,
) -> Option<StateVector> {
    constellation.propagate(id, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn sixty_satellite_walker() {
        let specs: Vec<_> = [500e3, 1000e3, 1500e3]
            .iter()
            .map(|&h| ShellSpec::walker(h, 70.0, 2, 10))
            .collect();
        let c = build_walker_delta(&specs).unwrap();
        assert_eq!(c.len(), 60);
        assert_eq!(c.orbits().len(), 6);
        let mut sorted = c.ids().to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 60);
    }

    #[test]
    fn degenerate_and_equal_spacing() {
        let single = build_walker_delta(&[ShellSpec::walker(500e3, 0.0, 1, 1)]).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.elements_at(0).initial_arg_lat_rad, 0.0);

        let four = build_walker_delta(&[ShellSpec::walker(500e3, 0.0, 1, 4)]).unwrap();
        let angles: Vec<f64> = (0..4)
            .map(|i| four.elements_at(i).initial_arg_lat_rad.to_degrees())
            .collect();
        for (a, want) in angles.iter().zip([0.0, 90.0, 180.0, 270.0]) {
            assert!((a - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_empty_shells() {
        assert!(build_walker_delta(&[ShellSpec::walker(500e3, 70.0, 0, 10)]).is_err());
        assert!(build_walker_delta(&[ShellSpec::walker(500e3, 70.0, 2, 0)]).is_err());
        assert!(build_walker_delta(&[ShellSpec::walker(-1.0, 70.0, 2, 2)]).is_err());
        let mut s = ShellSpec::walker(500e3, 70.0, 2, 2);
        s.raan_offsets_deg.pop();
        assert!(build_walker_delta(&[s]).is_err());
        assert!(build_walker_delta(&[]).unwrap().is_empty());
    }

    #[test]
    fn kinematics_match_circular_formulas() {
        let c = build_walker_delta(&[
            ShellSpec::walker(500e3, 70.0, 1, 1),
            ShellSpec::walker(1500e3, 70.0, 1, 1),
        ])
        .unwrap();
        let low = c.elements_at(0);
        // Independent route: v = sqrt(GM/r) evaluated by hand.
        assert!((low.speed_m_s() - 7610.9).abs() < 0.1);
        assert!((low.period_s() - 5672.0).abs() < 1.0);
        // 2π·sqrt(r³/GM) at r = 7871 km is 6954.8 s.
        assert!((c.elements_at(1).period_s() - 6954.8).abs() < 0.1);

        let s = low.state_at(123.0);
        assert!(rel(s.velocity.norm(), low.speed_m_s()) < 1e-12);
        assert!(s.position.dot(s.velocity).abs() / (s.position.norm() * s.velocity.norm()) < 1e-12);
    }

    #[test]
    fn velocity_is_position_derivative() {
        let o = CircularOrbit {
            radius_m: 7e6,
            inclination_rad: 1.1,
            raan_rad: 0.4,
            initial_arg_lat_rad: 2.0,
        };
        let h = 1e-3;
        let t = 500.0;
        let fd = (o.state_at(t + h).position - o.state_at(t - h).position) * (0.5 / h);
        let v = o.state_at(t).velocity;
        assert!((fd - v).norm() / v.norm() < 1e-8);
    }
}
