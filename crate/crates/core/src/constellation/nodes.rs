use crate::geometry::Vec3;
use crate::units::{EARTH_RADIUS_M, EARTH_ROTATION_RAD_S};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    GroundStation,
    Hap,
}

/// An Earth-fixed parameter-server site (ground station or HAP).
#[derive(Debug, Clone, PartialEq)]
pub struct GroundNode {
    pub name: String,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_m: f64,
    pub min_elevation_deg: f64,
    pub kind: NodeKind,
}

impl GroundNode {
    pub fn position_at(&self, t: f64) -> Vec3 {
        node_position(self, t)
    }

    /// Unit vector of the local vertical at time `t`.
    pub fn zenith_at(&self, t: f64) -> Vec3 {
        let (slat, clat) = self.latitude_deg.to_radians().sin_cos();
        let theta = self.longitude_deg.to_radians() + EARTH_ROTATION_RAD_S * t;
        let (sth, cth) = theta.sin_cos();
        Vec3::new(clat * cth, clat * sth, slat)
    }
}

/// Inertial position of an Earth-fixed node (spherical Earth).
pub fn node_position(node: &GroundNode, t: f64) -> Vec3 {
    node.zenith_at(t) * (EARTH_RADIUS_M + node.altitude_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::SIDEREAL_DAY_S;

    fn node(lat: f64, lon: f64) -> GroundNode {
        GroundNode {
            name: "n".into(),
            latitude_deg: lat,
            longitude_deg: lon,
            altitude_m: 25e3,
            min_elevation_deg: 10.0,
            kind: NodeKind::Hap,
        }
    }

    #[test]
    fn frame_conventions() {
        let eq = node(0.0, 0.0);
        let p = node_position(&eq, 0.0);
        assert!((p.x - (EARTH_RADIUS_M + 25e3)).abs() < 1e-6);
        assert!(p.y.abs() < 1e-6 && p.z.abs() < 1e-6);

        let pole = node(90.0, 40.0);
        let a = node_position(&pole, 0.0);
        let b = node_position(&pole, 12_345.0);
        assert!((a - b).norm() < 1e-6);
        assert!(a.x.hypot(a.y) < 1e-6);
    }

    #[test]
    fn sidereal_periodicity_and_radius() {
        let n = node(37.95, -91.77);
        let a = node_position(&n, 1000.0);
        let b = node_position(&n, 1000.0 + SIDEREAL_DAY_S);
        assert!((a - b).norm() / a.norm() < 1e-9);
        let ring = (EARTH_RADIUS_M + 25e3) * 37.95f64.to_radians().cos();
        assert!((a.x.hypot(a.y) - ring).abs() / ring < 1e-12);
    }
}
