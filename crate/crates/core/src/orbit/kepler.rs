use chrono::{DateTime, Utc};
use nalgebra::{Rotation3, Vector3};

use super::{OrbitError, StateVector, TwoLineElements, MU_EARTH};

const KEPLER_TOL: f64 = 1e-12;
const KEPLER_MAX_ITER: usize = 50;

/// Classical elements; angles in radians, `a` in km.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeplerianElements {
    pub semi_major_axis: f64,
    pub eccentricity: f64,
    pub inclination: f64,
    pub raan: f64,
    pub arg_perigee: f64,
    pub mean_anomaly: f64,
}

impl KeplerianElements {
    pub fn from_tle(tle: &TwoLineElements) -> Self {
        let n = tle.mean_motion * std::f64::consts::TAU / 86_400.0;
        Self {
            semi_major_axis: (MU_EARTH / (n * n)).cbrt(),
            eccentricity: tle.eccentricity,
            inclination: tle.inclination.to_radians(),
            raan: tle.raan.to_radians(),
            arg_perigee: tle.arg_perigee.to_radians(),
            mean_anomaly: tle.mean_anomaly.to_radians(),
        }
    }

    pub fn semi_latus_rectum(&self) -> f64 {
        self.semi_major_axis * (1.0 - self.eccentricity * self.eccentricity)
    }

    /// Mean motion in rad/s.
    pub fn mean_motion(&self) -> f64 {
        (MU_EARTH / self.semi_major_axis.powi(3)).sqrt()
    }
}

/// Newton iteration on `E − e·sin E = M`.
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> Result<f64, OrbitError> {
    let m = mean_anomaly;
    let mut ecc_anomaly = if e < 0.8 { m } else { std::f64::consts::PI.copysign(m.sin()) };
    for _ in 0..KEPLER_MAX_ITER {
        let f = ecc_anomaly - e * ecc_anomaly.sin() - m;
        let step = f / (1.0 - e * ecc_anomaly.cos());
        ecc_anomaly -= step;
        if step.abs() < KEPLER_TOL {
            return Ok(ecc_anomaly);
        }
    }
    Err(OrbitError::KeplerNonConvergence { eccentricity: e, mean_anomaly: m })
}

pub fn keplerian_to_state(el: &KeplerianElements, epoch: DateTime<Utc>) -> Result<StateVector, OrbitError> {
    let e = el.eccentricity;
    if !(0.0..1.0).contains(&e) {
        return Err(OrbitError::InvalidElements("eccentricity must be in [0, 1)"));
    }
    if !(el.semi_major_axis > 0.0) {
        return Err(OrbitError::InvalidElements("semi-major axis must be positive"));
    }
    let ecc_anomaly = solve_kepler(el.mean_anomaly, e)?;
    let nu = 2.0 * ((1.0 + e).sqrt() * (0.5 * ecc_anomaly).sin()).atan2((1.0 - e).sqrt() * (0.5 * ecc_anomaly).cos());
    let r = el.semi_major_axis * (1.0 - e * ecc_anomaly.cos());
    let p = el.semi_latus_rectum();
    let (s, c) = nu.sin_cos();
    let r_pf = Vector3::new(r * c, r * s, 0.0);
    let v_pf = Vector3::new(-s, e + c, 0.0) * (MU_EARTH / p).sqrt();
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), el.raan)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), el.inclination)
        * Rotation3::from_axis_angle(&Vector3::z_axis(), el.arg_perigee);
    Ok(StateVector { position: rot * r_pf, velocity: rot * v_pf, epoch })
}

/// Mean elements taken as osculating at the TLE epoch.
pub fn tle_to_state(tle: &TwoLineElements) -> Result<StateVector, OrbitError> {
    keplerian_to_state(&KeplerianElements::from_tle(tle), tle.epoch)
}

/// Right ascension of the ascending node from the angular momentum (rad).
pub fn state_to_raan(state: &StateVector) -> f64 {
    let h = state.angular_momentum();
    h.x.atan2(-h.y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn epoch() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
    }

    #[test]
    fn circular_equatorial_state() {
        let el = KeplerianElements {
            semi_major_axis: 7000.0,
            eccentricity: 0.0,
            inclination: 0.0,
            raan: 0.0,
            arg_perigee: 0.0,
            mean_anomaly: 0.0,
        };
        let s = keplerian_to_state(&el, epoch()).unwrap();
        assert!((s.position - Vector3::new(7000.0, 0.0, 0.0)).norm() < 1e-9);
        // Vis-viva for a circle: v = sqrt(mu / r).
        let v = (MU_EARTH / 7000.0).sqrt();
        assert!((s.velocity.norm() - v).abs() < 1e-12);
        assert!((v - 7.546).abs() < 5e-4);
    }

    #[test]
    fn tle_mean_motion_maps_to_semi_major_axis() {
        let n = (MU_EARTH / 7000f64.powi(3)).sqrt();
        let el = KeplerianElements::from_tle(&TwoLineElements {
            name: None,
            catalog_number: 1,
            classification: 'U',
            international_designator: String::new(),
            epoch: epoch(),
            mean_motion_dot: 0.0,
            mean_motion_ddot: 0.0,
            bstar: 0.0,
            ephemeris_type: 0,
            element_set_number: 0,
            inclination: 0.0,
            raan: 0.0,
            eccentricity: 0.0,
            arg_perigee: 0.0,
            mean_anomaly: 0.0,
            mean_motion: n * 86_400.0 / std::f64::consts::TAU,
            revolution_number: 0,
        });
        assert!((el.semi_major_axis - 7000.0).abs() < 1e-8);
    }

    #[test]
    fn circular_orbit_eccentric_anomaly_is_mean_anomaly() {
        for m in [0.0, 0.3, 1.7, 3.0, -2.0] {
            assert_eq!(solve_kepler(m, 0.0).unwrap(), m);
        }
    }

    #[test]
    fn kepler_residual() {
        let m = 30f64.to_radians();
        let e = solve_kepler(m, 0.1).unwrap();
        assert!((e - 0.1 * e.sin() - m).abs() < 1e-12);
        for &ecc in &[0.5, 0.9, 0.99] {
            for k in 0..20 {
                let m = -3.0 + 0.3 * k as f64;
                let e = solve_kepler(m, ecc).unwrap();
                assert!((e - ecc * e.sin() - m).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn raan_from_state() {
        let el = KeplerianElements {
            semi_major_axis: 6780.0,
            eccentricity: 0.001,
            inclination: 51.6f64.to_radians(),
            raan: 1.234,
            arg_perigee: 0.3,
            mean_anomaly: 2.0,
        };
        let s = keplerian_to_state(&el, epoch()).unwrap();
        assert!((state_to_raan(&s) - 1.234).abs() < 1e-12);
        let h = s.angular_momentum();
        assert!((h.z / h.norm() - el.inclination.cos()).abs() < 1e-12);
    }

    #[test]
    fn invalid_eccentricity() {
        let el = KeplerianElements {
            semi_major_axis: 7000.0,
            eccentricity: 1.0,
            inclination: 0.0,
            raan: 0.0,
            arg_perigee: 0.0,
            mean_anomaly: 0.0,
        };
        assert!(keplerian_to_state(&el, epoch()).is_err());
    }
}
