use chrono::{DateTime, Datelike, Utc};
use nalgebra::Vector3;

use super::OrbitError;

/// Julian date (UTC taken as TT; the difference is irrelevant here).
pub fn julian_date(epoch: &DateTime<Utc>) -> f64 {
    let secs = epoch.timestamp() as f64 + epoch.timestamp_subsec_nanos() as f64 * 1e-9;
    secs / 86_400.0 + 2_440_587.5
}

/// Unit vector from the Earth towards the Sun in the mean-equator ECI frame,
/// from the low-precision almanac series (about 0.01° over 1950-2100).
pub fn sun_direction(epoch: &DateTime<Utc>) -> Result<Vector3<f64>, OrbitError> {
    if !(1950..=2100).contains(&epoch.year()) {
        return Err(OrbitError::EpochOutOfRange(*epoch));
    }
    let n = julian_date(epoch) - 2_451_545.0;
    let mean_longitude = (280.460 + 0.985_647_4 * n).rem_euclid(360.0);
    let mean_anomaly = (357.528 + 0.985_600_3 * n).rem_euclid(360.0).to_radians();
    let ecliptic_longitude = (mean_longitude + 1.915 * mean_anomaly.sin() + 0.020 * (2.0 * mean_anomaly).sin()).to_radians();
    let obliquity = (23.439 - 4e-7 * n).to_radians();
    let (sl, cl) = ecliptic_longitude.sin_cos();
    let v = Vector3::new(cl, obliquity.cos() * sl, obliquity.sin() * sl);
    Ok(v / v.norm())
}
