use std::io::Write;

use chrono::{Duration, SecondsFormat};
use nalgebra::{Matrix3, Vector3};

use super::{OrbitError, SpacecraftProperties, StateVector, H_REF, J2, MU_EARTH, OMEGA_EARTH, RHO_REF, R_EARTH, SCALE_HEIGHT};
use crate::pose::{Dcm, UnitQuaternion};

pub const EPHEMERIS_CSV_HEADER: &str = "epoch_iso8601,rx_km,ry_km,rz_km,vx_kms,vy_kms,vz_kms";

/// Which perturbations are switched on in addition to point-mass gravity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForceModel {
    pub j2: bool,
    pub drag: bool,
}

impl Default for ForceModel {
    fn default() -> Self {
        Self { j2: true, drag: true }
    }
}

impl ForceModel {
    pub const TWO_BODY: Self = Self { j2: false, drag: false };
    pub const J2_ONLY: Self = Self { j2: true, drag: false };
}

/// Exponential atmosphere, kg/m³, altitude in km.
pub fn atmospheric_density(altitude_km: f64) -> f64 {
    RHO_REF * (-(altitude_km - H_REF) / SCALE_HEIGHT).exp()
}

fn accel(r: &Vector3<f64>, v: &Vector3<f64>, props: &SpacecraftProperties, forces: ForceModel) -> Result<Vector3<f64>, OrbitError> {
    let rn = r.norm();
    if !(rn > R_EARTH) {
        return Err(OrbitError::BelowSurface { radius: rn });
    }
    let mut a = -MU_EARTH / (rn * rn * rn) * r;
    if forces.j2 {
        let zr2 = (r.z / rn).powi(2);
        let k = -1.5 * J2 * MU_EARTH * R_EARTH * R_EARTH / rn.powi(5);
        a += k * Vector3::new((1.0 - 5.0 * zr2) * r.x, (1.0 - 5.0 * zr2) * r.y, (3.0 - 5.0 * zr2) * r.z);
    }
    if forces.drag {
        let v_rel = v - Vector3::new(0.0, 0.0, OMEGA_EARTH).cross(r);
        let rho = atmospheric_density(rn - R_EARTH);
        // ρ [kg/m³] · (km/s)² · m²/kg is 1e6 m/s²-units; back to km/s² is 1e-3.
        let k = -0.5 * rho * props.drag_coefficient * props.drag_area / props.mass * 1e3;
        a += k * v_rel.norm() * v_rel;
    }
    Ok(a)
}

/// Total acceleration (km/s²) with J2 and drag switched on.
pub fn acceleration(state: &StateVector, props: &SpacecraftProperties) -> Result<Vector3<f64>, OrbitError> {
    accel(&state.position, &state.velocity, props, ForceModel::default())
}

pub fn acceleration_with(state: &StateVector, props: &SpacecraftProperties, forces: ForceModel) -> Result<Vector3<f64>, OrbitError> {
    accel(&state.position, &state.velocity, props, forces)
}

fn rk4_step(
    r: &Vector3<f64>,
    v: &Vector3<f64>,
    h: f64,
    props: &SpacecraftProperties,
    forces: ForceModel,
) -> Result<(Vector3<f64>, Vector3<f64>), OrbitError> {
    let a1 = accel(r, v, props, forces)?;
    let (r2, v2) = (r + 0.5 * h * v, v + 0.5 * h * a1);
    let a2 = accel(&r2, &v2, props, forces)?;
    let (r3, v3) = (r + 0.5 * h * v2, v + 0.5 * h * a2);
    let a3 = accel(&r3, &v3, props, forces)?;
    let (r4, v4) = (r + h * v3, v + h * a3);
    let a4 = accel(&r4, &v4, props, forces)?;
    Ok((
        r + h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4),
        v + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
    ))
}

/// Fixed-step RK4 with the full force model. Returns the initial state and
/// one state per step; a trailing partial step lands exactly on `duration`.
pub fn propagate(state: &StateVector, props: &SpacecraftProperties, dt: f64, duration: f64) -> Result<Vec<StateVector>, OrbitError> {
    propagate_with(state, props, dt, duration, ForceModel::default())
}

pub fn propagate_with(
    state: &StateVector,
    props: &SpacecraftProperties,
    dt: f64,
    duration: f64,
    forces: ForceModel,
) -> Result<Vec<StateVector>, OrbitError> {
    if !(dt > 0.0) || !(duration >= dt) || !duration.is_finite() {
        return Err(OrbitError::InvalidStep { dt, duration });
    }
    if forces.drag {
        props.validate()?;
    }
    let full_steps = (duration / dt * (1.0 + 1e-12)).floor() as usize;
    let remainder = duration - full_steps as f64 * dt;
    let mut out = Vec::with_capacity(full_steps + 2);
    out.push(*state);
    let (mut r, mut v) = (state.position, state.velocity);
    let mut elapsed = 0.0;
    let step = |h: f64, r: &mut Vector3<f64>, v: &mut Vector3<f64>, elapsed: &mut f64| -> Result<StateVector, OrbitError> {
        let (rn, vn) = rk4_step(r, v, h, props, forces)?;
        *r = rn;
        *v = vn;
        *elapsed += h;
        if !(r.norm() > R_EARTH) {
            return Err(OrbitError::BelowSurface { radius: r.norm() });
        }
        Ok(StateVector { position: rn, velocity: vn, epoch: state.epoch + Duration::nanoseconds((*elapsed * 1e9).round() as i64) })
    };
    for k in 1..=full_steps {
        let mut s = step(dt, &mut r, &mut v, &mut elapsed)?;
        // Re-derive the timestamp from the step index to avoid summation drift.
        s.epoch = state.epoch + Duration::nanoseconds((k as f64 * dt * 1e9).round() as i64);
        out.push(s);
    }
    if remainder > 1e-9 * dt {
        out.push(step(remainder, &mut r, &mut v, &mut elapsed)?);
    }
    Ok(out)
}

/// Specific orbital energy `½v² − μ/r` (km²/s²).
pub fn specific_energy(s: &StateVector) -> f64 {
    0.5 * s.velocity.norm_squared() - MU_EARTH / s.position.norm()
}

/// Nadir-pointing LVLH attitude: rotation taking ECI coordinates into the
/// local frame with `z` towards nadir, `y` against the orbit normal and `x`
/// completing the triad (along the velocity for circular orbits).
pub fn lvlh_attitude(state: &StateVector) -> UnitQuaternion {
    let z = -state.position.normalize();
    let y = -state.angular_momentum().normalize();
    let x = y.cross(&z);
    let eci_from_lvlh = Matrix3::from_columns(&[x, y, z]);
    UnitQuaternion::from_dcm(&Dcm::from_matrix_unchecked(eci_from_lvlh.transpose()))
}

pub fn write_ephemeris_csv<W: Write>(mut w: W, states: &[StateVector]) -> std::io::Result<()> {
    writeln!(w, "{EPHEMERIS_CSV_HEADER}")?;
    for s in states {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6},{:.9},{:.9},{:.9}",
            s.epoch.to_rfc3339_opts(SecondsFormat::Micros, true),
            s.position.x,
            s.position.y,
            s.position.z,
            s.velocity.x,
            s.velocity.y,
            s.velocity.z
        )?;
    }
    Ok(())
}
