//! Inertial propagation of the target vehicle: two-body gravity with J2 and
//! exponential-atmosphere drag, TLE ingestion and a low-precision Sun model.
//!
//! TLE mean elements are treated as osculating at epoch; SGP4 is not used.

mod dynamics;
mod kepler;
mod sun;
mod tle;

pub use dynamics::{
    acceleration, acceleration_with, atmospheric_density, lvlh_attitude, propagate, propagate_with,
    specific_energy, write_ephemeris_csv, ForceModel, EPHEMERIS_CSV_HEADER,
};
pub use kepler::{keplerian_to_state, solve_kepler, state_to_raan, tle_to_state, KeplerianElements};
pub use sun::{julian_date, sun_direction};
pub use tle::{checksum, parse_tle, parse_tle_file, render_tle, TwoLineElements};

use chrono::{DateTime, Utc};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Earth gravitational parameter (km³/s²).
pub const MU_EARTH: f64 = 398_600.4418;
/// Equatorial radius (km).
pub const R_EARTH: f64 = 6378.137;
pub const J2: f64 = 1.082_626_68e-3;
/// Earth rotation rate (rad/s).
pub const OMEGA_EARTH: f64 = 7.292_115_9e-5;
/// Exponential atmosphere: reference density (kg/m³) at reference altitude
/// (km) with scale height (km).
pub const RHO_REF: f64 = 3.614e-13;
pub const H_REF: f64 = 700.0;
pub const SCALE_HEIGHT: f64 = 88.667;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("TLE line {line}: checksum mismatch (expected {expected}, found '{found}')")]
    ChecksumMismatch { line: u8, expected: u8, found: char },
    #[error("TLE line {line}: cannot parse {field}")]
    BadFieldFormat { line: u8, field: &'static str },
    #[error("TLE line {line}: expected 69 ASCII characters, got {len}")]
    LineLength { line: u8, len: usize },
    #[error("Kepler's equation did not converge (e = {eccentricity}, M = {mean_anomaly} rad)")]
    KeplerNonConvergence { eccentricity: f64, mean_anomaly: f64 },
    #[error("state is below the Earth's surface (|r| = {radius:.3} km)")]
    BelowSurface { radius: f64 },
    #[error("epoch {0} is outside 1950-2100")]
    EpochOutOfRange(DateTime<Utc>),
    #[error("invalid orbital elements: {0}")]
    InvalidElements(&'static str),
    #[error("invalid propagation step: dt = {dt} s, duration = {duration} s")]
    InvalidStep { dt: f64, duration: f64 },
}

/// Earth-centred inertial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    /// km
    pub position: Vector3<f64>,
    /// km/s
    pub velocity: Vector3<f64>,
    pub epoch: DateTime<Utc>,
}

impl StateVector {
    pub fn angular_momentum(&self) -> Vector3<f64> {
        self.position.cross(&self.velocity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacecraftProperties {
    /// kg
    pub mass: f64,
    /// m²
    pub drag_area: f64,
    pub drag_coefficient: f64,
}

impl Default for SpacecraftProperties {
    /// Roughly ISS-like ballistic properties.
    fn default() -> Self {
        Self { mass: 420_000.0, drag_area: 1600.0, drag_coefficient: 2.2 }
    }
}

impl SpacecraftProperties {
    pub fn validate(&self) -> Result<(), OrbitError> {
        if self.mass > 0.0 && self.drag_area > 0.0 && self.drag_coefficient > 0.0 {
            Ok(())
        } else {
            Err(OrbitError::InvalidElements("spacecraft properties must be strictly positive"))
        }
    }
}
