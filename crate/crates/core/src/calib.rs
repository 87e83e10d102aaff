//! Motion-capture ground-truth calibration.
//!
//! With the camera-rig pose `T_oi`, the target-rig pose `T_os` and an
//! independent camera-frame observation `T_cb`, each sample satisfies
//! `A_k·Y = X·B_k` for `A_k = T_oi⁻¹·T_os`, `B_k = T_cb`, `X = T_ic` and
//! `Y = T_sb`.

use std::io::BufRead;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::{attitude_error, Dcm, Pose, UnitQuaternion, Vec3};

/// Smallest relative rotation that counts as excitation, degrees.
pub const MIN_EXCITATION_DEG: f64 = 5.0;
/// Smallest angle between two excitation axes, degrees.
pub const MIN_AXIS_SEPARATION_DEG: f64 = 5.0;
pub const MIN_SAMPLES: usize = 3;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("{0} samples given, at least {MIN_SAMPLES} required")]
    TooFewSamples(usize),
    #[error("insufficient excitation: {0}")]
    InsufficientExcitation(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibSample {
    pub t_oi: Pose,
    pub t_os: Pose,
    pub t_cb: Pose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibResult {
    pub t_ic: Pose,
    pub t_sb: Pose,
    /// Degrees.
    pub rms_rotation_residual: f64,
    /// Metres.
    pub rms_translation_residual: f64,
}

fn a_of(s: &CalibSample) -> Pose {
    s.t_oi.inverse().compose(&s.t_os)
}

/// Nearest proper rotation in the Frobenius sense.
fn project_to_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let d = (u * vt).determinant().signum();
    u * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * vt
}

fn quat(m: &Matrix3<f64>) -> UnitQuaternion {
    UnitQuaternion::from_dcm(&Dcm::from_matrix_unchecked(*m))
}

/// Rotation angle (degrees) and unit axis of a rotation.
fn angle_axis(q: &UnitQuaternion) -> (f64, Option<Vec3>) {
    let v = Vec3::new(q.x, q.y, q.z);
    let angle = 2.0 * v.norm().atan2(q.w.abs());
    let axis = (v.norm() > 0.0).then(|| v.normalize());
    (angle.to_degrees(), axis)
}

/// Requires relative rotations `A_j·A_k⁻¹` of at least
/// [`MIN_EXCITATION_DEG`] about two axes separated by at least
/// [`MIN_AXIS_SEPARATION_DEG`].
pub fn check_excitation(samples: &[CalibSample]) -> Result<(), CalibError> {
    if samples.len() < MIN_SAMPLES {
        return Err(CalibError::TooFewSamples(samples.len()));
    }
    let rots: Vec<UnitQuaternion> = samples.iter().map(|s| a_of(s).rotation).collect();
    let mut axes: Vec<Vec3> = Vec::new();
    for j in 0..rots.len() {
        for k in j + 1..rots.len() {
            let (angle, axis) = angle_axis(&rots[j].mul(&rots[k].inverse()));
            if let (true, Some(a)) = (angle >= MIN_EXCITATION_DEG, axis) {
                axes.push(a);
            }
        }
    }
    let sep = MIN_AXIS_SEPARATION_DEG.to_radians().sin();
    let independent = axes.iter().enumerate().any(|(i, a)| axes[i + 1..].iter().any(|b| a.cross(b).norm() >= sep));
    if independent {
        Ok(())
    } else {
        Err(CalibError::InsufficientExcitation(format!(
            "{} relative rotations of at least {MIN_EXCITATION_DEG}° but no two independent axes",
            axes.len()
        )))
    }
}

/// RMS rotation angle (degrees) and translation norm (m) of
/// `A_k·Y·(X·B_k)⁻¹` over the samples.
pub fn residuals(samples: &[CalibSample], t_ic: &Pose, t_sb: &Pose) -> (f64, f64) {
    let n = samples.len().max(1) as f64;
    let (mut r2, mut t2) = (0.0, 0.0);
    for s in samples {
        let e = a_of(s).compose(t_sb).compose(&t_ic.compose(&s.t_cb).inverse());
        r2 += attitude_error(&e.rotation, &UnitQuaternion::IDENTITY).powi(2);
        t2 += e.translation.norm_squared();
    }
    ((r2 / n).sqrt(), (t2 / n).sqrt())
}

pub fn solve_statics(samples: &[CalibSample]) -> Result<CalibResult, CalibError> {
    check_excitation(samples)?;
    let k = samples.len();
    let a: Vec<Pose> = samples.iter().map(a_of).collect();
    let ra: Vec<Matrix3<f64>> = a.iter().map(|p| *p.rotation.to_dcm().matrix()).collect();
    let rb: Vec<Matrix3<f64>> = samples.iter().map(|s| *s.t_cb.rotation.to_dcm().matrix()).collect();

    // R_A·R_Y − R_X·R_B = 0 in column-major vec form:
    // (I ⊗ R_A)·vec(R_Y) − (R_Bᵀ ⊗ I)·vec(R_X) = 0.
    let mut normal = SMatrix::<f64, 18, 18>::zeros();
    for (ra, rb) in ra.iter().zip(&rb) {
        let mut m = SMatrix::<f64, 9, 18>::zeros();
        for c in 0..3 {
            for r in 0..3 {
                for i in 0..3 {
                    m[(3 * c + r, 3 * c + i)] = ra[(r, i)];
                    m[(3 * c + r, 9 + 3 * i + r)] = -rb[(i, c)];
                }
            }
        }
        normal += m.transpose() * m;
    }
    let eig = normal.symmetric_eigen();
    let (imin, _) = eig.eigenvalues.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let v = eig.eigenvectors.column(imin);
    let ry_raw = Matrix3::from_column_slice(&v.as_slice()[..9]);
    let rx_raw = Matrix3::from_column_slice(&v.as_slice()[9..]);
    // The null vector is defined up to scale; fix sign and magnitude on X.
    let det = rx_raw.determinant();
    if det.abs() < 1e-12 {
        return Err(CalibError::InsufficientExcitation("rotation null space is degenerate".into()));
    }
    let scale = det.signum() / det.abs().cbrt();
    let rx = project_to_rotation(&(rx_raw * scale));
    let ry = project_to_rotation(&(ry_raw * scale));

    // R_A·t_Y − t_X = R_X·t_B − t_A.
    let mut lhs = DMatrix::<f64>::zeros(3 * k, 6);
    let mut rhs = DVector::<f64>::zeros(3 * k);
    for (i, (s, (ap, ra))) in samples.iter().zip(a.iter().zip(&ra)).enumerate() {
        let b = rx * s.t_cb.translation - ap.translation;
        for r in 0..3 {
            for c in 0..3 {
                lhs[(3 * i + r, c)] = ra[(r, c)];
            }
            lhs[(3 * i + r, 3 + r)] = -1.0;
            rhs[3 * i + r] = b[r];
        }
    }
    let sol = lhs.svd(true, true).solve(&rhs, 1e-12).map_err(|e| CalibError::InsufficientExcitation(e.to_string()))?;
    let t_sb = Pose::new(quat(&ry), Vec3::new(sol[0], sol[1], sol[2]));
    let t_ic = Pose::new(quat(&rx), Vec3::new(sol[3], sol[4], sol[5]));
    let (rr, tr) = residuals(samples, &t_ic, &t_sb);
    Ok(CalibResult { t_ic, t_sb, rms_rotation_residual: rr, rms_translation_residual: tr })
}

/// Calibrated ground truth `T_ic⁻¹·T_oi⁻¹·T_os·T_sb`, the target body
/// expressed in the camera frame (the quantity `T_cb` observes).
pub fn apply_calibration(result: &CalibResult, t_oi: &Pose, t_os: &Pose) -> Pose {
    result.t_ic.inverse().compose(&t_oi.inverse()).compose(t_os).compose(&result.t_sb)
}

/// Parses `k,T_oi(7),T_os(7),T_cb(7)` rows; a non-numeric first line is a header.
pub fn read_samples_csv<R: BufRead>(reader: R, name: &str) -> Result<Vec<(String, CalibSample)>, CalibError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse_err = |msg: String| CalibError::Parse { path: name.to_string(), line: i + 1, msg };
        let nums: Result<Vec<f64>, _> = fields.iter().skip(1).map(|f| f.parse::<f64>()).collect();
        let nums = match nums {
            Ok(n) => n,
            Err(_) if out.is_empty() && i == 0 => continue,
            Err(e) => return Err(parse_err(e.to_string())),
        };
        if nums.len() != 21 {
            return Err(parse_err(format!("expected 22 fields, got {}", fields.len())));
        }
        let pose = |o: usize| Pose::from_slice(&nums[o..o + 7]).ok_or_else(|| parse_err("invalid pose".into()));
        out.push((fields[0].to_string(), CalibSample { t_oi: pose(0)?, t_os: pose(7)?, t_cb: pose(14)? }));
    }
    Ok(out)
}

pub fn load_samples_csv(path: &Path) -> Result<Vec<(String, CalibSample)>, CalibError> {
    let f = std::fs::File::open(path)?;
    read_samples_csv(std::io::BufReader::new(f), &path.display().to_string())
}

fn pose_fields(p: &Pose) -> String {
    p.to_array().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn samples_csv(samples: &[(String, CalibSample)]) -> String {
    let mut s = String::from("k,oi_tx,oi_ty,oi_tz,oi_qx,oi_qy,oi_qz,oi_qw,os_tx,os_ty,os_tz,os_qx,os_qy,os_qz,os_qw,cb_tx,cb_ty,cb_tz,cb_qx,cb_qy,cb_qz,cb_qw\n");
    for (k, c) in samples {
        s.push_str(&format!("{k},{},{},{}\n", pose_fields(&c.t_oi), pose_fields(&c.t_os), pose_fields(&c.t_cb)));
    }
    s
}

/// Ground-truth stream `t,T_bc(7)`; `t` is the sample key.
pub fn ground_truth_csv(result: &CalibResult, samples: &[(String, CalibSample)]) -> String {
    let mut s = String::from("t,tx,ty,tz,qx,qy,qz,qw\n");
    for (k, c) in samples {
        s.push_str(&format!("{k},{}\n", pose_fields(&apply_calibration(result, &c.t_oi, &c.t_os))));
    }
    s
}

/// Synthetic calibration scenes with known statics.
pub mod synth {
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    use super::*;

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Noise {
        /// Standard deviation of the rotation-error angle, degrees.
        pub rotation_deg: f64,
        /// Standard deviation of the position-error norm, m.
        pub translation_m: f64,
    }

    impl Noise {
        pub const NONE: Self = Self { rotation_deg: 0.0, translation_m: 0.0 };
        /// Motion-capture specification: 0.5° and 0.2 mm.
        pub const MOCAP: Self = Self { rotation_deg: 0.5, translation_m: 0.2e-3 };
    }

    fn random_pose<R: Rng + ?Sized>(rng: &mut R, translation: f64) -> Pose {
        let t = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * translation;
        Pose::new(UnitQuaternion::random(rng), t)
    }

    /// Random statics: rig offsets up to 0.15 m per axis.
    pub fn random_statics<R: Rng + ?Sized>(rng: &mut R) -> (Pose, Pose) {
        (random_pose(rng, 0.15), random_pose(rng, 0.15))
    }

    /// Isotropic perturbation whose angle and displacement have the given
    /// RMS values: rotation about the rig's own origin, position in the
    /// global frame.
    fn perturb<R: Rng + ?Sized>(rng: &mut R, p: &Pose, noise: &Noise) -> Pose {
        let per_axis = |s: f64| Normal::new(0.0, s / 3f64.sqrt()).expect("finite sigma");
        let (nr, nt) = (per_axis(noise.rotation_deg.to_radians()), per_axis(noise.translation_m));
        let dr = Vec3::new(nr.sample(rng), nr.sample(rng), nr.sample(rng));
        let dt = Vec3::new(nt.sample(rng), nt.sample(rng), nt.sample(rng));
        Pose::new(p.rotation.mul(&UnitQuaternion::from_rotation_vector(&dr)), p.translation + dt)
    }

    /// `n` samples of a desk-scale scene: rigs inside a 2 m cube, target
    /// body 0.3–1 m from the camera (manipulator workspace), noise on the motion-capture poses only.
    pub fn scene<R: Rng + ?Sized>(rng: &mut R, t_ic: &Pose, t_sb: &Pose, n: usize, noise: &Noise) -> Vec<CalibSample> {
        (0..n)
            .map(|_| {
                let t_oi = random_pose(rng, 1.0);
                let dir = loop {
                    let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    if (0.1..=1.0).contains(&v.norm()) {
                        break v.normalize();
                    }
                };
                let t_cb = Pose::new(UnitQuaternion::random(rng), dir * rng.random_range(0.3..1.0));
                // T_os = T_oi·T_ic·T_cb·T_sb⁻¹.
                let t_os = t_oi.compose(t_ic).compose(&t_cb).compose(&t_sb.inverse());
                CalibSample { t_oi: perturb(rng, &t_oi, noise), t_os: perturb(rng, &t_os, noise), t_cb }
            })
            .collect()
    }
}
