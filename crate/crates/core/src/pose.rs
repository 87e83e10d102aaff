//! Attitude and pose algebra.
//!
//! Conventions used throughout the crate:
//!
//! * Quaternions are Hamilton, stored scalar-last as `[x, y, z, w]`.
//! * A rotation re-expresses vectors: for `T_ab`, `to_dcm()` maps coordinates
//!   given in frame `b` into frame `a`, and `q_ac = q_ab ⊗ q_bc` matches
//!   `R_ac = R_ab · R_bc`.
//! * A [`Pose`] `T_ab` maps points of frame `b` into frame `a`:
//!   `p_a = R_ab · p_b + t_ab`.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Columns of a 6D attitude closer than this (in norm or in angle) are rejected.
pub const GRAM_SCHMIDT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error("degenerate 6D attitude: a column is zero or the columns are parallel")]
    DegenerateInput,
    #[error("reference range {0} m is too small to normalise by")]
    ZeroRange(f64),
    #[error("quaternion has non-finite or zero norm")]
    ZeroQuaternion,
    #[error("matrix is not a proper rotation (orthogonality residual {0:.3e})")]
    NotRotation(f64),
}

/// Unit quaternion, Hamilton product, scalar-last storage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl UnitQuaternion {
    pub const IDENTITY: Self = Self { x: 0.0, y: 0.0, z: 0.0, w: 1.0 };

    /// Normalises `(x, y, z, w)`; fails only for a zero or non-finite input.
    pub fn new_normalize(x: f64, y: f64, z: f64, w: f64) -> Result<Self, PoseError> {
        let n = (x * x + y * y + z * z + w * w).sqrt();
        if !n.is_finite() || n < 1e-300 {
            return Err(PoseError::ZeroQuaternion);
        }
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(Self { x, y, z, w });
        }
        Ok(Self { x: x / n, y: y / n, z: z / n, w: w / n })
    }

    pub fn from_array(q: [f64; 4]) -> Result<Self, PoseError> {
        Self::new_normalize(q[0], q[1], q[2], q[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.z, self.w]
    }

    /// Rotation of `angle` radians about `axis` (need not be normalised).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n * s;
        Self { x: a.x, y: a.y, z: a.z, w: c }
    }

    /// Rotation vector (axis times angle) to quaternion.
    pub fn from_rotation_vector(v: &Vec3) -> Self {
        Self::from_axis_angle(v, v.norm())
    }

    /// Uniformly distributed random rotation (Shoemake's method).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let u3: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let a = (1.0 - u1).sqrt();
        let b = u1.sqrt();
        Self { x: a * u2.sin(), y: a * u2.cos(), z: b * u3.sin(), w: b * u3.cos() }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w).sqrt()
    }

    pub fn conjugate(&self) -> Self {
        Self { x: -self.x, y: -self.y, z: -self.z, w: self.w }
    }

    pub fn inverse(&self) -> Self {
        self.conjugate()
    }

    pub fn negate(&self) -> Self {
        Self { x: -self.x, y: -self.y, z: -self.z, w: -self.w }
    }

    /// Hamilton product `self ⊗ rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        let (a, b) = (self, rhs);
        Self {
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        }
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let v = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        2.0 * v.atan2(self.w.abs())
    }

    pub fn to_dcm(&self) -> Dcm {
        let Self { x, y, z, w } = *self;
        Dcm(Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ))
    }

    /// Shepperd's method: branch on the largest of `tr, R11, R22, R33` so the
    /// divisor never approaches zero.
    pub fn from_dcm(dcm: &Dcm) -> Self {
        let m = &dcm.0;
        let tr = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let diag = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        let (x, y, z, w);
        if tr >= diag[0] && tr >= diag[1] && tr >= diag[2] {
            let s = 2.0 * (1.0 + tr).sqrt();
            w = 0.25 * s;
            x = (m[(2, 1)] - m[(1, 2)]) / s;
            y = (m[(0, 2)] - m[(2, 0)]) / s;
            z = (m[(1, 0)] - m[(0, 1)]) / s;
        } else if diag[0] >= diag[1] && diag[0] >= diag[2] {
            let s = 2.0 * (1.0 + diag[0] - diag[1] - diag[2]).sqrt();
            x = 0.25 * s;
            w = (m[(2, 1)] - m[(1, 2)]) / s;
            y = (m[(0, 1)] + m[(1, 0)]) / s;
            z = (m[(0, 2)] + m[(2, 0)]) / s;
        } else if diag[1] >= diag[2] {
            let s = 2.0 * (1.0 - diag[0] + diag[1] - diag[2]).sqrt();
            y = 0.25 * s;
            w = (m[(0, 2)] - m[(2, 0)]) / s;
            x = (m[(0, 1)] + m[(1, 0)]) / s;
            z = (m[(1, 2)] + m[(2, 1)]) / s;
        } else {
            let s = 2.0 * (1.0 - diag[0] - diag[1] + diag[2]).sqrt();
            z = 0.25 * s;
            w = (m[(1, 0)] - m[(0, 1)]) / s;
            x = (m[(0, 2)] + m[(2, 0)]) / s;
            y = (m[(1, 2)] + m[(2, 1)]) / s;
        }
        // Renormalise away the rounding of a near-orthogonal input.
        Self::new_normalize(x, y, z, w).unwrap_or(Self::IDENTITY)
    }
}

/// Direction cosine matrix. Construct through [`Dcm::try_from_matrix`] to get
/// the orthogonality check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dcm(Matrix3<f64>);

impl Dcm {
    pub fn identity() -> Self {
        Dcm(Matrix3::identity())
    }

    /// Wraps a matrix without validation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Dcm(m)
    }

    pub fn try_from_matrix(m: Matrix3<f64>, tol: f64) -> Result<Self, PoseError> {
        let residual = Self::orthogonality_residual(&m);
        if residual > tol || (m.determinant() - 1.0).abs() > tol {
            return Err(PoseError::NotRotation(residual));
        }
        Ok(Dcm(m))
    }

    /// `max |RᵀR − I|` entrywise.
    pub fn orthogonality_residual(m: &Matrix3<f64>) -> f64 {
        (m.transpose() * m - Matrix3::identity()).abs().max()
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Dcm(self.0.transpose())
    }

    pub fn mul(&self, rhs: &Dcm) -> Dcm {
        Dcm(self.0 * rhs.0)
    }

    pub fn column(&self, i: usize) -> Vec3 {
        self.0.column(i).into_owned()
    }
}

/// Continuous 6D attitude: the first two DCM columns, stored column-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rot6D(pub [f64; 6]);

impl Rot6D {
    pub fn columns(&self) -> (Vec3, Vec3) {
        let r = &self.0;
        (Vec3::new(r[0], r[1], r[2]), Vec3::new(r[3], r[4], r[5]))
    }
}

/// Gram-Schmidt map from the 6D representation onto SO(3).
pub fn rot6d_to_dcm(r: &Rot6D) -> Result<Dcm, PoseError> {
    let (a1, a2) = r.columns();
    let (n1, n2) = (a1.norm(), a2.norm());
    if !(n1 > GRAM_SCHMIDT_EPS && n2 > GRAM_SCHMIDT_EPS) {
        return Err(PoseError::DegenerateInput);
    }
    let b1 = a1 / n1;
    let cos = b1.dot(&a2) / n2;
    if !(cos.abs() < 1.0 - GRAM_SCHMIDT_EPS) {
        return Err(PoseError::DegenerateInput);
    }
    let u = a2 - b1 * b1.dot(&a2);
    let b2 = u / u.norm();
    let b3 = b1.cross(&b2);
    Ok(Dcm(Matrix3::from_columns(&[b1, b2, b3])))
}

/// Drops the third column.
pub fn dcm_to_rot6d(dcm: &Dcm) -> Rot6D {
    let m = &dcm.0;
    Rot6D([m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(0, 1)], m[(1, 1)], m[(2, 1)]])
}

pub fn dcm_to_quat(dcm: &Dcm) -> UnitQuaternion {
    UnitQuaternion::from_dcm(dcm)
}

pub fn quat_to_dcm(q: &UnitQuaternion) -> Dcm {
    q.to_dcm()
}

/// Rigid transform `T_ab`: `p_a = R_ab · p_b + t_ab`.
///
/// Serialises as `[tx, ty, tz, qx, qy, qz, qw]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 7]", try_from = "[f64; 7]")]
pub struct Pose {
    pub rotation: UnitQuaternion,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: UnitQuaternion, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self { rotation: UnitQuaternion::IDENTITY, translation: Vec3::zeros() }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self { rotation: UnitQuaternion::IDENTITY, translation: t }
    }

    /// `self ∘ rhs`, i.e. `T_ac = T_ab · T_bc`.
    pub fn compose(&self, rhs: &Pose) -> Pose {
        Pose {
            rotation: self.rotation.mul(&rhs.rotation),
            translation: self.rotation.rotate(&rhs.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let r = self.rotation.inverse();
        Pose { rotation: r, translation: -r.rotate(&self.translation) }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn to_array(&self) -> [f64; 7] {
        let t = &self.translation;
        let q = &self.rotation;
        [t.x, t.y, t.z, q.x, q.y, q.z, q.w]
    }

    /// Parses the 7-number layout; the quaternion is renormalised.
    pub fn from_array(a: [f64; 7]) -> Result<Pose, PoseError> {
        Ok(Pose {
            rotation: UnitQuaternion::new_normalize(a[3], a[4], a[5], a[6])?,
            translation: Vec3::new(a[0], a[1], a[2]),
        })
    }

    pub fn from_slice(a: &[f64]) -> Option<Pose> {
        let arr: [f64; 7] = a.try_into().ok()?;
        Pose::from_array(arr).ok()
    }
}

impl From<Pose> for [f64; 7] {
    fn from(p: Pose) -> Self {
        p.to_array()
    }
}

impl TryFrom<[f64; 7]> for Pose {
    type Error = PoseError;
    fn try_from(a: [f64; 7]) -> Result<Self, Self::Error> {
        Pose::from_array(a)
    }
}

/// Euclidean position error `‖t̂ − t‖` (m).
pub fn position_error(t_hat: &Vec3, t: &Vec3) -> f64 {
    (t_hat - t).norm()
}

/// Angle of `q̂⁻¹ ⊗ q` in degrees, `[0°, 180°]`; `q` and `−q` give 0°.
pub fn attitude_error(q_hat: &UnitQuaternion, q: &UnitQuaternion) -> f64 {
    let a = UnitQuaternion::new_normalize(q_hat.x, q_hat.y, q_hat.z, q_hat.w).unwrap_or(*q_hat);
    let b = UnitQuaternion::new_normalize(q.x, q.y, q.z, q.w).unwrap_or(*q);
    let (a, b) = (a.to_array(), b.to_array());
    let norm = |s: f64| (0..4).map(|i| (a[i] + s * b[i]).powi(2)).sum::<f64>().sqrt();
    let (minus, plus) = (norm(-1.0), norm(1.0));
    // |a − b| = 2 sin(φ/2), |a + b| = 2 cos(φ/2) with φ the 4-D angle between
    // a and b; the rotation angle is 2φ.
    (4.0 * minus.min(plus).atan2(minus.max(plus))).to_degrees()
}

/// Position error normalised by the true range `‖t‖`.
pub fn range_normalized_error(t_hat: &Vec3, t: &Vec3) -> Result<f64, PoseError> {
    let range = t.norm();
    if !(range > 1e-9) {
        return Err(PoseError::ZeroRange(range));
    }
    Ok(position_error(t_hat, t) / range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rot_z(deg: f64) -> UnitQuaternion {
        UnitQuaternion::from_axis_angle(&Vec3::z(), deg.to_radians())
    }

    fn max_abs_diff(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
        (a - b).abs().max()
    }

    #[test]
    fn rot6d_identity_and_scaling() {
        let i = rot6d_to_dcm(&Rot6D([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])).unwrap();
        assert_eq!(*i.matrix(), Matrix3::identity());
        let s = rot6d_to_dcm(&Rot6D([2.0, 0.0, 0.0, 0.0, 3.0, 0.0])).unwrap();
        assert_eq!(*s.matrix(), Matrix3::identity());
    }

    #[test]
    fn rot6d_parallel_columns_rejected() {
        let err = rot6d_to_dcm(&Rot6D([1.0, 1e-13, 0.0, 1.0, 0.0, 0.0])).unwrap_err();
        assert_eq!(err, PoseError::DegenerateInput);
        let zero = rot6d_to_dcm(&Rot6D([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
        assert_eq!(zero.unwrap_err(), PoseError::DegenerateInput);
        let nan = rot6d_to_dcm(&Rot6D([f64::NAN, 0.0, 0.0, 1.0, 0.0, 0.0]));
        assert!(nan.is_err());
    }

    #[test]
    fn dcm_to_rot6d_analytic() {
        assert_eq!(dcm_to_rot6d(&Dcm::identity()).0, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let rz = Dcm::from_matrix_unchecked(Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0));
        assert_eq!(dcm_to_rot6d(&rz).0, [0.0, 1.0, 0.0, -1.0, 0.0, 0.0]);
        let from_quat = dcm_to_rot6d(&rot_z(90.0).to_dcm()).0;
        for (a, b) in from_quat.iter().zip([0.0, 1.0, 0.0, -1.0, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rot6d_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let r = UnitQuaternion::random(&mut rng).to_dcm();
            let back = rot6d_to_dcm(&dcm_to_rot6d(&r)).unwrap();
            assert!(max_abs_diff(back.matrix(), r.matrix()) < 1e-12);
        }
    }

    #[test]
    fn quaternion_dcm_conversions() {
        assert_eq!(*UnitQuaternion::IDENTITY.to_dcm().matrix(), Matrix3::identity());
        let rx = Dcm::from_matrix_unchecked(Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0));
        let q = UnitQuaternion::from_dcm(&rx);
        assert!((q.x.abs() - 1.0).abs() < 1e-15 && q.y == 0.0 && q.z == 0.0 && q.w.abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let q = UnitQuaternion::random(&mut rng);
            let back = UnitQuaternion::from_dcm(&q.to_dcm());
            let same = (0..4).all(|i| (back.to_array()[i] - q.to_array()[i]).abs() < 1e-12);
            let flipped = (0..4).all(|i| (back.to_array()[i] + q.to_array()[i]).abs() < 1e-12);
            assert!(same || flipped, "{q:?} vs {back:?}");
        }
    }

    #[test]
    fn near_half_turn_conversion_is_stable() {
        for eps in [1e-3, 1e-6, 1e-9] {
            let axis = Vec3::new(1.0, 2.0, -0.5);
            let q = UnitQuaternion::from_axis_angle(&axis, std::f64::consts::PI - eps);
            let back = UnitQuaternion::from_dcm(&q.to_dcm());
            assert!(attitude_error(&back, &q) < 1e-9);
        }
    }

    #[test]
    fn double_cover_gives_same_dcm() {
        let q = UnitQuaternion::new_normalize(0.3, -0.2, 0.5, 0.7).unwrap();
        assert!(max_abs_diff(q.to_dcm().matrix(), q.negate().to_dcm().matrix()) < 1e-15);
    }

    #[test]
    fn metric_examples() {
        let z = Vec3::zeros();
        assert_eq!(position_error(&Vec3::new(1.0, 0.0, 0.0), &z), 1.0);
        assert_eq!(position_error(&Vec3::new(1.0, 2.0, 2.0), &z), 3.0);
        assert_eq!(position_error(&z, &z), 0.0);

        let q = UnitQuaternion::new_normalize(0.1, 0.2, 0.3, 0.9).unwrap();
        assert_eq!(attitude_error(&q, &q), 0.0);
        assert_eq!(attitude_error(&q.negate(), &q), 0.0);
        assert!((attitude_error(&rot_z(10.0), &UnitQuaternion::IDENTITY) - 10.0).abs() < 1e-9);
        assert!((attitude_error(&rot_z(180.0), &UnitQuaternion::IDENTITY) - 180.0).abs() < 1e-9);

        let t = Vec3::new(0.0, 0.0, 10.0);
        let r = range_normalized_error(&Vec3::new(0.0, 0.0, 10.3), &t).unwrap();
        assert!((r - 0.03).abs() < 1e-12);
        let r = range_normalized_error(&Vec3::new(0.05, 0.0, 10.0), &t).unwrap();
        assert!((r - 0.005).abs() < 1e-15);
        assert_eq!(range_normalized_error(&t, &t).unwrap(), 0.0);
        assert!(matches!(range_normalized_error(&t, &z), Err(PoseError::ZeroRange(_))));
    }

    #[test]
    fn pose_serialises_as_seven_numbers() {
        let p = Pose::new(rot_z(30.0), Vec3::new(1.0, -2.0, 3.5));
        let json = serde_json::to_string(&p).unwrap();
        let arr: Vec<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(arr.len(), 7);
        let back: Pose = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn pose_inverse_composes_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = Pose::new(UnitQuaternion::random(&mut rng), Vec3::new(rng.random(), rng.random(), rng.random()) * 10.0);
            let id = p.compose(&p.inverse());
            assert!(id.translation.norm() < 1e-9);
            assert!(id.rotation.angle() < 1e-9);
        }
    }

    fn quat_strategy() -> impl Strategy<Value = UnitQuaternion> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("non-degenerate", |(x, y, z, w)| x * x + y * y + z * z + w * w > 1e-3)
            .prop_map(|(x, y, z, w)| UnitQuaternion::new_normalize(x, y, z, w).unwrap())
    }

    fn pose_strategy() -> impl Strategy<Value = Pose> {
        (quat_strategy(), -10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0)
            .prop_map(|(q, x, y, z)| Pose::new(q, Vec3::new(x, y, z)))
    }

    fn vec6_strategy() -> impl Strategy<Value = [f64; 6]> {
        proptest::array::uniform6(-5.0f64..5.0)
    }

    proptest! {
        #[test]
        fn rot6d_output_is_rotation(r in vec6_strategy()) {
            if let Ok(d) = rot6d_to_dcm(&Rot6D(r)) {
                prop_assert!(Dcm::orthogonality_residual(d.matrix()) < 1e-9);
                prop_assert!((d.matrix().determinant() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn rot6d_scale_invariant(r in vec6_strategy(), a in 0.01f64..100.0, b in 0.01f64..100.0) {
            let scaled = Rot6D([r[0] * a, r[1] * a, r[2] * a, r[3] * b, r[4] * b, r[5] * b]);
            if let (Ok(d1), Ok(d2)) = (rot6d_to_dcm(&Rot6D(r)), rot6d_to_dcm(&scaled)) {
                prop_assert!(max_abs_diff(d1.matrix(), d2.matrix()) < 1e-9);
            }
        }

        #[test]
        fn attitude_error_symmetric_and_sign_invariant(a in quat_strategy(), b in quat_strategy()) {
            prop_assert!((attitude_error(&a, &b) - attitude_error(&b, &a)).abs() < 1e-9);
            prop_assert_eq!(attitude_error(&a, &b), attitude_error(&a.negate(), &b));
            let e = attitude_error(&a, &b);
            prop_assert!((0.0..=180.0).contains(&e));
        }

        #[test]
        fn composition_associative(a in pose_strategy(), b in pose_strategy(), c in pose_strategy()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!((l.translation - r.translation).norm() < 1e-9);
            prop_assert!(attitude_error(&l.rotation, &r.rotation) < 1e-6);
        }

        #[test]
        fn compose_matches_dcm_product(a in quat_strategy(), b in quat_strategy()) {
            let lhs = a.mul(&b).to_dcm();
            let rhs = a.to_dcm().mul(&b.to_dcm());
            prop_assert!(max_abs_diff(lhs.matrix(), rhs.matrix()) < 1e-12);
        }
    }
}
