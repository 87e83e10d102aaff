use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{CameraIntrinsics, Image, ImagingError};
use crate::pose::{Pose, UnitQuaternion, Vec3};

/// Upper bounds of the photometric perturbations. A zero field disables
/// that operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhotometricStrength {
    /// Additive offset bound, grey levels.
    pub brightness: f32,
    /// Contrast gain drawn in `1 ± contrast`.
    pub contrast: f32,
    /// Per-channel gain drawn in `1 ± colour`.
    pub colour: f32,
    /// Largest Gaussian noise standard deviation, grey levels.
    pub noise: f32,
    /// Largest box-blur radius, px.
    pub blur: u32,
}

impl Default for PhotometricStrength {
    fn default() -> Self {
        Self { brightness: 30.0, contrast: 0.3, colour: 0.1, noise: 6.0, blur: 1 }
    }
}

impl PhotometricStrength {
    pub const ZERO: Self = Self { brightness: 0.0, contrast: 0.0, colour: 0.0, noise: 0.0, blur: 0 };
}

/// Realised photometric draws; `None` means the operation was skipped.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhotometricDraws {
    pub brightness: Option<f32>,
    pub contrast: Option<f32>,
    pub colour: Option<[f32; 3]>,
    pub noise: Option<(f32, u64)>,
    pub blur: Option<u32>,
}

const APPLY_PROBABILITY: f64 = 0.5;

pub fn sample_photometric(seed: u64, s: &PhotometricStrength) -> PhotometricDraws {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = PhotometricDraws::default();
    if rng.random_bool(APPLY_PROBABILITY) && s.brightness > 0.0 {
        d.brightness = Some(rng.random_range(-s.brightness..=s.brightness));
    }
    if rng.random_bool(APPLY_PROBABILITY) && s.contrast > 0.0 {
        d.contrast = Some(rng.random_range(1.0 - s.contrast..=1.0 + s.contrast));
    }
    if rng.random_bool(APPLY_PROBABILITY) && s.colour > 0.0 {
        d.colour = Some([(); 3].map(|_| rng.random_range(1.0 - s.colour..=1.0 + s.colour)));
    }
    if rng.random_bool(APPLY_PROBABILITY) && s.noise > 0.0 {
        d.noise = Some((rng.random_range(0.0..=s.noise), rng.random()));
    }
    if rng.random_bool(APPLY_PROBABILITY) && s.blur > 0 {
        d.blur = Some(rng.random_range(1..=s.blur));
    }
    d
}

/// Separable box blur with clamped borders.
fn box_blur(buf: &mut [f32], w: usize, h: usize, r: usize) {
    let mut tmp = vec![0.0f32; buf.len()];
    let norm = 1.0 / (2 * r + 1) as f32;
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut s = 0.0;
                for k in -(r as isize)..=(r as isize) {
                    let xx = (x as isize + k).clamp(0, w as isize - 1) as usize;
                    s += buf[(y * w + xx) * 3 + c];
                }
                tmp[(y * w + x) * 3 + c] = s * norm;
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut s = 0.0;
                for k in -(r as isize)..=(r as isize) {
                    let yy = (y as isize + k).clamp(0, h as isize - 1) as usize;
                    s += tmp[(yy * w + x) * 3 + c];
                }
                buf[(y * w + x) * 3 + c] = s * norm;
            }
        }
    }
}

pub fn apply_photometric(img: &Image, d: &PhotometricDraws) -> Image {
    let mut buf: Vec<f32> = img.data.iter().map(|&v| v as f32).collect();
    if let Some(b) = d.brightness {
        buf.iter_mut().for_each(|v| *v += b);
    }
    if let Some(g) = d.contrast {
        buf.iter_mut().for_each(|v| *v = (*v - 127.5) * g + 127.5);
    }
    if let Some(gains) = d.colour {
        for px in buf.chunks_exact_mut(3) {
            for c in 0..3 {
                px[c] *= gains[c];
            }
        }
    }
    if let Some((sigma, seed)) = d.noise {
        let normal = Normal::new(0.0f32, sigma).expect("sigma is finite and non-negative");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        buf.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    if let Some(r) = d.blur {
        box_blur(&mut buf, img.width as usize, img.height as usize, r as usize);
    }
    let data = buf.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    Image { width: img.width, height: img.height, data }
}

pub fn augment_photometric(img: &Image, seed: u64, strength: &PhotometricStrength) -> Image {
    apply_photometric(img, &sample_photometric(seed, strength))
}

/// Bounds of the random camera-frame perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WarpLimits {
    /// Lateral translation bound expressed as image shift at the fixture plane, px.
    pub shift_px: f64,
    /// Rotation about the optical axis, degrees.
    pub in_plane_deg: f64,
    /// Rotation about the image x and y axes, degrees.
    pub off_plane_deg: f64,
}

impl Default for WarpLimits {
    fn default() -> Self {
        Self { shift_px: 5.0, in_plane_deg: 5.0, off_plane_deg: 3.0 }
    }
}

/// Camera-frame rigid perturbation `δT`: `p' = R_δ p + t_δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpPerturbation {
    pub rotation: UnitQuaternion,
    pub translation: Vec3,
}

impl WarpPerturbation {
    pub const IDENTITY: Self = Self { rotation: UnitQuaternion::IDENTITY, translation: Vector3::new(0.0, 0.0, 0.0) };

    pub fn as_pose(&self) -> Pose {
        Pose::new(self.rotation, self.translation)
    }

    fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

/// Normal and distance of the fixture plane `z_t = 0` in the camera frame.
fn fixture_plane(pose: &Pose) -> Result<(Vec3, f64), ImagingError> {
    let n = pose.rotation.rotate(&Vec3::z());
    let d = n.dot(&pose.translation);
    if !(d > 0.0) {
        return Err(ImagingError::PlaneBehindCamera(d));
    }
    Ok((n, d))
}

pub fn sample_warp(seed: u64, limits: &WarpLimits, pose: &Pose, k: &CameraIntrinsics) -> Result<WarpPerturbation, ImagingError> {
    let (_, d) = fixture_plane(pose)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sym = |b: f64| if b > 0.0 { rng.random_range(-b..=b) } else { 0.0 };
    let sx = sym(limits.shift_px);
    let sy = sym(limits.shift_px);
    let gamma = sym(limits.in_plane_deg).to_radians();
    let alpha = sym(limits.off_plane_deg).to_radians();
    let beta = sym(limits.off_plane_deg).to_radians();
    let rotation = UnitQuaternion::from_axis_angle(&Vec3::z(), gamma)
        .mul(&UnitQuaternion::from_axis_angle(&Vec3::x(), alpha))
        .mul(&UnitQuaternion::from_axis_angle(&Vec3::y(), beta));
    Ok(WarpPerturbation { rotation, translation: Vec3::new(sx * d / k.fx, sy * d / k.fy, 0.0) })
}

/// Plane-induced homography mapping original pixels to perturbed pixels.
pub fn warp_homography(k: &CameraIntrinsics, pose: &Pose, delta: &WarpPerturbation) -> Result<Matrix3<f64>, ImagingError> {
    let (n, d) = fixture_plane(pose)?;
    let r = *delta.rotation.to_dcm().matrix();
    Ok(k.matrix() * (r + delta.translation * n.transpose() / d) * k.inverse_matrix())
}

fn bilinear(img: &Image, x: f64, y: f64) -> [u8; 3] {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (w, h) = (img.width as i64, img.height as i64);
    let fetch = |ix: i64, iy: i64| -> [f64; 3] {
        if ix < 0 || iy < 0 || ix >= w || iy >= h {
            [0.0; 3]
        } else {
            img.get(ix as u32, iy as u32).map(f64::from)
        }
    };
    let (ix, iy) = (x0 as i64, y0 as i64);
    let (a, b, c, e) = (fetch(ix, iy), fetch(ix + 1, iy), fetch(ix, iy + 1), fetch(ix + 1, iy + 1));
    let mut out = [0u8; 3];
    for ch in 0..3 {
        let top = a[ch] + fx * (b[ch] - a[ch]);
        let bottom = c[ch] + fx * (e[ch] - c[ch]);
        out[ch] = (top + fy * (bottom - top)).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Warps `img` by the homography induced by `delta` and returns the image
/// with the updated label `δT ∘ pose`.
pub fn warp_with(img: &Image, pose: &Pose, k: &CameraIntrinsics, delta: &WarpPerturbation) -> Result<(Image, Pose), ImagingError> {
    let h = warp_homography(k, pose, delta)?;
    if delta.is_identity() {
        return Ok((img.clone(), *pose));
    }
    let hinv = h.try_inverse().ok_or(ImagingError::PlaneBehindCamera(0.0))?;
    let mut out = Image::new(img.width, img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            let q = hinv * Vector3::new(x as f64 + 0.5, y as f64 + 0.5, 1.0);
            if q.z <= 0.0 {
                continue;
            }
            out.put(x, y, bilinear(img, q.x / q.z - 0.5, q.y / q.z - 0.5));
        }
    }
    Ok((out, delta.as_pose().compose(pose)))
}

pub fn augment_pose_warp(
    img: &Image,
    pose: &Pose,
    k: &CameraIntrinsics,
    seed: u64,
    limits: &WarpLimits,
) -> Result<(Image, Pose), ImagingError> {
    let delta = sample_warp(seed, limits, pose, k)?;
    warp_with(img, pose, k, &delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{apply_homography, project, sensor_intrinsics, FixtureModel};

    fn test_image() -> Image {
        let data = (0..4 * 4 * 3).map(|i| (i * 37 % 256) as u8).collect();
        Image::from_raw(4, 4, data).unwrap()
    }

    fn pose_at(range: f64) -> Pose {
        Pose::new(UnitQuaternion::from_axis_angle(&Vec3::new(0.2, -0.4, 1.0), 0.1), Vec3::new(0.05, -0.1, range))
    }

    #[test]
    fn zero_strength_is_identity() {
        let img = test_image();
        for seed in 0..20 {
            assert_eq!(augment_photometric(&img, seed, &PhotometricStrength::ZERO), img);
        }
    }

    #[test]
    fn photometric_is_seeded() {
        let img = test_image();
        let s = PhotometricStrength::default();
        assert_eq!(augment_photometric(&img, 3, &s), augment_photometric(&img, 3, &s));
        assert!((0..10).any(|seed| augment_photometric(&img, seed, &s) != img));
    }

    #[test]
    fn brightness_matches_per_pixel_oracle() {
        let img = test_image();
        let s = PhotometricStrength { brightness: 40.0, ..PhotometricStrength::ZERO };
        let mut checked = 0;
        for seed in 0..40 {
            let d = sample_photometric(seed, &s);
            let Some(b) = d.brightness else { continue };
            let out = apply_photometric(&img, &d);
            let oracle: Vec<u8> = img.data.iter().map(|&p| (p as f32 + b).round().clamp(0.0, 255.0) as u8).collect();
            assert_eq!(out.data, oracle);
            let unclamped = img.mean() + b as f64;
            let lost: f64 = img.data.iter().map(|&p| {
                let v = p as f64 + b as f64;
                v - v.clamp(0.0, 255.0)
            }).sum::<f64>() / img.data.len() as f64;
            assert!((out.mean() - (unclamped - lost)).abs() <= 0.5);
            checked += 1;
        }
        assert!(checked > 5);
    }

    #[test]
    fn operations_fire_about_half_the_time() {
        let s = PhotometricStrength::default();
        let n = 2000;
        let fired = (0..n).filter(|&seed| sample_photometric(seed, &s).brightness.is_some()).count();
        assert!((fired as f64 / n as f64 - 0.5).abs() < 0.05);
    }

    #[test]
    fn identity_warp_is_bit_identical() {
        let k = sensor_intrinsics(186, 120);
        let img = Image::from_raw(186, 120, (0..186 * 120 * 3).map(|i| (i % 251) as u8).collect()).unwrap();
        let pose = pose_at(3.0);
        let (out, p) = warp_with(&img, &pose, &k, &WarpPerturbation::IDENTITY).unwrap();
        assert_eq!(out, img);
        assert_eq!(p, pose);
        let zero = WarpLimits { shift_px: 0.0, in_plane_deg: 0.0, off_plane_deg: 0.0 };
        let (out, p) = augment_pose_warp(&img, &pose, &k, 9, &zero).unwrap();
        assert_eq!(out, img);
        assert_eq!(p, pose);
    }

    #[test]
    fn in_plane_rotation_reduces_to_conjugated_rotation() {
        let k = sensor_intrinsics(744, 480);
        let delta = WarpPerturbation { rotation: UnitQuaternion::from_axis_angle(&Vec3::z(), 0.07), translation: Vec3::zeros() };
        let h = warp_homography(&k, &pose_at(4.0), &delta).unwrap();
        let expected = k.matrix() * delta.rotation.to_dcm().matrix() * k.inverse_matrix();
        assert!((h - expected).abs().max() < 1e-12);
    }

    #[test]
    fn planar_keypoints_follow_the_homography() {
        let k = sensor_intrinsics(744, 480);
        let fixture = FixtureModel::procedural();
        for seed in 0..50 {
            let pose = pose_at(1.0 + 0.2 * seed as f64);
            let delta = sample_warp(seed, &WarpLimits::default(), &pose, &k).unwrap();
            let h = warp_homography(&k, &pose, &delta).unwrap();
            let updated = delta.as_pose().compose(&pose);
            for kp in fixture.planar_keypoints() {
                let before = project(&k, &pose, &kp.position).pixel().unwrap();
                let after = project(&k, &updated, &kp.position).pixel().unwrap();
                assert!((apply_homography(&h, &before) - after).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn shift_matches_pixel_budget() {
        let k = sensor_intrinsics(744, 480);
        let pose = Pose::new(UnitQuaternion::IDENTITY, Vec3::new(0.0, 0.0, 5.0));
        let delta = WarpPerturbation { rotation: UnitQuaternion::IDENTITY, translation: Vec3::new(5.0 * 5.0 / k.fx, 0.0, 0.0) };
        let h = warp_homography(&k, &pose, &delta).unwrap();
        let c = apply_homography(&h, &nalgebra::Vector2::new(k.cx, k.cy));
        assert!((c.x - k.cx - 5.0).abs() < 1e-9);
    }

    #[test]
    fn plane_behind_camera() {
        let k = sensor_intrinsics(186, 120);
        let pose = Pose::new(UnitQuaternion::IDENTITY, Vec3::new(0.0, 0.0, -2.0));
        assert!(matches!(sample_warp(1, &WarpLimits::default(), &pose, &k), Err(ImagingError::PlaneBehindCamera(_))));
    }
}
