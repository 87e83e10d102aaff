use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CameraIntrinsics, FixtureModel, Image, ImagingError, Perlin, BEHIND_CAMERA_EPS};
use crate::pose::{Pose, Vec3};

/// Fraction of albedo added regardless of illumination.
pub const AMBIENT: f64 = 0.15;
const NEAR_PLANE: f64 = 0.01;
const CLUTTER_SHAPES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Background {
    #[default]
    Black,
    Perlin,
    Clutter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub background: Background,
    /// Unit vector toward the Sun, camera frame.
    pub sun_direction: [f64; 3],
    pub seed: u64,
}

impl RenderSettings {
    pub fn validate(&self) -> Result<(), ImagingError> {
        let n = Vec3::from(self.sun_direction).norm();
        if (n - 1.0).abs() > 1e-6 || !n.is_finite() {
            return Err(ImagingError::SunNotUnit(n));
        }
        Ok(())
    }
}

/// Sun direction in the camera frame for an elevation angle measured from
/// the camera x-axis toward the line of sight reversed: 90° lights the
/// fixture face-on from behind the camera.
pub fn sun_direction_from_elevation(elevation_deg: f64) -> [f64; 3] {
    let (s, c) = elevation_deg.to_radians().sin_cos();
    [c, 0.0, -s]
}

fn fill_background(img: &mut Image, settings: &RenderSettings) {
    let (w, h) = (img.width, img.height);
    match settings.background {
        Background::Black => {}
        Background::Perlin => {
            let noise = Perlin::new(settings.seed);
            let f = 8.0 / w as f64;
            for y in 0..h {
                for x in 0..w {
                    let v = noise.fractal((x as f64 + 0.5) * f, (y as f64 + 0.5) * f, 4);
                    let g = (127.5 + 127.5 * v).round().clamp(0.0, 255.0) as u8;
                    img.put(x, y, [g, g, g]);
                }
            }
        }
        Background::Clutter => {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            let (wf, hf) = (w as f64, h as f64);
            for _ in 0..CLUTTER_SHAPES {
                let shade: f64 = rng.random_range(0.15..0.8);
                let tint = [rng.random_range(0.85..1.0), rng.random_range(0.85..1.0), rng.random_range(0.9..1.1)];
                let colour = tint.map(|t: f64| (255.0 * shade * t).round().clamp(0.0, 255.0) as u8);
                let cx = rng.random_range(0.0..wf);
                let cy = rng.random_range(0.0..hf);
                let sx = rng.random_range(0.05..0.35) * wf;
                let sy = rng.random_range(0.05..0.35) * wf;
                if rng.random_bool(0.5) {
                    let a = Vector2::new(cx - sx / 2.0, cy - sy / 2.0);
                    let b = Vector2::new(cx + sx / 2.0, cy - sy / 2.0);
                    let c = Vector2::new(cx + sx / 2.0, cy + sy / 2.0);
                    let d = Vector2::new(cx - sx / 2.0, cy + sy / 2.0);
                    fill_triangle(img, [a, b, c], colour);
                    fill_triangle(img, [a, c, d], colour);
                } else {
                    let mut vertex = || Vector2::new(cx + rng.random_range(-0.5..0.5) * sx, cy + rng.random_range(-0.5..0.5) * sy);
                    let tri = [vertex(), vertex(), vertex()];
                    fill_triangle(img, tri, colour);
                }
            }
        }
    }
}

fn edge(a: &Vector2<f64>, b: &Vector2<f64>, p: &Vector2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Fills pixels whose centres lie inside the triangle (either winding).
fn fill_triangle(img: &mut Image, t: [Vector2<f64>; 3], rgb: [u8; 3]) {
    let area = edge(&t[0], &t[1], &t[2]);
    if area.abs() < 1e-12 || t.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return;
    }
    let sign = area.signum();
    let min_x = t.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let max_x = t.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let min_y = t.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let max_y = t.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let x0 = (min_x - 0.5).ceil().max(0.0);
    let x1 = (max_x - 0.5).floor().min(img.width as f64 - 1.0);
    let y0 = (min_y - 0.5).ceil().max(0.0);
    let y1 = (max_y - 0.5).floor().min(img.height as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return;
    }
    for y in y0 as u32..=y1 as u32 {
        for x in x0 as u32..=x1 as u32 {
            let p = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
            let inside = (0..3).all(|i| sign * edge(&t[i], &t[(i + 1) % 3], &p) >= 0.0);
            if inside {
                img.put(x, y, rgb);
            }
        }
    }
}

/// Sutherland–Hodgman clip of a camera-frame polygon against `z ≥ near`.
fn clip_near(poly: &[Vec3]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ina, inb) = (a.z >= NEAR_PLANE, b.z >= NEAR_PLANE);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let s = (NEAR_PLANE - a.z) / (b.z - a.z);
            out.push(a + (b - a) * s);
        }
    }
    out
}

/// Flat-shaded painter's-algorithm rendering of `fixture` seen through
/// `pose` (`T_ct`).
pub fn render(k: &CameraIntrinsics, pose: &Pose, fixture: &FixtureModel, settings: &RenderSettings) -> Result<Image, ImagingError> {
    k.validate()?;
    settings.validate()?;
    let cam: Vec<Vec3> = fixture.vertices.iter().map(|v| pose.transform_point(v)).collect();
    if !cam.iter().any(|v| v.z > BEHIND_CAMERA_EPS) {
        return Err(ImagingError::FixtureNotVisible);
    }
    let mut img = Image::new(k.width, k.height);
    fill_background(&mut img, settings);

    let sun = Vec3::from(settings.sun_direction);
    let mut visible = Vec::with_capacity(fixture.faces.len());
    for (idx, face) in fixture.faces.iter().enumerate() {
        let tri = face.indices.map(|i| cam[i]);
        let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
        let centroid = (tri[0] + tri[1] + tri[2]) / 3.0;
        if n.dot(&centroid) >= 0.0 {
            continue;
        }
        let poly = clip_near(&tri);
        if poly.len() < 3 {
            continue;
        }
        let n = n.normalize();
        let intensity = AMBIENT + n.dot(&sun).max(0.0);
        let colour = face.albedo.map(|a| (255.0 * a * intensity).round().clamp(0.0, 255.0) as u8);
        let depth = poly.iter().map(|p| p.z).sum::<f64>() / poly.len() as f64;
        visible.push((depth, idx, poly, colour));
    }
    visible.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    for (_, _, poly, colour) in visible {
        let px: Vec<Vector2<f64>> = poly.iter().map(|p| Vector2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy)).collect();
        for i in 1..px.len() - 1 {
            fill_triangle(&mut img, [px[0], px[i], px[i + 1]], colour);
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{project, sensor_intrinsics};
    use crate::pose::UnitQuaternion;

    fn facing(range: f64) -> Pose {
        Pose::new(UnitQuaternion::IDENTITY, Vec3::new(0.0, 0.0, range))
    }

    fn settings(bg: Background, sun: [f64; 3]) -> RenderSettings {
        RenderSettings { background: bg, sun_direction: sun, seed: 4 }
    }

    #[test]
    fn behind_camera_is_rejected() {
        let k = sensor_intrinsics(186, 120);
        let r = render(&k, &facing(-3.0), &FixtureModel::procedural(), &settings(Background::Black, [0.0, 0.0, -1.0]));
        assert!(matches!(r, Err(ImagingError::FixtureNotVisible)));
    }

    #[test]
    fn perpendicular_sun_gives_ambient_only() {
        let k = sensor_intrinsics(744, 480);
        let pose = facing(2.0);
        let img = render(&k, &pose, &FixtureModel::procedural(), &settings(Background::Black, [1.0, 0.0, 0.0])).unwrap();
        let p = project(&k, &pose, &Vec3::new(0.24, 0.0, 0.0)).pixel().unwrap();
        let expected = (255.0 * 0.55 * AMBIENT).round() as u8;
        assert_eq!(img.get(p.x as u32, p.y as u32), [expected; 3]);
    }

    #[test]
    fn face_on_sun_gives_full_shading() {
        let k = sensor_intrinsics(744, 480);
        let pose = facing(2.0);
        let img = render(&k, &pose, &FixtureModel::procedural(), &settings(Background::Black, [0.0, 0.0, -1.0])).unwrap();
        let p = project(&k, &pose, &Vec3::new(0.0, 0.26, 0.0)).pixel().unwrap();
        let expected = (255.0 * 0.55 * (1.0 + AMBIENT)).round().min(255.0) as u8;
        assert_eq!(img.get(p.x as u32, p.y as u32), [expected; 3]);
        // Corner of the image stays black.
        assert_eq!(img.get(0, 0), [0; 3]);
        // The red pin is visible and red.
        let pin = project(&k, &pose, &Vec3::new(0.24, 0.24, -0.06)).pixel().unwrap();
        let c = img.get(pin.x as u32, pin.y as u32);
        assert!(c[0] > 2 * c[1], "{c:?}");
    }

    #[test]
    fn rendering_is_deterministic() {
        let k = sensor_intrinsics(186, 120);
        let pose = Pose::new(UnitQuaternion::from_axis_angle(&Vec3::new(0.3, 1.0, 0.2), 0.2), Vec3::new(0.1, -0.2, 4.0));
        for bg in [Background::Black, Background::Perlin, Background::Clutter] {
            let s = settings(bg, sun_direction_from_elevation(37.0));
            let a = render(&k, &pose, &FixtureModel::procedural(), &s).unwrap();
            let b = render(&k, &pose, &FixtureModel::procedural(), &s).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.data.len(), 186 * 120 * 3);
        }
    }

    #[test]
    fn close_range_with_near_clipping() {
        let k = sensor_intrinsics(186, 120);
        let img = render(&k, &facing(0.05), &FixtureModel::procedural(), &settings(Background::Black, [0.0, 0.0, -1.0])).unwrap();
        assert!(img.mean() > 0.0);
    }

    #[test]
    fn backgrounds_differ() {
        let k = sensor_intrinsics(186, 120);
        let pose = facing(8.0);
        let sun = sun_direction_from_elevation(90.0);
        let black = render(&k, &pose, &FixtureModel::procedural(), &settings(Background::Black, sun)).unwrap();
        let perlin = render(&k, &pose, &FixtureModel::procedural(), &settings(Background::Perlin, sun)).unwrap();
        let clutter = render(&k, &pose, &FixtureModel::procedural(), &settings(Background::Clutter, sun)).unwrap();
        assert_eq!(black.get(0, 0), [0; 3]);
        assert!(perlin.mean() > black.mean());
        assert_ne!(perlin, clutter);
    }

    #[test]
    fn sun_must_be_unit() {
        let k = sensor_intrinsics(186, 120);
        let r = render(&k, &facing(3.0), &FixtureModel::procedural(), &settings(Background::Black, [0.0, 0.0, -2.0]));
        assert!(matches!(r, Err(ImagingError::SunNotUnit(_))));
        let s = sun_direction_from_elevation(146.0);
        assert!((Vec3::from(s).norm() - 1.0).abs() < 1e-15);
    }
}
