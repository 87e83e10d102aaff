//! Pinhole camera, procedural berthing fixture, proxy rasterizer,
//! backgrounds and image augmentation.

mod augment;
mod fixture;
mod perlin;
mod raster;

pub use augment::{
    augment_photometric, augment_pose_warp, apply_photometric, sample_photometric, sample_warp, warp_homography,
    warp_with, PhotometricDraws, PhotometricStrength, WarpLimits, WarpPerturbation,
};
pub use fixture::{FixtureFace, FixtureModel, Keypoint};
pub use perlin::{perlin2d, Perlin};
pub use raster::{render, sun_direction_from_elevation, Background, RenderSettings, AMBIENT};

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::{Pose, Vec3};

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("field of view must lie in (0, 180) degrees (hfov {hfov}, vfov {vfov})")]
    BadFov { hfov: f64, vfov: f64 },
    #[error("invalid camera intrinsics: {0}")]
    BadIntrinsics(&'static str),
    #[error("fixture is entirely behind the camera")]
    FixtureNotVisible,
    #[error("fixture plane is not in front of the camera (d = {0})")]
    PlaneBehindCamera(f64),
    #[error("pixel buffer has {got} bytes, expected {expected}")]
    BufferSize { expected: usize, got: usize },
    #[error("sun direction is not a unit vector (norm {0})")]
    SunNotUnit(f64),
    #[error("malformed PPM: {0}")]
    Ppm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pinhole intrinsics in pixels. Pixel `(i, j)` covers `[i, i+1) × [j, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), ImagingError> {
        if self.width == 0 || self.height == 0 {
            return Err(ImagingError::BadIntrinsics("zero image size"));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(ImagingError::BadIntrinsics("focal lengths must be positive"));
        }
        if !(0.0 < self.cx && self.cx < self.width as f64 && 0.0 < self.cy && self.cy < self.height as f64) {
            return Err(ImagingError::BadIntrinsics("principal point outside the image"));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(1.0 / self.fx, 0.0, -self.cx / self.fx, 0.0, 1.0 / self.fy, -self.cy / self.fy, 0.0, 0.0, 1.0)
    }

    /// Projects a camera-frame point; `None` when `z ≤ 1e-6` m.
    pub fn project_camera(&self, p: &Vec3) -> Option<Vector2<f64>> {
        if p.z <= BEHIND_CAMERA_EPS {
            return None;
        }
        Some(Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }
}

/// The sensor used throughout: 744×480 px, 65.6° × 44.7° field of view.
pub const SENSOR_WIDTH: u32 = 744;
pub const SENSOR_HEIGHT: u32 = 480;
pub const SENSOR_HFOV: f64 = 65.6;
pub const SENSOR_VFOV: f64 = 44.7;

pub const BEHIND_CAMERA_EPS: f64 = 1e-6;

pub fn intrinsics_from_fov(width: u32, height: u32, hfov: f64, vfov: f64) -> Result<CameraIntrinsics, ImagingError> {
    let ok = |f: f64| f > 0.0 && f < 180.0;
    if !ok(hfov) || !ok(vfov) {
        return Err(ImagingError::BadFov { hfov, vfov });
    }
    let k = CameraIntrinsics {
        width,
        height,
        fx: width as f64 / (2.0 * (hfov.to_radians() / 2.0).tan()),
        fy: height as f64 / (2.0 * (vfov.to_radians() / 2.0).tan()),
        cx: width as f64 / 2.0,
        cy: height as f64 / 2.0,
    };
    k.validate()?;
    Ok(k)
}

/// Sensor intrinsics at an arbitrary resolution with the sensor's field of view.
pub fn sensor_intrinsics(width: u32, height: u32) -> CameraIntrinsics {
    intrinsics_from_fov(width, height, SENSOR_HFOV, SENSOR_VFOV).expect("sensor field of view is valid")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Pixel(Vector2<f64>),
    BehindCamera,
}

impl Projection {
    pub fn pixel(self) -> Option<Vector2<f64>> {
        match self {
            Projection::Pixel(p) => Some(p),
            Projection::BehindCamera => None,
        }
    }
}

/// Projects a target-frame point through `pose` (`T_ct`).
pub fn project(k: &CameraIntrinsics, pose: &Pose, point: &Vec3) -> Projection {
    match k.project_camera(&pose.transform_point(point)) {
        Some(p) => Projection::Pixel(p),
        None => Projection::BehindCamera,
    }
}

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![0; width as usize * height as usize * 3] }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImagingError> {
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(ImagingError::BufferSize { expected, got: data.len() });
        }
        Ok(Self { width, height, data })
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len().max(1) as f64
    }

    /// Channel-major floats in `[0, 1]`, layout `[3][H][W]`.
    pub fn to_chw_f32(&self) -> Vec<f32> {
        let plane = self.width as usize * self.height as usize;
        let mut out = vec![0.0f32; plane * 3];
        for (i, px) in self.data.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c * plane + i] = px[c] as f32 / 255.0;
            }
        }
        out
    }

    pub fn write_ppm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)
    }

    pub fn to_ppm_bytes(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(self.data.len() + 20);
        self.write_ppm(&mut v).expect("writing to a Vec cannot fail");
        v
    }

    pub fn read_ppm<R: BufRead>(mut r: R) -> Result<Self, ImagingError> {
        let mut header = Vec::new();
        // Magic, width, height, maxval: four whitespace-separated tokens,
        // `#` comments allowed between them.
        while header.len() < 4 {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(ImagingError::Ppm("truncated header".into()));
            }
            let content = line.split('#').next().unwrap_or("");
            header.extend(content.split_whitespace().map(str::to_owned));
        }
        if header.len() != 4 || header[0] != "P6" {
            return Err(ImagingError::Ppm(format!("unsupported header {header:?}")));
        }
        let parse = |s: &str| s.parse::<u32>().map_err(|_| ImagingError::Ppm(format!("bad number '{s}'")));
        let (w, h, maxval) = (parse(&header[1])?, parse(&header[2])?, parse(&header[3])?);
        if maxval != 255 {
            return Err(ImagingError::Ppm(format!("maxval {maxval} unsupported")));
        }
        let mut data = vec![0u8; w as usize * h as usize * 3];
        r.read_exact(&mut data).map_err(|_| ImagingError::Ppm("truncated pixel data".into()))?;
        Image::from_raw(w, h, data)
    }

    pub fn save(&self, path: &Path) -> Result<(), ImagingError> {
        std::fs::write(path, self.to_ppm_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ImagingError> {
        let f = std::fs::File::open(path)?;
        Image::read_ppm(std::io::BufReader::new(f))
    }
}

/// Homogeneous pixel transform `p' ~ H p`.
pub fn apply_homography(h: &Matrix3<f64>, p: &Vector2<f64>) -> Vector2<f64> {
    let q = h * Vector3::new(p.x, p.y, 1.0);
    Vector2::new(q.x / q.z, q.y / q.z)
}
