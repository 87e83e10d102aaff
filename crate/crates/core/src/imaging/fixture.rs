use std::f64::consts::TAU;

use crate::pose::Vec3;

/// Triangle with flat RGB albedo; vertex order gives the outward normal by
/// the right-hand rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureFace {
    pub indices: [usize; 3],
    pub albedo: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    pub label: String,
    pub position: Vec3,
    /// Lies on the `z = 0` fixture plane.
    pub planar: bool,
}

/// Berthing-fixture mesh in the target frame. The front face is the plane
/// `z = 0`; the drogue cavity recedes into `+z` and the guide pins protrude
/// toward `−z`, the approach side.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureModel {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<FixtureFace>,
    pub keypoints: Vec<Keypoint>,
}

pub const PLATE_SIDE: f64 = 0.6;
pub const PLATE_THICKNESS: f64 = 0.05;
pub const DROGUE_OUTER_RADIUS: f64 = 0.18;
pub const DROGUE_THROAT_RADIUS: f64 = 0.05;
pub const DROGUE_DEPTH: f64 = 0.12;
pub const DROGUE_SEGMENTS: usize = 16;
pub const PIN_RADIUS: f64 = 0.02;
pub const PIN_HEIGHT: f64 = 0.06;
pub const PIN_SEGMENTS: usize = 8;
/// Pin axis offset from the plate centre along x and y.
pub const PIN_OFFSET: f64 = 0.24;

const GREY_PLATE: [f64; 3] = [0.55; 3];
const GREY_CONE: [f64; 3] = [0.75; 3];
const GREY_PIN: [f64; 3] = [0.9; 3];
const RED_PIN: [f64; 3] = [0.9, 0.15, 0.15];
const THROAT: [f64; 3] = [0.2; 3];

struct Builder {
    vertices: Vec<Vec3>,
    faces: Vec<FixtureFace>,
}

impl Builder {
    fn vertex(&mut self, v: Vec3) -> usize {
        self.vertices.push(v);
        self.vertices.len() - 1
    }

    /// Adds a triangle wound so its normal points toward `toward` (a
    /// direction when `directional`, otherwise a reference point on the
    /// visible side).
    fn tri(&mut self, mut idx: [usize; 3], albedo: [f64; 3], toward: Vec3, directional: bool) {
        let [a, b, c] = idx.map(|i| self.vertices[i]);
        let n = (b - a).cross(&(c - a));
        let dir = if directional { toward } else { toward - (a + b + c) / 3.0 };
        if n.dot(&dir) < 0.0 {
            idx.swap(1, 2);
        }
        self.faces.push(FixtureFace { indices: idx, albedo });
    }

    fn quad(&mut self, q: [usize; 4], albedo: [f64; 3], toward: Vec3, directional: bool) {
        self.tri([q[0], q[1], q[2]], albedo, toward, directional);
        self.tri([q[0], q[2], q[3]], albedo, toward, directional);
    }
}

fn ring(b: &mut Builder, centre: Vec3, radius: f64, n: usize) -> Vec<usize> {
    (0..n)
        .map(|i| {
            let a = TAU * i as f64 / n as f64;
            b.vertex(centre + Vec3::new(radius * a.cos(), radius * a.sin(), 0.0))
        })
        .collect()
}

impl FixtureModel {
    pub fn procedural() -> Self {
        let mut b = Builder { vertices: Vec::new(), faces: Vec::new() };
        let half = PLATE_SIDE / 2.0;
        let front = Vec3::new(0.0, 0.0, -1.0);
        let n = DROGUE_SEGMENTS;

        // Plate front: annulus between the square outline and the drogue rim,
        // sampled at the same azimuths (multiples of 22.5° hit the corners).
        let rim = ring(&mut b, Vec3::zeros(), DROGUE_OUTER_RADIUS, n);
        let outline: Vec<usize> = (0..n)
            .map(|i| {
                let a = TAU * i as f64 / n as f64;
                let (s, c) = a.sin_cos();
                let scale = half / c.abs().max(s.abs());
                b.vertex(Vec3::new(scale * c, scale * s, 0.0))
            })
            .collect();
        for i in 0..n {
            let j = (i + 1) % n;
            b.quad([rim[i], rim[j], outline[j], outline[i]], GREY_PLATE, front, true);
        }

        // Plate sides and back.
        let corners = [(-half, -half), (half, -half), (half, half), (-half, half)];
        let fc: Vec<usize> = corners.iter().map(|&(x, y)| b.vertex(Vec3::new(x, y, 0.0))).collect();
        let bc: Vec<usize> = corners.iter().map(|&(x, y)| b.vertex(Vec3::new(x, y, PLATE_THICKNESS))).collect();
        let centre = Vec3::new(0.0, 0.0, PLATE_THICKNESS / 2.0);
        for i in 0..4 {
            let j = (i + 1) % 4;
            let outward = b.vertices[fc[i]] + b.vertices[fc[j]] - 2.0 * centre;
            b.quad([fc[i], fc[j], bc[j], bc[i]], GREY_PLATE, outward, true);
        }
        b.quad([bc[0], bc[1], bc[2], bc[3]], GREY_PLATE, Vec3::new(0.0, 0.0, 1.0), true);

        // Drogue funnel, visible from the approach side.
        let throat = ring(&mut b, Vec3::new(0.0, 0.0, DROGUE_DEPTH), DROGUE_THROAT_RADIUS, n);
        let viewpoint = Vec3::new(0.0, 0.0, -1.0);
        for i in 0..n {
            let j = (i + 1) % n;
            b.quad([rim[i], rim[j], throat[j], throat[i]], GREY_CONE, viewpoint, false);
        }
        let throat_centre = b.vertex(Vec3::new(0.0, 0.0, DROGUE_DEPTH));
        for i in 0..n {
            b.tri([throat_centre, throat[i], throat[(i + 1) % n]], THROAT, front, true);
        }

        // Guide pins; the +x,+y one is red for orientation disambiguation.
        let mut keypoints = Vec::new();
        for (k, &(sx, sy)) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)].iter().enumerate() {
            let base = Vec3::new(sx * PIN_OFFSET, sy * PIN_OFFSET, 0.0);
            let tip = base + Vec3::new(0.0, 0.0, -PIN_HEIGHT);
            let albedo = if k == 2 { RED_PIN } else { GREY_PIN };
            let bottom = ring(&mut b, base, PIN_RADIUS, PIN_SEGMENTS);
            let top = ring(&mut b, tip, PIN_RADIUS, PIN_SEGMENTS);
            for i in 0..PIN_SEGMENTS {
                let j = (i + 1) % PIN_SEGMENTS;
                let mid = (b.vertices[bottom[i]] + b.vertices[bottom[j]]) / 2.0;
                let outward = Vec3::new(mid.x - base.x, mid.y - base.y, 0.0);
                b.quad([bottom[i], bottom[j], top[j], top[i]], albedo, outward, true);
            }
            let cap = b.vertex(tip);
            for i in 0..PIN_SEGMENTS {
                b.tri([cap, top[i], top[(i + 1) % PIN_SEGMENTS]], albedo, front, true);
            }
            keypoints.push(Keypoint { label: format!("pin_tip_{k}"), position: tip, planar: false });
        }
        for (k, &(x, y)) in corners.iter().enumerate() {
            keypoints.push(Keypoint { label: format!("plate_corner_{k}"), position: Vec3::new(x, y, 0.0), planar: true });
        }
        keypoints.push(Keypoint { label: "drogue_rim_centre".into(), position: Vec3::zeros(), planar: true });

        FixtureModel { vertices: b.vertices, faces: b.faces, keypoints }
    }

    pub fn face_normal(&self, f: &FixtureFace) -> Vec3 {
        let [a, b, c] = f.indices.map(|i| self.vertices[i]);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn planar_keypoints(&self) -> impl Iterator<Item = &Keypoint> {
        self.keypoints.iter().filter(|k| k.planar)
    }
}

impl Default for FixtureModel {
    fn default() -> Self {
        Self::procedural()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keypoints_inside_bounding_box() {
        let f = FixtureModel::procedural();
        let (lo, hi) = f.bounding_box();
        for k in &f.keypoints {
            let p = k.position;
            assert!(p.x >= lo.x && p.y >= lo.y && p.z >= lo.z && p.x <= hi.x && p.y <= hi.y && p.z <= hi.z, "{}", k.label);
        }
        assert!((hi.x - 0.3).abs() < 1e-12 && (lo.z + PIN_HEIGHT).abs() < 1e-12);
    }

    #[test]
    fn front_faces_look_along_minus_z() {
        let f = FixtureModel::procedural();
        // The first 2·16 faces form the plate front annulus.
        for face in &f.faces[..2 * DROGUE_SEGMENTS] {
            let n = f.face_normal(face);
            assert!((n - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn pin_sides_point_outward() {
        let f = FixtureModel::procedural();
        for face in f.faces.iter().filter(|x| x.albedo == RED_PIN) {
            let [a, b, c] = face.indices.map(|i| f.vertices[i]);
            let centroid = (a + b + c) / 3.0;
            let n = f.face_normal(face);
            let radial = Vec3::new(centroid.x - PIN_OFFSET, centroid.y - PIN_OFFSET, 0.0);
            assert!(n.dot(&radial) >= -1e-12 || n.z < -0.99);
        }
    }

    #[test]
    fn annulus_covers_plate_minus_drogue() {
        let f = FixtureModel::procedural();
        let area: f64 = f.faces[..2 * DROGUE_SEGMENTS]
            .iter()
            .map(|face| {
                let [a, b, c] = face.indices.map(|i| f.vertices[i]);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum();
        let polygon = 0.5 * DROGUE_SEGMENTS as f64 * DROGUE_OUTER_RADIUS.powi(2) * (TAU / DROGUE_SEGMENTS as f64).sin();
        assert!((area - (PLATE_SIDE * PLATE_SIDE - polygon)).abs() < 1e-12);
    }

    #[test]
    fn has_one_distinct_pin() {
        let f = FixtureModel::procedural();
        let red = f.faces.iter().filter(|x| x.albedo == RED_PIN).count();
        assert_eq!(red, 3 * PIN_SEGMENTS);
        assert_eq!(f.planar_keypoints().count(), 5);
    }
}
