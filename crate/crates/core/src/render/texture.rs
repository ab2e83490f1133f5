use crate::geometry::{CorridorSpec, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Plane {
    Floor,
    Ceiling,
    LeftWall,
    RightWall,
    EndWall,
    EntranceWall,
}

impl Plane {
    fn index(self) -> u64 {
        self as u64
    }
}

pub(crate) struct Hit {
    pub plane: Plane,
    /// In-plane coordinates in meters.
    pub a: f64,
    pub b: f64,
    /// World height of the hit point.
    pub y: f64,
    pub distance: f64,
}

/// Intersects a ray starting inside the corridor box with its boundary.
pub(crate) fn cast(corridor: &CorridorSpec, origin: &Point3, dir: &Point3) -> Hit {
    let hw = corridor.half_width();
    let mut best = (f64::INFINITY, Plane::EndWall);
    let mut consider = |t: f64, plane: Plane| {
        if t > 0.0 && t < best.0 {
            best = (t, plane);
        }
    };
    if dir.y < 0.0 {
        consider(-origin.y / dir.y, Plane::Floor);
    } else if dir.y > 0.0 {
        consider((corridor.height - origin.y) / dir.y, Plane::Ceiling);
    }
    if dir.x < 0.0 {
        consider((-hw - origin.x) / dir.x, Plane::LeftWall);
    } else if dir.x > 0.0 {
        consider((hw - origin.x) / dir.x, Plane::RightWall);
    }
    if dir.z > 0.0 {
        consider((corridor.length - origin.z) / dir.z, Plane::EndWall);
    } else if dir.z < 0.0 {
        consider(-origin.z / dir.z, Plane::EntranceWall);
    }
    let (t, plane) = best;
    let p = Point3::new(origin.x + t * dir.x, origin.y + t * dir.y, origin.z + t * dir.z);
    let (a, b) = match plane {
        Plane::Floor | Plane::Ceiling => (p.x, p.z),
        Plane::LeftWall | Plane::RightWall => (p.z, p.y),
        Plane::EndWall | Plane::EntranceWall => (p.x, p.y),
    };
    Hit {
        plane,
        a,
        b,
        y: p.y,
        distance: t * dir.norm(),
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform value in `[0, 1)` for a lattice cell.
fn lattice(seed: u64, plane: u64, ix: i64, iy: i64) -> f64 {
    let mut h = splitmix64(seed ^ plane.wrapping_mul(0xA24B_AED4_963E_E407));
    h = splitmix64(h ^ ix as u64);
    h = splitmix64(h ^ (iy as u64).rotate_left(32));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Smooth value noise in `[0, 1)`.
fn value_noise(seed: u64, plane: u64, a: f64, b: f64, cell: f64) -> f64 {
    let (x, y) = (a / cell, b / cell);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (sx, sy) = (fx * fx * (3.0 - 2.0 * fx), fy * fy * (3.0 - 2.0 * fy));
    let (ix, iy) = (x0 as i64, y0 as i64);
    let n00 = lattice(seed, plane, ix, iy);
    let n10 = lattice(seed, plane, ix + 1, iy);
    let n01 = lattice(seed, plane, ix, iy + 1);
    let n11 = lattice(seed, plane, ix + 1, iy + 1);
    let top = n00 + sx * (n10 - n00);
    let bottom = n01 + sx * (n11 - n01);
    top + sy * (bottom - top)
}

/// Per-corridor look derived from the texture seed: overall exposure and
/// per-plane brightness.
pub(crate) struct Appearance {
    seed: u64,
    exposure: f64,
    base: [f64; 6],
}

/// BGR tints; red never exceeds green or blue.
const TINTS: [[f64; 3]; 6] = [
    [0.95, 0.93, 0.88],
    [1.00, 1.00, 1.00],
    [1.00, 0.98, 0.94],
    [1.00, 0.98, 0.94],
    [0.92, 0.96, 0.86],
    [0.92, 0.96, 0.86],
];

const BASE_INTENSITY: [f64; 6] = [0.42, 0.88, 0.70, 0.70, 0.55, 0.55];
const TILE_M: f64 = 0.6;
const BASEBOARD_M: f64 = 0.12;

impl Appearance {
    pub fn new(seed: u64) -> Self {
        let exposure = 0.75 + 0.35 * lattice(seed, 99, 0, 0);
        let mut base = BASE_INTENSITY;
        for (k, b) in base.iter_mut().enumerate() {
            *b *= 0.85 + 0.3 * lattice(seed, 100 + k as u64, 0, 0);
        }
        Self { seed, exposure, base }
    }

    pub fn shade(&self, hit: &Hit) -> [u8; 3] {
        let k = hit.plane.index();
        let mut value = self.base[k as usize];
        value *= 1.0 + 0.24 * (value_noise(self.seed, k, hit.a, hit.b, 0.9) - 0.5);
        value *= 1.0 + 0.10 * (value_noise(self.seed, k + 16, hit.a, hit.b, 0.3) - 0.5);
        match hit.plane {
            Plane::Floor => {
                let ga = (hit.a / TILE_M).rem_euclid(1.0);
                let gb = (hit.b / TILE_M).rem_euclid(1.0);
                if ga.min(1.0 - ga) < 0.04 || gb.min(1.0 - gb) < 0.04 {
                    value *= 0.8;
                }
            }
            Plane::LeftWall | Plane::RightWall if hit.y < BASEBOARD_M => value *= 0.45,
            _ => {}
        }
        value *= self.exposure / (1.0 + 0.03 * hit.distance);
        let tint = TINTS[k as usize];
        tint.map(|t| (value * t * 255.0).round().clamp(0.0, 255.0) as u8)
    }
}
