//! Small geometric helpers shared by the tracker and the engine.
//!
//! World frame: `y` is up, the floor is the `x`/`z` plane. Dataset floor
//! coordinates `(x, y)` map to world `(x, 0, y)`.

use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

pub fn up() -> Vec3 {
    Vec3::y()
}

/// Head (or sensor) pose: position plus orientation quaternion `[w, x, y, z]`.
///
/// Identity orientation looks along `+z` with `+y` up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadPose {
    pub pos: [f64; 3],
    pub quat: [f64; 4],
}

impl Default for HeadPose {
    fn default() -> Self {
        Self {
            pos: [0.0, 1.6, 0.0],
            quat: [1.0, 0.0, 0.0, 0.0],
        }
    }
}

impl HeadPose {
    pub fn new(pos: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        let q = orientation.quaternion();
        Self {
            pos: [pos.x, pos.y, pos.z],
            quat: [q.w, q.i, q.j, q.k],
        }
    }

    /// Pose at `pos` looking at `target`, keeping the head upright.
    pub fn looking_at(pos: Vec3, target: Vec3) -> Self {
        let dir = target - pos;
        let yaw = dir.x.atan2(dir.z);
        let horiz = (dir.x * dir.x + dir.z * dir.z).sqrt();
        // Positive pitch about +x tilts +z downwards.
        let pitch = (-dir.y).atan2(horiz);
        let q = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), yaw)
            * UnitQuaternion::from_axis_angle(&Vec3::x_axis(), pitch);
        Self::new(pos, q)
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.pos[0], self.pos[1], self.pos[2])
    }

    pub fn quat_norm(&self) -> f64 {
        self.quat.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_valid(&self) -> bool {
        self.pos.iter().chain(self.quat.iter()).all(|c| c.is_finite())
            && (self.quat_norm() - 1.0).abs() <= 1e-4
    }

    pub fn orientation(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.quat;
        UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(w, x, y, z))
    }

    pub fn forward(&self) -> Vec3 {
        self.orientation() * Vec3::z()
    }

    pub fn up(&self) -> Vec3 {
        self.orientation() * Vec3::y()
    }

    pub fn right(&self) -> Vec3 {
        // Right-handed: with +z forward and +y up, +x is the viewer's left.
        self.forward().cross(&self.up())
    }
}

/// Rotation about world up by `yaw` radians.
pub fn yaw_rotation(yaw: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vec3::y_axis(), yaw)
}

/// Horizontal distance between two points.
pub fn horizontal_dist(a: &Vec3, b: &Vec3) -> f64 {
    ((a.x - b.x).powi(2) + (a.z - b.z).powi(2)).sqrt()
}

/// Azimuth of `p` around a vertical axis through `center`, measured from `+x`
/// towards `+z`.
pub fn azimuth_about(center: &Vec3, p: &Vec3) -> f64 {
    (p.z - center.z).atan2(p.x - center.x)
}

/// Floor-plane unit direction for an azimuth (inverse of [`azimuth_about`]).
pub fn azimuth_dir(az: f64) -> Vec3 {
    Vec3::new(az.cos(), 0.0, az.sin())
}

/// Angle between two vectors in radians; zero if either is degenerate.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (a.dot(b) / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Wrap an angle difference into `(-pi, pi]`.
pub fn wrap_pi(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Minimum distance between segments `p0-p1` and `q0-q1`.
pub fn segment_distance(p0: &Vec3, p1: &Vec3, q0: &Vec3, q1: &Vec3) -> f64 {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let r = p0 - q0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let eps = 1e-12;
    let (s, t);
    if a <= eps && e <= eps {
        return r.norm();
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > eps {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p0 + d1 * s) - (q0 + d2 * t)).norm()
}
