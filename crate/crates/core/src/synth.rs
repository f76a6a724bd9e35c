//! Synthetic hand poses.
//!
//! Used by scripted scenarios, tests and any client that needs to produce
//! plausible frames without a tracker. The skeleton is deliberately simple:
//! each finger is a straight segment that shortens and bends towards the
//! palm side as it curls.

use crate::geom::Vec3;
use crate::hand::{Finger, HandFrame, Side, INDEX, THUMB};

/// Sideways offset of each finger root from the palm center, measured
/// from the thumb side (negative) towards the pinky side.
const ROOT_OFFSET: [f64; 5] = [-0.04, -0.02, 0.0, 0.02, 0.035];
/// Extended finger length measured from the palm center.
const LENGTH: [f64; 5] = [0.10, 0.17, 0.18, 0.17, 0.14];
const CURL_SHORTEN: f64 = 0.75;
const CURL_DEPTH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HandShape {
    Open,
    Fist,
    /// Index extended, the rest folded.
    Point,
    /// Thumb tip held `gap_m` from the index tip.
    Pinch { gap_m: f64, others_curl: f64 },
    Curls([f64; 5]),
}

impl HandShape {
    pub fn curls(&self) -> [f64; 5] {
        match *self {
            HandShape::Open => [0.0; 5],
            HandShape::Fist => [0.3, 1.0, 1.0, 1.0, 1.0],
            HandShape::Point => [0.7, 0.0, 0.9, 0.9, 0.9],
            HandShape::Pinch { others_curl, .. } => {
                [0.5, 0.5, others_curl, others_curl, others_curl]
            }
            HandShape::Curls(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandBuilder {
    side: Side,
    palm: Vec3,
    normal: Vec3,
    dir: Vec3,
    shape: HandShape,
}

impl HandBuilder {
    /// Palm facing down, fingers along `+z`, hand open.
    pub fn new(side: Side, palm: Vec3) -> Self {
        Self {
            side,
            palm,
            normal: -Vec3::y(),
            dir: Vec3::z(),
            shape: HandShape::Open,
        }
    }

    /// Orient the palm. `dir` is made orthogonal to `normal`.
    pub fn facing(mut self, normal: Vec3, dir: Vec3) -> Self {
        let n = normal.normalize();
        let d = dir - n * n.dot(&dir);
        self.normal = n;
        self.dir = d.normalize();
        self
    }

    pub fn shape(mut self, shape: HandShape) -> Self {
        self.shape = shape;
        self
    }

    pub fn palm(mut self, palm: Vec3) -> Self {
        self.palm = palm;
        self
    }

    /// Unit vector from the thumb side towards the pinky side.
    pub fn across(&self) -> Vec3 {
        let thumb_side = match self.side {
            Side::Right => self.dir.cross(&self.normal),
            Side::Left => self.normal.cross(&self.dir),
        };
        -thumb_side
    }

    fn tip(&self, finger: usize, curl: f64) -> Vec3 {
        self.palm
            + self.across() * ROOT_OFFSET[finger]
            + self.dir * LENGTH[finger] * (1.0 - CURL_SHORTEN * curl)
            + self.normal * CURL_DEPTH * curl
    }

    fn curls(&self) -> [f64; 5] {
        self.shape.curls()
    }

    /// Build the frame at time `t_ms`.
    pub fn at(&self, t_ms: i64) -> HandFrame {
        let curls = self.curls();
        let mut fingers = [Finger {
            tip: self.palm,
            curl: 0.0,
        }; 5];
        for (i, f) in fingers.iter_mut().enumerate() {
            *f = Finger {
                tip: self.tip(i, curls[i]),
                curl: curls[i],
            };
        }
        if let HandShape::Pinch { gap_m, .. } = self.shape {
            fingers[THUMB].tip = fingers[INDEX].tip - self.across() * gap_m;
        }
        HandFrame {
            side: self.side,
            palm_pos: self.palm,
            palm_normal: self.normal,
            palm_dir: self.dir,
            fingers,
            t_ms,
        }
    }

    /// Palm position that puts the pinch point of this builder at `target`.
    pub fn palm_for_pinch_point(&self, target: Vec3) -> Vec3 {
        let f = self.palm(Vec3::zeros()).at(0);
        target - f.pinch_point()
    }

    /// Palm position that puts the grab point of this builder at `target`.
    pub fn palm_for_grab_point(&self, target: Vec3) -> Vec3 {
        let f = self.palm(Vec3::zeros()).at(0);
        target - f.grab_point()
    }
}

/// Mirror a frame across the plane `x = 0`, swapping its side.
pub fn mirror_x(frame: &HandFrame) -> HandFrame {
    let m = |v: Vec3| Vec3::new(-v.x, v.y, v.z);
    let mut out = frame.map(m, m);
    out.side = frame.side.other();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_are_valid() {
        for shape in [
            HandShape::Open,
            HandShape::Fist,
            HandShape::Point,
            HandShape::Pinch { gap_m: 0.01, others_curl: 0.9 },
        ] {
            for side in Side::BOTH {
                let f = HandBuilder::new(side, Vec3::new(0.1, 1.2, 0.4))
                    .facing(Vec3::new(0.3, -1.0, 0.2), Vec3::new(0.0, 0.1, 1.0))
                    .shape(shape)
                    .at(5);
                f.validate().unwrap();
            }
        }
    }

    #[test]
    fn thumb_sits_on_the_inner_side() {
        // Palm down, fingers forward (+z): a right thumb points towards +x
        // (the viewer's left), a left thumb towards -x.
        let r = HandBuilder::new(Side::Right, Vec3::zeros()).at(0);
        let l = HandBuilder::new(Side::Left, Vec3::zeros()).at(0);
        assert!(r.fingers[THUMB].tip.x > 0.0);
        assert!(l.fingers[THUMB].tip.x < 0.0);
    }

    #[test]
    fn pinch_point_placement() {
        let b = HandBuilder::new(Side::Left, Vec3::zeros())
            .shape(HandShape::Pinch { gap_m: 0.01, others_curl: 0.9 });
        let target = Vec3::new(0.3, 1.1, 0.5);
        let f = b.palm(b.palm_for_pinch_point(target)).at(0);
        assert!((f.pinch_point() - target).norm() < 1e-12);
    }

    #[test]
    fn mirror_is_an_involution() {
        let f = HandBuilder::new(Side::Right, Vec3::new(0.2, 1.3, 0.4))
            .shape(HandShape::Point)
            .at(0);
        assert_eq!(mirror_x(&mirror_x(&f)), f);
    }
}
