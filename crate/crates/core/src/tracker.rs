//! Simulated head-mounted hand tracker.
//!
//! The sensor sits at the head and looks along the head's forward vector.
//! A hand is lost when its palm leaves the depth band or the angular field
//! of view, or when the other hand hides it. Lost hands stay lost for a few
//! frames after the geometry recovers, which mimics reacquisition delay.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geom::{angle_between, HeadPose, Vec3};
use crate::hand::{HandFrame, Side};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub min_depth_m: f64,
    pub max_depth_m: f64,
    pub fov_h_deg: f64,
    pub fov_v_deg: f64,
    pub occlusion_cone_deg: f64,
    pub jitter_std_m: f64,
    pub dropout_latch_frames: u32,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            min_depth_m: 0.10,
            max_depth_m: 0.80,
            fov_h_deg: 150.0,
            fov_v_deg: 120.0,
            occlusion_cone_deg: 10.0,
            jitter_std_m: 0.0,
            dropout_latch_frames: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SensorError {
    #[error("invalid sensor model: {0}")]
    InvalidModel(&'static str),
}

impl SensorModel {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SensorError> {
        if !(self.min_depth_m > 0.0 && self.min_depth_m < self.max_depth_m) {
            return Err(SensorError::InvalidModel("need 0 < min_depth < max_depth"));
        }
        let fov_ok = |a: f64| a > 0.0 && a <= 180.0;
        if !fov_ok(self.fov_h_deg) || !fov_ok(self.fov_v_deg) {
            return Err(SensorError::InvalidModel("field of view must be in (0, 180]"));
        }
        if !(self.occlusion_cone_deg >= 0.0) {
            return Err(SensorError::InvalidModel("occlusion cone must be >= 0"));
        }
        if !(self.jitter_std_m >= 0.0 && self.jitter_std_m.is_finite()) {
            return Err(SensorError::InvalidModel("jitter must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DropReason {
    OutOfZone,
    OutOfFov,
    Occluded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedHand {
    pub frame: Option<HandFrame>,
    pub tracked: bool,
    pub drop_reason: Option<DropReason>,
}

impl ObservedHand {
    pub fn tracked(frame: HandFrame) -> Self {
        Self {
            frame: Some(frame),
            tracked: true,
            drop_reason: None,
        }
    }

    pub fn dropped(reason: DropReason) -> Self {
        Self {
            frame: None,
            tracked: false,
            drop_reason: Some(reason),
        }
    }

    pub fn absent() -> Self {
        Self {
            frame: None,
            tracked: false,
            drop_reason: None,
        }
    }

    pub fn from_frame(frame: Option<HandFrame>) -> Self {
        frame.map_or_else(Self::absent, Self::tracked)
    }
}

/// Signed depth of `p` along the sensor axis.
fn depth(head: &HeadPose, p: &Vec3) -> f64 {
    (p - head.position()).dot(&head.forward())
}

/// Horizontal and vertical off-axis angles of `p` in degrees.
fn off_axis_deg(head: &HeadPose, p: &Vec3) -> (f64, f64) {
    let rel = p - head.position();
    let d = rel.dot(&head.forward());
    let h = rel.dot(&head.right()).atan2(d).to_degrees();
    let v = rel.dot(&head.up()).atan2(d).to_degrees();
    (h, v)
}

fn in_fov(model: &SensorModel, head: &HeadPose, p: &Vec3) -> bool {
    let (h, v) = off_axis_deg(head, p);
    h.abs() <= model.fov_h_deg / 2.0 && v.abs() <= model.fov_v_deg / 2.0
}

fn in_zone(model: &SensorModel, head: &HeadPose, p: &Vec3) -> bool {
    let d = depth(head, p);
    d >= model.min_depth_m && d <= model.max_depth_m
}

/// True iff `point` is inside the depth band and the angular field of view.
pub fn in_frustum(model: &SensorModel, head: &HeadPose, point: &Vec3) -> bool {
    in_zone(model, head, point) && in_fov(model, head, point)
}

/// Whether `other` hides `palm` from a sensor at `eye`.
fn occludes(model: &SensorModel, eye: &Vec3, palm: &Vec3, other: &Vec3) -> bool {
    let to_palm = palm - eye;
    let to_other = other - eye;
    to_other.norm() < to_palm.norm()
        && angle_between(&to_palm, &to_other).to_degrees() <= model.occlusion_cone_deg
}

/// Geometric drop reason for one hand, ignoring the latch.
pub fn drop_reason(
    model: &SensorModel,
    head: &HeadPose,
    palm: &Vec3,
    other_palm: Option<&Vec3>,
) -> Option<DropReason> {
    if !in_zone(model, head, palm) {
        Some(DropReason::OutOfZone)
    } else if !in_fov(model, head, palm) {
        Some(DropReason::OutOfFov)
    } else if other_palm.is_some_and(|o| occludes(model, &head.position(), palm, o)) {
        Some(DropReason::Occluded)
    } else {
        None
    }
}

/// Stateful tracker: the sensor model plus per-hand latch counters and the
/// jitter stream.
#[derive(Debug, Clone)]
pub struct Tracker {
    model: SensorModel,
    latch: [u32; 2],
    last_reason: [Option<DropReason>; 2],
    rng: ChaCha8Rng,
}

impl Tracker {
    pub fn new(model: SensorModel, seed: u64) -> Self {
        Self {
            model,
            latch: [0; 2],
            last_reason: [None; 2],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn model(&self) -> &SensorModel {
        &self.model
    }

    /// Observe both hands for one sample. Hand frames are in the head's
    /// reference frame (the same frame as `head`).
    pub fn observe(
        &mut self,
        head: &HeadPose,
        left: Option<&HandFrame>,
        right: Option<&HandFrame>,
    ) -> (ObservedHand, ObservedHand) {
        let inputs = [left, right];
        let mut out = [ObservedHand::absent(); 2];
        for side in Side::BOTH {
            let i = side.index();
            let Some(frame) = inputs[i] else {
                self.latch[i] = 0;
                self.last_reason[i] = None;
                continue;
            };
            let other = inputs[side.other().index()].map(|f| &f.palm_pos);
            if let Some(reason) = drop_reason(&self.model, head, &frame.palm_pos, other) {
                self.latch[i] = self.model.dropout_latch_frames;
                self.last_reason[i] = Some(reason);
                out[i] = ObservedHand::dropped(reason);
            } else if self.latch[i] > 0 {
                self.latch[i] -= 1;
                out[i] = ObservedHand::dropped(self.last_reason[i].unwrap_or(DropReason::OutOfFov));
            } else {
                out[i] = ObservedHand::tracked(*frame);
            }
        }
        if self.model.jitter_std_m > 0.0 {
            for o in out.iter_mut() {
                if let Some(f) = o.frame.as_mut() {
                    self.jitter(f);
                }
            }
        }
        (out[0], out[1])
    }

    fn jitter(&mut self, frame: &mut HandFrame) {
        let normal = Normal::new(0.0, self.model.jitter_std_m).expect("validated std");
        let rng = &mut self.rng;
        let mut noise = || Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
        frame.palm_pos += noise();
        for f in frame.fingers.iter_mut() {
            f.tip += noise();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::HandBuilder;

    fn head() -> HeadPose {
        HeadPose::new(Vec3::new(0.0, 1.6, 0.0), nalgebra::UnitQuaternion::identity())
    }

    fn hand(side: Side, p: Vec3) -> HandFrame {
        HandBuilder::new(side, p).at(0)
    }

    #[test]
    fn frustum_examples() {
        let m = SensorModel::default();
        let h = head();
        assert!(in_frustum(&m, &h, &Vec3::new(0.0, 1.6, 0.4)));
        assert!(!in_frustum(&m, &h, &Vec3::new(0.0, 1.6, 0.05)));
        // 76 degrees to the side at 0.4 m depth.
        let a = 76f64.to_radians();
        let p = Vec3::new(0.4 * a.tan(), 1.6, 0.4);
        assert!(!in_frustum(&m, &h, &p));
        let a = 74f64.to_radians();
        let p = Vec3::new(0.4 * a.tan(), 1.6, 0.4);
        assert!(in_frustum(&m, &h, &p));
    }

    #[test]
    fn far_palm_out_of_zone() {
        let mut t = Tracker::new(SensorModel::default(), 1);
        let r = hand(Side::Right, Vec3::new(0.0, 1.6, 0.9));
        let (_, o) = t.observe(&head(), None, Some(&r));
        assert_eq!(o.drop_reason, Some(DropReason::OutOfZone));
        assert!(o.frame.is_none());
    }

    #[test]
    fn nearer_hand_occludes_farther() {
        let mut t = Tracker::new(SensorModel::default(), 1);
        let l = hand(Side::Left, Vec3::new(0.0, 1.6, 0.6));
        let r = hand(Side::Right, Vec3::new(0.0, 1.6, 0.3));
        let (ol, or) = t.observe(&head(), Some(&l), Some(&r));
        assert_eq!(ol.drop_reason, Some(DropReason::Occluded));
        assert!(or.tracked);
    }

    #[test]
    fn identity_inside_envelope() {
        let mut t = Tracker::new(SensorModel::default(), 9);
        let l = hand(Side::Left, Vec3::new(-0.15, 1.4, 0.4));
        let r = hand(Side::Right, Vec3::new(0.15, 1.4, 0.4));
        let (ol, or) = t.observe(&head(), Some(&l), Some(&r));
        assert_eq!(ol.frame, Some(l));
        assert_eq!(or.frame, Some(r));
    }

    #[test]
    fn latch_holds_after_recovery() {
        let mut t = Tracker::new(SensorModel::default(), 1);
        let far = hand(Side::Right, Vec3::new(0.0, 1.6, 0.9));
        let near = hand(Side::Right, Vec3::new(0.0, 1.5, 0.4));
        t.observe(&head(), None, Some(&far));
        for _ in 0..3 {
            let (_, o) = t.observe(&head(), None, Some(&near));
            assert_eq!(o.drop_reason, Some(DropReason::OutOfZone));
        }
        let (_, o) = t.observe(&head(), None, Some(&near));
        assert!(o.tracked);
    }

    #[test]
    fn jitter_is_seeded() {
        let m = SensorModel {
            jitter_std_m: 0.001,
            ..SensorModel::default()
        };
        let r = hand(Side::Right, Vec3::new(0.1, 1.4, 0.4));
        let run = |seed| Tracker::new(m, seed).observe(&head(), None, Some(&r)).1;
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
        assert_ne!(run(3).frame, Some(r));
    }

    #[test]
    fn invalid_models_rejected() {
        let mut m = SensorModel::default();
        m.min_depth_m = 0.9;
        assert!(m.validate().is_err());
        let mut m = SensorModel::default();
        m.fov_h_deg = 200.0;
        assert!(m.validate().is_err());
        assert!(SensorModel::default().validate().is_ok());
    }
}
