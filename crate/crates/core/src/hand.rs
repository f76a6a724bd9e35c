//! Hand skeleton frames and posture classification.
//!
//! A frame carries the palm pose and the five fingertips with a curl value
//! per finger. That is enough to decide every posture the interface uses:
//! pinch, grab, point, the open "stop" hand and an upward index finger.

use serde::{Deserialize, Serialize};

use crate::geom::{angle_between, segment_distance, up, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Finger {
    pub tip: Vec3,
    /// 0 = fully extended, 1 = fully curled.
    pub curl: f64,
}

pub const THUMB: usize = 0;
pub const INDEX: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandFrame {
    pub side: Side,
    pub palm_pos: Vec3,
    /// Unit vector pointing out of the palm.
    pub palm_normal: Vec3,
    /// Unit vector from the wrist towards the fingers.
    pub palm_dir: Vec3,
    /// Thumb to pinky.
    pub fingers: [Finger; 5],
    pub t_ms: i64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HandError {
    #[error("malformed {side:?} hand frame: {reason}")]
    MalformedFrame { side: Side, reason: &'static str },
    #[error("hand timestamps differ by {0} ms")]
    TimestampSkew(i64),
}

impl HandFrame {
    pub fn validate(&self) -> Result<(), HandError> {
        let bad = |reason| {
            Err(HandError::MalformedFrame {
                side: self.side,
                reason,
            })
        };
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        if !finite(&self.palm_pos) || !finite(&self.palm_normal) || !finite(&self.palm_dir) {
            return bad("non-finite palm");
        }
        if (self.palm_normal.norm() - 1.0).abs() > 1e-6 {
            return bad("palm normal is not unit length");
        }
        if (self.palm_dir.norm() - 1.0).abs() > 1e-6 {
            return bad("palm direction is not unit length");
        }
        for f in &self.fingers {
            if !finite(&f.tip) {
                return bad("non-finite fingertip");
            }
            if !(0.0..=1.0).contains(&f.curl) {
                return bad("curl outside [0, 1]");
            }
        }
        Ok(())
    }

    pub fn pinch_distance(&self) -> f64 {
        (self.fingers[THUMB].tip - self.fingers[INDEX].tip).norm()
    }

    pub fn pinch_point(&self) -> Vec3 {
        (self.fingers[THUMB].tip + self.fingers[INDEX].tip) * 0.5
    }

    pub fn grab_point(&self) -> Vec3 {
        self.fingers.iter().map(|f| f.tip).sum::<Vec3>() / 5.0
    }

    /// Mean curl of index through pinky.
    pub fn grip_curl(&self) -> f64 {
        self.fingers[1..].iter().map(|f| f.curl).sum::<f64>() / 4.0
    }

    /// Unit direction from the palm to the index fingertip.
    pub fn index_dir(&self) -> Vec3 {
        let d = self.fingers[INDEX].tip - self.palm_pos;
        let n = d.norm();
        if n > 0.0 {
            d / n
        } else {
            self.palm_dir
        }
    }

    /// Palm and fingertip points, used for widget contact tests.
    pub fn contact_points(&self) -> impl Iterator<Item = Vec3> + '_ {
        std::iter::once(self.palm_pos).chain(self.fingers.iter().map(|f| f.tip))
    }

    /// Rigidly transform every point and direction.
    pub fn map(&self, point: impl Fn(Vec3) -> Vec3, dir: impl Fn(Vec3) -> Vec3) -> Self {
        let mut out = *self;
        out.palm_pos = point(self.palm_pos);
        out.palm_normal = dir(self.palm_normal);
        out.palm_dir = dir(self.palm_dir);
        for (o, f) in out.fingers.iter_mut().zip(&self.fingers) {
            o.tip = point(f.tip);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Posture {
    None,
    Pinch,
    Grab,
    Point,
    OpenStop,
    IndexUp,
}

impl Posture {
    /// Candidates in ambiguity priority order.
    pub const PRIORITY: [Posture; 5] = [
        Posture::Pinch,
        Posture::Grab,
        Posture::Point,
        Posture::OpenStop,
        Posture::IndexUp,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostureState {
    pub posture: Posture,
    pub pinch_point: Option<Vec3>,
    pub grab_point: Option<Vec3>,
    /// Time at which `posture` became active.
    pub since_ms: i64,
    /// Candidate posture waiting out the debounce, with its frame count.
    pub pending: Option<(Posture, u32)>,
}

impl PostureState {
    pub fn idle(t_ms: i64) -> Self {
        Self {
            posture: Posture::None,
            pinch_point: None,
            grab_point: None,
            since_ms: t_ms,
            pending: None,
        }
    }

    /// State for a hand the sensor lost at `t_ms`.
    pub fn lost(&self, t_ms: i64) -> Self {
        if self.posture == Posture::None {
            Self {
                pending: None,
                ..*self
            }
        } else {
            Self::idle(t_ms)
        }
    }

    pub fn is(&self, posture: Posture) -> bool {
        self.posture == posture
    }
}

/// Classification thresholds. Distances in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostureConfig {
    pub pinch_engage_m: f64,
    pub pinch_release_m: f64,
    pub grab_engage_curl: f64,
    pub grab_release_curl: f64,
    pub extended_max_curl: f64,
    pub folded_min_curl: f64,
    pub stop_forward_dot: f64,
    pub index_up_dot: f64,
    /// Consecutive frames a new posture must be seen before it engages.
    pub debounce_frames: u32,
}

impl Default for PostureConfig {
    fn default() -> Self {
        Self {
            pinch_engage_m: 0.025,
            pinch_release_m: 0.035,
            grab_engage_curl: 0.7,
            grab_release_curl: 0.5,
            extended_max_curl: 0.2,
            folded_min_curl: 0.6,
            stop_forward_dot: 0.6,
            index_up_dot: 0.8,
            debounce_frames: 2,
        }
    }
}

impl PostureConfig {
    /// Whether `frame` shows `posture`. `held` selects the release
    /// threshold for postures with hysteresis.
    pub fn matches(&self, posture: Posture, frame: &HandFrame, torso_forward: &Vec3, held: bool) -> bool {
        let curls = frame.fingers.map(|f| f.curl);
        let point_shape = curls[INDEX] <= self.extended_max_curl
            && curls[2..].iter().all(|&c| c >= self.folded_min_curl);
        let index_up = frame.index_dir().dot(&up()) >= self.index_up_dot;
        match posture {
            Posture::None => true,
            Posture::Pinch => {
                if held {
                    frame.pinch_distance() <= self.pinch_release_m
                } else {
                    frame.pinch_distance() < self.pinch_engage_m
                }
            }
            Posture::Grab => {
                if held {
                    frame.grip_curl() > self.grab_release_curl
                } else {
                    frame.grip_curl() >= self.grab_engage_curl
                }
            }
            // Point and IndexUp split the pointing shape by direction.
            Posture::Point => point_shape && !index_up,
            Posture::IndexUp => point_shape && index_up,
            Posture::OpenStop => {
                curls.iter().all(|&c| c <= self.extended_max_curl)
                    && frame.palm_normal.dot(torso_forward) >= self.stop_forward_dot
            }
        }
    }

    /// Highest-priority posture shown by `frame`, using the release
    /// threshold for `current`.
    pub fn candidate(&self, frame: &HandFrame, current: Posture, torso_forward: &Vec3) -> Posture {
        Posture::PRIORITY
            .into_iter()
            .find(|&p| self.matches(p, frame, torso_forward, p == current))
            .unwrap_or(Posture::None)
    }
}

/// Hysteretic, debounced posture classification for one hand.
pub fn classify_posture(
    frame: &HandFrame,
    prev: &PostureState,
    config: &PostureConfig,
    torso_forward: &Vec3,
) -> Result<PostureState, HandError> {
    frame.validate()?;
    let t = frame.t_ms;
    let candidate = config.candidate(frame, prev.posture, torso_forward);

    let (posture, since_ms, pending) = if candidate == prev.posture {
        (prev.posture, prev.since_ms, None)
    } else if candidate == Posture::None {
        (Posture::None, t, None)
    } else {
        let count = match prev.pending {
            Some((p, n)) if p == candidate => n + 1,
            _ => 1,
        };
        if count >= config.debounce_frames {
            (candidate, t, None)
        } else if prev.posture != Posture::None
            && config.matches(prev.posture, frame, torso_forward, true)
        {
            (prev.posture, prev.since_ms, Some((candidate, count)))
        } else {
            let since = if prev.posture == Posture::None { prev.since_ms } else { t };
            (Posture::None, since, Some((candidate, count)))
        }
    };

    Ok(PostureState {
        posture,
        pinch_point: (posture == Posture::Pinch).then(|| frame.pinch_point()),
        grab_point: (posture == Posture::Grab).then(|| frame.grab_point()),
        since_ms,
        pending,
    })
}

/// True iff `state` has shown `posture` continuously for `required_ms`.
pub fn hold_timer(state: &PostureState, posture: Posture, required_ms: i64, now_ms: i64) -> bool {
    state.posture == posture && now_ms - state.since_ms >= required_ms
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BimanualRelation {
    pub palms_facing: bool,
    pub separation_m: f64,
    pub vertical_stacked: bool,
    pub indices_crossed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BimanualConfig {
    pub facing_dot: f64,
    pub stack_max_horizontal_m: f64,
    pub stack_min_vertical_m: f64,
    pub cross_max_tilt_deg: f64,
    pub cross_max_gap_m: f64,
    pub cross_min_angle_deg: f64,
    pub cross_max_angle_deg: f64,
    pub max_skew_ms: i64,
}

impl Default for BimanualConfig {
    fn default() -> Self {
        Self {
            facing_dot: -0.8,
            stack_max_horizontal_m: 0.12,
            stack_min_vertical_m: 0.05,
            cross_max_tilt_deg: 80.0,
            cross_max_gap_m: 0.02,
            cross_min_angle_deg: 20.0,
            cross_max_angle_deg: 90.0,
            max_skew_ms: 12,
        }
    }
}

pub fn bimanual_relation(
    left: &HandFrame,
    right: &HandFrame,
    config: &BimanualConfig,
) -> Result<BimanualRelation, HandError> {
    let skew = (left.t_ms - right.t_ms).abs();
    if skew > config.max_skew_ms {
        return Err(HandError::TimestampSkew(skew));
    }
    let offset = right.palm_pos - left.palm_pos;
    let horizontal = (offset.x * offset.x + offset.z * offset.z).sqrt();

    let (dl, dr) = (left.index_dir(), right.index_dir());
    let max_tilt = config.cross_max_tilt_deg.to_radians();
    let both_up = angle_between(&dl, &up()) <= max_tilt && angle_between(&dr, &up()) <= max_tilt;
    let gap = segment_distance(
        &left.palm_pos,
        &left.fingers[INDEX].tip,
        &right.palm_pos,
        &right.fingers[INDEX].tip,
    );
    let angle = angle_between(&dl, &dr).to_degrees();
    let indices_crossed = both_up
        && gap <= config.cross_max_gap_m
        && (config.cross_min_angle_deg..=config.cross_max_angle_deg).contains(&angle);

    Ok(BimanualRelation {
        palms_facing: left.palm_normal.dot(&right.palm_normal) <= config.facing_dot,
        separation_m: offset.norm(),
        vertical_stacked: horizontal <= config.stack_max_horizontal_m
            && offset.y.abs() >= config.stack_min_vertical_m,
        indices_crossed,
    })
}
