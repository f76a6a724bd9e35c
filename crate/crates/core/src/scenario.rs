//! Scripted hand-and-head traces.
//!
//! A [`Rig`] plays a user in the tracked room. It poses the head and hands
//! in world coordinates, converts every sample into room coordinates for
//! the viewpoint it expects to be in, and keeps its own expected copy of
//! every chart it manipulates. [`task_script`] drives a rig through the 31-task
//! evaluation series.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::chart::{ChartInstance, EventWindow, Mode};
use crate::dataset::Dataset;
use crate::engine::{Engine, EngineConfig, EngineError, EventKind, Viewpoint};
use crate::geom::{azimuth_about, azimuth_dir, wrap_pi, yaw_rotation, HeadPose, Vec3};
use crate::hand::{HandFrame, Side};
use crate::session::{generate_dataset, GenParams, LogRecord, TraceRecord};
use crate::synth::{HandBuilder, HandShape};

pub const FRAME_RATE_HZ: f64 = 90.0;

/// Timestamp of frame `k` on the 90 Hz grid.
pub fn frame_time(k: u64) -> i64 {
    (k as f64 * 1000.0 / FRAME_RATE_HZ).round() as i64
}

fn frames_for(ms: i64) -> u64 {
    ((ms as f64 * FRAME_RATE_HZ / 1000.0).round() as u64).max(1)
}

fn smoothstep(u: f64) -> f64 {
    u * u * (3.0 - 2.0 * u)
}

fn lerp(a: f64, b: f64, s: f64) -> f64 {
    a + (b - a) * s
}

/// Rotate a vector about world up so its azimuth grows by `theta`.
fn turn(v: Vec3, theta: f64) -> Vec3 {
    yaw_rotation(-theta) * v
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("dataset has no entity named {0:?}")]
    MissingEntity(String),
    #[error("dataset has no variable named {0:?}")]
    MissingVariable(String),
    #[error("dataset cannot support the script: {0}")]
    Unsatisfiable(String),
    #[error("script step is invalid: {0}")]
    Script(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub const OPEN: [f64; 5] = [0.0; 5];
pub const FIST: [f64; 5] = [0.3, 1.0, 1.0, 1.0, 1.0];
pub const POINT: [f64; 5] = [0.7, 0.0, 0.9, 0.9, 0.9];
const PINCH_OTHERS: f64 = 0.3;
const PINCH_OPEN_GAP: f64 = 0.07;
const PINCH_CLOSED_GAP: f64 = 0.012;

/// A hand in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandPose {
    pub side: Side,
    pub palm: Vec3,
    pub normal: Vec3,
    pub dir: Vec3,
    pub curls: [f64; 5],
    /// Thumb-to-index gap. `Some` gives the pinch shape and ignores `curls`.
    pub pinch_gap: Option<f64>,
}

impl HandPose {
    pub fn new(side: Side, normal: Vec3, dir: Vec3, curls: [f64; 5]) -> Self {
        Self {
            side,
            palm: Vec3::zeros(),
            normal,
            dir,
            curls,
            pinch_gap: None,
        }
    }

    pub fn pinching(mut self, gap: f64) -> Self {
        self.pinch_gap = Some(gap);
        self
    }

    pub fn at_palm(mut self, palm: Vec3) -> Self {
        self.palm = palm;
        self
    }

    pub fn with_curls(mut self, curls: [f64; 5]) -> Self {
        self.curls = curls;
        self
    }

    pub fn builder(&self) -> HandBuilder {
        let shape = match self.pinch_gap {
            Some(gap_m) => HandShape::Pinch {
                gap_m,
                others_curl: PINCH_OTHERS,
            },
            None => HandShape::Curls(self.curls),
        };
        HandBuilder::new(self.side, self.palm)
            .facing(self.normal, self.dir)
            .shape(shape)
    }

    pub fn frame(&self, t_ms: i64) -> HandFrame {
        self.builder().at(t_ms)
    }

    /// Place the palm so that `probe` of the built frame lands on `target`.
    pub fn placed(self, target: Vec3, probe: impl Fn(&HandFrame) -> Vec3) -> Self {
        let offset = probe(&self.at_palm(Vec3::zeros()).frame(0));
        self.at_palm(target - offset)
    }

    pub fn lerp(&self, to: &HandPose, s: f64) -> HandPose {
        let mix = |a: Vec3, b: Vec3| {
            let m = a + (b - a) * s;
            if m.norm() < 1e-9 {
                b
            } else {
                m.normalize()
            }
        };
        let mut curls = self.curls;
        for (c, t) in curls.iter_mut().zip(to.curls) {
            *c = lerp(*c, t, s);
        }
        HandPose {
            side: to.side,
            palm: self.palm + (to.palm - self.palm) * s,
            normal: mix(self.normal, to.normal),
            dir: mix(self.dir, to.dir),
            curls,
            pinch_gap: match (self.pinch_gap, to.pinch_gap) {
                (Some(a), Some(b)) => Some(lerp(a, b, s)),
                (a, b) => {
                    if s < 1.0 {
                        a
                    } else {
                        b
                    }
                }
            },
        }
    }

    /// Turn the whole hand about the vertical line through `center`.
    pub fn orbit(&self, center: &Vec3, theta: f64) -> HandPose {
        let rel = self.palm - center;
        HandPose {
            palm: center + turn(rel, theta),
            normal: turn(self.normal, theta),
            dir: turn(self.dir, theta),
            ..*self
        }
    }
}

/// Head and both hands, world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub head: Vec3,
    pub look: Vec3,
    /// Indexed by [`Side::index`].
    pub hands: [Option<HandPose>; 2],
}

impl Pose {
    pub fn lerp(&self, to: &Pose, s: f64) -> Pose {
        let mut hands = [None; 2];
        for (i, h) in hands.iter_mut().enumerate() {
            *h = match (self.hands[i], to.hands[i]) {
                (Some(a), Some(b)) => Some(a.lerp(&b, s)),
                (_, b) => b,
            };
        }
        Pose {
            head: self.head + (to.head - self.head) * s,
            look: self.look + (to.look - self.look) * s,
            hands,
        }
    }
}

/// Head standoff while working on a hand: behind it on the user's side and
/// a little above.
const FOLLOW_BACK_M: f64 = 0.35;
const FOLLOW_UP_M: f64 = 0.25;
/// Where slice grabs happen, measured out from the time axis.
const SLICE_REACH_M: f64 = 0.12;
/// Room-local head pose used when looking around for a travel target.
const ROOM_HEAD: [f64; 3] = [0.0, 1.6, 0.0];

/// A scripted user.
#[derive(Debug, Clone)]
pub struct Rig {
    config: EngineConfig,
    dataset: Arc<Dataset>,
    viewpoint: Viewpoint,
    pose: Pose,
    frame: u64,
    records: Vec<TraceRecord>,
    mark: Option<String>,
    charts: BTreeMap<String, ChartInstance>,
    paused: bool,
    /// Horizontal unit vector from the working chart towards the user.
    toward_user: Vec3,
}

impl Rig {
    pub fn new(dataset: Arc<Dataset>, config: &EngineConfig) -> Result<Self, ScenarioError> {
        let engine = Engine::new(dataset.clone(), config.clone())?;
        let init = engine.initial_state();
        let viewpoint = init.viewpoint;
        let head = viewpoint.point_to_world(Vec3::from(ROOM_HEAD));
        let look = head + viewpoint.forward() * 2.0;
        Ok(Self {
            config: config.clone(),
            dataset,
            viewpoint,
            pose: Pose {
                head,
                look,
                hands: [None; 2],
            },
            frame: 0,
            records: Vec::new(),
            mark: None,
            charts: init.charts,
            paused: false,
            toward_user: -viewpoint.forward(),
        })
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TraceRecord> {
        self.records
    }

    pub fn viewpoint(&self) -> Viewpoint {
        self.viewpoint
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    /// The rig's expectation of a chart after everything scripted so far.
    pub fn chart(&self, id: &str) -> &ChartInstance {
        &self.charts[id]
    }

    pub fn charts(&self) -> &BTreeMap<String, ChartInstance> {
        &self.charts
    }

    pub fn paused(&self) -> bool {
        self.paused
    }

    pub fn now_ms(&self) -> i64 {
        frame_time(self.frame)
    }

    /// The next emitted record starts a task segment labeled `label`.
    pub fn mark(&mut self, label: &str) {
        self.mark = Some(label.to_string());
    }

    fn to_room(&self, p: Vec3) -> Vec3 {
        yaw_rotation(-self.viewpoint.yaw_rad) * (p - self.viewpoint.position())
    }

    fn dir_to_room(&self, d: Vec3) -> Vec3 {
        yaw_rotation(-self.viewpoint.yaw_rad) * d
    }

    fn emit(&mut self) {
        let t_ms = frame_time(self.frame);
        let head = HeadPose::looking_at(self.to_room(self.pose.head), self.to_room(self.pose.look));
        let hand = |i: usize| {
            self.pose.hands[i].map(|h| {
                h.frame(t_ms)
                    .map(|p| self.to_room(p), |d| self.dir_to_room(d))
            })
        };
        let (left, right) = (hand(0), hand(1));
        self.records.push(TraceRecord {
            t_ms,
            head,
            left,
            right,
            mark: self.mark.take(),
        });
        self.frame += 1;
    }

    pub fn hold(&mut self, ms: i64) {
        for _ in 0..frames_for(ms) {
            self.emit();
        }
    }

    /// Emit frames along `path`, which maps eased progress in `(0, 1]` to a
    /// pose.
    pub fn sweep(&mut self, ms: i64, path: impl Fn(f64) -> Pose) {
        let n = frames_for(ms);
        for i in 1..=n {
            self.pose = path(smoothstep(i as f64 / n as f64));
            self.emit();
        }
    }

    pub fn glide(&mut self, ms: i64, to: Pose) {
        let from = self.pose;
        self.sweep(ms, |s| from.lerp(&to, s));
    }

    /// Replace the whole pose without emitting a frame.
    pub fn put(&mut self, pose: Pose) {
        self.pose = pose;
    }

    /// Emit `n` frames of the current pose.
    pub fn frames(&mut self, n: u64) {
        for _ in 0..n {
            self.emit();
        }
    }

    /// Horizontal unit vector from the last chart the rig stood at
    /// towards the user.
    pub fn toward_user(&self) -> Vec3 {
        self.toward_user
    }

    /// Change the hands without emitting a frame.
    pub fn set_hands(&mut self, hands: [Option<HandPose>; 2]) {
        self.pose.hands = hands;
    }

    // ---- geometry ----------------------------------------------------

    pub fn floor(&self, id: &str) -> Result<Vec3, ScenarioError> {
        let e = self
            .dataset
            .entity(id)
            .ok_or_else(|| ScenarioError::MissingEntity(id.to_string()))?;
        Ok(Vec3::new(e.x, 0.0, e.y))
    }

    fn axis(&self, id: &str, h: f64) -> Result<Vec3, ScenarioError> {
        Ok(self.floor(id)? + Vec3::new(0.0, self.config.base_height_m + h, 0.0))
    }

    fn center(&self, id: &str) -> Result<Vec3, ScenarioError> {
        self.axis(id, self.chart(id).length_m / 2.0)
    }

    /// The user's right when facing the working chart.
    fn right(&self) -> Vec3 {
        (-self.toward_user).cross(&Vec3::y())
    }

    fn follow(&self, work: Vec3) -> (Vec3, Vec3) {
        let head = work + self.toward_user * FOLLOW_BACK_M + Vec3::new(0.0, FOLLOW_UP_M, 0.0);
        (head, work)
    }

    fn solo(&self, hand: HandPose) -> Pose {
        let (head, look) = self.follow(hand.palm);
        let mut hands = [None; 2];
        hands[hand.side.index()] = Some(hand);
        Pose { head, look, hands }
    }

    fn empty(&self, head: Vec3, look: Vec3) -> Pose {
        Pose {
            head,
            look,
            hands: [None; 2],
        }
    }

    /// Standing in front of chart `id`, looking at its middle.
    pub fn stance(&mut self, id: &str) -> Result<(), ScenarioError> {
        let floor = self.floor(id)?;
        let user = self.viewpoint.position();
        let d = Vec3::new(user.x - floor.x, 0.0, user.z - floor.z);
        self.toward_user = if d.norm() > 1e-9 {
            d.normalize()
        } else {
            -self.viewpoint.forward()
        };
        let head = floor + self.toward_user * 0.75 + Vec3::new(0.0, 1.45, 0.0);
        let look = self.axis(id, 0.4)?;
        let to = self.empty(head, look);
        self.pose.hands = [None; 2];
        self.glide(500, to);
        Ok(())
    }

    /// Head moves to follow `hand`'s start pose, then the hand appears.
    fn bring(&mut self, hand: HandPose) {
        let target = self.solo(hand);
        let approach = self.empty(target.head, target.look);
        self.pose.hands = [None; 2];
        self.glide(300, approach);
        self.pose = target;
        self.hold(60);
    }

    fn withdraw(&mut self) {
        self.pose.hands = [None; 2];
        self.hold(120);
    }

    fn expect(&mut self, id: &str, next: Result<ChartInstance, crate::chart::ChartError>) -> Result<(), ScenarioError> {
        // The engine leaves the chart alone when an operation does not apply.
        if let Ok(next) = next {
            self.charts.insert(id.to_string(), next);
        }
        Ok(())
    }

    fn live(&self, id: &str) -> bool {
        !self.paused && self.chart(id).mode.is_active()
    }

    // ---- features ----------------------------------------------------

    /// Landing pose the engine computes for a travel towards `id`.
    fn landing(&self, id: &str, head: Vec3) -> Result<Viewpoint, ScenarioError> {
        let c = self.floor(id)?;
        let mut d = Vec3::new(head.x - c.x, 0.0, head.z - c.z);
        if d.norm() < 1e-9 {
            d = -self.viewpoint.forward();
        }
        let pos = c + d.normalize() * self.config.standoff_m;
        Ok(Viewpoint {
            pos: [pos.x, 0.0, pos.z],
            yaw_rad: (c.x - pos.x).atan2(c.z - pos.z),
        })
    }

    /// Switch the expected viewpoint, keeping the room-local pose.
    fn set_viewpoint(&mut self, vp: Viewpoint) {
        let old = self.viewpoint;
        let remap = |p: Vec3| vp.point_to_world(yaw_rotation(-old.yaw_rad) * (p - old.position()));
        let redir = |d: Vec3| vp.dir_to_world(yaw_rotation(-old.yaw_rad) * d);
        self.pose.head = remap(self.pose.head);
        self.pose.look = remap(self.pose.look);
        for h in self.pose.hands.iter_mut().flatten() {
            h.palm = remap(h.palm);
            h.normal = redir(h.normal);
            h.dir = redir(h.dir);
        }
        self.viewpoint = vp;
    }

    /// Look at a distant chart until it is outlined, point at it, then wait
    /// out the transit.
    pub fn travel(&mut self, id: &str) -> Result<(), ScenarioError> {
        let head = self.viewpoint.point_to_world(Vec3::from(ROOM_HEAD));
        let target = self.center(id)?;
        let look = self.empty(head, target);
        self.pose.hands = [None; 2];
        self.glide(400, look);
        self.hold(650);

        let aim = (target - head).normalize();
        let palm = head + aim * 0.35 - Vec3::new(0.0, 0.2, 0.0);
        let dir = (target - palm).normalize();
        let hand = HandPose::new(Side::Right, -Vec3::y(), dir, POINT).at_palm(palm);
        self.pose.hands = [None, Some(hand)];
        self.hold(300);
        let landing = self.landing(id, head)?;
        self.pose.hands = [None; 2];
        self.hold(self.config.transit_ms + 150);
        self.set_viewpoint(landing);
        Ok(())
    }

    /// Tap the mode toggle below the time axis with the index fingertip.
    pub fn touch_toggle(&mut self, id: &str) -> Result<(), ScenarioError> {
        let toggle = self.axis(id, -self.config.toggle_drop_m)?;
        let u = self.toward_user;
        let tip = |f: &HandFrame| f.fingers[crate::hand::INDEX].tip;
        let base = HandPose::new(Side::Right, -Vec3::y(), -u, POINT);
        let out = base.placed(toggle + u * 0.16, tip);
        let touch = base.placed(toggle, tip);
        self.bring(out);
        self.glide(300, self.solo(touch));
        self.hold(150);
        self.glide(300, self.solo(out));
        self.withdraw();
        if !self.paused {
            let c = self.chart(id);
            let next = c.with_mode(c.mode.next());
            self.expect(id, Ok(next))?;
        }
        Ok(())
    }

    /// Grab the time slice and drag it to `index`.
    pub fn drag_slice(&mut self, id: &str, index: usize) -> Result<(), ScenarioError> {
        let chart = self.chart(id).clone();
        let (lo, hi) = chart.visible_window;
        if index < lo || index > hi {
            return Err(ScenarioError::Script(format!("{id}: day {index} outside {:?}", chart.visible_window)));
        }
        let h0 = chart.event_to_height(chart.slice_index).map_err(|e| ScenarioError::Script(e.to_string()))?;
        let h1 = chart.event_to_height(index).map_err(|e| ScenarioError::Script(e.to_string()))?;
        let u = self.toward_user;
        // Palm faces the axis and the fingers wrap sideways, so closing and
        // opening the hand leaves the grab height unchanged.
        let base = HandPose::new(Side::Right, -u, self.right(), FIST);
        let grab = |h: f64| -> Result<HandPose, ScenarioError> {
            Ok(base.placed(self.axis(id, h)? + u * SLICE_REACH_M, HandFrame::grab_point))
        };
        let (g0, g1) = (grab(h0)?, grab(h1)?);
        let open0 = g0.with_curls(OPEN);
        self.bring(open0.at_palm(g0.palm + u * 0.1));
        self.glide(250, self.solo(open0));
        self.glide(150, self.solo(g0));
        self.hold(100);
        let travel_ms = (400.0 + (h1 - h0).abs() * 1500.0) as i64;
        self.glide(travel_ms, self.solo(g1));
        self.hold(250);
        self.glide(150, self.solo(g1.with_curls(OPEN)));
        self.glide(200, self.solo(g1.with_curls(OPEN).at_palm(g1.palm + u * 0.1)));
        self.withdraw();
        if self.live(id) {
            self.expect(id, chart.select_time_event(index))?;
        }
        Ok(())
    }

    fn ring_hand(&self, id: &str, az: f64, radius: f64, curls: [f64; 5]) -> Result<HandPose, ScenarioError> {
        let floor = self.floor(id)?;
        let radial = azimuth_dir(az);
        let target = floor + radial * radius + Vec3::new(0.0, self.config.base_height_m - self.config.widget_drop_m, 0.0);
        // Palm down, fingers towards the axis: curling moves the grab point
        // radially, never around the ring.
        let fist = HandPose::new(Side::Right, -Vec3::y(), -radial, FIST).placed(target, HandFrame::grab_point);
        Ok(fist.with_curls(curls))
    }

    /// Grab the rotation ring on the near side, turn it a quarter turn
    /// (`sign` picks the direction), stop, let go.
    pub fn rotate_quarter(&mut self, id: &str, sign: f64) -> Result<(), ScenarioError> {
        let floor = self.floor(id)?;
        let near = azimuth_about(&floor, &(floor + self.toward_user));
        let quarter = sign * PI / 2.0;
        let start_az = near - quarter / 2.0;
        let r = self.chart(id).radius_m + self.config.handle_offset_m;
        let fist = self.ring_hand(id, start_az, r, FIST)?;
        let open = fist.with_curls(OPEN);
        self.bring(open.at_palm(open.palm + azimuth_dir(start_az) * 0.1));
        self.glide(250, self.solo(open));
        self.glide(150, self.solo(fist));
        self.hold(100);
        let rig = self.clone();
        self.sweep(900, |s| rig.solo(fist.orbit(&floor, quarter * s)));
        self.hold(200);
        let end = fist.orbit(&floor, quarter);
        self.glide(150, self.solo(end.with_curls(OPEN)));
        let out = end.with_curls(OPEN);
        self.glide(200, self.solo(out.at_palm(out.palm + azimuth_dir(start_az + quarter) * 0.1)));
        self.withdraw();
        if self.live(id) && self.chart(id).mode == Mode::ActiveRotate {
            let c = self.chart(id);
            let next = c.with_yaw(c.yaw_rad + quarter);
            self.expect(id, Ok(next))?;
        }
        Ok(())
    }

    /// Pinch the time axis with both hands at the heights of days `a` and
    /// `b`, hold, release.
    pub fn pinch_range(&mut self, id: &str, a: usize, b: usize) -> Result<(), ScenarioError> {
        let chart = self.chart(id).clone();
        let ha = chart.event_to_height(a).map_err(|e| ScenarioError::Script(e.to_string()))?;
        let hb = chart.event_to_height(b).map_err(|e| ScenarioError::Script(e.to_string()))?;
        let u = self.toward_user;
        let r = self.right();
        let pinch = |side: Side, at: Vec3| {
            HandPose::new(side, -Vec3::y(), -u, OPEN)
                .pinching(PINCH_CLOSED_GAP)
                .placed(at, HandFrame::pinch_point)
        };
        let l = pinch(Side::Left, self.axis(id, ha)? + u * 0.1 - r * 0.08);
        let rr = pinch(Side::Right, self.axis(id, hb)? + u * 0.1 + r * 0.08);
        let mid = (l.palm + rr.palm) / 2.0;
        let head = mid + u * 0.45 + Vec3::new(0.0, 0.05, 0.0);
        let closed = Pose {
            head,
            look: mid,
            hands: [Some(l), Some(rr)],
        };
        let open = Pose {
            hands: [
                Some(l.pinching(PINCH_OPEN_GAP)),
                Some(rr.pinching(PINCH_OPEN_GAP)),
            ],
            ..closed
        };
        self.pose.hands = [None; 2];
        self.glide(300, self.empty(head, mid));
        self.pose = open;
        self.hold(100);
        self.glide(200, closed);
        self.hold(250);
        self.glide(150, open);
        self.withdraw();
        if self.live(id) {
            self.expect(id, chart.select_time_range(a, b))?;
        }
        Ok(())
    }

    /// Palms facing each other, one above the other; move them apart to
    /// zoom in or together to zoom out.
    pub fn zoom(&mut self, id: &str, zoom_in: bool) -> Result<(), ScenarioError> {
        let u = self.toward_user;
        let mid = self.floor(id)? + u * 0.45 + Vec3::new(0.0, 1.25, 0.0);
        let head = mid + u * 0.45;
        let (near, far) = (0.10, 0.36);
        let (s0, s1) = if zoom_in { (near, far) } else { (far, near) };
        let at = |sep: f64| Pose {
            head,
            look: mid,
            hands: [
                Some(HandPose::new(Side::Left, Vec3::y(), -u, OPEN).at_palm(mid - Vec3::new(0.0, sep / 2.0, 0.0))),
                Some(HandPose::new(Side::Right, -Vec3::y(), -u, OPEN).at_palm(mid + Vec3::new(0.0, sep / 2.0, 0.0))),
            ],
        };
        self.pose.hands = [None; 2];
        self.glide(300, self.empty(head, mid));
        self.pose = at(s0);
        self.hold(150);
        self.glide(500, at(s1));
        self.hold(200);
        self.withdraw();
        if self.live(id) {
            let c = self.chart(id).clone();
            self.expect(id, if zoom_in { c.zoom_in() } else { c.zoom_out() })?;
        }
        Ok(())
    }

    fn sphere_az(&self, id: &str, variable: usize) -> Result<f64, ScenarioError> {
        let c = self.chart(id);
        let angle = c
            .axis_angle(variable)
            .ok_or_else(|| ScenarioError::Script(format!("{id}: variable {variable} not on the chart")))?;
        Ok(c.yaw_rad + angle)
    }

    fn grab_sphere(&mut self, id: &str, variable: usize) -> Result<(HandPose, f64), ScenarioError> {
        let az = self.sphere_az(id, variable)?;
        let fist = self.ring_hand(id, az, self.chart(id).radius_m, FIST)?;
        let open = fist.with_curls(OPEN);
        self.bring(open.at_palm(open.palm + azimuth_dir(az) * 0.1));
        self.glide(250, self.solo(open));
        self.glide(150, self.solo(fist));
        self.hold(100);
        Ok((fist, az))
    }

    fn let_go(&mut self, hand: HandPose, out: Vec3) {
        self.hold(200);
        self.glide(150, self.solo(hand.with_curls(OPEN)));
        let open = hand.with_curls(OPEN);
        self.glide(200, self.solo(open.at_palm(open.palm + out * 0.1)));
        self.withdraw();
    }

    /// Drag a variable's axis sphere around the chart into arrangement
    /// slot `slot`.
    pub fn move_axis(&mut self, id: &str, variable: usize, slot: usize) -> Result<(), ScenarioError> {
        let chart = self.chart(id).clone();
        let n = chart.arrangement.len();
        let floor = self.floor(id)?;
        let (fist, az) = self.grab_sphere(id, variable)?;
        let target_az = chart.yaw_rad + crate::chart::slot_angle(slot, n);
        let delta = wrap_pi(target_az - az);
        let rig = self.clone();
        let ms = (500.0 + delta.abs() / PI * 600.0) as i64;
        self.sweep(ms, |s| rig.solo(fist.orbit(&floor, delta * s)));
        let end = fist.orbit(&floor, delta);
        self.let_go(end, azimuth_dir(target_az));
        if self.live(id) {
            self.expect(id, chart.apply_arrangement(variable, crate::chart::slot_angle(slot, n)))?;
        }
        Ok(())
    }

    /// Pull a variable's axis sphere well away from the chart and let go.
    pub fn remove_axis(&mut self, id: &str, variable: usize) -> Result<(), ScenarioError> {
        let chart = self.chart(id).clone();
        let (fist, az) = self.grab_sphere(id, variable)?;
        let out = azimuth_dir(az);
        let end = fist.at_palm(fist.palm + out * 0.45);
        self.glide(600, self.solo(end));
        self.let_go(end, out);
        if self.live(id) {
            self.expect(id, chart.filter_variable(variable))?;
        }
        Ok(())
    }

    /// Both index fingers up, held, then crossed.
    pub fn cross_fingers(&mut self, id: &str) -> Result<(), ScenarioError> {
        let u = self.toward_user;
        let r = self.right();
        let center = self.floor(id)? + u * 0.45 + Vec3::new(0.0, 1.2, 0.0);
        let head = center + u * 0.45 + Vec3::new(0.0, 0.1, 0.0);
        let tilt = 25f64.to_radians();
        let up = Vec3::y();
        let at = |spread: f64| Pose {
            head,
            look: center,
            hands: [
                Some(
                    HandPose::new(Side::Left, -u, up * tilt.cos() + r * tilt.sin(), POINT)
                        .at_palm(center - r * spread),
                ),
                Some(
                    HandPose::new(Side::Right, -u, up * tilt.cos() - r * tilt.sin(), POINT)
                        .at_palm(center + r * spread),
                ),
            ],
        };
        self.pose.hands = [None; 2];
        self.glide(300, self.empty(head, center));
        self.pose = at(0.15);
        self.hold(350);
        self.glide(300, at(0.03));
        self.hold(150);
        self.withdraw();
        self.hold(150);
        if self.live(id) {
            let c = self.chart(id).clone();
            self.expect(id, c.reset())?;
        }
        Ok(())
    }

    /// Both open palms pushed towards the scene and held still.
    pub fn stop_sign(&mut self, id: &str) -> Result<(), ScenarioError> {
        let u = self.toward_user;
        let r = self.right();
        let center = self.floor(id)? + u * 0.45 + Vec3::new(0.0, 1.25, 0.0);
        let head = center + u * 0.45 + Vec3::new(0.0, 0.1, 0.0);
        let pose = Pose {
            head,
            look: center,
            hands: [
                Some(HandPose::new(Side::Left, -u, Vec3::y(), OPEN).at_palm(center - r * 0.15)),
                Some(HandPose::new(Side::Right, -u, Vec3::y(), OPEN).at_palm(center + r * 0.15)),
            ],
        };
        self.pose.hands = [None; 2];
        self.glide(300, self.empty(head, center));
        self.pose = pose;
        self.hold(self.config.pause_hold_ms + 300);
        self.withdraw();
        self.paused = !self.paused;
        Ok(())
    }

    /// Turn the rotation ring a quarter turn at constant speed and let go
    /// while still moving. The rig does not model the spin that follows.
    pub fn flick(&mut self, id: &str, sign: f64, ms: i64) -> Result<(), ScenarioError> {
        let floor = self.floor(id)?;
        let near = azimuth_about(&floor, &(floor + self.toward_user));
        let quarter = sign * PI / 2.0;
        let start_az = near - quarter / 2.0;
        let r = self.chart(id).radius_m + self.config.handle_offset_m;
        let fist = self.ring_hand(id, start_az, r, FIST)?;
        let open = fist.with_curls(OPEN);
        self.bring(open.at_palm(open.palm + azimuth_dir(start_az) * 0.1));
        self.glide(250, self.solo(open));
        self.glide(150, self.solo(fist));
        self.hold(100);
        let n = frames_for(ms);
        for i in 1..=n {
            self.pose = self.solo(fist.orbit(&floor, quarter * i as f64 / n as f64));
            self.emit();
        }
        let end = fist.orbit(&floor, quarter);
        self.pose = self.solo(end.with_curls(OPEN));
        self.emit();
        self.withdraw();
        if self.live(id) && self.chart(id).mode == Mode::ActiveRotate {
            let c = self.chart(id);
            let next = c.with_yaw(c.yaw_rad + quarter);
            self.expect(id, Ok(next))?;
        }
        Ok(())
    }

    /// Drag the time slice to `index` with the fingers tilted `tilt_deg`
    /// below horizontal, hold still, then open the hand over `release_ms`
    /// without moving the palm. Opening drags the grab point along the
    /// fingers, so the slice can creep away from `index` during release.
    /// The rig expects the slice to stay at `index`.
    pub fn sloppy_release(&mut self, id: &str, index: usize, tilt_deg: f64, release_ms: i64) -> Result<(), ScenarioError> {
        let chart = self.chart(id).clone();
        let h0 = chart.event_to_height(chart.slice_index).map_err(|e| ScenarioError::Script(e.to_string()))?;
        let h1 = chart.event_to_height(index).map_err(|e| ScenarioError::Script(e.to_string()))?;
        let u = self.toward_user;
        let tilt = tilt_deg.to_radians();
        let dir = self.right() * tilt.cos() - Vec3::y() * tilt.sin();
        let base = HandPose::new(Side::Right, -u, dir, FIST);
        let grab = |h: f64| -> Result<HandPose, ScenarioError> {
            Ok(base.placed(self.axis(id, h)? + u * SLICE_REACH_M, HandFrame::grab_point))
        };
        let (g0, g1) = (grab(h0)?, grab(h1)?);
        // Close the hand with the grab point pinned to the slice.
        let target0 = self.axis(id, h0)? + u * SLICE_REACH_M;
        let open0 = g0.with_curls(OPEN).placed(target0, HandFrame::grab_point);
        self.bring(open0.at_palm(open0.palm + u * 0.1));
        self.glide(250, self.solo(open0));
        let live = self.live(id);
        for i in 1..=frames_for(150) {
            let s = smoothstep(i as f64 / frames_for(150) as f64);
            let h = open0.lerp(&g0, s).placed(target0, HandFrame::grab_point);
            self.pose = self.solo(h);
            self.emit();
        }
        self.hold(100);
        self.glide(500, self.solo(g1));
        self.hold(300);
        let n = frames_for(release_ms);
        for i in 1..=n {
            let s = i as f64 / n as f64;
            self.pose = self.solo(g1.lerp(&g1.with_curls(OPEN), s));
            self.emit();
        }
        self.hold(100);
        self.glide(200, self.solo(g1.with_curls(OPEN).at_palm(g1.palm + u * 0.1)));
        self.withdraw();
        if live {
            self.expect(id, chart.select_time_event(index))?;
        }
        Ok(())
    }

    /// Offset of the hovering palm from the mode toggle in
    /// [`Rig::point_by_toggle`].
    pub const HOVER: [f64; 3] = [0.12, 0.1, 0.1];

    /// Stand beside chart `near` with the left hand open and hovering by
    /// its mode toggle, gaze at chart `far` and point at it for `frames`
    /// frames. `hover` places the palm relative to the toggle: sideways
    /// away from the head, towards `far`, and up.
    pub fn point_by_toggle(&mut self, near: &str, far: &str, frames: u64, hover: [f64; 3]) -> Result<(), ScenarioError> {
        let a = self.floor(near)?;
        let target = self.center(far)?;
        let b = self.floor(far)?;
        let f = Vec3::new(b.x - a.x, 0.0, b.z - a.z).normalize();
        let w = f.cross(&Vec3::y());
        let head = a + w * 0.55 - f * 0.1 + Vec3::new(0.0, 1.0, 0.0);
        let toggle = self.axis(near, -self.config.toggle_drop_m)?;
        let hover = HandPose::new(Side::Left, -f, Vec3::y(), OPEN).at_palm(toggle + w * hover[0] + f * hover[1] + Vec3::new(0.0, hover[2], 0.0));
        let aim = (target - head).normalize();
        let palm = head + aim * 0.35 + w * 0.05 - Vec3::new(0.0, 0.1, 0.0);
        let pointer = HandPose::new(Side::Right, -Vec3::y(), (target - palm).normalize(), POINT).at_palm(palm);
        self.pose.hands = [None; 2];
        self.glide(400, self.empty(head, target));
        self.pose.hands = [Some(hover), Some(pointer)];
        for _ in 0..frames {
            self.emit();
        }
        Ok(())
    }

    /// Drop the left hand and keep pointing.
    pub fn drop_left(&mut self, ms: i64) {
        self.pose.hands[0] = None;
        self.hold(ms);
    }

    /// The stacked-palm zoom posture seen from above, the head `back_m`
    /// towards the user. Seen this way the upper hand hides the lower one
    /// until the palms are far enough apart. The rig does not model
    /// whether the zoom fires.
    pub fn zoom_overhead(&mut self, id: &str, back_m: f64, from_sep: f64, to_sep: f64) -> Result<(), ScenarioError> {
        let u = self.toward_user;
        let mid = self.floor(id)? + u * 0.45 + Vec3::new(0.0, 1.0, 0.0);
        let head = mid + Vec3::new(0.0, 0.45, 0.0) + u * back_m;
        let at = |sep: f64| Pose {
            head,
            look: mid,
            hands: [
                Some(HandPose::new(Side::Left, Vec3::y(), -u, OPEN).at_palm(mid - Vec3::new(0.0, sep / 2.0, 0.0))),
                Some(HandPose::new(Side::Right, -Vec3::y(), -u, OPEN).at_palm(mid + Vec3::new(0.0, sep / 2.0, 0.0))),
            ],
        };
        self.pose.hands = [None; 2];
        self.glide(300, self.empty(head, mid));
        self.pose = at(from_sep);
        self.hold(150);
        let ms = (400.0 + (to_sep - from_sep).abs() * 2000.0) as i64;
        self.glide(ms, at(to_sep));
        self.hold(200);
        self.withdraw();
        Ok(())
    }

    /// Stand still, hands down.
    pub fn idle(&mut self, ms: i64) {
        self.pose.hands = [None; 2];
        self.hold(ms);
    }
}

// ---- the evaluation task series ----------------------------------------

/// Seed of the dataset the golden 31-task trace is scripted against.
pub const GOLDEN_SEED: u64 = 6;

pub fn golden_dataset() -> Dataset {
    generate_dataset(&GenParams {
        seed: GOLDEN_SEED,
        ..GenParams::default()
    })
    .expect("default parameters are valid")
}

/// Task ids with the feature each exercises.
pub const TASKS: [(&str, &str); 31] = [
    ("T01", "Travel"),
    ("T02", "Travel"),
    ("T03", "Mode Toggle"),
    ("T04", "Time Event Selection"),
    ("T05", "Rotation"),
    ("T06", "none"),
    ("T07", "none"),
    ("T08", "Time Range Selection"),
    ("T09", "Zoom in"),
    ("T10", "Time Range Selection"),
    ("T11", "Zoom in"),
    ("T12", "Zoom out"),
    ("T13", "Mode Toggle"),
    ("T14", "Time Event Selection"),
    ("T15", "Data Variable Sort"),
    ("T16", "Zoom out"),
    ("T17", "Reset"),
    ("T18", "Mode Toggle"),
    ("T19", "Travel"),
    ("T20", "Mode Toggle"),
    ("T21", "Mode Toggle"),
    ("T22", "Time Event Selection"),
    ("T23", "Data Variable Filter"),
    ("T24", "Reset"),
    ("T25", "Pause"),
    ("T26", "none"),
    ("T27", "Resume"),
    ("T28", "Time Event Selection"),
    ("T29", "Time Event Selection"),
    ("T30", "Data Variable Sort"),
    ("T31", "Mode Toggle"),
];

/// Label of the marker closing the last task segment.
pub const END_MARK: &str = "end";

/// Event kinds a task's log segment shows, with consecutive repeats
/// collapsed.
pub fn task_expected(task: &str) -> &'static [EventKind] {
    use EventKind::*;
    match task {
        "T01" | "T02" | "T19" => &[TravelArmed, TravelStarted, TravelCompleted],
        "T03" | "T13" | "T18" | "T20" | "T21" | "T31" => &[ModeChanged],
        "T04" | "T14" | "T22" | "T28" | "T29" => &[TimeEventSelected],
        "T05" => &[RotationChanged],
        "T08" | "T10" => &[TimeRangePreview, TimeRangeApplied],
        "T09" | "T11" => &[ZoomedIn],
        "T12" | "T16" => &[ZoomedOut],
        "T15" | "T30" => &[VariableSorted],
        "T23" => &[VariableFiltered],
        "T17" | "T24" => &[ChartReset],
        "T25" => &[Paused],
        "T27" => &[Resumed],
        _ => &[],
    }
}

/// Data-dependent choices the script makes.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskPlan {
    pub italy: String,
    pub sweden: String,
    /// Three Berries peaks.
    pub t08_range: EventWindow,
    /// One Oranges valley and one Grapes valley.
    pub t10_range: EventWindow,
    pub t14_day: usize,
    /// `(variable, slot)` of the single move that sorts ascending.
    pub t15_move: (usize, usize),
    /// Variables below 20 at day 56, in removal order.
    pub t23_removed: Vec<usize>,
    pub t26_attempt: usize,
    pub t28_day: usize,
    pub t30_move: (usize, usize),
}

pub const T04_DAY: usize = 120;
pub const T22_DAY: usize = 56;
pub const T23_THRESHOLD: f64 = 20.0;
pub const T29_DAY: usize = 98;

fn entity_id(ds: &Dataset, name: &str) -> Result<String, ScenarioError> {
    ds.entities
        .iter()
        .find(|e| e.name == name)
        .map(|e| e.id.clone())
        .ok_or_else(|| ScenarioError::MissingEntity(name.to_string()))
}

fn variable(ds: &Dataset, name: &str) -> Result<usize, ScenarioError> {
    ds.variables
        .iter()
        .position(|v| v == name)
        .ok_or_else(|| ScenarioError::MissingVariable(name.to_string()))
}

fn series<'a>(ds: &'a Dataset, id: &str, var: usize) -> &'a [f64] {
    &ds.entity(id).expect("id from the dataset").series[var]
}

/// Centered moving average with half-width `k`.
fn smooth(s: &[f64], k: usize) -> Vec<f64> {
    (0..s.len())
        .map(|i| {
            let lo = i.saturating_sub(k);
            let hi = (i + k).min(s.len() - 1);
            s[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Peaks (or valleys) of the smoothed series: indices that are the extreme
/// of their `±12` neighbourhood and lie on the far side of the series
/// midrange.
fn extremes(s: &[f64], peaks: bool) -> Vec<usize> {
    let sm = smooth(s, 4);
    let (min, max) = sm
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mid = (min + max) / 2.0;
    let better = |a: f64, b: f64| if peaks { a > b } else { a < b };
    let mut out: Vec<usize> = Vec::new();
    for i in 0..sm.len() {
        let lo = i.saturating_sub(12);
        let hi = (i + 12).min(sm.len() - 1);
        let extreme = (lo..=hi).all(|j| j == i || !better(sm[j], sm[i]));
        if extreme && better(sm[i], mid) && out.last().is_none_or(|&p| i > p + 12) {
            out.push(i);
        }
    }
    out
}

/// The single `(variable, slot)` move that turns `arrangement` into its
/// ordering by `value` (ascending or descending), if exactly one move is
/// needed.
pub fn one_move_sort(arrangement: &[usize], value: impl Fn(usize) -> f64, ascending: bool) -> Option<(usize, usize)> {
    let mut target = arrangement.to_vec();
    target.sort_by(|&a, &b| {
        let o = value(a).total_cmp(&value(b));
        if ascending {
            o
        } else {
            o.reverse()
        }
    });
    if target == arrangement {
        return None;
    }
    for &var in arrangement {
        for slot in 0..arrangement.len() {
            let mut cand: Vec<usize> = arrangement.iter().copied().filter(|&v| v != var).collect();
            cand.insert(slot, var);
            if cand == target {
                return Some((var, slot));
            }
        }
    }
    None
}

fn clamp_window(w: EventWindow, (a, b): (i64, i64)) -> EventWindow {
    let a = a.clamp(w.0 as i64, w.1 as i64) as usize;
    let b = b.clamp(w.0 as i64, w.1 as i64) as usize;
    (a, b)
}

pub fn plan_tasks(ds: &Dataset) -> Result<TaskPlan, ScenarioError> {
    let unsat = |m: &str| ScenarioError::Unsatisfiable(m.to_string());
    let italy = entity_id(ds, "Italy")?;
    let sweden = entity_id(ds, "Sweden")?;
    let berries = variable(ds, "Berries")?;
    let oranges = variable(ds, "Oranges")?;
    let grapes = variable(ds, "Grapes")?;
    let full = (0, ds.event_count() - 1);
    let n_vars = ds.variable_count();
    let identity: Vec<usize> = (0..n_vars).collect();

    let peaks = extremes(series(ds, &sweden, berries), true);
    if peaks.len() < 3 {
        return Err(unsat("fewer than three Berries peaks"));
    }
    let t08_range = clamp_window(full, (peaks[0] as i64 - 4, peaks[2] as i64 + 4));
    if t08_range == full {
        return Err(unsat("Berries peaks span the whole series"));
    }
    let inside = |w: EventWindow, i: &usize| *i >= w.0 + 2 && *i + 2 <= w.1;
    let o = extremes(series(ds, &sweden, oranges), false)
        .into_iter()
        .find(|i| inside(t08_range, i))
        .ok_or_else(|| unsat("no Oranges valley in the T08 range"))?;
    let g = extremes(series(ds, &sweden, grapes), false)
        .into_iter()
        .find(|i| inside(t08_range, i))
        .ok_or_else(|| unsat("no Grapes valley in the T08 range"))?;
    let t10_range = clamp_window(t08_range, (o.min(g) as i64 - 3, o.max(g) as i64 + 3));
    if t10_range == t08_range || t10_range.0 == t10_range.1 {
        return Err(unsat("T10 range equals the zoomed window"));
    }

    // Slice position when T14 starts: day 120 clamped by the two zooms.
    let clamp = |i: usize, w: EventWindow| i.clamp(w.0, w.1);
    let slice_t14 = clamp(clamp(T04_DAY, t08_range), t10_range);
    let sweden_e = ds.entity(&sweden).expect("found above");
    let mid = (t08_range.0 + t08_range.1) / 2;
    let mut days: Vec<usize> = (t08_range.0..=t08_range.1).filter(|&d| d != slice_t14).collect();
    days.sort_by_key(|&d| (d as i64 - mid as i64).abs());
    let (t14_day, t15_move) = days
        .into_iter()
        .find_map(|d| one_move_sort(&identity, |v| sweden_e.series[v][d], true).map(|m| (d, m)))
        .ok_or_else(|| unsat("no day in the T08 range sorts ascending in one move"))?;

    let italy_e = ds.entity(&italy).expect("found above");
    if T22_DAY > full.1 || T29_DAY > full.1 || T04_DAY > full.1 {
        return Err(unsat("too few events"));
    }
    let t23_removed: Vec<usize> = identity
        .iter()
        .copied()
        .filter(|&v| italy_e.series[v][T22_DAY] < T23_THRESHOLD)
        .collect();
    if t23_removed.is_empty() || t23_removed.len() >= n_vars {
        return Err(unsat("T23 would remove no variable or all of them"));
    }
    let t26_attempt = if T22_DAY + 30 <= full.1 { T22_DAY + 30 } else { T22_DAY - 30 };
    let t28_day = (0..=full.1)
        .filter(|&d| d != T22_DAY && d != T29_DAY)
        .max_by(|&a, &b| italy_e.series[grapes][a].total_cmp(&italy_e.series[grapes][b]))
        .expect("at least one candidate day");
    let t30_move = one_move_sort(&identity, |v| italy_e.series[v][T29_DAY], false)
        .ok_or_else(|| unsat("day 98 does not sort descending in one move"))?;

    Ok(TaskPlan {
        italy,
        sweden,
        t08_range,
        t10_range,
        t14_day,
        t15_move,
        t23_removed,
        t26_attempt,
        t28_day,
        t30_move,
    })
}

/// The scripted trace for tasks T01 to T31 and the rig's expectations at
/// the end of it.
#[derive(Debug, Clone)]
pub struct TaskScript {
    pub plan: TaskPlan,
    pub records: Vec<TraceRecord>,
    pub expected_charts: BTreeMap<String, ChartInstance>,
    pub expected_viewpoint: Viewpoint,
}

pub fn task_script(dataset: Arc<Dataset>, config: &EngineConfig) -> Result<TaskScript, ScenarioError> {
    let plan = plan_tasks(&dataset)?;
    let mut rig = Rig::new(dataset, config)?;
    let (it, sw) = (plan.italy.as_str(), plan.sweden.as_str());

    rig.idle(300);
    rig.mark("T01");
    rig.travel(it)?;
    rig.mark("T02");
    rig.travel(sw)?;
    rig.stance(sw)?;
    rig.mark("T03");
    rig.touch_toggle(sw)?;
    rig.mark("T04");
    rig.drag_slice(sw, T04_DAY)?;
    rig.mark("T05");
    for _ in 0..4 {
        rig.rotate_quarter(sw, 1.0)?;
    }
    rig.stance(sw)?;
    rig.mark("T06");
    rig.idle(1500);
    rig.mark("T07");
    rig.idle(1500);
    rig.mark("T08");
    rig.pinch_range(sw, plan.t08_range.0, plan.t08_range.1)?;
    rig.mark("T09");
    rig.zoom(sw, true)?;
    rig.mark("T10");
    rig.pinch_range(sw, plan.t10_range.0, plan.t10_range.1)?;
    rig.mark("T11");
    rig.zoom(sw, true)?;
    rig.mark("T12");
    rig.zoom(sw, false)?;
    rig.mark("T13");
    rig.touch_toggle(sw)?;
    rig.mark("T14");
    rig.drag_slice(sw, plan.t14_day)?;
    rig.mark("T15");
    rig.move_axis(sw, plan.t15_move.0, plan.t15_move.1)?;
    rig.mark("T16");
    rig.zoom(sw, false)?;
    rig.mark("T17");
    rig.cross_fingers(sw)?;
    rig.mark("T18");
    rig.touch_toggle(sw)?;
    rig.mark("T19");
    rig.travel(it)?;
    rig.stance(it)?;
    rig.mark("T20");
    rig.touch_toggle(it)?;
    rig.mark("T21");
    rig.touch_toggle(it)?;
    rig.mark("T22");
    rig.drag_slice(it, T22_DAY)?;
    rig.mark("T23");
    for &v in &plan.t23_removed {
        rig.remove_axis(it, v)?;
    }
    rig.mark("T24");
    rig.cross_fingers(it)?;
    rig.mark("T25");
    rig.stop_sign(it)?;
    rig.mark("T26");
    rig.drag_slice(it, plan.t26_attempt)?;
    rig.mark("T27");
    rig.stop_sign(it)?;
    rig.mark("T28");
    rig.drag_slice(it, plan.t28_day)?;
    rig.mark("T29");
    rig.drag_slice(it, T29_DAY)?;
    rig.mark("T30");
    rig.move_axis(it, plan.t30_move.0, plan.t30_move.1)?;
    rig.mark("T31");
    rig.touch_toggle(it)?;
    rig.stance(it)?;
    rig.mark(END_MARK);
    rig.idle(500);

    Ok(TaskScript {
        plan,
        expected_charts: rig.charts().clone(),
        expected_viewpoint: rig.viewpoint(),
        records: rig.into_records(),
    })
}

/// Event names per marker label, markers excluded, in log order.
pub fn segments(log: &[LogRecord]) -> Vec<(String, Vec<&LogRecord>)> {
    let mut out: Vec<(String, Vec<&LogRecord>)> = Vec::new();
    for r in log {
        if r.is_marker() {
            let label = r.payload.get("label").and_then(|v| v.as_str()).unwrap_or_default();
            out.push((label.to_string(), Vec::new()));
        } else if let Some((_, seg)) = out.last_mut() {
            seg.push(r);
        }
    }
    out
}

/// Event names with consecutive repeats collapsed.
pub fn collapsed(seg: &[&LogRecord]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in seg {
        if out.last() != Some(&r.event) {
            out.push(r.event.clone());
        }
    }
    out
}

/// Every way `log` departs from what the T01 to T31 script expects.
pub fn task_mismatches(log: &[LogRecord], plan: &TaskPlan) -> Vec<String> {
    let mut bad = Vec::new();
    let segs = segments(log);
    let labels: Vec<&str> = segs.iter().map(|(l, _)| l.as_str()).collect();
    let want: Vec<&str> = TASKS.iter().map(|(t, _)| *t).chain([END_MARK]).collect();
    if labels != want {
        bad.push(format!("marker labels {labels:?}"));
        return bad;
    }
    for (label, seg) in &segs {
        let got = collapsed(seg);
        let expected: Vec<&str> = task_expected(label).iter().map(|k| k.name()).collect();
        if got != expected {
            bad.push(format!("{label}: got {got:?}, want {expected:?}"));
        }
    }
    for (label, seg) in &segs {
        let target = match label.as_str() {
            "T01" => &plan.italy,
            l if l < "T19" => &plan.sweden,
            _ => &plan.italy,
        };
        for r in seg {
            if let Some(id) = &r.chart_id {
                if id != target {
                    bad.push(format!("{label}: {} on {id}, want {target}", r.event));
                }
            }
        }
    }
    let count = |task: &str, kind: EventKind| {
        segs.iter()
            .filter(|(l, _)| l == task)
            .flat_map(|(_, s)| s.iter())
            .filter(|r| r.event == kind.name())
            .count()
    };
    let filtered = count("T23", EventKind::VariableFiltered);
    if filtered != plan.t23_removed.len() {
        bad.push(format!("T23: {filtered} filters, want {}", plan.t23_removed.len()));
    }
    for task in ["T15", "T30"] {
        let n = count(task, EventKind::VariableSorted);
        if n != 1 {
            bad.push(format!("{task}: {n} sorts, want 1"));
        }
    }
    let armed = log.iter().filter(|r| r.event == EventKind::TravelArmed.name()).count();
    if armed != 3 {
        bad.push(format!("{armed} TravelArmed events, want 3"));
    }
    bad
}
