//! The interaction state machine.
//!
//! [`Engine::step`] consumes one observed sample (head pose plus both hands
//! as delivered by the tracker, in room coordinates) and advances the
//! world. Handlers run in a fixed order: ongoing transit and spins, pause,
//! continuation of gestures already in progress, then at most one new
//! feature initiation (reset, zoom, range, grasp, mode toggle, travel).
//! The step is a pure function of the previous state and the sample.

mod event;
mod features;
pub mod layout;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chart::{ChartConfig, ChartInstance, EventWindow, Mode};
use crate::dataset::Dataset;
use crate::geom::{yaw_rotation, HeadPose, Vec3};
use crate::hand::{BimanualConfig, HandError, HandFrame, PostureConfig, PostureState, Side};
use crate::tracker::ObservedHand;

pub use event::{
    fixed_task_tag, mode_change_tag, EventKind, Feature, InteractionEvent, TaskTag, CATALOG,
};
pub use layout::ChartPlacement;

/// Every tunable of the engine. Distances in meters, times in
/// milliseconds, angles in degrees unless the name says otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub posture: PostureConfig,
    pub bimanual: BimanualConfig,
    pub chart: ChartConfig,
    pub gaze_dwell_ms: i64,
    pub faraway_min_m: f64,
    pub point_tol_deg: f64,
    pub transit_ms: i64,
    pub standoff_m: f64,
    pub suppress_radius_m: f64,
    pub widget_r_m: f64,
    pub grasp_capture_m: f64,
    pub snap_guard: bool,
    pub guard_window_ms: i64,
    pub palm_still_m: f64,
    pub flick_min_deg_s: f64,
    pub flick_window_ms: i64,
    pub spin_stop_deg_s: f64,
    pub lambda_per_s: f64,
    pub rotation_event_deg: f64,
    pub zoom_stretch_m: f64,
    pub zoom_clap_m: f64,
    pub reset_arm_ms: i64,
    pub act_radius_m: f64,
    pub filter_snap: f64,
    pub pause_hold_ms: i64,
    pub pause_still_m: f64,
    /// Height of the bottom of the time axis above the floor.
    pub base_height_m: f64,
    /// Mode toggle sphere sits this far below the axis bottom.
    pub toggle_drop_m: f64,
    /// Axis spheres and the rotation ring hang this far below the axis.
    pub widget_drop_m: f64,
    /// Rotation ring radius beyond the chart radius.
    pub handle_offset_m: f64,
    /// Distance east of the easternmost chart for the starting viewpoint.
    pub start_margin_m: f64,
    pub play_area_m: [f64; 2],
    /// Emit `Rejected` events for recognized gestures that could not apply.
    pub debug: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            posture: PostureConfig::default(),
            bimanual: BimanualConfig::default(),
            chart: ChartConfig::default(),
            gaze_dwell_ms: 500,
            faraway_min_m: 2.0,
            point_tol_deg: 15.0,
            transit_ms: 1000,
            standoff_m: 1.2,
            suppress_radius_m: 0.3,
            widget_r_m: 0.06,
            grasp_capture_m: 0.08,
            snap_guard: true,
            guard_window_ms: 100,
            palm_still_m: 0.015,
            flick_min_deg_s: 90.0,
            flick_window_ms: 50,
            spin_stop_deg_s: 1.0,
            lambda_per_s: std::f64::consts::LN_2 / 0.5,
            rotation_event_deg: 5.0,
            zoom_stretch_m: 0.20,
            zoom_clap_m: 0.20,
            reset_arm_ms: 200,
            act_radius_m: 1.5,
            filter_snap: 1.5,
            pause_hold_ms: 1500,
            pause_still_m: 0.05,
            base_height_m: 0.8,
            toggle_drop_m: 0.12,
            widget_drop_m: 0.05,
            handle_offset_m: 0.08,
            start_margin_m: 2.0,
            play_area_m: [2.0, 2.0],
            debug: false,
        }
    }
}

impl EngineConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |what: &str| Err(EngineError::InvalidConfig(what.to_string()));
        if !(self.chart.length_m > 0.0 && self.chart.radius_m > 0.0) {
            return bad("chart length and radius must be positive");
        }
        if self.transit_ms <= 0 || self.gaze_dwell_ms < 0 || self.pause_hold_ms <= 0 {
            return bad("durations must be positive");
        }
        if !(self.lambda_per_s > 0.0) {
            return bad("lambda_per_s must be positive");
        }
        if !(self.filter_snap > 1.0) {
            return bad("filter_snap must exceed 1");
        }
        if self.guard_window_ms <= 0 || self.flick_window_ms <= 0 {
            return bad("guard and flick windows must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("sample time {got} ms does not advance past {prev} ms")]
    NonMonotonicTime { prev: i64, got: i64 },
    #[error("head pose is not finite or its quaternion is not unit length")]
    InvalidHead,
    #[error(transparent)]
    Hand(#[from] HandError),
    #[error("{0:?} hand frame delivered in the {1:?} slot")]
    WrongSide(Side, Side),
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
}

/// Pose of the tracked room in the world: the room origin sits at `pos`
/// on the floor and the room is turned by `yaw_rad` about world up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub pos: [f64; 3],
    pub yaw_rad: f64,
}

impl Viewpoint {
    pub fn position(&self) -> Vec3 {
        Vec3::new(self.pos[0], self.pos[1], self.pos[2])
    }

    pub fn point_to_world(&self, p: Vec3) -> Vec3 {
        self.position() + yaw_rotation(self.yaw_rad) * p
    }

    pub fn dir_to_world(&self, d: Vec3) -> Vec3 {
        yaw_rotation(self.yaw_rad) * d
    }

    pub fn head_to_world(&self, head: &HeadPose) -> HeadPose {
        let q = nalgebra::UnitQuaternion::from_axis_angle(&Vec3::y_axis(), self.yaw_rad)
            * head.orientation();
        HeadPose::new(self.point_to_world(head.position()), q)
    }

    pub fn hand_to_world(&self, frame: &HandFrame) -> HandFrame {
        frame.map(|p| self.point_to_world(p), |d| self.dir_to_world(d))
    }

    /// Room forward (`+z`) in the world.
    pub fn forward(&self) -> Vec3 {
        self.dir_to_world(Vec3::z())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TravelState {
    Idle,
    Armed {
        chart_id: String,
        since_ms: i64,
        /// A suppressed point was already reported for this armed period.
        suppressed: bool,
    },
    InTransit {
        chart_id: String,
        from: Viewpoint,
        to: Viewpoint,
        t0_ms: i64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceSample {
    pub t_ms: i64,
    pub slice: usize,
    pub palm: Vec3,
    pub grab_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Grasp {
    TimeSlice {
        chart_id: String,
        start_grab_y: f64,
        start_slice: usize,
        history: VecDeque<SliceSample>,
    },
    RotationHandle {
        chart_id: String,
        start_yaw: f64,
        last_az: f64,
        /// Accumulated, unwrapped hand azimuth change.
        turned: f64,
        last_event_yaw: f64,
        history: VecDeque<(i64, f64)>,
    },
    AxisSphere {
        chart_id: String,
        variable: usize,
        /// Sphere center minus grab point at grasp start.
        offset: Vec3,
        sphere: Vec3,
        /// Dragged past the snap distance: releasing filters.
        detached: bool,
    },
}

impl Grasp {
    pub fn chart_id(&self) -> &str {
        match self {
            Grasp::TimeSlice { chart_id, .. }
            | Grasp::RotationHandle { chart_id, .. }
            | Grasp::AxisSphere { chart_id, .. } => chart_id,
        }
    }

    /// Whether the grasped widget is available in `mode`.
    pub fn allowed_in(&self, mode: Mode) -> bool {
        match self {
            Grasp::TimeSlice { .. } => mode.is_active(),
            Grasp::RotationHandle { .. } => mode == Mode::ActiveRotate,
            Grasp::AxisSphere { .. } => mode == Mode::ReconfigureFilter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeGesture {
    pub chart_id: String,
    pub left: Vec3,
    pub right: Vec3,
    pub preview: Option<EventWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoomGesture {
    pub chart_id: String,
    pub initial_separation_m: f64,
    /// The one zoom this capture allows has happened.
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResetPhase {
    Idle,
    Armed,
    /// Fired (or failed); waits until both hands leave the posture.
    Spent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauseHold {
    pub start_ms: i64,
    pub anchors: [Vec3; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spin {
    /// Signed angular speed, rad/s.
    pub omega: f64,
    pub last_event_yaw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeDwell {
    pub chart_id: String,
    pub since_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub charts: BTreeMap<String, ChartInstance>,
    /// Floor position of each chart.
    pub layout: BTreeMap<String, [f64; 2]>,
    pub viewpoint: Viewpoint,
    pub play_area: [f64; 2],
    pub paused: bool,
    pub travel: TravelState,
    /// Indexed by [`Side::index`].
    pub grasp: [Option<Grasp>; 2],
    pub range_gesture: Option<RangeGesture>,
    pub zoom_gesture: Option<ZoomGesture>,
    pub reset: ResetPhase,
    pub posture: [PostureState; 2],
    pub pause_hold: Option<PauseHold>,
    /// A pause toggle fired and the stop posture has not been broken yet.
    pub pause_spent: bool,
    /// Charts whose mode toggle each hand currently touches.
    pub toggle_contacts: [BTreeSet<String>; 2],
    pub spins: BTreeMap<String, Spin>,
    pub gaze: Option<GazeDwell>,
    pub hands_tracked: [bool; 2],
    pub last_t_ms: Option<i64>,
    pub next_seq: u64,
}

impl EngineState {
    /// Whether any grasp or bimanual gesture is in progress.
    pub fn busy(&self) -> bool {
        self.grasp.iter().any(Option::is_some)
            || self.range_gesture.is_some()
            || self.zoom_gesture.is_some()
    }

    pub fn render_hints(&self, chart_id: &str) -> RenderHints {
        let outline = matches!(&self.travel, TravelState::Armed { chart_id: c, .. } if c == chart_id);
        let preview_range = self
            .range_gesture
            .as_ref()
            .filter(|g| g.chart_id == chart_id)
            .and_then(|g| g.preview);
        let chart = self.charts.get(chart_id);
        let detached_variable = self.grasp.iter().flatten().find_map(|g| match g {
            Grasp::AxisSphere {
                chart_id: c,
                variable,
                detached: true,
                ..
            } if c == chart_id => Some(*variable),
            _ => None,
        });
        RenderHints {
            outline,
            preview_range,
            dimmed_outside: preview_range.is_some()
                || chart.is_some_and(|c| c.selected_range.is_some()),
            detached_variable,
        }
    }
}

/// Presentation flags derived from engine state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderHints {
    /// Armed travel target.
    pub outline: bool,
    /// Live range under a pinch-pinch gesture.
    pub preview_range: Option<EventWindow>,
    /// Events outside the selected (or previewed) range are drawn
    /// semi-transparent and uncolored.
    pub dimmed_outside: bool,
    /// Axis sphere dragged past the snap distance.
    pub detached_variable: Option<usize>,
}

/// One tracker output sample, in room coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSample {
    pub t_ms: i64,
    pub head: HeadPose,
    pub left: ObservedHand,
    pub right: ObservedHand,
}

impl InputSample {
    pub fn hand(&self, side: Side) -> &ObservedHand {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    dataset: Arc<Dataset>,
}

impl Engine {
    pub fn new(dataset: Arc<Dataset>, config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(Self { config, dataset })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    /// All charts inactive, viewpoint on the eastern border of the data
    /// facing west.
    pub fn initial_state(&self) -> EngineState {
        let mut charts = BTreeMap::new();
        let mut layout = BTreeMap::new();
        for e in &self.dataset.entities {
            charts.insert(e.id.clone(), ChartInstance::new(e, &self.config.chart));
            layout.insert(e.id.clone(), [e.x, e.y]);
        }
        let max_x = self
            .dataset
            .entities
            .iter()
            .map(|e| e.x)
            .fold(f64::NEG_INFINITY, f64::max);
        let mean_z =
            self.dataset.entities.iter().map(|e| e.y).sum::<f64>() / self.dataset.entities.len() as f64;
        EngineState {
            charts,
            layout,
            viewpoint: Viewpoint {
                pos: [max_x + self.config.start_margin_m, 0.0, mean_z],
                yaw_rad: -std::f64::consts::FRAC_PI_2,
            },
            play_area: self.config.play_area_m,
            paused: false,
            travel: TravelState::Idle,
            grasp: [None, None],
            range_gesture: None,
            zoom_gesture: None,
            reset: ResetPhase::Idle,
            posture: [PostureState::idle(0); 2],
            pause_hold: None,
            pause_spent: false,
            toggle_contacts: [BTreeSet::new(), BTreeSet::new()],
            spins: BTreeMap::new(),
            gaze: None,
            hands_tracked: [false; 2],
            last_t_ms: None,
            next_seq: 0,
        }
    }

    pub fn placement(&self, state: &EngineState, chart_id: &str) -> Option<ChartPlacement> {
        let chart = state.charts.get(chart_id)?;
        let floor = state.layout.get(chart_id)?;
        Some(ChartPlacement::new(&self.config, *floor, chart))
    }

    /// Advance the world by one sample. On error the state is untouched.
    pub fn step(
        &self,
        state: &mut EngineState,
        sample: &InputSample,
    ) -> Result<Vec<InteractionEvent>, EngineError> {
        if let Some(prev) = state.last_t_ms {
            if sample.t_ms <= prev {
                return Err(EngineError::NonMonotonicTime {
                    prev,
                    got: sample.t_ms,
                });
            }
        }
        if !sample.head.is_valid() {
            return Err(EngineError::InvalidHead);
        }
        for side in Side::BOTH {
            if let Some(f) = &sample.hand(side).frame {
                if f.side != side {
                    return Err(EngineError::WrongSide(f.side, side));
                }
                f.validate()?;
            }
        }
        let events = features::Stepper::new(self, state, sample).run();
        Ok(events)
    }
}

/// Round a payload float so logs stay short and stable.
pub(crate) fn r6(x: f64) -> Value {
    let r = (x * 1e6).round() / 1e6;
    serde_json::json!(if r == 0.0 { 0.0 } else { r })
}
