//! Feature handlers for one engine step.

use std::collections::{BTreeSet, VecDeque};

use serde_json::{json, Value};

use crate::chart::{ChartInstance, Mode};
use crate::geom::{angle_between, azimuth_about, horizontal_dist, wrap_pi, HeadPose, Vec3};
use crate::hand::{
    bimanual_relation, classify_posture, hold_timer, BimanualRelation, HandFrame, Posture,
    PostureState, Side,
};

use super::layout::ChartPlacement;
use super::{
    fixed_task_tag, mode_change_tag, r6, Engine, EngineConfig, EngineState, EventKind, Grasp,
    GazeDwell, InputSample, InteractionEvent, PauseHold, RangeGesture, ResetPhase, SliceSample,
    Spin, TaskTag, TravelState, Viewpoint, ZoomGesture,
};

pub(super) struct Stepper<'a> {
    engine: &'a Engine,
    cfg: &'a EngineConfig,
    st: &'a mut EngineState,
    t: i64,
    dt_s: f64,
    sample: &'a InputSample,
    head: HeadPose,
    /// World-space frames of tracked hands.
    hands: [Option<HandFrame>; 2],
    prev_posture: [PostureState; 2],
    relation: Option<BimanualRelation>,
    new_contacts: [BTreeSet<String>; 2],
    events: Vec<InteractionEvent>,
    initiated: bool,
}

fn smoothstep(u: f64) -> f64 {
    u * u * (3.0 - 2.0 * u)
}

fn lerp_viewpoint(a: &Viewpoint, b: &Viewpoint, s: f64) -> Viewpoint {
    let p = a.position() + (b.position() - a.position()) * s;
    Viewpoint {
        pos: [p.x, p.y, p.z],
        yaw_rad: a.yaw_rad + wrap_pi(b.yaw_rad - a.yaw_rad) * s,
    }
}

impl<'a> Stepper<'a> {
    pub(super) fn new(engine: &'a Engine, st: &'a mut EngineState, sample: &'a InputSample) -> Self {
        let dt_s = st
            .last_t_ms
            .map_or(0.0, |p| (sample.t_ms - p) as f64 / 1000.0);
        let prev_posture = st.posture;
        Self {
            engine,
            cfg: &engine.config,
            st,
            t: sample.t_ms,
            dt_s,
            sample,
            head: sample.head,
            hands: [None, None],
            prev_posture,
            relation: None,
            new_contacts: [BTreeSet::new(), BTreeSet::new()],
            events: Vec::new(),
            initiated: false,
        }
    }

    pub(super) fn run(mut self) -> Vec<InteractionEvent> {
        self.st.last_t_ms = Some(self.t);
        self.advance_transit();
        self.perceive();
        self.update_toggle_contacts();
        self.advance_spins();
        if self.handle_pause() || self.st.paused {
            return self.finish();
        }
        if matches!(self.st.travel, TravelState::InTransit { .. }) {
            return self.finish();
        }
        self.continue_grasps();
        self.continue_range();
        self.continue_zoom();
        self.handle_reset();
        if !self.initiated {
            self.start_zoom();
        }
        if !self.initiated {
            self.start_range();
        }
        if !self.initiated {
            self.start_grasp();
        }
        if !self.initiated {
            self.handle_mode_toggle();
        }
        self.handle_travel();
        self.finish()
    }

    fn finish(self) -> Vec<InteractionEvent> {
        let mut events = self.events;
        for e in events.iter_mut() {
            e.seq = self.st.next_seq;
            self.st.next_seq += 1;
        }
        events
    }

    fn emit(&mut self, kind: EventKind, chart_id: Option<&str>, payload: Value) {
        let tag = fixed_task_tag(kind).expect("kind has a fixed tag");
        self.emit_tagged(kind, chart_id, tag, payload);
    }

    fn emit_tagged(&mut self, kind: EventKind, chart_id: Option<&str>, task_tag: TaskTag, payload: Value) {
        if kind.is_initiation() {
            self.initiated = true;
        }
        self.events.push(InteractionEvent {
            t_ms: self.t,
            seq: 0,
            kind,
            chart_id: chart_id.map(str::to_string),
            task_tag,
            payload,
        });
    }

    /// Report a recognized gesture whose feature could not apply.
    fn reject(&mut self, feature: &str, chart_id: Option<&str>, tag: TaskTag, reason: &str) {
        if self.cfg.debug {
            self.emit_tagged(
                EventKind::Rejected,
                chart_id,
                tag,
                json!({ "feature": feature, "reason": reason }),
            );
        }
    }

    fn placement(&self, chart_id: &str) -> ChartPlacement {
        self.engine
            .placement(self.st, chart_id)
            .expect("chart ids in state are consistent")
    }

    fn chart(&self, chart_id: &str) -> &ChartInstance {
        &self.st.charts[chart_id]
    }

    fn set_chart(&mut self, chart_id: &str, chart: ChartInstance) {
        self.st.charts.insert(chart_id.to_string(), chart);
    }

    fn hand(&self, side: Side) -> Option<&HandFrame> {
        self.hands[side.index()].as_ref()
    }

    fn posture(&self, side: Side) -> Posture {
        self.st.posture[side.index()].posture
    }

    fn both(&self, p: Posture) -> bool {
        Side::BOTH
            .iter()
            .all(|&s| self.hand(s).is_some() && self.posture(s) == p)
    }

    fn engaged(&self, side: Side, p: Posture) -> bool {
        self.posture(side) == p && self.prev_posture[side.index()].posture != p
    }

    fn palm_midpoint(&self) -> Option<Vec3> {
        let (l, r) = (self.hand(Side::Left)?, self.hand(Side::Right)?);
        Some((l.palm_pos + r.palm_pos) / 2.0)
    }

    /// Nearest active chart within the activation radius of `p`.
    fn nearest_active(&self, p: &Vec3) -> Option<String> {
        let mut best: Option<(f64, &String)> = None;
        for (id, chart) in &self.st.charts {
            if !chart.mode.is_active() {
                continue;
            }
            let floor = self.st.layout[id];
            let d = horizontal_dist(&Vec3::new(floor[0], 0.0, floor[1]), p);
            if d <= self.cfg.act_radius_m && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, id));
            }
        }
        best.map(|(_, id)| id.clone())
    }

    // ---- perception -------------------------------------------------

    fn advance_transit(&mut self) {
        let TravelState::InTransit {
            chart_id,
            from,
            to,
            t0_ms,
        } = &self.st.travel
        else {
            return;
        };
        let u = ((self.t - t0_ms) as f64 / self.cfg.transit_ms as f64).clamp(0.0, 1.0);
        if u >= 1.0 {
            let (chart_id, to) = (chart_id.clone(), *to);
            self.st.viewpoint = to;
            self.st.travel = TravelState::Idle;
            self.emit(
                EventKind::TravelCompleted,
                Some(&chart_id),
                json!({ "position": [r6(to.pos[0]), r6(to.pos[2])], "yaw_deg": r6(to.yaw_rad.to_degrees()) }),
            );
        } else {
            self.st.viewpoint = lerp_viewpoint(from, to, smoothstep(u));
        }
    }

    fn perceive(&mut self) {
        let vp = self.st.viewpoint;
        self.head = vp.head_to_world(&self.sample.head);
        let raw = [&self.sample.left, &self.sample.right];
        for side in Side::BOTH {
            let i = side.index();
            self.hands[i] = raw[i].frame.as_ref().map(|f| {
                let mut w = vp.hand_to_world(f);
                w.t_ms = self.t;
                w
            });
            self.st.hands_tracked[i] = self.hands[i].is_some();
        }
        let fwd = self.head.forward();
        let mut torso = Vec3::new(fwd.x, 0.0, fwd.z);
        if torso.norm() < 1e-6 {
            torso = vp.forward();
        }
        let torso = torso.normalize();
        for side in Side::BOTH {
            let i = side.index();
            let prev = self.st.posture[i];
            self.st.posture[i] = match &self.hands[i] {
                Some(f) => classify_posture(f, &prev, &self.cfg.posture, &torso)
                    .expect("frames validated before the step"),
                None => prev.lost(self.t),
            };
        }
        // Skew is judged on the tracker's own stamps.
        self.relation = match (&self.hands, &self.sample.left.frame, &self.sample.right.frame) {
            ([Some(l), Some(r)], Some(l_raw), Some(r_raw)) => bimanual_relation(
                &HandFrame { t_ms: l_raw.t_ms, ..*l },
                &HandFrame { t_ms: r_raw.t_ms, ..*r },
                &self.cfg.bimanual,
            )
            .ok(),
            _ => None,
        };
    }

    fn update_toggle_contacts(&mut self) {
        for side in Side::BOTH {
            let i = side.index();
            let Some(f) = self.hands[i] else { continue };
            let mut now = BTreeSet::new();
            for id in self.st.charts.keys() {
                let c = self.placement(id).toggle_center(self.cfg);
                if f.contact_points().any(|p| (p - c).norm() <= self.cfg.widget_r_m) {
                    now.insert(id.clone());
                }
            }
            self.new_contacts[i] = now
                .difference(&self.st.toggle_contacts[i])
                .cloned()
                .collect();
            self.st.toggle_contacts[i] = now;
        }
    }

    fn advance_spins(&mut self) {
        if self.st.spins.is_empty() {
            return;
        }
        let lambda = self.cfg.lambda_per_s;
        let decay = (-lambda * self.dt_s).exp();
        let step_deg = self.cfg.rotation_event_deg.to_radians();
        let stop = self.cfg.spin_stop_deg_s.to_radians();
        let ids: Vec<String> = self.st.spins.keys().cloned().collect();
        for id in ids {
            let mut spin = self.st.spins[&id];
            if self.chart(&id).mode != Mode::ActiveRotate {
                self.st.spins.remove(&id);
                continue;
            }
            let delta = spin.omega / lambda * (1.0 - decay);
            spin.omega *= decay;
            let yaw = self.chart(&id).yaw_rad + delta;
            let chart = self.chart(&id).with_yaw(yaw);
            self.set_chart(&id, chart);
            if (yaw - spin.last_event_yaw).abs() >= step_deg {
                spin.last_event_yaw = yaw;
                self.emit(
                    EventKind::RotationChanged,
                    Some(&id),
                    json!({ "yaw_deg": r6(yaw.to_degrees()) }),
                );
            }
            if spin.omega.abs() < stop {
                self.st.spins.remove(&id);
            } else {
                self.st.spins.insert(id, spin);
            }
        }
    }

    // ---- pause ------------------------------------------------------

    /// Returns true if the pause state toggled this step.
    fn handle_pause(&mut self) -> bool {
        let in_transit = matches!(self.st.travel, TravelState::InTransit { .. });
        let both_stop = self.both(Posture::OpenStop);
        if !both_stop {
            self.st.pause_hold = None;
            self.st.pause_spent = false;
            return false;
        }
        if in_transit || self.st.pause_spent {
            self.st.pause_hold = None;
            return false;
        }
        let palms = [
            self.hand(Side::Left).expect("tracked").palm_pos,
            self.hand(Side::Right).expect("tracked").palm_pos,
        ];
        let fresh = PauseHold {
            start_ms: self.t,
            anchors: palms,
        };
        let hold = match self.st.pause_hold {
            None => fresh,
            Some(h) => {
                let drift = (0..2).any(|i| (palms[i] - h.anchors[i]).norm() >= self.cfg.pause_still_m);
                if drift {
                    fresh
                } else {
                    h
                }
            }
        };
        if self.t - hold.start_ms < self.cfg.pause_hold_ms {
            self.st.pause_hold = Some(hold);
            return false;
        }
        self.st.pause_hold = None;
        self.st.pause_spent = true;
        self.st.paused = !self.st.paused;
        if self.st.paused {
            self.st.grasp = [None, None];
            self.st.range_gesture = None;
            self.st.zoom_gesture = None;
            self.st.reset = ResetPhase::Idle;
            self.st.spins.clear();
            self.st.gaze = None;
            if matches!(self.st.travel, TravelState::Armed { .. }) {
                self.st.travel = TravelState::Idle;
            }
            self.emit(EventKind::Paused, None, json!({}));
        } else {
            self.emit(EventKind::Resumed, None, json!({}));
        }
        true
    }

    // ---- grasps -----------------------------------------------------

    fn continue_grasps(&mut self) {
        for side in Side::BOTH {
            let i = side.index();
            let Some(grasp) = self.st.grasp[i].take() else { continue };
            let mode = self.chart(grasp.chart_id()).mode;
            if !grasp.allowed_in(mode) {
                continue;
            }
            let held = self.hand(side).is_some() && self.posture(side) == Posture::Grab;
            if held {
                let f = *self.hand(side).expect("held implies tracked");
                self.st.grasp[i] = Some(self.drag(grasp, &f));
            } else {
                let palm = self.hand(side).map(|f| f.palm_pos);
                self.release(grasp, palm);
            }
        }
    }

    fn drag(&mut self, grasp: Grasp, f: &HandFrame) -> Grasp {
        let grab = f.grab_point();
        match grasp {
            Grasp::TimeSlice {
                chart_id,
                start_grab_y,
                start_slice,
                mut history,
            } => {
                let chart = self.chart(&chart_id);
                let start_h = chart
                    .event_to_height(start_slice.clamp(chart.visible_window.0, chart.visible_window.1))
                    .unwrap_or(0.0);
                let target = chart.height_to_event(start_h + grab.y - start_grab_y);
                if target != chart.slice_index {
                    let next = chart.select_time_event(target).expect("active chart");
                    self.set_chart(&chart_id, next);
                    self.emit(EventKind::TimeEventSelected, Some(&chart_id), json!({ "index": target }));
                }
                history.push_back(SliceSample {
                    t_ms: self.t,
                    slice: self.chart(&chart_id).slice_index,
                    palm: f.palm_pos,
                    grab_y: grab.y,
                });
                let keep_from = self.t - 4 * self.cfg.guard_window_ms;
                while history.len() > 2 && history[1].t_ms < keep_from {
                    history.pop_front();
                }
                Grasp::TimeSlice {
                    chart_id,
                    start_grab_y,
                    start_slice,
                    history,
                }
            }
            Grasp::RotationHandle {
                chart_id,
                start_yaw,
                last_az,
                turned,
                mut last_event_yaw,
                mut history,
            } => {
                let p = self.placement(&chart_id);
                let az = azimuth_about(&p.floor, &grab);
                let turned = turned + wrap_pi(az - last_az);
                let yaw = start_yaw + turned;
                let chart = self.chart(&chart_id).with_yaw(yaw);
                self.set_chart(&chart_id, chart);
                if (yaw - last_event_yaw).abs() >= self.cfg.rotation_event_deg.to_radians() {
                    last_event_yaw = yaw;
                    self.emit(
                        EventKind::RotationChanged,
                        Some(&chart_id),
                        json!({ "yaw_deg": r6(yaw.to_degrees()) }),
                    );
                }
                history.push_back((self.t, yaw));
                let keep_from = self.t - 4 * self.cfg.flick_window_ms;
                while history.len() > 2 && history[1].0 < keep_from {
                    history.pop_front();
                }
                Grasp::RotationHandle {
                    chart_id,
                    start_yaw,
                    last_az: az,
                    turned,
                    last_event_yaw,
                    history,
                }
            }
            Grasp::AxisSphere {
                chart_id,
                variable,
                offset,
                ..
            } => {
                let p = self.placement(&chart_id);
                let sphere = grab + offset;
                let detached = horizontal_dist(&p.floor, &sphere) > self.cfg.filter_snap * p.radius_m;
                Grasp::AxisSphere {
                    chart_id,
                    variable,
                    offset,
                    sphere,
                    detached,
                }
            }
        }
    }

    fn release(&mut self, grasp: Grasp, palm: Option<Vec3>) {
        match grasp {
            Grasp::TimeSlice {
                chart_id, history, ..
            } => self.release_slice(&chart_id, &history, palm),
            Grasp::RotationHandle {
                chart_id,
                last_event_yaw,
                history,
                ..
            } => {
                let Some(&(t_last, yaw_last)) = history.back() else { return };
                let cutoff = t_last - self.cfg.flick_window_ms;
                let &(t_ref, yaw_ref) = history
                    .iter()
                    .rev()
                    .find(|(t, _)| *t <= cutoff)
                    .unwrap_or(&history[0]);
                if t_last <= t_ref {
                    return;
                }
                let omega = (yaw_last - yaw_ref) / ((t_last - t_ref) as f64 / 1000.0);
                if omega.abs() >= self.cfg.flick_min_deg_s.to_radians() {
                    self.st.spins.insert(
                        chart_id,
                        Spin {
                            omega,
                            last_event_yaw,
                        },
                    );
                }
            }
            Grasp::AxisSphere {
                chart_id,
                variable,
                sphere,
                detached,
                ..
            } => {
                let chart = self.chart(&chart_id).clone();
                if detached {
                    match chart.filter_variable(variable) {
                        Ok(next) => {
                            let arrangement = next.arrangement.clone();
                            self.set_chart(&chart_id, next);
                            self.emit(
                                EventKind::VariableFiltered,
                                Some(&chart_id),
                                json!({ "variable": variable, "arrangement": arrangement }),
                            );
                        }
                        Err(e) => self.reject("filter", Some(&chart_id), TaskTag::Filter, &e.to_string()),
                    }
                } else {
                    let p = self.placement(&chart_id);
                    let local = azimuth_about(&p.floor, &sphere) - chart.yaw_rad;
                    if let Ok(next) = chart.apply_arrangement(variable, local) {
                        if next.arrangement != chart.arrangement {
                            let arrangement = next.arrangement.clone();
                            self.set_chart(&chart_id, next);
                            self.emit(
                                EventKind::VariableSorted,
                                Some(&chart_id),
                                json!({ "variable": variable, "arrangement": arrangement }),
                            );
                        }
                    }
                }
            }
        }
    }

    /// Release a time slice, reverting a snap caused by the fingers opening
    /// while the palm stayed put.
    fn release_slice(&mut self, chart_id: &str, history: &VecDeque<SliceSample>, palm: Option<Vec3>) {
        if !self.cfg.snap_guard || history.is_empty() {
            return;
        }
        let cutoff = self.t - self.cfg.guard_window_ms;
        let base = *history
            .iter()
            .rev()
            .find(|s| s.t_ms <= cutoff)
            .unwrap_or(&history[0]);
        let window: Vec<&SliceSample> = history.iter().filter(|s| s.t_ms >= cutoff).collect();
        let palm_moved = window
            .iter()
            .map(|s| s.palm)
            .chain(palm)
            .map(|p| (p - base.palm).norm())
            .fold(0.0, f64::max);
        let grab_moved = window
            .iter()
            .map(|s| (s.grab_y - base.grab_y).abs())
            .fold(0.0, f64::max);
        let chart = self.chart(chart_id);
        let current = chart.slice_index;
        if palm_moved < self.cfg.palm_still_m
            && grab_moved >= chart.event_gap()
            && current != base.slice
        {
            let next = chart.select_time_event(base.slice).expect("active chart");
            let settled = next.slice_index;
            self.set_chart(chart_id, next);
            self.emit(
                EventKind::SnapGuardReverted,
                Some(chart_id),
                json!({ "from": current, "to": settled }),
            );
            self.emit(EventKind::TimeEventSelected, Some(chart_id), json!({ "index": settled }));
        }
    }

    fn start_grasp(&mut self) {
        if self.st.busy() {
            return;
        }
        for side in Side::BOTH {
            if !self.engaged(side, Posture::Grab) {
                continue;
            }
            let f = *self.hand(side).expect("grab implies tracked");
            if let Some(grasp) = self.find_grasp_target(&f) {
                if let Grasp::RotationHandle { chart_id, .. } = &grasp {
                    self.st.spins.remove(chart_id);
                }
                self.st.grasp[side.index()] = Some(grasp);
                self.initiated = true;
                return;
            }
        }
    }

    fn find_grasp_target(&self, f: &HandFrame) -> Option<Grasp> {
        let grab = f.grab_point();
        let cap = self.cfg.grasp_capture_m;
        // Widgets beat the slice; within a class the nearest wins.
        let mut widget: Option<(f64, Grasp)> = None;
        let mut slice: Option<(f64, Grasp)> = None;
        for (id, chart) in &self.st.charts {
            if !chart.mode.is_active() {
                continue;
            }
            let p = self.placement(id);
            if horizontal_dist(&p.floor, &grab) > p.ring_radius(self.cfg) + cap {
                continue;
            }
            match chart.mode {
                Mode::ReconfigureFilter => {
                    for &var in &chart.arrangement {
                        let c = p.sphere_center(self.cfg, chart.axis_angle(var).expect("active"));
                        let d = (c - grab).norm();
                        if d <= cap && widget.as_ref().is_none_or(|(bd, _)| d < *bd) {
                            widget = Some((
                                d,
                                Grasp::AxisSphere {
                                    chart_id: id.clone(),
                                    variable: var,
                                    offset: c - grab,
                                    sphere: c,
                                    detached: false,
                                },
                            ));
                        }
                    }
                }
                Mode::ActiveRotate => {
                    let d = p.ring_distance(self.cfg, &grab);
                    if d <= cap && widget.as_ref().is_none_or(|(bd, _)| d < *bd) {
                        widget = Some((
                            d,
                            Grasp::RotationHandle {
                                chart_id: id.clone(),
                                start_yaw: chart.yaw_rad,
                                last_az: azimuth_about(&p.floor, &grab),
                                turned: 0.0,
                                last_event_yaw: chart.yaw_rad,
                                history: VecDeque::from([(self.t, chart.yaw_rad)]),
                            },
                        ));
                    }
                }
                Mode::Inactive => {}
            }
            let slice_h = p.base_h
                + chart
                    .event_to_height(chart.slice_index)
                    .expect("slice inside window");
            let dy = (grab.y - slice_h).abs();
            if dy <= cap
                && horizontal_dist(&p.floor, &grab) <= p.radius_m + cap
                && slice.as_ref().is_none_or(|(bd, _)| dy < *bd)
            {
                slice = Some((
                    dy,
                    Grasp::TimeSlice {
                        chart_id: id.clone(),
                        start_grab_y: grab.y,
                        start_slice: chart.slice_index,
                        history: VecDeque::from([SliceSample {
                            t_ms: self.t,
                            slice: chart.slice_index,
                            palm: f.palm_pos,
                            grab_y: grab.y,
                        }]),
                    },
                ));
            }
        }
        widget.or(slice).map(|(_, g)| g)
    }

    // ---- bimanual ---------------------------------------------------

    fn range_for(&self, chart_id: &str, l: &Vec3, r: &Vec3) -> Option<(usize, usize)> {
        let chart = self.chart(chart_id);
        let base = self.cfg.base_height_m;
        let a = chart.height_to_event(l.y - base);
        let b = chart.height_to_event(r.y - base);
        (a != b).then(|| (a.min(b), a.max(b)))
    }

    fn update_range_preview(&mut self, mut g: RangeGesture) -> RangeGesture {
        let range = self.range_for(&g.chart_id, &g.left, &g.right);
        if range != g.preview {
            g.preview = range;
            if let Some((a, b)) = range {
                self.emit(EventKind::TimeRangePreview, Some(&g.chart_id), json!({ "range": [a, b] }));
            }
        }
        g
    }

    fn continue_range(&mut self) {
        let Some(mut g) = self.st.range_gesture.take() else { return };
        if !self.chart(&g.chart_id).mode.is_active() {
            return;
        }
        if self.both(Posture::Pinch) {
            let (l, r) = (self.hand(Side::Left).unwrap(), self.hand(Side::Right).unwrap());
            g.left = l.pinch_point();
            g.right = r.pinch_point();
            self.st.range_gesture = Some(self.update_range_preview(g));
            return;
        }
        match g.preview {
            Some((a, b)) => {
                let next = self
                    .chart(&g.chart_id)
                    .select_time_range(a, b)
                    .expect("preview is a proper range of an active chart");
                self.set_chart(&g.chart_id, next);
                self.emit(EventKind::TimeRangeApplied, Some(&g.chart_id), json!({ "range": [a, b] }));
            }
            None => self.reject("time_range", Some(&g.chart_id), TaskTag::Select, "degenerate range"),
        }
    }

    fn start_range(&mut self) {
        if self.st.busy() || !self.both(Posture::Pinch) {
            return;
        }
        let Some(mid) = self.palm_midpoint() else { return };
        let Some(id) = self.nearest_active(&mid) else { return };
        let (l, r) = (
            self.hand(Side::Left).unwrap().pinch_point(),
            self.hand(Side::Right).unwrap().pinch_point(),
        );
        let p = self.placement(&id);
        let cap = self.cfg.grasp_capture_m;
        if !(p.in_column(&l, cap) && p.in_column(&r, cap)) {
            return;
        }
        let g = RangeGesture {
            chart_id: id,
            left: l,
            right: r,
            preview: None,
        };
        self.st.range_gesture = Some(self.update_range_preview(g));
        self.initiated = true;
    }

    /// Palms facing, vertically stacked, and no pinch or grab on either hand.
    fn zoom_posture(&self) -> Option<f64> {
        let rel = self.relation?;
        let clear = Side::BOTH
            .iter()
            .all(|&s| !matches!(self.posture(s), Posture::Pinch | Posture::Grab));
        (rel.palms_facing && rel.vertical_stacked && clear).then_some(rel.separation_m)
    }

    fn continue_zoom(&mut self) {
        let Some(mut g) = self.st.zoom_gesture.take() else { return };
        if !self.chart(&g.chart_id).mode.is_active() {
            return;
        }
        let Some(sep) = self.zoom_posture() else { return };
        if !g.done {
            let chart = self.chart(&g.chart_id).clone();
            if sep - g.initial_separation_m >= self.cfg.zoom_stretch_m {
                g.done = true;
                match chart.zoom_in() {
                    Ok(next) => {
                        let w = next.visible_window;
                        self.set_chart(&g.chart_id, next);
                        self.emit(EventKind::ZoomedIn, Some(&g.chart_id), json!({ "window": [w.0, w.1] }));
                    }
                    Err(e) => self.reject("zoom_in", Some(&g.chart_id), TaskTag::Elaborate, &e.to_string()),
                }
            } else if g.initial_separation_m - sep >= self.cfg.zoom_clap_m {
                g.done = true;
                match chart.zoom_out() {
                    Ok(next) => {
                        let w = next.visible_window;
                        self.set_chart(&g.chart_id, next);
                        self.emit(EventKind::ZoomedOut, Some(&g.chart_id), json!({ "window": [w.0, w.1] }));
                    }
                    Err(e) => self.reject("zoom_out", Some(&g.chart_id), TaskTag::Abstract, &e.to_string()),
                }
            }
        }
        self.st.zoom_gesture = Some(g);
    }

    fn start_zoom(&mut self) {
        if self.st.busy() {
            return;
        }
        let Some(sep) = self.zoom_posture() else { return };
        let Some(mid) = self.palm_midpoint() else { return };
        let Some(id) = self.nearest_active(&mid) else { return };
        self.st.zoom_gesture = Some(ZoomGesture {
            chart_id: id,
            initial_separation_m: sep,
            done: false,
        });
        self.initiated = true;
    }

    fn handle_reset(&mut self) {
        let both_up = self.both(Posture::IndexUp);
        match self.st.reset {
            ResetPhase::Idle => {
                let held = Side::BOTH.iter().all(|&s| {
                    hold_timer(&self.st.posture[s.index()], Posture::IndexUp, self.cfg.reset_arm_ms, self.t)
                });
                if both_up && held && !self.st.busy() {
                    self.st.reset = ResetPhase::Armed;
                }
            }
            ResetPhase::Armed => {
                if !both_up {
                    self.st.reset = ResetPhase::Idle;
                } else if self.relation.is_some_and(|r| r.indices_crossed) && !self.initiated {
                    self.st.reset = ResetPhase::Spent;
                    let target = self.palm_midpoint().and_then(|m| self.nearest_active(&m));
                    match target {
                        Some(id) => {
                            let next = self.chart(&id).reset().expect("nearest chart is active");
                            self.set_chart(&id, next);
                            self.emit(
                                EventKind::ChartReset,
                                Some(&id),
                                json!({ "window": [self.chart(&id).visible_window.0, self.chart(&id).visible_window.1] }),
                            );
                        }
                        None => self.reject("reset", None, TaskTag::Undo, "no active chart in reach"),
                    }
                }
            }
            ResetPhase::Spent => {
                let any_up = Side::BOTH
                    .iter()
                    .any(|&s| self.hand(s).is_some() && self.posture(s) == Posture::IndexUp);
                if !any_up {
                    self.st.reset = ResetPhase::Idle;
                }
            }
        }
    }

    // ---- mode toggle ------------------------------------------------

    fn handle_mode_toggle(&mut self) {
        for side in Side::BOTH {
            let i = side.index();
            if self.st.grasp[i].is_some() {
                continue;
            }
            let Some(id) = self.new_contacts[i].iter().next().cloned() else { continue };
            let chart = self.chart(&id).clone();
            let (from, to) = (chart.mode, chart.mode.next());
            self.set_chart(&id, chart.with_mode(to));
            self.cancel_conflicts(&id, to);
            self.emit_tagged(
                EventKind::ModeChanged,
                Some(&id),
                mode_change_tag(from, to),
                json!({ "from": from, "to": to }),
            );
            return;
        }
    }

    /// Drop gestures that are not available on `chart_id` in `mode`.
    fn cancel_conflicts(&mut self, chart_id: &str, mode: Mode) {
        for g in self.st.grasp.iter_mut() {
            if g.as_ref().is_some_and(|g| g.chart_id() == chart_id && !g.allowed_in(mode)) {
                *g = None;
            }
        }
        if !mode.is_active() {
            if self.st.range_gesture.as_ref().is_some_and(|g| g.chart_id == chart_id) {
                self.st.range_gesture = None;
            }
            if self.st.zoom_gesture.as_ref().is_some_and(|g| g.chart_id == chart_id) {
                self.st.zoom_gesture = None;
            }
        }
        if mode != Mode::ActiveRotate {
            self.st.spins.remove(chart_id);
        }
    }

    // ---- travel -----------------------------------------------------

    fn gaze_target(&self) -> Option<(String, f64)> {
        let origin = self.head.position();
        let dir = self.head.forward();
        let mut best: Option<(f64, &String)> = None;
        for id in self.st.charts.keys() {
            let p = self.placement(id);
            if let Some(s) = p.ray_hit(self.cfg, &origin, &dir) {
                if best.is_none_or(|(bs, _)| s < bs) {
                    best = Some((s, id));
                }
            }
        }
        best.map(|(_, id)| {
            let p = self.placement(id);
            (id.clone(), horizontal_dist(&p.floor, &origin))
        })
    }

    fn handle_travel(&mut self) {
        if self.st.busy() {
            self.st.gaze = None;
            if matches!(self.st.travel, TravelState::Armed { .. }) {
                self.st.travel = TravelState::Idle;
            }
            return;
        }
        let target = self
            .gaze_target()
            .filter(|(_, d)| *d > self.cfg.faraway_min_m)
            .map(|(id, _)| id);
        self.st.gaze = match (target, self.st.gaze.take()) {
            (Some(id), Some(g)) if g.chart_id == id => Some(g),
            (Some(id), _) => Some(GazeDwell {
                chart_id: id,
                since_ms: self.t,
            }),
            (None, _) => None,
        };
        let gazed = self.st.gaze.as_ref().map(|g| g.chart_id.clone());
        if let TravelState::Armed { chart_id, .. } = &self.st.travel {
            if gazed.as_deref() != Some(chart_id.as_str()) {
                self.st.travel = TravelState::Idle;
            }
        }
        if let (TravelState::Idle, Some(g)) = (&self.st.travel, &self.st.gaze) {
            if self.t - g.since_ms >= self.cfg.gaze_dwell_ms {
                let id = g.chart_id.clone();
                let dist = horizontal_dist(&self.placement(&id).floor, &self.head.position());
                self.st.travel = TravelState::Armed {
                    chart_id: id.clone(),
                    since_ms: self.t,
                    suppressed: false,
                };
                self.emit(EventKind::TravelArmed, Some(&id), json!({ "distance_m": r6(dist) }));
            }
        }
        self.try_start_travel();
    }

    fn pointing_at(&self, chart_id: &str) -> bool {
        let aim = self.placement(chart_id).center();
        let tol = self.cfg.point_tol_deg.to_radians();
        Side::BOTH.iter().any(|&s| {
            self.posture(s) == Posture::Point
                && self
                    .hand(s)
                    .is_some_and(|f| angle_between(&f.index_dir(), &(aim - f.palm_pos)) <= tol)
        })
    }

    /// Any tracked palm close enough to a mode toggle to suppress travel.
    fn near_toggle(&self) -> bool {
        let r = self.cfg.suppress_radius_m;
        self.hands.iter().flatten().any(|f| {
            self.st
                .charts
                .keys()
                .any(|id| (self.placement(id).toggle_center(self.cfg) - f.palm_pos).norm() <= r)
        })
    }

    fn try_start_travel(&mut self) {
        if self.initiated {
            return;
        }
        let TravelState::Armed {
            chart_id,
            suppressed,
            ..
        } = &self.st.travel
        else {
            return;
        };
        let (chart_id, suppressed) = (chart_id.clone(), *suppressed);
        if !self.pointing_at(&chart_id) {
            return;
        }
        if self.near_toggle() {
            if !suppressed {
                if let TravelState::Armed { suppressed, .. } = &mut self.st.travel {
                    *suppressed = true;
                }
                self.emit(EventKind::SuppressedTravel, Some(&chart_id), json!({}));
            }
            return;
        }
        let from = self.st.viewpoint;
        let to = self.landing(&chart_id);
        self.st.travel = TravelState::InTransit {
            chart_id: chart_id.clone(),
            from,
            to,
            t0_ms: self.t,
        };
        self.st.gaze = None;
        self.emit(
            EventKind::TravelStarted,
            Some(&chart_id),
            json!({
                "from": [r6(from.pos[0]), r6(from.pos[2])],
                "to": [r6(to.pos[0]), r6(to.pos[2])],
            }),
        );
    }

    /// Room pose at the standoff distance on the near side of the chart,
    /// facing it.
    fn landing(&self, chart_id: &str) -> Viewpoint {
        let c = self.placement(chart_id).floor;
        let h = self.head.position();
        let mut d = Vec3::new(h.x - c.x, 0.0, h.z - c.z);
        if d.norm() < 1e-9 {
            d = -self.st.viewpoint.forward();
        }
        let d = d.normalize();
        let pos = c + d * self.cfg.standoff_m;
        Viewpoint {
            pos: [pos.x, 0.0, pos.z],
            yaw_rad: (c.x - pos.x).atan2(c.z - pos.z),
        }
    }
}
