//! Randomized property suites shared by `properties` and `acceptance`.
//!
//! Every runner uses a fixed RNG so a run is reproducible, and returns the
//! number of cases it checked or the first counterexample.

use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};

use gce_core::chart::{ChartConfig, ChartInstance, Mode};
use gce_core::dataset::Entity;
use gce_core::engine::EventKind;
use gce_core::geom::{HeadPose, Vec3};
use gce_core::hand::{classify_posture, HandFrame, Posture, PostureConfig, PostureState, Side};
use gce_core::scenario::{frame_time, HandPose, Pose, Rig, FIST, OPEN, POINT};
use gce_core::session::{replay, write_lines, ReplayConfig, Session, StepOutput, TraceRecord};
use gce_core::synth::{HandBuilder, HandShape};
use gce_core::tracker::SensorModel;

use super::Bench;

pub const CASES: u32 = 1000;

pub fn runner() -> TestRunner {
    let config = Config {
        cases: CASES,
        failure_persistence: None,
        max_global_rejects: 100_000,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

fn run<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<u32, String>
where
    S::Value: std::fmt::Debug,
{
    runner().run(&strategy, test).map(|_| CASES).map_err(|e| e.to_string())
}

// ---- charts ------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum ChartOp {
    Mode(u8),
    Slice(usize),
    Range(usize, usize),
    ZoomIn,
    ZoomOut,
    Sort(usize, f64),
    Filter(usize),
    Reset,
    Yaw(f64),
}

fn chart_op() -> impl Strategy<Value = ChartOp> {
    prop_oneof![
        (0u8..3).prop_map(ChartOp::Mode),
        (0usize..260).prop_map(ChartOp::Slice),
        (0usize..260, 0usize..260).prop_map(|(a, b)| ChartOp::Range(a, b)),
        Just(ChartOp::ZoomIn),
        Just(ChartOp::ZoomOut),
        (0usize..7, -7.0f64..7.0).prop_map(|(v, a)| ChartOp::Sort(v, a)),
        (0usize..7).prop_map(ChartOp::Filter),
        Just(ChartOp::Reset),
        (-10.0f64..10.0).prop_map(ChartOp::Yaw),
    ]
}

/// Apply `op`; operations the chart refuses leave it unchanged.
pub fn apply(c: &ChartInstance, op: &ChartOp) -> ChartInstance {
    let mode = |m: u8| match m {
        0 => Mode::Inactive,
        1 => Mode::ActiveRotate,
        _ => Mode::ReconfigureFilter,
    };
    let next = match *op {
        ChartOp::Mode(m) => Ok(c.with_mode(mode(m))),
        ChartOp::Slice(i) => c.select_time_event(i),
        ChartOp::Range(a, b) => c.select_time_range(a, b),
        ChartOp::ZoomIn => c.zoom_in(),
        ChartOp::ZoomOut => c.zoom_out(),
        ChartOp::Sort(v, a) => c.apply_arrangement(v, a),
        ChartOp::Filter(v) => c.filter_variable(v),
        ChartOp::Reset => c.reset(),
        ChartOp::Yaw(y) => Ok(c.with_yaw(y)),
    };
    next.unwrap_or_else(|_| c.clone())
}

pub fn chart(variables: usize, events: usize) -> ChartInstance {
    let entity = Entity {
        id: "p".into(),
        name: "P".into(),
        x: 0.0,
        y: 0.0,
        series: (0..variables).map(|v| (0..events).map(|i| ((i * 7 + v * 13) % 23) as f64).collect()).collect(),
    };
    ChartInstance::new(&entity, &ChartConfig::default())
}

fn chart_history() -> impl Strategy<Value = (usize, usize, Vec<ChartOp>)> {
    (1usize..7, 2usize..240, prop::collection::vec(chart_op(), 0..40))
}

fn replay_ops(v: usize, t: usize, ops: &[ChartOp]) -> ChartInstance {
    ops.iter().fold(chart(v, t), |c, op| apply(&c, op))
}

/// zoom_out(zoom_in(c)) shows the window and zoom history `c` had.
pub fn zoom_roundtrip() -> Result<u32, String> {
    let strategy = (chart_history(), 0.0f64..1.0, 0.0f64..1.0, 1u8..3);
    run(strategy, |((v, t, ops), fa, fb, m)| {
        let c = apply(&replay_ops(v, t, &ops), &ChartOp::Mode(m));
        let (lo, hi) = c.visible_window;
        let pick = |f: f64| lo + ((hi - lo) as f64 * f).round() as usize;
        let (a, b) = (pick(fa), pick(fb));
        prop_assume!(a != b && (a.min(b), a.max(b)) != (lo, hi));
        let ranged = c.select_time_range(a, b).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let zoomed = ranged.zoom_in().map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(zoomed.visible_window, (a.min(b), a.max(b)));
        let back = zoomed.zoom_out().map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back.visible_window, c.visible_window);
        prop_assert_eq!(&back.zoom_stack, &c.zoom_stack);
        prop_assert!(back.check_invariants().is_ok());
        Ok(())
    })
}

/// Window, selection, slice, arrangement and zoom history stay
/// consistent under any sequence of chart operations.
pub fn chart_containment() -> Result<u32, String> {
    run(chart_history(), |(v, t, ops)| {
        let mut c = chart(v, t);
        for op in &ops {
            c = apply(&c, op);
            if let Err(e) = c.check_invariants() {
                return Err(TestCaseError::fail(format!("after {op:?}: {e}")));
            }
        }
        Ok(())
    })
}

/// Reset lands on the canonical view and is idempotent.
pub fn reset_canonical() -> Result<u32, String> {
    run((chart_history(), 1u8..3), |((v, t, ops), m)| {
        let c = apply(&replay_ops(v, t, &ops), &ChartOp::Mode(m));
        let r = c.reset().map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&r.arrangement, &(0..v).collect::<Vec<_>>());
        prop_assert_eq!(r.visible_window, (0, t - 1));
        prop_assert!(r.zoom_stack.is_empty() && r.selected_range.is_none());
        prop_assert_eq!(r.mode, c.mode);
        prop_assert_eq!(r.reset().unwrap(), r.clone());
        Ok(())
    })
}

// ---- postures -----------------------------------------------------------

fn unit() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0f64..1.0)
        .prop_filter("nonzero", |a| Vec3::from(*a).norm() > 0.2)
        .prop_map(|a| Vec3::from(a).normalize())
}

fn frame_basis() -> impl Strategy<Value = (Vec3, Vec3)> {
    (unit(), unit()).prop_filter_map("independent", |(n, d)| {
        let d = d - n * d.dot(&n);
        (d.norm() > 0.2).then(|| (n, d.normalize()))
    })
}

/// Monotone values from `a` to `b` over `fracs.len() + 2` samples.
fn ramp(a: f64, b: f64, fracs: &mut [f64]) -> Vec<f64> {
    fracs.sort_by(f64::total_cmp);
    std::iter::once(a)
        .chain(fracs.iter().map(|f| a + (b - a) * f))
        .chain(std::iter::once(b))
        .collect()
}

fn flips(states: &[bool]) -> usize {
    states.windows(2).filter(|w| w[0] != w[1]).count()
}

/// On a monotone ramp of pinch gap or grip the ramped posture switches at
/// most once.
pub fn hysteresis_no_flicker() -> Result<u32, String> {
    let strategy = (
        frame_basis(),
        prop::array::uniform3(-0.5f64..0.5),
        any::<bool>(),
        any::<bool>(),
        prop::collection::vec(0.0f64..1.0, 1..40),
        0.036f64..0.09,
        0.0f64..0.024,
    );
    run(strategy, |((n, d), pos, pinch, closing, mut fracs, open, closed)| {
        let cfg = PostureConfig::default();
        let forward = Vec3::z();
        let base = HandBuilder::new(Side::Right, Vec3::from(pos)).facing(n, d);
        let (target, values) = if pinch {
            let (a, b) = if closing { (open, closed) } else { (closed, open) };
            (Posture::Pinch, ramp(a, b, &mut fracs))
        } else {
            let (a, b) = if closing { (0.0, 1.0) } else { (1.0, 0.0) };
            (Posture::Grab, ramp(a, b, &mut fracs))
        };
        // Let the start value settle past the debounce before ramping.
        let settle = cfg.debounce_frames as usize + 1;
        let values: Vec<f64> = std::iter::repeat_n(values[0], settle).chain(values).collect();
        let mut state = PostureState::idle(0);
        let mut seen = Vec::new();
        for (k, x) in values.iter().enumerate() {
            let shape = if pinch {
                HandShape::Pinch { gap_m: *x, others_curl: 0.3 }
            } else {
                HandShape::Curls([0.3, *x, *x, *x, *x])
            };
            let f = base.shape(shape).at(frame_time(k as u64 + 1));
            state = classify_posture(&f, &state, &cfg, &forward).map_err(|e| TestCaseError::fail(e.to_string()))?;
            if k + 1 >= settle {
                seen.push(state.posture == target);
            }
        }
        prop_assert!(flips(&seen) <= 1, "{:?} flickered: {:?}", target, seen);
        Ok(())
    })
}

/// Mirroring a frame across the sagittal plane swaps the side and keeps
/// the posture.
pub fn mirror_symmetry() -> Result<u32, String> {
    let strategy = (frame_basis(), prop::array::uniform3(-0.5f64..0.5), prop::array::uniform5(0.0f64..1.0), 0.0f64..0.06, any::<bool>());
    run(strategy, |((n, d), pos, curls, gap, pinch)| {
        let cfg = PostureConfig::default();
        let shape = if pinch {
            HandShape::Pinch { gap_m: gap, others_curl: curls[2] }
        } else {
            HandShape::Curls(curls)
        };
        let f = HandBuilder::new(Side::Left, Vec3::from(pos)).facing(n, d).shape(shape).at(10);
        let m = gce_core::synth::mirror_x(&f);
        prop_assert_eq!(m.side, Side::Right);
        let fwd = Vec3::new(0.3, 0.0, 1.0).normalize();
        let mfwd = Vec3::new(-fwd.x, fwd.y, fwd.z);
        let mut a = PostureState::idle(0);
        let mut b = PostureState::idle(0);
        for k in 1..4 {
            let fk = HandFrame { t_ms: 10 * k, ..f };
            let mk = HandFrame { t_ms: 10 * k, ..m };
            a = classify_posture(&fk, &a, &cfg, &fwd).unwrap();
            b = classify_posture(&mk, &b, &cfg, &mfwd).unwrap();
        }
        prop_assert_eq!(a.posture, b.posture);
        Ok(())
    })
}

// ---- engine runs --------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RandHand {
    pub shape: u8,
    pub offset: [f64; 3],
    pub basis: (Vec3, Vec3),
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct RandStep {
    pub hands: [Option<RandHand>; 2],
    pub frames: u64,
    /// A whole scripted gesture played instead of the random pose.
    pub gesture: Option<(u8, f64, f64)>,
}

fn rand_hand() -> impl Strategy<Value = RandHand> {
    (0u8..6, prop::array::uniform3(-0.35f64..0.35), frame_basis(), 0.0f64..0.05).prop_map(
        |(shape, offset, basis, gap)| RandHand { shape, offset, basis, gap },
    )
}

pub fn rand_steps(max: usize) -> impl Strategy<Value = Vec<RandStep>> {
    let gesture = prop::option::weighted(0.25, (0u8..10, 0.0f64..1.0, 0.0f64..1.0));
    let step = (prop::option::weighted(0.8, rand_hand()), prop::option::weighted(0.8, rand_hand()), 1u64..25, gesture)
        .prop_map(|(l, r, frames, gesture)| RandStep { hands: [l, r], frames, gesture });
    prop::collection::vec(step, 1..max)
}

/// A session standing at an active chart, ready to receive random poses.
#[derive(Clone)]
pub struct Drive {
    pub session: Session,
    pub rig: Rig,
    pub chart: String,
    work: Vec3,
    head: Vec3,
    look: Vec3,
    toward_user: Vec3,
}

impl Drive {
    pub fn prepared(paused: bool) -> Self {
        let mut bench = Bench::new();
        let a = bench.a.clone();
        bench.rig.touch_toggle(&a).unwrap();
        if paused {
            bench.rig.stop_sign(&a).unwrap();
        }
        let (_, session) = bench.run();
        assert_eq!(session.state().paused, paused);
        let floor = bench.rig.floor(&a).unwrap();
        let u = bench.rig.toward_user();
        Self {
            session,
            rig: bench.rig,
            chart: a,
            work: floor + u * 0.2 + Vec3::new(0.0, 1.0, 0.0),
            head: floor + u * 0.6 + Vec3::new(0.0, 1.3, 0.0),
            look: floor + Vec3::new(0.0, 0.9, 0.0),
            toward_user: u,
        }
    }

    fn hand(&self, side: Side, h: &RandHand) -> HandPose {
        let (n, d) = h.basis;
        let palm = self.work + Vec3::from(h.offset);
        let up = Vec3::y();
        let u = self.toward_user;
        let pose = match h.shape {
            0 => HandPose::new(side, n, d, OPEN),
            1 => HandPose::new(side, n, d, FIST),
            2 => HandPose::new(side, n, d, POINT),
            3 => HandPose::new(side, n, d, OPEN).pinching(h.gap),
            // Index up, palm towards the chart.
            4 => HandPose::new(side, -u, up, POINT),
            _ => HandPose::new(side, -u, up, OPEN),
        };
        pose.at_palm(palm)
    }

    /// Play one of the scripted gestures on the working chart. Gestures the
    /// rig cannot script from its current expectations are skipped.
    fn gesture(&self, rig: &mut Rig, g: u8, x: f64, y: f64) {
        let id = self.chart.as_str();
        let day = |f: f64| (f * 149.0).round() as usize;
        let window = rig.chart(id).visible_window;
        let in_window = |f: f64| window.0 + ((window.1 - window.0) as f64 * f).round() as usize;
        let n = rig.chart(id).arrangement.len();
        let var = rig.chart(id).arrangement[(x * n as f64) as usize % n];
        let _ = match g {
            0 => rig.touch_toggle(id),
            1 => rig.drag_slice(id, in_window(x)),
            2 => rig.rotate_quarter(id, if x < 0.5 { 1.0 } else { -1.0 }),
            3 => rig.pinch_range(id, in_window(x), in_window(y)),
            4 => rig.zoom(id, x < 0.6),
            5 => rig.move_axis(id, var, (y * n as f64) as usize % n),
            6 => rig.remove_axis(id, var),
            7 => rig.cross_fingers(id),
            8 => rig.stop_sign(id),
            _ => rig.flick(id, 1.0, 150 + day(y) as i64),
        };
    }

    /// Script `steps` and feed them to a copy of the session.
    pub fn play(&self, steps: &[RandStep]) -> Result<(Session, Vec<StepOutput>), String> {
        let mut rig = self.rig.clone();
        let start = rig.records().len();
        for s in steps {
            if let Some((g, x, y)) = s.gesture {
                self.gesture(&mut rig, g, x, y);
                continue;
            }
            let hands = [
                s.hands[0].as_ref().map(|h| self.hand(Side::Left, h)),
                s.hands[1].as_ref().map(|h| self.hand(Side::Right, h)),
            ];
            rig.put(Pose {
                head: self.head,
                look: self.look,
                hands,
            });
            rig.frames(s.frames);
        }
        let mut session = self.session.clone();
        let mut out = Vec::new();
        for r in &rig.records()[start..] {
            out.push(session.feed(r).map_err(|e| e.to_string())?);
        }
        Ok((session, out))
    }
}

/// While paused, nothing but `Resumed` is ever emitted.
pub fn pause_totality() -> Result<u32, String> {
    let drive = Drive::prepared(true);
    run(rand_steps(30), |steps| {
        let (_, outs) = drive.play(&steps).map_err(TestCaseError::fail)?;
        // Only the first event is seen while paused.
        match outs.iter().flat_map(|o| &o.events).next() {
            Some(e) if e.kind != EventKind::Resumed => Err(TestCaseError::fail(format!("{:?} while paused", e.kind))),
            _ => Ok(()),
        }
    })
}

/// Chart invariants hold after every engine step, and a step never starts
/// more than one feature.
pub fn engine_containment() -> Result<u32, String> {
    let drive = Drive::prepared(false);
    run(rand_steps(30), |steps| {
        let (end, outs) = drive.play(&steps).map_err(TestCaseError::fail)?;
        for o in &outs {
            let initiations = o.events.iter().filter(|e| e.kind.is_initiation()).count();
            prop_assert!(initiations <= 1, "{} initiations at {}", initiations, o.sample.t_ms);
        }
        for (id, c) in &end.state().charts {
            if let Err(e) = c.check_invariants() {
                return Err(TestCaseError::fail(format!("{id}: {e}")));
            }
        }
        Ok(())
    })
}

fn rand_record(t_ms: i64, head: [f64; 4], hands: &[Option<RandHand>; 2]) -> TraceRecord {
    let pos = Vec3::new(head[0], 1.2 + head[1] * 0.4, head[2]);
    let look = pos + Vec3::new(head[3].sin(), -0.4, head[3].cos());
    let hand = |side: Side, h: &Option<RandHand>| {
        h.as_ref().map(|h| {
            let (n, d) = h.basis;
            let shape = match h.shape {
                0 => HandShape::Open,
                1 => HandShape::Fist,
                2 => HandShape::Point,
                _ => HandShape::Pinch { gap_m: h.gap, others_curl: 0.3 },
            };
            HandBuilder::new(side, look + Vec3::from(h.offset) * 0.5 - Vec3::new(0.0, 0.2, 0.0))
                .facing(n, d)
                .shape(shape)
                .at(t_ms)
        })
    };
    TraceRecord {
        t_ms,
        head: HeadPose::looking_at(pos, look),
        left: hand(Side::Left, &hands[0]),
        right: hand(Side::Right, &hands[1]),
        mark: None,
    }
}

/// Replaying the same trace twice gives byte-identical logs, with and
/// without sensor noise.
pub fn double_replay() -> Result<u32, String> {
    let ds = Arc::new(super::small_dataset(4, 11));
    let strategy = (
        prop::collection::vec((prop::array::uniform4(-1.0f64..1.0), prop::option::of(rand_hand()), prop::option::of(rand_hand()), 1i64..40), 1..60),
        any::<u64>(),
        prop_oneof![Just(0.0), 0.0f64..0.003],
    );
    run(strategy, move |(steps, seed, jitter)| {
        let mut t = 0;
        let trace: Vec<TraceRecord> = steps
            .iter()
            .map(|(head, l, r, dt)| {
                t += dt;
                rand_record(t, *head, &[l.clone(), r.clone()])
            })
            .collect();
        let cfg = ReplayConfig {
            sensor: SensorModel {
                jitter_std_m: jitter,
                ..SensorModel::default()
            },
            sensor_seed: seed,
            ..ReplayConfig::default()
        };
        let a = replay(ds.clone(), &trace, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let b = replay(ds.clone(), &trace, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(write_lines(&a), write_lines(&b));
        Ok(())
    })
}
