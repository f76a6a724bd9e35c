//! Folding every StateDelta since the handshake over the first Snapshot
//! reproduces the server's current Snapshot.

use std::sync::{Arc, OnceLock};

use gce_core::scenario::Rig;
use gce_core::session::{generate_dataset, GenParams};
use gce_core::tracker::SensorModel;
use gce_service::protocol::{ClientMessage, ServerMessage, Snapshot};
use gce_service::{ServiceContext, ServiceSession};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

struct Prefix {
    ctx: ServiceContext,
    rig: Rig,
    chart: String,
}

/// Four charts; the rig has travelled to the easternmost one and switched
/// it on.
fn prefix() -> &'static Prefix {
    static PREFIX: OnceLock<Prefix> = OnceLock::new();
    PREFIX.get_or_init(|| {
        let ds = generate_dataset(&GenParams {
            entities: 4,
            seed: 11,
            ..GenParams::default()
        })
        .unwrap();
        let chart = ds.entities.iter().max_by(|p, q| p.x.total_cmp(&q.x)).unwrap().id.clone();
        let ctx = ServiceContext::with_dataset("small", ds);
        let mut rig = Rig::new(ctx.datasets["small"].clone(), &ctx.replay.engine).unwrap();
        rig.idle(200);
        rig.travel(&chart).unwrap();
        rig.stance(&chart).unwrap();
        rig.touch_toggle(&chart).unwrap();
        Prefix { ctx, rig, chart }
    })
}

#[derive(Debug, Clone)]
enum Op {
    Toggle,
    Drag(usize),
    Rotate(bool),
    Range(usize, usize),
    Zoom(bool),
    Sort(usize, usize),
    Filter(usize),
    Reset,
    Pause,
    Flick(bool),
    Idle(i64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        Just(Op::Toggle),
        (0usize..150).prop_map(Op::Drag),
        any::<bool>().prop_map(Op::Rotate),
        (0usize..150, 0usize..150).prop_map(|(a, b)| Op::Range(a, b)),
        any::<bool>().prop_map(Op::Zoom),
        (0usize..5, 0usize..5).prop_map(|(v, s)| Op::Sort(v, s)),
        (0usize..5).prop_map(Op::Filter),
        Just(Op::Reset),
        Just(Op::Pause),
        any::<bool>().prop_map(Op::Flick),
        (50i64..400).prop_map(Op::Idle),
    ]
}

fn play(rig: &mut Rig, id: &str, op: &Op) {
    // Gestures the chart refuses still produce valid input frames.
    let _ = match *op {
        Op::Toggle => rig.touch_toggle(id),
        Op::Drag(i) => rig.drag_slice(id, i),
        Op::Rotate(cw) => rig.rotate_quarter(id, if cw { 1.0 } else { -1.0 }),
        Op::Range(a, b) if a != b => rig.pinch_range(id, a.min(b), a.max(b)),
        Op::Range(..) => Ok(()),
        Op::Zoom(zoom_in) => rig.zoom(id, zoom_in),
        Op::Sort(v, s) => rig.move_axis(id, v, s),
        Op::Filter(v) => rig.remove_axis(id, v),
        Op::Reset => rig.cross_fingers(id),
        Op::Pause => rig.stop_sign(id),
        Op::Flick(cw) => rig.flick(id, if cw { 1.0 } else { -1.0 }, 150),
        Op::Idle(ms) => {
            rig.idle(ms);
            Ok(())
        }
    };
}

/// Send `msg` and decode the replies from their JSON text, as a client
/// would see them.
fn send(s: &mut ServiceSession, msg: &ClientMessage) -> Vec<ServerMessage> {
    s.handle_text(&msg.to_json())
        .iter()
        .map(|m| ServerMessage::from_json(&m.to_json()).unwrap())
        .collect()
}

fn snapshot(s: &mut ServiceSession) -> Snapshot {
    match send(s, &ClientMessage::SnapshotRequest {}).as_slice() {
        [ServerMessage::Snapshot(snap)] => snap.clone(),
        other => panic!("{other:?}"),
    }
}

fn check(ops: &[Op], jitter: f64, sensor_seed: u64, every: usize) -> Result<(), TestCaseError> {
    let p = prefix();
    let mut rig = p.rig.clone();
    for op in ops {
        play(&mut rig, &p.chart, op);
    }
    let mut ctx = p.ctx.clone();
    ctx.replay.sensor = SensorModel {
        jitter_std_m: jitter,
        ..SensorModel::default()
    };
    ctx.replay.sensor_seed = sensor_seed;
    let mut s = ServiceSession::new(Arc::new(ctx));
    let hello = send(&mut s, &ClientMessage::Hello { protocol_version: 1 });
    let greeted = matches!(hello.as_slice(), [ServerMessage::Welcome { .. }]);
    prop_assert!(greeted, "{:?}", hello);
    let mut scene = snapshot(&mut s);
    prop_assert!(scene.t_ms.is_none());
    for (i, record) in rig.records().iter().enumerate() {
        let replies = send(&mut s, &ClientMessage::Input { record: record.clone() });
        let (first, rest) = replies.split_first().unwrap();
        let ServerMessage::StateDelta(delta) = first else {
            return Err(TestCaseError::fail(format!("{first:?}")));
        };
        scene.apply(delta);
        prop_assert!(rest.iter().all(|m| matches!(m, ServerMessage::Event(_))));
        if i % every == 0 {
            prop_assert_eq!(&scene, &snapshot(&mut s));
        }
    }
    prop_assert_eq!(&scene, &snapshot(&mut s));
    Ok(())
}

#[test]
fn delta_fold_reproduces_snapshot() {
    let config = Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::from_seed(RngAlgorithm::ChaCha, &[7; 32]);
    let mut runner = TestRunner::new_with_rng(config, rng);
    let strategy = (prop::collection::vec(op(), 1..5), 0.0..0.002f64, any::<u64>(), 1usize..60);
    runner
        .run(&strategy, |(ops, jitter, seed, every)| check(&ops, jitter, seed, every))
        .unwrap();
}
