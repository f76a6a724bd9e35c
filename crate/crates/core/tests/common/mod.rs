#![allow(dead_code)]

use std::sync::Arc;

use gce_core::dataset::Dataset;
use gce_core::engine::EngineConfig;
use gce_core::scenario::{segments, Rig};
use gce_core::session::{generate_dataset, GenParams, LogRecord, ReplayConfig, Session};

/// Four charts on a 2 x 2 grid, the rig standing at the easternmost one.
pub struct Bench {
    pub ds: Arc<Dataset>,
    pub cfg: ReplayConfig,
    pub rig: Rig,
    /// Chart the rig stands at.
    pub a: String,
    /// Its nearest neighbour.
    pub b: String,
}

impl Bench {
    pub fn new() -> Self {
        Self::with_config(ReplayConfig::default())
    }

    pub fn with_engine(engine: EngineConfig) -> Self {
        Self::with_config(ReplayConfig {
            engine,
            ..ReplayConfig::default()
        })
    }

    pub fn with_config(cfg: ReplayConfig) -> Self {
        let ds = Arc::new(small_dataset(4, 11));
        let a = ds
            .entities
            .iter()
            .max_by(|p, q| p.x.total_cmp(&q.x).then(q.y.total_cmp(&p.y)))
            .unwrap();
        let b = ds
            .entities
            .iter()
            .filter(|e| e.id != a.id)
            .min_by(|p, q| {
                let d = |e: &&gce_core::dataset::Entity| (e.x - a.x).hypot(e.y - a.y);
                d(p).total_cmp(&d(q))
            })
            .unwrap();
        let (a, b) = (a.id.clone(), b.id.clone());
        let mut rig = Rig::new(ds.clone(), &cfg.engine).unwrap();
        rig.idle(200);
        rig.mark("approach");
        rig.travel(&a).unwrap();
        rig.stance(&a).unwrap();
        Self { ds, cfg, rig, a, b }
    }

    /// Replay everything scripted so far.
    pub fn run(&self) -> (Vec<LogRecord>, Session) {
        let mut session = Session::new(self.ds.clone(), &self.cfg).unwrap();
        let mut log = Vec::new();
        for r in self.rig.records() {
            log.extend(session.feed(r).unwrap().records);
        }
        (log, session)
    }
}

pub fn small_dataset(entities: usize, seed: u64) -> Dataset {
    generate_dataset(&GenParams {
        entities,
        seed,
        ..GenParams::default()
    })
    .unwrap()
}

/// Events logged under marker `label`.
pub fn segment(log: &[LogRecord], label: &str) -> Vec<LogRecord> {
    segments(log)
        .into_iter()
        .find(|(l, _)| l == label)
        .map(|(_, s)| s.into_iter().cloned().collect())
        .unwrap_or_default()
}

pub fn names(seg: &[LogRecord]) -> Vec<&str> {
    seg.iter().map(|r| r.event.as_str()).collect()
}

pub fn count(seg: &[LogRecord], event: &str) -> usize {
    seg.iter().filter(|r| r.event == event).count()
}

pub mod props;
