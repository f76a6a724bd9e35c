//! One client's session: handshake, dataset, engine and event log.
//!
//! Hello answers Welcome, loading the service's default dataset if it has
//! one. LoadDataset replaces the engine session and answers Welcome with the
//! new dataset summary followed by a fresh Snapshot.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use gce_core::dataset::Dataset;
use gce_core::engine::EngineError;
use gce_core::session::{generate_dataset, GenParams, ReplayConfig, Session, SessionError, TraceRecord};

use crate::protocol::{ClientMessage, DatasetSummary, ErrorCode, ServerMessage, Snapshot, PROTOCOL_VERSION};

/// Prefix of dataset names generated on request, followed by the seed.
pub const GEN_PREFIX: &str = "gen:";

/// Shared by every session of one service.
#[derive(Debug, Clone)]
pub struct ServiceContext {
    pub replay: ReplayConfig,
    /// Datasets clients may load by name.
    pub datasets: BTreeMap<String, Arc<Dataset>>,
    /// Loaded at Hello when set.
    pub default_dataset: Option<String>,
    /// One `<session_id>.jsonl` event log per session goes here.
    pub log_dir: Option<PathBuf>,
}

impl ServiceContext {
    pub fn with_dataset(name: &str, ds: Dataset) -> Self {
        Self {
            replay: ReplayConfig::default(),
            datasets: BTreeMap::from([(name.to_string(), Arc::new(ds))]),
            default_dataset: Some(name.to_string()),
            log_dir: None,
        }
    }

    fn resolve(&self, name: &str) -> Result<Arc<Dataset>, Refusal> {
        if let Some(ds) = self.datasets.get(name) {
            return Ok(ds.clone());
        }
        if let Some(seed) = name.strip_prefix(GEN_PREFIX) {
            let seed = seed
                .parse()
                .map_err(|_| Refusal::new(ErrorCode::UnknownDataset, format!("bad seed in `{name}`")))?;
            let ds = generate_dataset(&GenParams {
                seed,
                ..GenParams::default()
            })
            .map_err(|e| Refusal::new(ErrorCode::InvalidDataset, e.to_string()))?;
            return Ok(Arc::new(ds));
        }
        Err(Refusal::new(ErrorCode::UnknownDataset, format!("no dataset named `{name}`")))
    }
}

/// A request the session turns down, sent back as an Error message.
#[derive(Debug)]
struct Refusal {
    code: ErrorCode,
    message: String,
}

impl Refusal {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Refusal> for ServerMessage {
    fn from(r: Refusal) -> Self {
        ServerMessage::Error {
            code: r.code,
            message: r.message,
        }
    }
}

struct Live {
    session: Session,
    scene: Snapshot,
}

pub struct ServiceSession {
    id: String,
    ctx: Arc<ServiceContext>,
    greeted: bool,
    live: Option<Live>,
    log: Option<BufWriter<File>>,
}

impl ServiceSession {
    pub fn new(ctx: Arc<ServiceContext>) -> Self {
        Self::with_id(ctx, uuid::Uuid::new_v4().to_string())
    }

    pub fn with_id(ctx: Arc<ServiceContext>, id: String) -> Self {
        Self {
            id,
            ctx,
            greeted: false,
            live: None,
            log: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// The engine session, once a dataset is loaded.
    pub fn session(&self) -> Option<&Session> {
        self.live.as_ref().map(|l| &l.session)
    }

    /// Handle one text frame.
    pub fn handle_text(&mut self, text: &str) -> Vec<ServerMessage> {
        match ClientMessage::parse(text) {
            Ok(msg) => self.handle(msg),
            Err(e) => vec![ServerMessage::error(e.code(), e.to_string())],
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        match msg {
            ClientMessage::Hello { protocol_version } => self.hello(protocol_version),
            _ if !self.greeted => vec![ServerMessage::error(ErrorCode::HelloRequired, "send Hello first")],
            ClientMessage::LoadDataset { name, inline } => self.load(name, inline),
            ClientMessage::Input { record } => self.input(&record),
            ClientMessage::SnapshotRequest {} => match &self.live {
                Some(live) => vec![ServerMessage::Snapshot(live.scene.clone())],
                None => vec![no_dataset()],
            },
        }
    }

    fn hello(&mut self, version: u32) -> Vec<ServerMessage> {
        if self.greeted {
            return vec![ServerMessage::error(ErrorCode::OutOfOrder, "Hello already received")];
        }
        if version != PROTOCOL_VERSION {
            return vec![ServerMessage::error(
                ErrorCode::VersionMismatch,
                format!("server speaks protocol {PROTOCOL_VERSION}, client sent {version}"),
            )];
        }
        self.greeted = true;
        if let Some(name) = self.ctx.default_dataset.clone() {
            match self.ctx.resolve(&name) {
                Ok(ds) => {
                    if let Err(e) = self.start(ds) {
                        return vec![e.into()];
                    }
                }
                Err(e) => return vec![e.into()],
            }
        }
        vec![self.welcome()]
    }

    fn welcome(&self) -> ServerMessage {
        ServerMessage::Welcome {
            session_id: self.id.clone(),
            protocol_version: PROTOCOL_VERSION,
            dataset: self
                .live
                .as_ref()
                .map(|l| DatasetSummary::of(l.session.engine().dataset())),
        }
    }

    fn load(&mut self, name: Option<String>, inline: Option<Box<Dataset>>) -> Vec<ServerMessage> {
        let ds = match (name, inline) {
            (Some(name), None) => self.ctx.resolve(&name),
            (None, Some(ds)) => ds
                .validate()
                .map(|_| Arc::new(*ds))
                .map_err(|e| Refusal::new(ErrorCode::InvalidDataset, e.to_string())),
            _ => Err(Refusal::new(ErrorCode::BadMessage, "LoadDataset needs exactly one of name and inline")),
        };
        match ds.and_then(|ds| self.start(ds)) {
            Ok(()) => vec![self.welcome(), ServerMessage::Snapshot(self.live.as_ref().expect("started").scene.clone())],
            Err(e) => vec![e.into()],
        }
    }

    fn start(&mut self, ds: Arc<Dataset>) -> Result<(), Refusal> {
        let cfg = ReplayConfig {
            session_id: self.id.clone(),
            ..self.ctx.replay.clone()
        };
        let session = Session::new(ds, &cfg).map_err(|e| Refusal::new(ErrorCode::InvalidDataset, e.to_string()))?;
        let scene = Snapshot::of(&session);
        self.live = Some(Live { session, scene });
        if self.log.is_none() {
            if let Some(dir) = &self.ctx.log_dir {
                let path = dir.join(format!("{}.jsonl", self.id));
                match File::create(&path) {
                    Ok(f) => self.log = Some(BufWriter::new(f)),
                    Err(e) => tracing::warn!("cannot open log {}: {e}", path.display()),
                }
            }
        }
        Ok(())
    }

    fn input(&mut self, record: &TraceRecord) -> Vec<ServerMessage> {
        let Some(live) = &mut self.live else {
            return vec![no_dataset()];
        };
        let out = match live.session.feed(record) {
            Ok(out) => out,
            Err(SessionError::Engine(e @ EngineError::NonMonotonicTime { .. })) => {
                return vec![ServerMessage::error(ErrorCode::NonMonotonic, e.to_string())]
            }
            Err(e) => return vec![ServerMessage::error(ErrorCode::InvalidInput, e.to_string())],
        };
        let scene = Snapshot::of(&live.session);
        let delta = live.scene.diff(&scene);
        live.scene = scene;
        if let Some(log) = &mut self.log {
            for r in &out.records {
                if let Err(e) = writeln!(log, "{}", r.to_line()) {
                    tracing::warn!("log write failed: {e}");
                }
            }
            if !out.records.is_empty() {
                let _ = log.flush();
            }
        }
        let mut replies = Vec::with_capacity(out.records.len() + 1);
        replies.push(ServerMessage::StateDelta(delta));
        replies.extend(out.records.into_iter().map(ServerMessage::Event));
        replies
    }
}

impl Drop for ServiceSession {
    fn drop(&mut self) {
        if let Some(log) = &mut self.log {
            let _ = log.flush();
        }
    }
}

fn no_dataset() -> ServerMessage {
    ServerMessage::error(ErrorCode::NoDataset, "load a dataset first")
}

/// Handle one client message for `session`.
pub fn handle_message(session: &mut ServiceSession, msg: ClientMessage) -> Vec<ServerMessage> {
    session.handle(msg)
}
