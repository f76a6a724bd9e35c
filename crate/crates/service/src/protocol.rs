//! Wire messages between the service and its clients.
//!
//! Every message is one JSON object with a `type` field naming the variant.
//! Clients only ever send raw input frames; the server owns the simulation
//! and answers with state deltas and logged events.

use std::collections::BTreeMap;

use gce_core::chart::{EventWindow, Mode};
use gce_core::engine::{RenderHints, Viewpoint};
use gce_core::session::{LogRecord, Session, TraceRecord};
use gce_core::Dataset;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
#[serde(tag = "type")]
pub enum ClientMessage {
    Hello {
        protocol_version: u32,
    },
    /// Exactly one of `name` and `inline` must be set.
    LoadDataset {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inline: Option<Box<Dataset>>,
    },
    Input {
        record: TraceRecord,
    },
    SnapshotRequest {},
}

const CLIENT_TAGS: [&str; 4] = ["Hello", "LoadDataset", "Input", "SnapshotRequest"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WireError {
    #[error("message is not a JSON object with a string `type`")]
    Untagged,
    #[error("unsupported message type `{0}`")]
    Unsupported(String),
    #[error("malformed {tag}: {message}")]
    Malformed { tag: String, message: String },
}

impl WireError {
    pub fn code(&self) -> ErrorCode {
        match self {
            WireError::Unsupported(_) => ErrorCode::Unsupported,
            WireError::Untagged | WireError::Malformed { .. } => ErrorCode::BadMessage,
        }
    }
}

impl ClientMessage {
    /// Parse one text frame. Unknown tags are told apart from known tags
    /// with bad fields.
    pub fn parse(text: &str) -> Result<Self, WireError> {
        let value: Value = serde_json::from_str(text).map_err(|_| WireError::Untagged)?;
        let tag = value
            .get("type")
            .and_then(Value::as_str)
            .ok_or(WireError::Untagged)?
            .to_string();
        if !CLIENT_TAGS.contains(&tag.as_str()) {
            return Err(WireError::Unsupported(tag));
        }
        serde_json::from_value(value).map_err(|e| WireError::Malformed {
            tag,
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client messages serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum ServerMessage {
    Welcome {
        session_id: String,
        protocol_version: u32,
        dataset: Option<DatasetSummary>,
    },
    StateDelta(StateDelta),
    Event(LogRecord),
    Snapshot(Snapshot),
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerMessage::Error {
            code,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Unsupported,
    BadMessage,
    HelloRequired,
    OutOfOrder,
    VersionMismatch,
    NoDataset,
    UnknownDataset,
    InvalidDataset,
    NonMonotonic,
    InvalidInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub entities: usize,
    pub variables: Vec<String>,
    pub events: usize,
    pub first_timestamp: Option<String>,
    pub last_timestamp: Option<String>,
}

impl DatasetSummary {
    pub fn of(ds: &Dataset) -> Self {
        Self {
            entities: ds.entities.len(),
            variables: ds.variables.clone(),
            events: ds.event_count(),
            first_timestamp: ds.timestamps.first().cloned(),
            last_timestamp: ds.timestamps.last().cloned(),
        }
    }
}

/// What a client needs to draw one chart. Geometry follows from these
/// fields and the chart model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartView {
    pub mode: Mode,
    pub window: EventWindow,
    pub slice: usize,
    pub arrangement: Vec<usize>,
    pub yaw_rad: f64,
    pub selected_range: Option<EventWindow>,
    pub zoom_depth: usize,
    pub hints: RenderHints,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandsView {
    /// Hands are drawn semi-transparent while the session is paused.
    pub semitransparent: bool,
    /// Indexed left, right.
    pub tracked: [bool; 2],
}

/// Full projection of the engine state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t_ms: Option<i64>,
    pub charts: BTreeMap<String, ChartView>,
    /// Floor position of each chart. Fixed for the life of a dataset.
    pub layout: BTreeMap<String, [f64; 2]>,
    pub viewpoint: Viewpoint,
    pub paused: bool,
    pub hands: HandsView,
}

/// Changes since the previous message. Absent fields are unchanged.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StateDelta {
    pub t_ms: i64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub charts: BTreeMap<String, ChartView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewpoint: Option<Viewpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paused: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hands: Option<HandsView>,
}

impl StateDelta {
    pub fn is_empty(&self) -> bool {
        self.charts.is_empty() && self.viewpoint.is_none() && self.paused.is_none() && self.hands.is_none()
    }
}

impl Snapshot {
    pub fn of(session: &Session) -> Self {
        let st = session.state();
        let charts = st
            .charts
            .iter()
            .map(|(id, c)| {
                let view = ChartView {
                    mode: c.mode,
                    window: c.visible_window,
                    slice: c.slice_index,
                    arrangement: c.arrangement.clone(),
                    yaw_rad: c.yaw_rad,
                    selected_range: c.selected_range,
                    zoom_depth: c.zoom_stack.len(),
                    hints: st.render_hints(id),
                };
                (id.clone(), view)
            })
            .collect();
        Self {
            t_ms: st.last_t_ms,
            charts,
            layout: st.layout.clone(),
            viewpoint: st.viewpoint,
            paused: st.paused,
            hands: HandsView {
                semitransparent: st.paused,
                tracked: st.hands_tracked,
            },
        }
    }

    /// The delta that turns `self` into `next`.
    pub fn diff(&self, next: &Snapshot) -> StateDelta {
        let charts = next
            .charts
            .iter()
            .filter(|(id, view)| self.charts.get(*id) != Some(view))
            .map(|(id, view)| (id.clone(), view.clone()))
            .collect();
        StateDelta {
            t_ms: next.t_ms.unwrap_or_default(),
            charts,
            viewpoint: changed(self.viewpoint, next.viewpoint),
            paused: changed(self.paused, next.paused),
            hands: changed(self.hands, next.hands),
        }
    }

    pub fn apply(&mut self, delta: &StateDelta) {
        self.t_ms = Some(delta.t_ms);
        for (id, view) in &delta.charts {
            self.charts.insert(id.clone(), view.clone());
        }
        if let Some(v) = delta.viewpoint {
            self.viewpoint = v;
        }
        if let Some(p) = delta.paused {
            self.paused = p;
        }
        if let Some(h) = delta.hands {
            self.hands = h;
        }
    }
}

fn changed<T: PartialEq>(old: T, new: T) -> Option<T> {
    (old != new).then_some(new)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_tag_is_unsupported() {
        let err = ClientMessage::parse(r#"{"type":"Teleport","x":1}"#).unwrap_err();
        assert_eq!(err.code(), ErrorCode::Unsupported);
        let err = ClientMessage::parse(r#"{"type":"Hello"}"#).unwrap_err();
        assert_eq!(err.code(), ErrorCode::BadMessage);
        let err = ClientMessage::parse("[1,2]").unwrap_err();
        assert_eq!(err, WireError::Untagged);
    }

    #[test]
    fn client_messages_round_trip() {
        let msgs = [
            ClientMessage::Hello { protocol_version: 1 },
            ClientMessage::LoadDataset {
                name: Some("default".into()),
                inline: None,
            },
            ClientMessage::SnapshotRequest {},
        ];
        for m in msgs {
            assert_eq!(ClientMessage::parse(&m.to_json()).unwrap(), m);
        }
        assert_eq!(
            ClientMessage::SnapshotRequest {}.to_json(),
            r#"{"type":"SnapshotRequest"}"#
        );
    }

    #[test]
    fn error_shape() {
        let e = ServerMessage::error(ErrorCode::NonMonotonic, "t went back");
        assert_eq!(e.to_json(), r#"{"type":"Error","code":"non_monotonic","message":"t went back"}"#);
    }
}
