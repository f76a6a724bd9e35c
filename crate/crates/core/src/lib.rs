//! Headless interaction engine for exploring multivariate time series shown
//! as 3D radar charts with two tracked hands.
//!
//! The crate is organised bottom-up:
//!
//! * [`chart`] : the data model and geometry of a single radar chart
//!   (time axis, radial variable axes, time slice, zoom history).
//! * [`dataset`] : entities, their series, and dataset validation.
//! * [`hand`] : hand skeleton frames and posture classification.
//! * [`tracker`] : a simulated head-mounted hand tracker.
//! * [`engine`] : the state machine turning hands into chart features.
//! * [`session`] : trace/log formats, data generation, replay, statistics.
//! * [`synth`] and [`scenario`] : synthetic hand poses and scripted traces.

pub mod chart;
pub mod dataset;
pub mod engine;
pub mod geom;
pub mod hand;
pub mod scenario;
pub mod session;
pub mod synth;
pub mod tracker;

pub use chart::{ChartConfig, ChartError, ChartInstance, InfoPanel, Mode};
pub use dataset::{Dataset, Entity};
pub use engine::{Engine, EngineConfig, EngineError, EngineState, InputSample, InteractionEvent};
pub use geom::{HeadPose, Vec3};
pub use hand::{HandFrame, Posture, PostureState, Side};
pub use session::{LogRecord, TraceRecord};
pub use tracker::{ObservedHand, SensorModel};
