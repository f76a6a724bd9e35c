//! Session service for the gesture interaction engine.
//!
//! [`protocol`] defines the JSON messages, [`session`] runs one client's
//! engine session, [`server`] exposes sessions over WebSockets and [`cli`]
//! is the `gce` command line.

pub mod cli;
pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, ServerMessage, PROTOCOL_VERSION};
pub use session::{handle_message, ServiceContext, ServiceSession};
