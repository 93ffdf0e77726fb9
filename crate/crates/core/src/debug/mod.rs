//! Interactive debugging over WebSocket.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{Command, ErrorCode, Event, HexWord, PauseReason, Response};
pub use server::{serve, DEFAULT_PORT};
pub use session::{DebugSession, Mode};
