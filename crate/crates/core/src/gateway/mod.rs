//! Session host exposing the engine to operator clients.
//!
//! Wire protocol, version 1: each message is a frame of a 4-byte big-endian
//! length and a UTF-8 JSON object tagged by `"type"`. The client opens with
//! `Hello { version }` and the host answers `Welcome`. See [`protocol`] for
//! the command and event schemas.

pub mod engine;
pub mod protocol;
pub mod server;

pub use engine::{replay, Engine, EngineConfig, LoggedCommand};
pub use protocol::{Command, ErrorCode, Event, PROTOCOL_VERSION};
pub use server::{serve, ClockKind, ServerConfig};
