//! Wire format and session layer between headset, robot, observers and
//! the engine.

mod driver;
mod hub;
mod log;
mod message;
pub mod server;

pub use self::driver::{EngineDriver, Stamped};
pub use self::hub::{Delivery, Hub, HubConfig, DEFAULT_GAZE_MAX_HZ};
pub use self::log::{read_log_lines, FileLog, LogEntry, LogSink, MemoryLog, NullLog};
pub use self::message::{
    decode, encode, encode_line, Body, DecodeError, Role, WireMessage, WireVec, MESSAGE_TYPES,
    PROTOCOL_VERSION,
};
