//! JSON messages exchanged with a debugger client, one per WebSocket text
//! frame.

use crate::pipeline::Snapshot;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A 32-bit value written as hex text (`"0x0040001C"` or `"0040001C"`);
/// plain JSON numbers are accepted too.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HexWord(pub u32);

impl Serialize for HexWord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("0x{:08X}", self.0))
    }
}

impl<'de> Deserialize<'de> for HexWord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = HexWord;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a 32-bit hex string or integer")
            }

            fn visit_str<E: de::Error>(self, s: &str) -> Result<HexWord, E> {
                let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
                if digits.is_empty() || digits.len() > 8 {
                    return Err(E::custom(format!("bad hex word `{s}`")));
                }
                u32::from_str_radix(digits, 16)
                    .map(HexWord)
                    .map_err(|_| E::custom(format!("bad hex word `{s}`")))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<HexWord, E> {
                u32::try_from(v).map(HexWord).map_err(|_| E::custom("word out of range"))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<HexWord, E> {
                u32::try_from(v).map(HexWord).map_err(|_| E::custom("word out of range"))
            }
        }
        d.deserialize_any(V)
    }
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Command {
    Reset,
    Load {
        imem: String,
        #[serde(default)]
        dmem: Option<String>,
    },
    Step {
        #[serde(default = "one")]
        n: u64,
    },
    Run,
    Pause,
    SetBreak {
        addr: HexWord,
    },
    ClearBreak {
        addr: HexWord,
    },
    ReadState,
    ReadMem {
        addr: HexWord,
        words: u32,
    },
    WriteMem {
        addr: HexWord,
        words: Vec<HexWord>,
    },
    SetSpeed {
        hz: f64,
    },
    Stats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    BadAddress,
    LoadFailed,
    Busy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Response {
    Ok {
        ok: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        snapshot: Option<Box<Snapshot>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        data: Option<serde_json::Value>,
    },
    Error {
        error: ErrorCode,
        message: String,
    },
}

impl Response {
    pub fn ok(snapshot: Snapshot, data: Option<serde_json::Value>) -> Self {
        Response::Ok { ok: true, snapshot: Some(Box::new(snapshot)), data }
    }

    pub fn error(error: ErrorCode, message: impl Into<String>) -> Self {
        Response::Error { error, message: message.into() }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Response::Ok { .. })
    }

    pub fn snapshot(&self) -> Option<&Snapshot> {
        match self {
            Response::Ok { snapshot, .. } => snapshot.as_deref(),
            Response::Error { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PauseReason {
    Breakpoint,
    Halt,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Paused { reason: PauseReason, snapshot: Box<Snapshot> },
    Running { snapshot: Box<Snapshot> },
}
