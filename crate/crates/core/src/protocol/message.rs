//! Newline-delimited JSON wire format, version 1.
//!
//! Every message is one JSON object on one line:
//! `{"v":1,"type":"GAZE","seq":7,"ts":1200000,"origin":[0,1.6,0],"dir":[0,0,1]}`.
//! The envelope keys always come first, in the order `v, type, seq, ts`,
//! followed by the payload fields of the type.

use serde::de::{self, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::engine::{MarkerKind, Mode};
use crate::geometry::Vec3;

pub const PROTOCOL_VERSION: u64 = 1;

/// Largest magnitude for which an integral float is written as a JSON integer.
const MAX_EXACT_INT: f64 = 9_007_199_254_740_992.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Headset,
    Robot,
    Observer,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Headset => "headset",
            Role::Robot => "robot",
            Role::Observer => "observer",
        }
    }
}

/// A 3-vector on the wire: `[x, y, z]`, integral values written without a
/// fractional part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireVec(pub Vec3);

impl From<Vec3> for WireVec {
    fn from(v: Vec3) -> Self {
        WireVec(v)
    }
}

impl From<WireVec> for Vec3 {
    fn from(v: WireVec) -> Self {
        v.0
    }
}

fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < MAX_EXACT_INT {
        Value::from(v as i64)
    } else {
        serde_json::Number::from_f64(v)
            .map(Value::Number)
            .unwrap_or(Value::Null)
    }
}

impl Serialize for WireVec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [number(self.0.x), number(self.0.y), number(self.0.z)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for WireVec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = WireVec;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an array of three finite numbers")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<WireVec, A::Error> {
                let mut c = [0.0; 3];
                for (i, slot) in c.iter_mut().enumerate() {
                    *slot = seq
                        .next_element::<f64>()?
                        .ok_or_else(|| de::Error::invalid_length(i, &self))?;
                    if !slot.is_finite() {
                        return Err(de::Error::custom("non-finite component"));
                    }
                }
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(4, &self));
                }
                Ok(WireVec(c.into()))
            }
        }
        d.deserialize_seq(V)
    }
}

/// Type-specific payload. The serde tag doubles as the wire `type` field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Body {
    Hello {
        role: Role,
    },
    Welcome {
        session_id: String,
        epoch_ts: i64,
    },
    Gaze {
        origin: WireVec,
        dir: WireVec,
    },
    PoiDetected {
        poi_id: String,
        pos_robot: WireVec,
        #[serde(default)]
        label: String,
    },
    Align {
        pairs: Vec<[WireVec; 2]>,
    },
    MarkerPlace {
        marker_id: u64,
        pos: WireVec,
        half: WireVec,
        kind: MarkerKind,
    },
    MarkerMove {
        marker_id: u64,
        pos: WireVec,
    },
    MarkerRemove {
        marker_id: u64,
    },
    GazeConfirmed {
        marker_id: u64,
        t_i_us: i64,
    },
    EpisodeDone {
        poi_id: String,
        total_us: i64,
        steps: u32,
        timeouts: u32,
        success: bool,
    },
    Error {
        code: String,
        msg: String,
    },
    /// Observer command: begin an attraction episode toward a known POI.
    StartAttraction {
        poi_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mode: Option<Mode>,
    },
    /// Observer command: divert the current fixation, then attract.
    StartShift {
        poi_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mode: Option<Mode>,
    },
}

pub const MESSAGE_TYPES: &[&str] = &[
    "HELLO",
    "WELCOME",
    "GAZE",
    "POI_DETECTED",
    "ALIGN",
    "MARKER_PLACE",
    "MARKER_MOVE",
    "MARKER_REMOVE",
    "GAZE_CONFIRMED",
    "EPISODE_DONE",
    "ERROR",
    "START_ATTRACTION",
    "START_SHIFT",
];

impl Body {
    pub fn type_name(&self) -> &'static str {
        match self {
            Body::Hello { .. } => "HELLO",
            Body::Welcome { .. } => "WELCOME",
            Body::Gaze { .. } => "GAZE",
            Body::PoiDetected { .. } => "POI_DETECTED",
            Body::Align { .. } => "ALIGN",
            Body::MarkerPlace { .. } => "MARKER_PLACE",
            Body::MarkerMove { .. } => "MARKER_MOVE",
            Body::MarkerRemove { .. } => "MARKER_REMOVE",
            Body::GazeConfirmed { .. } => "GAZE_CONFIRMED",
            Body::EpisodeDone { .. } => "EPISODE_DONE",
            Body::Error { .. } => "ERROR",
            Body::StartAttraction { .. } => "START_ATTRACTION",
            Body::StartShift { .. } => "START_SHIFT",
        }
    }

    pub fn error(code: &str, msg: impl Into<String>) -> Body {
        Body::Error {
            code: code.to_string(),
            msg: msg.into(),
        }
    }

    /// Marker traffic goes to the headset as well as observers.
    pub fn is_marker(&self) -> bool {
        matches!(
            self,
            Body::MarkerPlace { .. } | Body::MarkerMove { .. } | Body::MarkerRemove { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WireMessage {
    /// Per-sender, strictly increasing.
    pub seq: u64,
    /// Microseconds since the session epoch.
    pub ts: i64,
    pub body: Body,
}

impl WireMessage {
    pub fn new(seq: u64, ts: i64, body: Body) -> Self {
        WireMessage { seq, ts, body }
    }

    pub fn type_name(&self) -> &'static str {
        self.body.type_name()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("unsupported protocol version {0}")]
    BadVersion(String),
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("sequence number {got} does not follow {last}")]
    NonMonotonicSeq { last: u64, got: u64 },
}

impl DecodeError {
    /// Short machine-readable code used in `ERROR` messages.
    pub fn code(&self) -> &'static str {
        match self {
            DecodeError::BadVersion(_) => "bad-version",
            DecodeError::UnknownType(_) => "unknown-type",
            DecodeError::SchemaViolation(_) => "schema-violation",
            DecodeError::NonMonotonicSeq { .. } => "non-monotonic-seq",
        }
    }
}

/// Encodes without the trailing newline.
pub fn encode_line(m: &WireMessage) -> String {
    let payload = match serde_json::to_value(&m.body) {
        Ok(Value::Object(map)) => map,
        // Body is always an internally tagged struct variant.
        _ => unreachable!("message bodies serialize to objects"),
    };
    let mut out = Map::with_capacity(payload.len() + 3);
    out.insert("v".into(), Value::from(PROTOCOL_VERSION));
    out.insert("type".into(), Value::from(m.body.type_name()));
    out.insert("seq".into(), Value::from(m.seq));
    out.insert("ts".into(), Value::from(m.ts));
    for (k, v) in payload {
        if k != "type" {
            out.insert(k, v);
        }
    }
    Value::Object(out).to_string()
}

/// One UTF-8 JSON object terminated by LF.
pub fn encode(m: &WireMessage) -> Vec<u8> {
    let mut line = encode_line(m).into_bytes();
    line.push(b'\n');
    line
}

fn schema(msg: impl Into<String>) -> DecodeError {
    DecodeError::SchemaViolation(msg.into())
}

/// Parses and validates one line (a trailing LF or CRLF is allowed).
pub fn decode(line: &[u8]) -> Result<WireMessage, DecodeError> {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    let line = line.strip_suffix(b"\r").unwrap_or(line);
    if line.contains(&b'\n') {
        return Err(schema("embedded newline"));
    }
    let text = std::str::from_utf8(line).map_err(|_| schema("line is not UTF-8"))?;
    let value: Value =
        serde_json::from_str(text).map_err(|e| schema(format!("malformed JSON: {e}")))?;
    let Value::Object(obj) = value else {
        return Err(schema("message is not a JSON object"));
    };
    match obj.get("v") {
        None => return Err(schema("missing field `v`")),
        Some(v) if v.as_u64() == Some(PROTOCOL_VERSION) => {}
        Some(v) => return Err(DecodeError::BadVersion(v.to_string())),
    }
    let type_name = match obj.get("type") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(schema("field `type` must be a string")),
        None => return Err(schema("missing field `type`")),
    };
    if !MESSAGE_TYPES.contains(&type_name.as_str()) {
        return Err(DecodeError::UnknownType(type_name));
    }
    let seq = obj
        .get("seq")
        .ok_or_else(|| schema("missing field `seq`"))?
        .as_u64()
        .ok_or_else(|| schema("field `seq` must be a non-negative integer"))?;
    let ts = obj
        .get("ts")
        .ok_or_else(|| schema("missing field `ts`"))?
        .as_i64()
        .ok_or_else(|| schema("field `ts` must be an integer"))?;
    let body: Body = serde_json::from_value(Value::Object(obj))
        .map_err(|e| schema(format!("{type_name}: {e}")))?;
    Ok(WireMessage { seq, ts, body })
}
