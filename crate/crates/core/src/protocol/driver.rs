use crate::engine::{ConnId, Engine, EngineEvent};
use crate::gaze::GazeSample;
use crate::geometry::Ray;

use super::message::{encode_line, Body, WireMessage};

/// An outbound message with its encoded line (no trailing LF).
#[derive(Debug, Clone, PartialEq)]
pub struct Stamped {
    pub to: Option<ConnId>,
    pub message: WireMessage,
    pub line: String,
}

/// Wraps the engine with the outbound sequence counter, turning inbound wire
/// messages into engine events and engine emissions into wire lines.
///
/// All outbound traffic of a session (engine emissions and session-layer
/// replies) shares one counter, so `seq` is strictly increasing on every
/// connection.
#[derive(Debug)]
pub struct EngineDriver {
    engine: Engine,
    next_seq: u64,
    consumed: u64,
}

impl EngineDriver {
    pub fn new(engine: Engine) -> Self {
        EngineDriver {
            engine,
            next_seq: 0,
            consumed: 0,
        }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut Engine {
        &mut self.engine
    }

    /// Number of engine-bound events (messages and ticks) processed so far.
    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn stamp(&mut self, at: i64, to: Option<ConnId>, body: Body) -> Stamped {
        let message = WireMessage::new(self.next_seq, at, body);
        self.next_seq += 1;
        let line = encode_line(&message);
        Stamped { to, message, line }
    }

    /// Ensures later stamps use sequence numbers above `seq`.
    pub fn reserve_through(&mut self, seq: u64) {
        self.next_seq = self.next_seq.max(seq + 1);
    }

    /// Whether `body` is something the engine consumes.
    pub fn is_engine_bound(body: &Body) -> bool {
        matches!(
            body,
            Body::Gaze { .. }
                | Body::PoiDetected { .. }
                | Body::Align { .. }
                | Body::StartAttraction { .. }
                | Body::StartShift { .. }
        )
    }

    pub fn feed(&mut self, at: i64, from: ConnId, msg: &WireMessage) -> Vec<Stamped> {
        self.consumed += 1;
        let event = match &msg.body {
            Body::Gaze { origin, dir } => match Ray::new(origin.0, dir.0) {
                Ok(ray) => EngineEvent::Gaze(GazeSample::new(msg.ts, ray)),
                Err(e) => {
                    return vec![self.stamp(
                        at,
                        Some(from),
                        Body::error("invalid-gaze", e.to_string()),
                    )]
                }
            },
            Body::PoiDetected {
                poi_id,
                pos_robot,
                label,
            } => EngineEvent::PoiDetected {
                poi_id: poi_id.clone(),
                pos_robot: pos_robot.0,
                label: label.clone(),
            },
            Body::Align { pairs } => EngineEvent::Align {
                pairs: pairs.iter().map(|[r, w]| (r.0, w.0)).collect(),
            },
            Body::StartAttraction { poi_id, mode } => EngineEvent::StartAttraction {
                poi_id: poi_id.clone(),
                mode: *mode,
            },
            Body::StartShift { poi_id, mode } => EngineEvent::StartShift {
                poi_id: poi_id.clone(),
                mode: *mode,
            },
            other => {
                return vec![self.stamp(
                    at,
                    Some(from),
                    Body::error(
                        "role-violation",
                        format!("{} is not an engine input", other.type_name()),
                    ),
                )]
            }
        };
        let emissions = self.engine.handle(at, event, Some(from));
        emissions
            .into_iter()
            .map(|e| self.stamp(at, e.to, e.body))
            .collect()
    }

    pub fn tick(&mut self, at: i64) -> Vec<Stamped> {
        self.consumed += 1;
        let emissions = self.engine.handle(at, EngineEvent::Tick, None);
        emissions
            .into_iter()
            .map(|e| self.stamp(at, e.to, e.body))
            .collect()
    }
}
