//! Transport-independent session layer.
//!
//! The hub owns the engine and sees every inbound line, tick and connection
//! change in one total order. Transports feed it and carry out the returned
//! [`Delivery`] instructions.

use std::collections::BTreeMap;

use log::{debug, warn};

use super::driver::{EngineDriver, Stamped};
use super::log::{LogEntry, LogSink};
use super::message::{decode, Body, DecodeError, Role, WireMessage};
use crate::engine::{ConnId, Engine, Phase, Poi};

pub const DEFAULT_GAZE_MAX_HZ: f64 = 120.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Delivery {
    Line {
        conn: ConnId,
        line: String,
    },
    /// Flush pending lines, then close.
    Close {
        conn: ConnId,
    },
}

#[derive(Debug, Clone)]
pub struct HubConfig {
    pub session_id: String,
    /// Wall-clock anchor of the session (Unix µs), reported in WELCOME.
    pub epoch_unix_us: i64,
    pub gaze_max_hz: f64,
}

impl HubConfig {
    pub fn new(session_id: impl Into<String>, epoch_unix_us: i64) -> Self {
        HubConfig {
            session_id: session_id.into(),
            epoch_unix_us,
            gaze_max_hz: DEFAULT_GAZE_MAX_HZ,
        }
    }
}

#[derive(Debug, Default)]
struct Conn {
    role: Option<Role>,
    last_seq: Option<u64>,
    last_gaze_ts: Option<i64>,
}

pub struct Hub {
    driver: EngineDriver,
    cfg: HubConfig,
    conns: BTreeMap<ConnId, Conn>,
    next_conn: ConnId,
    log: Box<dyn LogSink>,
    dropped_gaze: u64,
}

fn role_allows(role: Role, body: &Body) -> bool {
    match role {
        Role::Headset => matches!(body, Body::Gaze { .. }),
        Role::Robot => matches!(body, Body::PoiDetected { .. } | Body::Align { .. }),
        Role::Observer => matches!(body, Body::StartAttraction { .. } | Body::StartShift { .. }),
    }
}

impl Hub {
    /// Creates the hub and writes the session header to `log`.
    pub fn new(engine: Engine, cfg: HubConfig, log: Box<dyn LogSink>) -> Self {
        let mut hub = Hub {
            driver: EngineDriver::new(engine),
            cfg,
            conns: BTreeMap::new(),
            next_conn: 1,
            log,
            dropped_gaze: 0,
        };
        let pois: Vec<Poi> = hub.driver.engine().pois().cloned().collect();
        hub.record(LogEntry::Start {
            at: 0,
            session_id: hub.cfg.session_id.clone(),
            epoch_ts: hub.cfg.epoch_unix_us,
            engine: hub.driver.engine().config().clone(),
            pois,
        });
        hub
    }

    pub fn engine(&self) -> &Engine {
        self.driver.engine()
    }

    pub fn session_id(&self) -> &str {
        &self.cfg.session_id
    }

    /// GAZE lines discarded by the rate limiter.
    pub fn dropped_gaze(&self) -> u64 {
        self.dropped_gaze
    }

    pub fn role_of(&self, conn: ConnId) -> Option<Role> {
        self.conns.get(&conn).and_then(|c| c.role)
    }

    /// Whether ticks currently matter to the engine.
    pub fn wants_ticks(&self) -> bool {
        self.driver.engine().phase() == Phase::AwaitingGaze
    }

    fn record(&mut self, entry: LogEntry) {
        if let Err(e) = self.log.append(&entry) {
            warn!("session log write failed: {e}");
        }
    }

    pub fn connect(&mut self) -> ConnId {
        let id = self.next_conn;
        self.next_conn += 1;
        self.conns.insert(id, Conn::default());
        debug!("conn {id} opened");
        id
    }

    pub fn disconnect(&mut self, conn: ConnId) {
        if self.conns.remove(&conn).is_some() {
            debug!("conn {conn} closed");
        }
    }

    fn session_reply(&mut self, at: i64, conn: ConnId, body: Body) -> Delivery {
        let stamped = self.driver.stamp(at, Some(conn), body);
        self.record(LogEntry::Session {
            at,
            conn,
            line: stamped.line.clone(),
        });
        Delivery::Line {
            conn,
            line: stamped.line,
        }
    }

    fn reject(
        &mut self,
        at: i64,
        conn: ConnId,
        line: &str,
        code: &str,
        msg: String,
        close: bool,
    ) -> Vec<Delivery> {
        self.record(LogEntry::Ctl {
            at,
            conn,
            line: line.to_string(),
            note: code.to_string(),
        });
        let mut out = vec![self.session_reply(at, conn, Body::error(code, msg))];
        if close {
            self.disconnect(conn);
            out.push(Delivery::Close { conn });
        }
        out
    }

    /// Routes engine output: marker traffic to the headset and observers,
    /// addressed errors to their target, everything else to observers.
    fn fan_out(&mut self, at: i64, stamped: Vec<Stamped>) -> Vec<Delivery> {
        let n = self.driver.consumed();
        let mut out = Vec::new();
        for s in stamped {
            self.record(LogEntry::Out {
                at,
                to: s.to,
                n,
                line: s.line.clone(),
            });
            if let Some(target) = s.to {
                if self.conns.contains_key(&target) {
                    out.push(Delivery::Line {
                        conn: target,
                        line: s.line,
                    });
                }
                continue;
            }
            let to_headset = s.message.body.is_marker();
            for (&id, c) in &self.conns {
                let wanted = match c.role {
                    Some(Role::Observer) => true,
                    Some(Role::Headset) => to_headset,
                    _ => false,
                };
                if wanted {
                    out.push(Delivery::Line {
                        conn: id,
                        line: s.line.clone(),
                    });
                }
            }
        }
        out
    }

    /// Processes one inbound line from `conn` received at server time `at`.
    pub fn on_line(&mut self, conn: ConnId, at: i64, line: &str) -> Vec<Delivery> {
        let line = line.trim_end_matches(['\n', '\r']);
        if !self.conns.contains_key(&conn) {
            return Vec::new();
        }
        let msg = match decode(line.as_bytes()) {
            Ok(m) => m,
            Err(e) => return self.reject(at, conn, line, e.code(), e.to_string(), false),
        };
        let (role, last_seq) = {
            let c = self.conns.get(&conn).expect("checked above");
            (c.role, c.last_seq)
        };
        if let Some(last) = last_seq {
            if msg.seq <= last {
                let e = DecodeError::NonMonotonicSeq { last, got: msg.seq };
                return self.reject(at, conn, line, e.code(), e.to_string(), false);
            }
        }
        self.conns.get_mut(&conn).expect("checked above").last_seq = Some(msg.seq);

        match (role, &msg.body) {
            (None, Body::Hello { role }) => self.hello(conn, at, line, *role),
            (None, _) => self.reject(
                at,
                conn,
                line,
                "handshake-required",
                "first message must be HELLO".into(),
                true,
            ),
            (Some(_), Body::Hello { .. }) => self.reject(
                at,
                conn,
                line,
                "role-violation",
                "duplicate HELLO".into(),
                true,
            ),
            (Some(role), body) if !role_allows(role, body) => self.reject(
                at,
                conn,
                line,
                "role-violation",
                format!("{} may not send {}", role.as_str(), body.type_name()),
                true,
            ),
            (Some(role), _) => self.forward(conn, at, line, role, &msg),
        }
    }

    fn hello(&mut self, conn: ConnId, at: i64, line: &str, role: Role) -> Vec<Delivery> {
        let unique = matches!(role, Role::Headset | Role::Robot);
        if unique && self.conns.values().any(|c| c.role == Some(role)) {
            return self.reject(
                at,
                conn,
                line,
                "role-taken",
                format!("a {} is already connected", role.as_str()),
                true,
            );
        }
        self.conns.get_mut(&conn).expect("caller checked").role = Some(role);
        self.record(LogEntry::Ctl {
            at,
            conn,
            line: line.to_string(),
            note: "hello".into(),
        });
        let welcome = Body::Welcome {
            session_id: self.cfg.session_id.clone(),
            epoch_ts: self.cfg.epoch_unix_us,
        };
        vec![self.session_reply(at, conn, welcome)]
    }

    fn forward(
        &mut self,
        conn: ConnId,
        at: i64,
        line: &str,
        role: Role,
        msg: &WireMessage,
    ) -> Vec<Delivery> {
        if let Body::Gaze { .. } = msg.body {
            let min_gap = (1e6 / self.cfg.gaze_max_hz).round() as i64;
            let c = self.conns.get_mut(&conn).expect("caller checked");
            if let Some(prev) = c.last_gaze_ts {
                if msg.ts - prev < min_gap {
                    self.dropped_gaze += 1;
                    self.record(LogEntry::Ctl {
                        at,
                        conn,
                        line: line.to_string(),
                        note: "rate-limited".into(),
                    });
                    return Vec::new();
                }
            }
            c.last_gaze_ts = Some(msg.ts);
        }
        self.record(LogEntry::In {
            at,
            conn,
            role,
            line: line.to_string(),
        });
        let stamped = self.driver.feed(at, conn, msg);
        self.fan_out(at, stamped)
    }

    /// Advances the engine clock. Ticks are only delivered (and logged)
    /// while a marker is waiting, since the engine ignores them otherwise.
    pub fn on_tick(&mut self, at: i64) -> Vec<Delivery> {
        if !self.wants_ticks() {
            return Vec::new();
        }
        self.record(LogEntry::Tick { at });
        let stamped = self.driver.tick(at);
        self.fan_out(at, stamped)
    }
}
