use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{Agent, AgentParams, ExperimentConfig, SimError};
use crate::engine::{ConnId, Engine, EpisodeRecord, Mode, Poi};
use crate::geometry::Vec3;
use crate::protocol::{
    decode, encode_line, Body, Delivery, Hub, HubConfig, MemoryLog, Role, WireMessage,
};

/// One grid-cell episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec {
    pub episode_id: u64,
    pub poi: Poi,
    pub delta_d_m: f64,
    pub delta_t_ms: u64,
    pub seed: u64,
}

/// One CSV row: a single marker step of an episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub episode_id: u64,
    pub poi_id: String,
    pub delta_d_m: f64,
    pub delta_t_ms: u64,
    pub mode: Mode,
    pub step_index: usize,
    pub marker_id: u64,
    pub t_i_us: Option<i64>,
    /// Time from episode start to the end of this step.
    pub cumulative_us: i64,
    /// Recovery re-placements during this step.
    pub timeouts: u32,
    pub scanpath_len_deg: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub record: EpisodeRecord,
    pub rows: Vec<MetricsRow>,
    /// Session log of the in-process hub, one entry per element.
    pub log: Vec<String>,
    /// Estimated gaze-point speed (m/s) per sample after the start command.
    pub speed_series: Vec<(i64, f64)>,
    pub scanpath_deg: f64,
    /// Noise-free gaze direction when the episode was started.
    pub start_gaze: Vec3,
}

/// Number of alignment pairs the simulated robot reports.
const ALIGN_PAIRS: usize = 6;

struct Client {
    conn: ConnId,
    seq: u64,
}

impl Client {
    fn line(&mut self, ts: i64, body: Body) -> String {
        let line = encode_line(&WireMessage::new(self.seq, ts, body));
        self.seq += 1;
        line
    }
}

struct Harness {
    hub: Hub,
    agent: Agent,
    headset: Client,
    robot: Client,
    observer: Client,
    done: bool,
}

impl Harness {
    fn send(&mut self, who: Role, at: i64, body: Body) -> Result<(), SimError> {
        let client = match who {
            Role::Headset => &mut self.headset,
            Role::Robot => &mut self.robot,
            Role::Observer => &mut self.observer,
        };
        let conn = client.conn;
        let line = client.line(at, body);
        let out = self.hub.on_line(conn, at, &line);
        self.dispatch(at, out)
    }

    fn tick(&mut self, at: i64) -> Result<(), SimError> {
        let out = self.hub.on_tick(at);
        self.dispatch(at, out)
    }

    fn dispatch(&mut self, at: i64, deliveries: Vec<Delivery>) -> Result<(), SimError> {
        for d in deliveries {
            let Delivery::Line { conn, line } = d else {
                continue;
            };
            let msg = decode(line.as_bytes()).expect("hub output always decodes");
            if conn == self.headset.conn {
                self.agent.on_message(&msg.body, at);
            } else if conn == self.observer.conn {
                if let Body::EpisodeDone { .. } = msg.body {
                    self.done = true;
                }
            }
            if let Body::Error { code, msg } = msg.body {
                let what = if conn == self.robot.conn {
                    "robot message"
                } else if conn == self.observer.conn {
                    "episode command"
                } else {
                    "gaze"
                };
                return Err(SimError::Rejected { what, code, msg });
            }
        }
        Ok(())
    }
}

/// Runs one attraction episode: handshake, robot alignment and POI report,
/// warm-up gaze, the start command, then gaze samples and ticks on a fixed
/// sample clock until the engine reports the episode done.
pub fn run_episode(cfg: &ExperimentConfig, spec: &EpisodeSpec) -> Result<EpisodeOutcome, SimError> {
    cfg.validate()?;
    let engine = Engine::new(cfg.cell_engine(spec.delta_d_m, spec.delta_t_ms))?;
    let agent = Agent::new(AgentParams {
        seed: spec.seed,
        ..cfg.agent.clone()
    })?;
    let dt = agent.params().dt_us();

    let log = Arc::new(Mutex::new(MemoryLog::default()));
    let mut hub = Hub::new(
        engine,
        HubConfig::new(format!("sim-{}", spec.episode_id), 0),
        Box::new(log.clone()),
    );
    let (headset, robot, observer) = (hub.connect(), hub.connect(), hub.connect());
    let mut h = Harness {
        hub,
        agent,
        headset: Client {
            conn: headset,
            seq: 0,
        },
        robot: Client {
            conn: robot,
            seq: 0,
        },
        observer: Client {
            conn: observer,
            seq: 0,
        },
        done: false,
    };

    let mut t = 0i64;
    for role in [Role::Headset, Role::Robot, Role::Observer] {
        h.send(role, t, Body::Hello { role })?;
    }

    // The robot reports landmarks in its own frame; the world coordinates
    // come from the shared map.
    let truth = cfg.robot_to_world;
    let to_robot = truth.inverse();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let pairs = (0..ALIGN_PAIRS)
        .map(|_| {
            let w = Vec3::new(
                rng.gen_range(-5.0..5.0),
                rng.gen_range(0.0..3.0),
                rng.gen_range(-5.0..5.0),
            );
            [to_robot.apply(w).into(), w.into()]
        })
        .collect();
    h.send(Role::Robot, t, Body::Align { pairs })?;
    h.send(
        Role::Robot,
        t,
        Body::PoiDetected {
            poi_id: spec.poi.id.clone(),
            pos_robot: to_robot.apply(spec.poi.position).into(),
            label: spec.poi.label.clone(),
        },
    )?;

    let warmup = (cfg.warmup_ms as i64 * 1000 / dt).max(1);
    for _ in 0..warmup {
        t += dt;
        let s = h.agent.step(t, dt);
        h.send(Role::Headset, t, gaze_body(&s))?;
    }

    let start_gaze = h.agent.gaze();
    h.agent.reset_scanpath();
    h.send(
        Role::Observer,
        t,
        Body::StartAttraction {
            poi_id: spec.poi.id.clone(),
            mode: None,
        },
    )?;
    let t_start = t;
    let limit = cfg.max_episode_ms as i64 * 1000;
    let mut speed_series = Vec::new();
    while !h.done {
        if t - t_start > limit {
            return Err(SimError::Stalled {
                episode_id: spec.episode_id,
                limit_ms: cfg.max_episode_ms,
            });
        }
        t += dt;
        let s = h.agent.step(t, dt);
        h.send(Role::Headset, t, gaze_body(&s))?;
        if let Some(k) = h.hub.engine().kinematics().filter(|k| k.ts_us == t) {
            speed_series.push((t, k.speed));
        }
        if !h.done {
            h.tick(t)?;
        }
    }

    let record = h
        .hub
        .engine()
        .last_record()
        .cloned()
        .expect("EPISODE_DONE implies a finished record");
    let scanpath_deg = h.agent.scanpath_deg();
    let rows = rows_for(spec, &record, scanpath_deg);
    drop(h);
    let log = Arc::try_unwrap(log)
        .map(|m| m.into_inner().unwrap_or_default().lines)
        .unwrap_or_else(|shared| shared.lock().map(|l| l.lines.clone()).unwrap_or_default());
    Ok(EpisodeOutcome {
        record,
        rows,
        log,
        speed_series,
        scanpath_deg,
        start_gaze,
    })
}

fn gaze_body(s: &crate::gaze::GazeSample) -> Body {
    Body::Gaze {
        origin: s.ray.origin().into(),
        dir: s.ray.direction().into(),
    }
}

fn rows_for(spec: &EpisodeSpec, rec: &EpisodeRecord, scanpath_deg: f64) -> Vec<MetricsRow> {
    let end = rec.end_us.unwrap_or(rec.start_us);
    rec.steps
        .iter()
        .enumerate()
        .map(|(i, s)| MetricsRow {
            episode_id: spec.episode_id,
            poi_id: rec.poi_id.clone(),
            delta_d_m: spec.delta_d_m,
            delta_t_ms: spec.delta_t_ms,
            mode: rec.mode,
            step_index: i,
            marker_id: s.marker_id,
            t_i_us: s.t_i_us,
            cumulative_us: s.ended_us.unwrap_or(end) - rec.start_us,
            timeouts: s.timeouts,
            scanpath_len_deg: scanpath_deg,
            seed: spec.seed,
        })
        .collect()
}
