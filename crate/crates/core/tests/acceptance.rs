//! Acceptance suite. Runs every criterion at its stated tolerance, prints
//! one line per criterion and exits non-zero if any fails.

mod common;

use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use gazecue::engine::{adapt_interval, waypoint_count, EngineConfig, IntervalPolicy};
use gazecue::gaze::{
    estimate_kinematics, push_sample, DwellParams, DwellState, GazeSample, GazeTrack,
};
use gazecue::geometry::{
    align_frames, ray_aabb_intersect, rms_residual, Aabb, Ray, RigidTransform, Vec3,
};
use gazecue::protocol::{decode, encode, Body, LogEntry};
use gazecue::sim::{replay, run_episode, sweep_rows, AgentParams, EpisodeSpec, ExperimentConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use common::{dwell_scan, march, random_message, unit};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn raycast() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut disagree, mut hits, mut worst) = (0, 0, 0.0f64);
    for _ in 0..10_000 {
        let o = [
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        ];
        let c: [f64; 3] = [
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        ];
        let h = [
            rng.gen_range(0.05..1.0),
            rng.gen_range(0.05..1.0),
            rng.gen_range(0.05..1.0),
        ];
        let d = if rng.gen_bool(0.5) {
            let j = unit(&mut rng);
            let v = Vec3::new(
                c[0] - o[0] + 0.8 * j[0],
                c[1] - o[1] + 0.8 * j[1],
                c[2] - o[2] + 0.8 * j[2],
            );
            (v / v.norm()).to_array()
        } else {
            unit(&mut rng)
        };
        let ray = Ray::new(o.into(), d.into()).unwrap();
        let b = Aabb::new(c.into(), h.into()).unwrap();
        match (ray_aabb_intersect(&ray, &b), march(o, d, c, h)) {
            (Some(t), Some(m)) => {
                hits += 1;
                worst = worst.max((t - m).abs());
            }
            (None, None) => {}
            _ => disagree += 1,
        }
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        disagree == 0 && worst <= 1e-3 && secs < 5.0,
        format!(
            "{disagree} hit/miss disagreements, {hits} hits, max |dt| {worst:.2e}, {secs:.2} s"
        ),
    )
}

fn alignment() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let (mut clean, mut noisy) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let t = RigidTransform::from_axis_angle(
            unit(&mut rng).into(),
            rng.gen_range(0.0..std::f64::consts::PI),
            Vec3::new(
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
            ),
        );
        let pts: Vec<Vec3> = (0..10)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                )
            })
            .collect();
        let exact: Vec<_> = pts.iter().map(|p| (*p, t.apply(*p))).collect();
        let fit = align_frames(&exact).map_err(|e| e.to_string())?;
        clean = clean.max(rms_residual(&fit, &exact));
        let jittered: Vec<_> = pts
            .iter()
            .map(|p| {
                let n = Vec3::new(
                    noise.sample(&mut rng),
                    noise.sample(&mut rng),
                    noise.sample(&mut rng),
                );
                (*p, t.apply(*p) + n)
            })
            .collect();
        let fit = align_frames(&jittered).map_err(|e| e.to_string())?;
        noisy = noisy.max(rms_residual(&fit, &jittered));
    }
    check(
        clean < 1e-9 && noisy <= 0.03,
        format!("max RMS noiseless {clean:.2e} m, sigma 0.01 {noisy:.4} m"),
    )
}

fn max_velocity_error(p: impl Fn(f64) -> Vec3, v: impl Fn(f64) -> Vec3) -> f64 {
    let mut track = GazeTrack::default();
    let depth = track.reference_depth_m();
    let mut worst = 0.0f64;
    for i in 0..=200 {
        let ts = i * 10_000;
        let t = ts as f64 / 1e6;
        let ray = Ray::new(p(t) - Vec3::Z * depth, Vec3::Z).unwrap();
        push_sample(&mut track, GazeSample::new(ts, ray));
        if let Ok(k) = estimate_kinematics(&track) {
            worst = worst.max((k.velocity - v(k.ts_us as f64 / 1e6)).norm());
        }
    }
    worst
}

fn kinematics() -> Verdict {
    let linear = max_velocity_error(
        |t| Vec3::new(0.2 + t, 1.6, 0.0),
        |_| Vec3::new(1.0, 0.0, 0.0),
    );
    let sine = max_velocity_error(
        |t| Vec3::new((TAU * t).sin(), 0.0, 0.0),
        |t| Vec3::new(TAU * (TAU * t).cos(), 0.0, 0.0),
    );
    check(
        linear <= 1e-6 && sine <= 2e-3,
        format!("linear max error {linear:.2e} m/s (<= 1e-6), sinusoid 100 Hz max error {sine:.3e} m/s (<= 2e-3)"),
    )
}

fn dwell() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let params = DwellParams::default();
    let mut mismatches = 0;
    let mut confirmed = 0;
    for _ in 0..1000 {
        let mut ts = 0i64;
        let p_hit = rng.gen_range(0.3..1.0);
        let samples: Vec<(i64, bool)> = (0..rng.gen_range(1..120))
            .map(|_| {
                ts += if rng.gen_bool(0.05) {
                    rng.gen_range(20_000..120_000)
                } else {
                    rng.gen_range(8_000..17_000)
                };
                (ts, rng.gen_bool(p_hit))
            })
            .collect();
        let st = samples
            .iter()
            .fold(DwellState::for_marker(1), |s, &(t, hit)| {
                s.observe(t, hit, params)
            });
        let want = dwell_scan(&samples, 250_000, 50_000);
        mismatches += (st.confirmed_at_us != want) as usize;
        confirmed += want.is_some() as usize;
    }
    check(
        mismatches == 0,
        format!("{mismatches} mismatches over 1000 sequences ({confirmed} confirmed)"),
    )
}

fn quiet() -> ExperimentConfig {
    ExperimentConfig {
        agent: AgentParams {
            jitter_sigma_deg: 0.0,
            ..AgentParams::default()
        },
        ..ExperimentConfig::default()
    }
}

fn spec(cfg: &ExperimentConfig, poi: usize, dd: f64) -> EpisodeSpec {
    EpisodeSpec {
        episode_id: 0,
        poi: cfg.world[poi].clone(),
        delta_d_m: dd,
        delta_t_ms: 500,
        seed: 1,
    }
}

fn sequence() -> Verdict {
    let cfg = quiet();
    let dwell_us = cfg.engine.dwell_ms as i64 * 1000;
    let mut notes = Vec::new();
    let mut ok = true;
    for poi in 0..cfg.world.len() {
        for dd in [0.5, 1.0] {
            let o = run_episode(&cfg, &spec(&cfg, poi, dd)).map_err(|e| e.to_string())?;
            let n = waypoint_count(o.record.anchor_distance_m, dd);
            let (mut markers, mut confirms) = (0, 0);
            for l in &o.log {
                if let Ok(LogEntry::Out { line, .. }) = serde_json::from_str(l) {
                    match decode(line.as_bytes()).map(|m| m.body) {
                        Ok(Body::MarkerPlace { .. } | Body::MarkerMove { .. }) => markers += 1,
                        Ok(Body::GazeConfirmed { .. }) => confirms += 1,
                        _ => {}
                    }
                }
            }
            let t_i_ok = o
                .record
                .steps
                .iter()
                .all(|s| s.t_i_us.is_some_and(|t| t >= dwell_us));
            ok &= markers == n && confirms == n && o.record.success && t_i_ok;
            notes.push(format!(
                "{} d={:.3} dd={dd}: {markers}/{confirms}/{n}",
                cfg.world[poi].id, o.record.anchor_distance_m
            ));
        }
    }
    check(
        ok,
        format!("markers/confirmations/ceil(d/dd): {}", notes.join("; ")),
    )
}

fn sweep_law() -> Verdict {
    let cfg = quiet();
    let mut notes = Vec::new();
    let mut ok = true;
    let mut anchor = None;
    for dd in [0.3, 0.5, 0.8, 1.3] {
        let o = run_episode(&cfg, &spec(&cfg, 0, dd)).map_err(|e| e.to_string())?;
        let d = o.record.anchor_distance_m;
        ok &= *anchor.get_or_insert(d) == d;
        let want = waypoint_count(d, dd);
        ok &= o.record.steps.len() == want && o.record.success;
        notes.push(format!(
            "dd={dd}: {} steps (plan {want})",
            o.record.steps.len()
        ));
    }
    check(ok, notes.join(", "))
}

fn adaptive() -> Verdict {
    let base = IntervalPolicy::from_config(&EngineConfig::default());
    let (p, _) = adapt_interval(base, 400_000);
    let (_, example) = adapt_interval(p, 400_000);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut lo, mut hi) = (u64::MAX, 0);
    for _ in 0..1000 {
        let mut p = base;
        for _ in 0..rng.gen_range(1..50) {
            let t = 10f64.powf(rng.gen_range(0.0..8.0)) as i64;
            let (np, dt) = adapt_interval(p, t);
            lo = lo.min(dt);
            hi = hi.max(dt);
            p = np;
        }
    }
    check(
        example == 480 && lo >= 200 && hi <= 3000,
        format!("(400, 400 ms) -> {example} ms; emitted range [{lo}, {hi}] ms"),
    )
}

fn protocol_and_replay() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = 0;
    for _ in 0..10_000 {
        let m = random_message(&mut rng);
        let bytes = encode(&m);
        match decode(&bytes) {
            Ok(back) if back == m && encode(&back) == bytes => {}
            _ => bad += 1,
        }
    }
    let cfg = ExperimentConfig {
        episodes_per_cell: 3,
        ..ExperimentConfig::default()
    };
    let mut logs = sweep_rows(&cfg).map_err(|e| e.to_string())?;
    let scheduled = ExperimentConfig {
        mode: gazecue::engine::Mode::Scheduled,
        ..cfg
    };
    logs.extend(sweep_rows(&scheduled).map_err(|e| e.to_string())?);
    let (mut diverged, mut emissions) = (0, 0);
    for o in &logs {
        let numbered: Vec<(usize, String)> = o
            .log
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .collect();
        match replay(&numbered) {
            Ok(r) => emissions += r.emissions,
            Err(_) => diverged += 1,
        }
    }
    check(
        bad == 0 && diverged == 0,
        format!(
            "{bad}/10000 round-trip failures; {diverged}/{} logs diverged ({emissions} emissions compared)",
            logs.len()
        ),
    )
}

fn determinism() -> Verdict {
    let dir = std::env::temp_dir().join(format!("gazecue-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let sweep = |name: &str| -> Result<(Vec<u8>, f64), String> {
        let out = dir.join(name);
        let started = Instant::now();
        let o = Command::new(env!("CARGO_BIN_EXE_gazecue"))
            .args(["sweep", "--seed", "42", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        let secs = started.elapsed().as_secs_f64();
        if !o.status.success() {
            return Err(String::from_utf8_lossy(&o.stderr).into_owned());
        }
        Ok((std::fs::read(&out).map_err(|e| e.to_string())?, secs))
    };
    let (a, ta) = sweep("a.csv")?;
    let (b, tb) = sweep("b.csv")?;
    let _ = std::fs::remove_dir_all(&dir);
    let rows = a.iter().filter(|c| **c == b'\n').count() - 1;
    check(
        a == b && ta < 60.0 && tb < 60.0,
        format!(
            "identical bytes: {}, {rows} rows, default sweep {ta:.2} s / {tb:.2} s",
            a == b
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("raycast oracle equivalence", raycast),
        ("alignment recovery", alignment),
        ("kinematics correctness", kinematics),
        ("dwell oracle equivalence", dwell),
        ("marker sequence reproduction", sequence),
        ("spacing sweep law", sweep_law),
        ("adaptive interval bounds", adaptive),
        ("protocol round-trip and replay", protocol_and_replay),
        ("determinism and sweep time", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match verdict {
            Ok(d) => println!("[PASS] {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("[FAIL] {name}: {d}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
