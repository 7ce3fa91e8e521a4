//! Independent reference implementations used by the integration and
//! acceptance tests. None of these call into the code they check beyond
//! plain value types.
#![allow(dead_code)]

use gazecue::engine::{MarkerKind, Mode};
use gazecue::geometry::Vec3;
use gazecue::protocol::{Body, Role, WireMessage, WireVec};
use rand::distributions::{Alphanumeric, DistString};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const MARCH_STEP: f64 = 1e-4;

fn inside(p: [f64; 3], c: [f64; 3], h: [f64; 3]) -> bool {
    (0..3).all(|i| (p[i] - c[i]).abs() <= h[i])
}

/// First `t` at which stepping along the ray by `MARCH_STEP` lands inside
/// the box. Marching is limited to the stretch of the ray inside the box's
/// bounding sphere, which no hit can lie outside of.
pub fn march(o: [f64; 3], d: [f64; 3], c: [f64; 3], h: [f64; 3]) -> Option<f64> {
    if inside(o, c, h) {
        return Some(0.0);
    }
    let r2 = h.iter().map(|x| x * x).sum::<f64>() * (1.0 + 1e-9);
    let oc = [o[0] - c[0], o[1] - c[1], o[2] - c[2]];
    let b = oc[0] * d[0] + oc[1] * d[1] + oc[2] * d[2];
    let cc = oc.iter().map(|x| x * x).sum::<f64>() - r2;
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let (t0, t1) = (-b - disc.sqrt(), -b + disc.sqrt());
    if t1 < 0.0 {
        return None;
    }
    let start = t0.max(0.0);
    let steps = ((t1 - start) / MARCH_STEP).ceil() as usize + 1;
    for k in 0..=steps {
        let t = start + k as f64 * MARCH_STEP;
        let p = [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
        if inside(p, c, h) {
            return Some(t);
        }
    }
    None
}

pub fn unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0f64),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Time of the first confirming sample by brute force: sample `j` confirms
/// when some earlier hit `i` starts a run of hits, each within `gap_us` of
/// the previous one, that spans at least `dwell_us` up to `j`.
pub fn dwell_scan(samples: &[(i64, bool)], dwell_us: i64, gap_us: i64) -> Option<i64> {
    let hits: Vec<i64> = samples.iter().filter(|s| s.1).map(|s| s.0).collect();
    for j in 0..hits.len() {
        for i in 0..=j {
            let chained = hits[i..=j].windows(2).all(|w| w[1] - w[0] <= gap_us);
            if chained && hits[j] - hits[i] >= dwell_us {
                return Some(hits[j]);
            }
        }
    }
    None
}

pub fn angle_deg(a: Vec3, b: Vec3) -> f64 {
    let c = a.dot(b) / (a.norm() * b.norm());
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Every window `[i, j]` spanning at least `window_us` whose directions
/// stay pairwise within `thr_deg`, keeping only windows not contained in a
/// larger qualifying one. Returned as `(start index, end index)`.
pub fn maximal_fixation_windows(
    ts: &[i64],
    dirs: &[Vec3],
    window_us: i64,
    thr_deg: f64,
) -> Vec<(usize, usize)> {
    let n = ts.len();
    let qualifies = |i: usize, j: usize| {
        if ts[j] - ts[i] < window_us {
            return false;
        }
        for a in i..=j {
            for b in a + 1..=j {
                // Small slack for the last bits of the angle computation.
                if angle_deg(dirs[a], dirs[b]) > thr_deg + 1e-9 {
                    return false;
                }
            }
        }
        true
    };
    let mut all = Vec::new();
    for i in 0..n {
        for j in i..n {
            if qualifies(i, j) {
                all.push((i, j));
            }
        }
    }
    all.iter()
        .copied()
        .filter(|&(i, j)| {
            !all.iter()
                .any(|&(a, b)| (a, b) != (i, j) && a <= i && j <= b)
        })
        .collect()
}

/// Closed-form time to confirm one marker for a noise-free agent: reaction
/// latency, then a constant-speed turn until the gaze ray enters the box,
/// then the dwell. A box already under the gaze skips the first two.
pub fn predicted_t_i_us(
    eye: Vec3,
    gaze: Vec3,
    center: Vec3,
    half: f64,
    latency_ms: f64,
    speed_dps: f64,
    dwell_ms: f64,
) -> f64 {
    let to_center = (center - eye) / (center - eye).norm();
    if ray_hits_cube(eye, gaze, center, half) {
        return dwell_ms * 1000.0;
    }
    // Scan the great circle from gaze to the marker center for the entry.
    let total = angle_deg(gaze, to_center);
    let axis = gaze.cross(to_center);
    let axis = axis / axis.norm();
    let mut entry = total;
    let n = 20_000;
    for k in 0..=n {
        let a = total * k as f64 / n as f64;
        let d = gaze.rotated_about(axis, a.to_radians());
        if ray_hits_cube(eye, d, center, half) {
            entry = a;
            break;
        }
    }
    (latency_ms + entry / speed_dps * 1000.0 + dwell_ms) * 1000.0
}

fn ray_hits_cube(o: Vec3, d: Vec3, c: Vec3, h: f64) -> bool {
    let d = d / d.norm();
    let n = march(o.to_array(), d.to_array(), c.to_array(), [h, h, h]);
    n.is_some()
}

fn text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(0..12);
    let mut s = Alphanumeric.sample_string(rng, n);
    // Characters that need escaping must survive too.
    for c in ['"', '\\', '\n', '\t', 'é', '💡', '\u{7f}'] {
        if rng.gen_bool(0.15) {
            s.push(c);
        }
    }
    s
}

fn real(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..4) {
        0 => rng.gen_range(-1e3..1e3f64).round(),
        1 => rng.gen_range(-1e-6..1e-6),
        2 => f64::from_bits(rng.gen::<u64>() >> 2) * if rng.gen() { 1.0 } else { -1.0 },
        _ => rng.gen_range(-100.0..100.0),
    }
}

fn wv(rng: &mut ChaCha8Rng) -> WireVec {
    loop {
        let v = Vec3::new(real(rng), real(rng), real(rng));
        if v.is_finite() {
            return v.into();
        }
    }
}

fn role(rng: &mut ChaCha8Rng) -> Role {
    [Role::Headset, Role::Robot, Role::Observer][rng.gen_range(0..3)]
}

fn mode(rng: &mut ChaCha8Rng) -> Option<Mode> {
    [None, Some(Mode::ConfirmationGated), Some(Mode::Scheduled)][rng.gen_range(0..3)]
}

pub fn random_body(rng: &mut ChaCha8Rng) -> Body {
    let big = || (1u64 << 53) - 1;
    match rng.gen_range(0..13) {
        0 => Body::Hello { role: role(rng) },
        1 => Body::Welcome {
            session_id: text(rng),
            epoch_ts: rng.gen_range(0..big() as i64),
        },
        2 => Body::Gaze {
            origin: wv(rng),
            dir: wv(rng),
        },
        3 => Body::PoiDetected {
            poi_id: text(rng),
            pos_robot: wv(rng),
            label: text(rng),
        },
        4 => Body::Align {
            pairs: (0..rng.gen_range(0..6))
                .map(|_| [wv(rng), wv(rng)])
                .collect(),
        },
        5 => Body::MarkerPlace {
            marker_id: rng.gen_range(0..big()),
            pos: wv(rng),
            half: wv(rng),
            kind: [MarkerKind::Guide, MarkerKind::Pulse, MarkerKind::Final][rng.gen_range(0..3)],
        },
        6 => Body::MarkerMove {
            marker_id: rng.gen_range(0..big()),
            pos: wv(rng),
        },
        7 => Body::MarkerRemove {
            marker_id: rng.gen_range(0..big()),
        },
        8 => Body::GazeConfirmed {
            marker_id: rng.gen(),
            t_i_us: rng.gen_range(0..big() as i64),
        },
        9 => Body::EpisodeDone {
            poi_id: text(rng),
            total_us: rng.gen_range(0..big() as i64),
            steps: rng.gen(),
            timeouts: rng.gen(),
            success: rng.gen(),
        },
        10 => Body::Error {
            code: text(rng),
            msg: text(rng),
        },
        11 => Body::StartAttraction {
            poi_id: text(rng),
            mode: mode(rng),
        },
        _ => Body::StartShift {
            poi_id: text(rng),
            mode: mode(rng),
        },
    }
}

pub fn random_message(rng: &mut ChaCha8Rng) -> WireMessage {
    WireMessage::new(
        rng.gen_range(0..1 << 53),
        rng.gen_range(0..1 << 53),
        random_body(rng),
    )
}
