use gazecue::engine::{
    adapt_interval, plan_chain, Engine, EngineConfig, EngineEvent, IntervalPolicy, Mode, Phase, Poi,
};
use gazecue::gaze::GazeSample;
use gazecue::geometry::{frustum_contains, Frustum, Ray, Vec3};
use gazecue::protocol::Body;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn policy() -> IntervalPolicy {
    IntervalPolicy::from_config(&EngineConfig::default())
}

#[test]
fn ewma_example() {
    let (p, first) = adapt_interval(policy(), 400_000);
    assert_eq!(first, 480);
    let (_, next) = adapt_interval(p, 400_000);
    assert_eq!(next, 480);
}

#[test]
fn huge_t_i_clamps_to_max() {
    assert_eq!(adapt_interval(policy(), 10_000_000).1, 3000);
}

#[test]
fn intervals_stay_in_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let base = policy();
    for _ in 0..1000 {
        let mut p = base;
        for _ in 0..rng.gen_range(1..50) {
            // Log-uniform over 1 µs .. 100 s, plus exact zeros.
            let t = if rng.gen_bool(0.05) {
                0
            } else {
                10f64.powf(rng.gen_range(0.0..8.0)) as i64
            };
            let (np, dt) = adapt_interval(p, t);
            assert!((200..=3000).contains(&dt), "dt {dt}");
            p = np;
        }
    }
}

fn view(apex: Vec3, forward: Vec3) -> Frustum {
    Frustum::looking_along(apex, forward, 43.0, 29.0).unwrap()
}

fn ceil_count(d: f64, dd: f64) -> usize {
    // Exact ceiling in integer arithmetic on the nanometre grid.
    let (d, dd) = ((d * 1e9).round() as u128, (dd * 1e9).round() as u128);
    d.div_ceil(dd).max(1) as usize
}

proptest! {
    #[test]
    fn plan_count_and_spacing(
        yaw in -180.0..180.0f64,
        px in -8.0..8.0f64, py in 0.0..3.0f64, pz in -8.0..8.0f64,
        dd in 0.1..2.0f64,
    ) {
        let eye = Vec3::new(0.0, 1.6, 0.0);
        let poi = Poi::new("p", Vec3::new(px, py, pz), "");
        prop_assume!((poi.position - eye).norm() > 0.5);
        let fwd = Vec3::new(yaw.to_radians().sin(), 0.0, yaw.to_radians().cos());
        let f = view(eye, fwd);
        let plan = plan_chain(&Ray::new(eye, fwd).unwrap(), &f, &poi, dd).unwrap();
        let dist = (poi.position - plan.anchor).norm();
        prop_assert_eq!(plan.waypoints.len(), ceil_count(dist, dd));
        prop_assert_eq!(*plan.waypoints.last().unwrap(), poi.position);
        let mut prev = plan.anchor;
        for w in &plan.waypoints {
            prop_assert!((*w - prev).norm() <= dd + 1e-9);
            prev = *w;
        }
        prop_assert!(frustum_contains(&f, plan.anchor));
    }
}

#[test]
fn poi_behind_starts_in_view_then_leaves_it() {
    let eye = Vec3::new(0.0, 1.6, 0.0);
    let f = view(eye, Vec3::Z);
    let poi = Poi::new("behind", Vec3::new(0.5, 1.2, -4.0), "");
    let plan = plan_chain(&Ray::new(eye, Vec3::Z).unwrap(), &f, &poi, 0.5).unwrap();
    assert!(frustum_contains(&f, plan.waypoints[0]));
    assert!(!frustum_contains(&f, poi.position));
    // Past the first exit every remaining waypoint stays outside.
    let first_out = plan
        .waypoints
        .iter()
        .position(|w| !frustum_contains(&f, *w))
        .unwrap();
    assert!(plan.waypoints[first_out..]
        .iter()
        .all(|w| !frustum_contains(&f, *w)));
    // Waypoints walk monotonically toward the POI.
    let d: Vec<f64> = plan
        .waypoints
        .iter()
        .map(|w| (*w - poi.position).norm())
        .collect();
    assert!(d.windows(2).all(|p| p[1] < p[0]));
}

#[test]
fn scheduled_advance_without_gaze_within_one_tick() {
    let cfg = EngineConfig {
        mode: Mode::Scheduled,
        delta_t_ms: 500,
        adaptive_interval: false,
        ..EngineConfig::default()
    };
    let mut e = Engine::new(cfg).unwrap();
    e.add_poi(Poi::new("far", Vec3::new(0.0, 1.6, 8.0), ""));
    let eye = Vec3::new(0.0, 1.6, 0.0);
    let away = Vec3::new(1.0, 0.0, 1.0).normalized().unwrap();
    let g = |ts| EngineEvent::Gaze(GazeSample::new(ts, Ray::new(eye, away).unwrap()));
    e.handle(1_000, g(1_000), Some(1));
    let out = e.handle(
        1_000,
        EngineEvent::StartAttraction {
            poi_id: "far".into(),
            mode: None,
        },
        Some(3),
    );
    assert!(out
        .iter()
        .any(|m| matches!(m.body, Body::MarkerPlace { .. })));
    let tick = 10_000;
    let mut moved_at = None;
    let mut now = 1_000;
    while moved_at.is_none() && now < 2_000_000 {
        now += tick;
        let out = e.handle(now, EngineEvent::Tick, None);
        if out
            .iter()
            .any(|m| matches!(m.body, Body::MarkerMove { .. }))
        {
            moved_at = Some(now);
        }
    }
    let waited = moved_at.unwrap() - 1_000;
    assert!(
        (500_000..500_000 + tick).contains(&waited),
        "waited {waited}"
    );
    assert_eq!(e.phase(), Phase::AwaitingGaze);
    assert_eq!(e.state().record.as_ref().unwrap().steps[0].t_i_us, None);
}
