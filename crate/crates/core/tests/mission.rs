mod common;

use adrnav_core::mission::{run_mission, EventKind, Outcome, SimConfig};
use adrnav_core::robot::linear_speed;
use adrnav_core::MissionLog;
use common::{dynamic_6x6, open_4x4, replan_violation};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run(cfg: &SimConfig, seed: u64) -> MissionLog {
    run_mission(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

#[test]
fn four_by_four_accounting() {
    let log = run(&open_4x4(), 1);
    assert_eq!(log.outcome, Outcome::Success);
    let step = 1.0 / linear_speed(200.0, 0.1);
    let moves = log
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Move { .. }))
        .count();
    assert_eq!(moves, 12);
    assert_eq!(log.total_distance, 2.0 * 6.0);
    assert_eq!(log.relocalizations, 2);
    let expect = 12.0 * step + 75.0 * log.relocalizations as f64 + 120.0;
    assert!((log.total_time - expect).abs() < 1e-9, "{} vs {expect}", log.total_time);
}

#[test]
fn replanning_never_uses_flagged_cells() {
    let cfg = dynamic_6x6();
    let mut replans = 0;
    for seed in 0..200 {
        let log = run(&cfg, seed);
        if let Some(v) = replan_violation(&log) {
            panic!("seed {seed}: {v}");
        }
        replans += log.replans;
    }
    assert!(replans > 0, "scenario never exercised replanning");
}

#[test]
fn collisions_only_on_missed_obstacles() {
    let mut cfg = dynamic_6x6();
    cfg.detector.tpr = Some(1.0);
    cfg.detector.fpr = Some(0.0);
    for seed in 0..50 {
        let log = run(&cfg, seed);
        assert_eq!(log.outcome, Outcome::Success, "seed {seed}");
        for cell in log.trajectory() {
            assert!(!cfg.map.is_occupied(cell));
        }
    }
}

#[test]
fn drift_batches_degrade_monotonically() {
    let rates: Vec<usize> = [0.05, 0.15, 0.3]
        .iter()
        .map(|&dpm| {
            let mut cfg = dynamic_6x6();
            cfg.drift_per_meter = dpm;
            cfg.success_drift_threshold = 1.0;
            (0..500).filter(|&s| run(&cfg, s).outcome.is_success()).count()
        })
        .collect();
    assert!(rates.windows(2).all(|w| w[1] <= w[0]), "{rates:?}");
}

#[test]
fn blind_detector_only_lengthens_or_disconnects() {
    let mut cfg = SimConfig::new(
        adrnav_core::map::GridMap::open(6, 6, 1.0).unwrap(),
        common::c(0, 0),
        common::c(5, 5),
    );
    cfg.detector.accuracy = 0.0;
    for seed in 0..100 {
        let log = run(&cfg, seed);
        assert!(
            matches!(log.outcome, Outcome::Success | Outcome::FailureNoPath),
            "seed {seed}: {:?}",
            log.outcome
        );
        if log.outcome.is_success() {
            assert!(log.total_distance >= 20.0);
            assert_eq!(log.trajectory().last(), Some(&cfg.source));
        }
    }
}

fn time_parts(log: &MissionLog) -> f64 {
    log.events
        .iter()
        .map(|e| match e.kind {
            EventKind::Move { duration_s, .. }
            | EventKind::TagHit { duration_s, .. }
            | EventKind::Dwell { duration_s } => duration_s,
            _ => 0.0,
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn same_seed_same_log(seed in any::<u64>()) {
        let cfg = dynamic_6x6();
        prop_assert_eq!(run(&cfg, seed), run(&cfg, seed));
    }

    #[test]
    fn time_and_distance_decompose(seed in any::<u64>(), dpm in 0.0f64..0.3) {
        let mut cfg = dynamic_6x6();
        cfg.drift_per_meter = dpm;
        cfg.success_drift_threshold = 1.0;
        let log = run(&cfg, seed);
        prop_assert!((log.total_time - time_parts(&log)).abs() < 1e-9);
        let dist: f64 = log.events.iter().map(|e| match e.kind {
            EventKind::Move { length_m, .. } => length_m,
            _ => 0.0,
        }).sum();
        prop_assert!((log.total_distance - dist).abs() < 1e-9);
        let hits = log.events.iter().filter(|e| matches!(e.kind, EventKind::TagHit { .. })).count();
        prop_assert_eq!(hits, log.relocalizations);
    }

    #[test]
    fn more_drift_never_helps(seed in any::<u64>(), lo in 0.0f64..0.4, extra in 0.0f64..0.4) {
        let mut a = dynamic_6x6();
        a.success_drift_threshold = 1.0;
        a.drift_per_meter = lo;
        let mut b = a.clone();
        b.drift_per_meter = lo + extra;
        let (ra, rb) = (run(&a, seed), run(&b, seed));
        if rb.outcome.is_success() {
            prop_assert!(ra.outcome.is_success());
        }
    }
}
