mod common;

use std::collections::BTreeSet;
use std::path::Path;

use bkcucb_core::baselines::compute_regret;
use bkcucb_core::config::{ConfigBuilder, RunConfig};
use bkcucb_core::engine::{
    log_to_csv, persist, read_json, read_log, run, run_batch, write_log, Aggregate, RunSummary, Simulation,
    VehicleRecord,
};
use bkcucb_core::network::{Action, Profile};
use bkcucb_core::phy::{CodebookNode, RadioConfig};
use bkcucb_core::trace::parse_trace;
use proptest::prelude::*;
use rand::Rng;

use common::{rng, Fixture};

fn small(policy: &str, periods: u64, extra: &[&str]) -> RunConfig {
    let mut b = ConfigBuilder::new();
    for s in [
        format!("policy.kind=\"{policy}\""),
        format!("scenario.periods={periods}"),
        "scenario.area_m=[300,200]".to_string(),
        "scenario.bs_count=3".to_string(),
        "scenario.association_interval=5".to_string(),
        "scenario.arrival_rate=0.5".to_string(),
        "radio.n_t=8".to_string(),
        "engine.rate_window=10".to_string(),
    ] {
        b = b.set(&s).unwrap();
    }
    for s in extra {
        b = b.set(s).unwrap();
    }
    b.build().unwrap()
}

fn static_trace(positions: &[[f64; 2]], periods: u64, period_s: f64) -> bkcucb_core::trace::MobilityTimeline {
    let mut text = String::from("period,vehicle_id,x_m,y_m,vx_mps,vy_mps\n");
    for t in 0..=periods {
        for (id, p) in positions.iter().enumerate() {
            text.push_str(&format!("{t},{id},{},{},0,0\n", p[0], p[1]));
        }
    }
    parse_trace(&text, period_s).unwrap()
}

fn record(period: u64, vehicle_id: u64) -> VehicleRecord {
    VehicleRecord {
        period,
        vehicle_id,
        policy: "bkc_ucb".into(),
        bs_id: (vehicle_id % 3) as usize,
        psi_rad: -0.25 + 0.001 * period as f64,
        layer: 3,
        rate_bps: 1.5e8 + vehicle_id as f64,
        regret: 0.125,
        regret1: 0.0,
        regret2: 0.125,
        synced: period.is_multiple_of(7),
    }
}

#[test]
fn zero_horizon_gives_empty_outputs() {
    let out = run(&small("bkc_ucb", 0, &[]), 1).unwrap();
    assert!(out.periods.is_empty());
    assert!(out.log.is_empty());
    assert!(out.summary.ert_curve.is_empty());
    assert!(out.summary.avg_rate_windows.is_empty());
    assert_eq!(out.summary.sync_rate, 0.0);
    assert_eq!(out.summary.total_periods, 0);
}

#[test]
fn regret_matches_two_by_two_enumeration() {
    let radio = RadioConfig {
        n_t: 4,
        n_r: 4,
        ..RadioConfig::default()
    };
    let scale = radio.bandwidth_hz * (1.0 + radio.sinr_cap).log2();
    for seed in 0..25 {
        let fx = Fixture::new(radio.clone(), &[[80.0, 60.0], [170.0, 20.0]], &[[0.0, 0.0], [240.0, 90.0]], seed);
        let snap = fx.snapshot();
        let leaves: Vec<CodebookNode> = fx.codebook.leaves().collect();
        assert_eq!(leaves.len(), 4);
        let mut r = rng(seed + 1000);
        let actions: Vec<(usize, CodebookNode)> =
            (0..2).map(|_| (r.random_range(0..2), leaves[r.random_range(0..4)])).collect();
        let mut frozen = Profile::new(2);
        for (i, (a, node)) in actions.iter().enumerate() {
            frozen.set(&snap, i, Action::node(*a, *node));
        }
        for i in 0..2 {
            let k = 1 - i;
            let other = [(k, fx.codebook.beam(actions[k].1))];
            let (own_bs, own_node) = actions[i];
            let achieved = fx.direct_rate(i, own_bs, &fx.codebook.beam(own_node), &other);
            let mut best = (own_bs, achieved);
            for a in 0..2 {
                for leaf in &leaves {
                    let rate = fx.direct_rate(i, a, &fx.codebook.beam(*leaf), &other);
                    if rate > best.1 {
                        best = (a, rate);
                    }
                }
            }
            let total = (best.1 - achieved) / scale;
            let association = if best.0 == own_bs {
                0.0
            } else {
                // same layer, same offset from the LOS, on the better BS
                let bias = own_node.psi() - fx.geometry(i, own_bs).los_steering;
                let target = (fx.geometry(i, best.0).los_steering + bias).sin().asin();
                let layer = own_node.layer();
                let mapped = (0..1u32 << layer)
                    .map(|j| CodebookNode::new(layer, j).unwrap())
                    .find(|n| n.contains(target))
                    .unwrap_or_else(|| CodebookNode::new(layer, (1 << layer) - 1).unwrap());
                (fx.direct_rate(i, best.0, &fx.codebook.beam(mapped), &other) - achieved) / scale
            };
            let (terms, _) = compute_regret(&snap, &frozen, i, &Action::node(own_bs, own_node));
            assert!((terms.total - total).abs() <= 1e-9 * total.abs().max(1e-6), "{} vs {total}", terms.total);
            assert!(
                (terms.association - association).abs() <= 1e-9 * association.abs().max(1e-6),
                "{} vs {association}",
                terms.association
            );
        }
    }
}

#[test]
fn period_aggregates_equal_record_sums() {
    for policy in ["bkc_ucb", "oracle_csi", "wcs", "random"] {
        let mut sim = Simulation::new(small(policy, 0, &[]), 4).unwrap();
        for _ in 0..30 {
            let out = sim.step().unwrap();
            let m = &out.metrics;
            assert_eq!(m.active_vehicles, out.records.len());
            let total: f64 = out.records.iter().map(|r| r.rate_bps).sum();
            assert!((m.total_rate_bps - total).abs() <= 1e-9 * total.max(1.0));
            if !out.records.is_empty() {
                let regret: f64 = out.records.iter().map(|r| r.regret).sum::<f64>() / out.records.len() as f64;
                assert!((m.mean_regret - regret).abs() < 1e-12);
            }
            assert_eq!(m.sync_events, out.records.iter().filter(|r| r.synced).count());
            let ids: Vec<u64> = out.records.iter().map(|r| r.vehicle_id).collect();
            assert!(ids.windows(2).all(|w| w[0] < w[1]));
            for r in &out.records {
                assert!((r.regret1 + r.regret2 - r.regret).abs() < 1e-12);
                assert!(r.regret >= 0.0);
                assert_eq!(r.period, m.period);
                assert_eq!(r.policy, policy);
            }
        }
    }
}

#[test]
fn csi_policy_beam_is_optimal_on_its_station() {
    let config = small(
        "dk_ucb_lite",
        40,
        &["scenario.bs_positions=[[0,0],[250,100]]", "scenario.candidate_radius_m=null", "scenario.buildings=0"],
    );
    let timeline = static_trace(&[[100.0, 50.0]], 40, config.scenario.period_s);
    let max_layer = config.codebook().unwrap().max_layer();
    let out = Simulation::with_timeline(config, 9, timeline).unwrap().run(true).unwrap();
    assert_eq!(out.log.len(), 40);
    for r in &out.log {
        assert_eq!(r.layer, max_layer);
        if r.regret1 == 0.0 {
            // alone in the network: the best leaf on the serving BS is the best response
            assert_eq!(r.regret, 0.0, "period {}", r.period);
        }
    }
}

#[test]
fn runs_are_reproducible_per_seed() {
    let config = small("bkc_ucb", 60, &[]);
    let a = run(&config, 11).unwrap();
    let b = run(&config, 11).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.summary, b.summary);
    let c = run(&config, 12).unwrap();
    assert_ne!(a.log, c.log);
}

#[test]
fn log_round_trips_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<VehicleRecord> = (0..1000).map(|k| record(k / 4, k % 4)).collect();
    let path = dir.path().join("nested/log.csv");
    write_log(&path, &records).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 1001);
    assert_eq!(
        text.lines().next().unwrap(),
        "period,vehicle_id,policy,bs_id,psi_rad,layer,rate_bps,regret,regret1,regret2,synced"
    );
    assert_eq!(read_log(&path).unwrap(), records);
}

#[test]
fn empty_log_is_a_header_line() {
    let text = String::from_utf8(log_to_csv(&[]).unwrap()).unwrap();
    assert_eq!(text.lines().count(), 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    write_log(&path, &[]).unwrap();
    assert!(read_log(&path).unwrap().is_empty());
}

#[test]
fn persisted_summary_round_trips() {
    let out = run(&small("random", 25, &[]), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = persist(Some(&out.log), &out.summary, dir.path(), "seed_2").unwrap();
    assert_eq!(files, vec!["seed_2.csv", "seed_2.json"]);
    let summary: RunSummary = read_json(dir.path().join("seed_2.json")).unwrap();
    assert_eq!(summary, out.summary);
    assert_eq!(read_log(dir.path().join("seed_2.csv")).unwrap(), out.log);
}

fn files_under(root: &Path) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                found.insert(rel);
            }
        }
    }
    found
}

#[test]
fn batch_manifest_lists_exactly_the_written_files() {
    let mut config = small("bkc_ucb", 20, &[]);
    config.seeds = vec![1, 2];
    config.variants = ConfigBuilder::new()
        .set(r#"variants=[{"label":"a","set":{"ucb.alpha":0.5}},{"label":"b","set":{"policy.kind":"random"}}]"#)
        .unwrap()
        .build()
        .unwrap()
        .variants;
    let dir = tempfile::tempdir().unwrap();
    let out = run_batch(&config, Some(dir.path())).unwrap();
    let manifest: BTreeSet<String> = out.aggregate.manifest.iter().cloned().collect();
    assert_eq!(manifest.len(), out.aggregate.manifest.len());
    assert_eq!(files_under(dir.path()), manifest);
    assert_eq!(manifest.len(), 2 + 2 * 2 * 2);
    let stored: Aggregate = read_json(dir.path().join("aggregate.json")).unwrap();
    assert_eq!(stored, out.aggregate);
    assert!(stored.complete);
    let labels: Vec<&str> = stored.members.iter().map(|m| m.label.as_str()).collect();
    assert_eq!(labels, ["a", "b"]);
    assert_eq!(stored.members[1].policy, "random");
}

#[test]
fn single_seed_aggregate_equals_the_run() {
    let mut config = small("bkc_ucb", 30, &[]);
    config.seeds = vec![6];
    let batch = run_batch(&config, None).unwrap();
    assert!(batch.aggregate.manifest.is_empty());
    let single = run(&config, 6).unwrap();
    let member = &batch.aggregate.members[0];
    assert_eq!(member.seeds, vec![6]);
    assert_eq!(member.final_ert.mean, *single.summary.ert_curve.last().unwrap());
    assert_eq!(member.final_ert.se, 0.0);
    assert_eq!(member.sync_rate.mean, single.summary.sync_rate);
    let curve: Vec<f64> = member.ert_curve.iter().map(|s| s.mean).collect();
    assert_eq!(curve, single.summary.ert_curve);
    let windows: Vec<f64> = member.avg_rate_windows.iter().map(|s| s.mean).collect();
    let expected: Vec<f64> = single.summary.avg_rate_windows.iter().map(|w| w.mean_rate_bps).collect();
    assert_eq!(windows, expected);
}

#[test]
fn identical_worlds_have_zero_spread() {
    let mut config = small("oracle_csi", 20, &[]);
    config.seeds = vec![4, 4, 4];
    let batch = run_batch(&config, None).unwrap();
    let member = &batch.aggregate.members[0];
    assert!(member.ert_curve.iter().all(|s| s.se == 0.0));
    assert_eq!(member.mean_rate_bps.se, 0.0);
    assert_eq!(member.final_ert.mean, 0.0);
}

#[test]
fn invalid_configuration_is_rejected_before_running() {
    let mut config = small("bkc_ucb", 10, &[]);
    config.kernel.lambda_k = -1.0;
    assert!(run(&config, 1).is_err());
    assert!(run_batch(&config, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ert_curve_is_the_running_mean(seed in 0u64..1000) {
        let out = run(&small("layer1_restart", 25, &[]), seed).unwrap();
        let mut cumulative = 0.0;
        for (k, p) in out.periods.iter().enumerate() {
            cumulative += p.mean_regret;
            prop_assert!((out.summary.ert_curve[k] - cumulative / (k + 1) as f64).abs() < 1e-12);
        }
        prop_assert!(out.summary.sync_rate >= 0.0 && out.summary.sync_rate <= 1.0);
    }
}
