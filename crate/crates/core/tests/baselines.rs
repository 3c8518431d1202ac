mod common;

use bkcucb_core::agent::{Agent, AgentConfig, AssociationMode, BeamMode, LinkOracle};
use bkcucb_core::bandit::UcbParams;
use bkcucb_core::baselines::{
    compute_regret, dominant_singular_vector, nearest_leaf, oracle_best_response, wcs_solve, PolicyKind, WcsBeams,
};
use bkcucb_core::kernels::KernelParams;
use bkcucb_core::network::{Action, Profile};
use bkcucb_core::phy::{realize_channel, Codebook, CodebookNode, RadioConfig};
use bkcucb_core::scenario::LinkGeometry;
use bkcucb_core::Result;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

use common::{rng, Fixture};

fn radio(n_t: usize) -> RadioConfig {
    RadioConfig {
        n_t,
        n_r: 4,
        ..RadioConfig::default()
    }
}

fn three_by_three(seed: u64) -> Fixture {
    Fixture::new(
        radio(8),
        &[[120.0, 40.0], [210.0, 160.0], [60.0, 190.0]],
        &[[0.0, 0.0], [300.0, 0.0], [150.0, 260.0]],
        seed,
    )
}

fn random_profile(fx: &Fixture, snap: &bkcucb_core::network::Snapshot<'_>, seed: u64) -> Profile {
    let mut r = rng(seed);
    let leaves: Vec<CodebookNode> = fx.codebook.leaves().collect();
    let mut profile = Profile::new(fx.vehicles.len());
    for i in 0..fx.vehicles.len() {
        let a = r.random_range(0..fx.stations.len());
        let leaf = leaves[r.random_range(0..leaves.len())];
        profile.set(snap, i, Action::node(a, leaf));
    }
    profile
}

#[test]
fn oracle_matches_nested_loop_enumeration() {
    for seed in 0..20 {
        let fx = three_by_three(seed);
        let snap = fx.snapshot();
        let profile = random_profile(&fx, &snap, seed + 100);
        for i in 0..3 {
            let others: Vec<(usize, CodebookNode)> = (0..3)
                .filter(|&k| k != i)
                .map(|k| {
                    let a = profile.action(k).unwrap();
                    (k, a.beam.node())
                })
                .collect();
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            let mut best_node = None;
            for a in 0..3 {
                // every other vehicle transmits, whichever BS it serves
                let interferers: Vec<_> = others
                    .iter()
                    .map(|(k, node)| (*k, fx.codebook.beam(*node)))
                    .collect();
                for leaf in fx.codebook.leaves() {
                    let rate = fx.direct_rate(i, a, &fx.codebook.beam(leaf), &interferers);
                    if rate > best.1 {
                        best = (a, rate);
                        best_node = Some(leaf);
                    }
                }
            }
            let got = oracle_best_response(&snap, &profile, i, None);
            assert!((got.rate - best.1).abs() <= 1e-9 * best.1, "{} vs {}", got.rate, best.1);
            assert_eq!((got.action.bs, got.action.beam.node()), (best.0, best_node.unwrap()));
        }
    }
}

#[test]
fn profile_rates_match_direct_computation() {
    let fx = three_by_three(7);
    let snap = fx.snapshot();
    let profile = random_profile(&fx, &snap, 8);
    let mut total = 0.0;
    for i in 0..3 {
        let own = profile.action(i).unwrap();
        let interferers: Vec<_> = (0..3)
            .filter(|&k| k != i)
            .map(|k| (k, fx.codebook.beam(profile.action(k).unwrap().beam.node())))
            .collect();
        let expected = fx.direct_rate(i, own.bs, &fx.codebook.beam(own.beam.node()), &interferers);
        let got = profile.rate(&snap, i);
        assert!((got - expected).abs() <= 1e-9 * expected);
        total += got;
    }
    assert!((profile.total_rate(&snap) - total).abs() <= 1e-9 * total);
}

#[test]
fn regret_terms_are_consistent() {
    for seed in 0..20 {
        let fx = three_by_three(seed);
        let snap = fx.snapshot();
        let profile = random_profile(&fx, &snap, seed + 200);
        for i in 0..3 {
            let own = profile.action(i).unwrap().clone();
            let (terms, best) = compute_regret(&snap, &profile, i, &own);
            assert!(terms.total >= 0.0);
            assert!((terms.association + terms.beam - terms.total).abs() < 1e-12);
            if best.action.bs == own.bs {
                assert_eq!(terms.association, 0.0);
            }
            let (zero, _) = compute_regret(&snap, &profile, i, &best.action);
            assert_eq!(zero.total, 0.0);
        }
    }
}

#[test]
fn wcs_totals_never_decrease() {
    for seed in 0..15 {
        let fx = Fixture::new(
            radio(8),
            &[[100.0, 50.0], [110.0, 70.0], [200.0, 90.0], [260.0, 30.0], [150.0, 200.0]],
            &[[0.0, 0.0], [300.0, 0.0], [150.0, 260.0]],
            seed,
        );
        let snap = fx.snapshot();
        for beams in [WcsBeams::Codebook, WcsBeams::Svd] {
            let out = wcs_solve(&snap, beams);
            assert!(out.totals.windows(2).all(|w| w[1] > w[0]));
            assert!(out.totals.last().unwrap() >= out.totals.first().unwrap());
            assert_eq!(out.totals.len(), out.swaps + 1);
            assert!(out.swaps <= 5 * 3);
            let total = out.profile.total_rate(&snap);
            assert!((total - out.totals.last().unwrap()).abs() <= 1e-9 * total);
            assert!(out.profile.actions.iter().all(Option::is_some));
        }
    }
}

#[test]
fn singular_vector_beats_every_leaf() {
    let fx = three_by_three(3);
    for i in 0..3 {
        for a in 0..3 {
            let h = realize_channel(&fx.states[i][a], fx.t);
            let v = dominant_singular_vector(&h, 500, 1e-12).unwrap();
            let gain = (&h * &v).norm();
            for leaf in fx.codebook.leaves() {
                assert!((&h * fx.codebook.beam(leaf)).norm() <= gain * (1.0 + 1e-9));
            }
            let leaf = nearest_leaf(&v, &fx.codebook);
            let best = fx.codebook.leaves().map(|l| fx.codebook.beam(l).dotc(&v).norm()).fold(0.0, f64::max);
            assert_eq!(fx.codebook.beam(leaf).dotc(&v).norm(), best);
        }
    }
}

#[test]
fn policy_names_round_trip() {
    for p in PolicyKind::ALL {
        assert_eq!(p.as_str().parse::<PolicyKind>().unwrap(), p);
        assert_eq!(p.agent_modes().is_none(), matches!(p, PolicyKind::OracleCsi | PolicyKind::Wcs));
    }
    assert!("bkc".parse::<PolicyKind>().is_err());
}

/// Fixed link with a known CSI-best leaf.
struct Fixed {
    geometry: LinkGeometry,
    best: CodebookNode,
}

impl LinkOracle for Fixed {
    fn candidates(&self) -> Vec<usize> {
        vec![0]
    }

    fn geometry(&self, _bs: usize) -> Result<LinkGeometry> {
        Ok(self.geometry)
    }

    fn probe(&mut self, _bs: usize, node: CodebookNode) -> f64 {
        if self.best.contains(node.psi()) || node == self.best {
            0.9
        } else {
            0.1
        }
    }

    fn best_leaf(&self, _bs: usize) -> CodebookNode {
        self.best
    }
}

fn agent_with(n_t: usize, mode: BeamMode, interval: u64, seed: u64) -> Agent {
    let config = AgentConfig {
        codebook: Codebook::new(n_t).unwrap(),
        kernel: KernelParams::default(),
        ucb: UcbParams::default(),
        association_interval: interval,
        beam_mode: mode,
        association_mode: AssociationMode::Ucb,
        include_probes: false,
    };
    Agent::new(0, 1, config, seed)
}

fn fixed(n_t: usize, best: CodebookNode) -> Fixed {
    let fx = Fixture::new(radio(n_t), &[[120.0, 40.0]], &[[0.0, 0.0]], 1);
    Fixed {
        geometry: fx.geometry(0, 0),
        best,
    }
}

#[test]
fn csi_policy_uses_the_best_leaf() {
    let cb = Codebook::new(16).unwrap();
    let best = cb.node(4, 5).unwrap();
    let mut link = fixed(16, best);
    let mut agent = agent_with(16, BeamMode::CsiExhaustive, 5, 0);
    for t in 1..20 {
        let d = agent.step(t, &mut link).unwrap();
        assert_eq!(d.node, best);
        assert!(d.probes.is_empty());
        agent.observe(t, 0.9, 1);
    }
}

#[test]
fn random_leaves_are_uniform_with_two_antennas() {
    let cb = Codebook::new(2).unwrap();
    let mut link = fixed(2, cb.node(1, 0).unwrap());
    let mut agent = agent_with(2, BeamMode::Random, 10, 77);
    let n = 10_000;
    let mut first = 0;
    for t in 1..=n {
        let d = agent.step(t, &mut link).unwrap();
        assert!(cb.is_leaf(d.node));
        if d.node.index() == 0 {
            first += 1;
        }
    }
    let freq = first as f64 / n as f64;
    let sigma = (0.25 / n as f64).sqrt();
    assert!((freq - 0.5).abs() <= 3.0 * sigma, "frequency {freq}");
}

#[test]
fn layer1_restart_needs_max_layer_minus_one_descents() {
    let cb = Codebook::new(16).unwrap();
    let best = cb.node(4, 12).unwrap();
    let mut link = fixed(16, best);
    let interval = 8;
    let mut agent = agent_with(16, BeamMode::Layer1Restart, interval, 0);
    let los = link.geometry.los_steering;
    for t in 1..=24 {
        let d = agent.step(t, &mut link).unwrap();
        let since = (t - 1) % interval;
        if since == 0 {
            assert_eq!(d.parent.layer(), 1);
            assert!(d.parent.contains(los));
        }
        let expected = (since as u32 + 2).min(cb.max_layer());
        assert_eq!(d.node.layer(), expected, "t {t}");
        agent.observe(t, 0.5, 1);
    }
}

proptest! {
    #[test]
    fn oracle_dominates_every_leaf(seed in 0u64..500) {
        let fx = three_by_three(seed);
        let snap = fx.snapshot();
        let profile = random_profile(&fx, &snap, seed);
        for i in 0..3 {
            let best = oracle_best_response(&snap, &profile, i, None);
            for a in 0..3 {
                for leaf in fx.codebook.leaves() {
                    prop_assert!(profile.rate_with(&snap, i, &Action::node(a, leaf)) <= best.rate);
                }
            }
            let (terms, _) = compute_regret(&snap, &profile, i, profile.action(i).unwrap());
            prop_assert!(terms.total >= 0.0);
        }
    }

    #[test]
    fn free_beams_have_unit_norm(seed in 0u64..500) {
        let fx = Fixture::new(radio(8), &[[90.0, 60.0]], &[[0.0, 0.0]], seed);
        let h = realize_channel(&fx.states[0][0], fx.t);
        if let Some(v) = dominant_singular_vector(&h, 500, 1e-12) {
            let v: DVector<_> = v;
            prop_assert!((v.norm() - 1.0).abs() < 1e-9);
        }
    }
}
