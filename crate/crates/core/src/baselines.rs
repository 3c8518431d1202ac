//! Comparison policies and the best-response oracle.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::agent::{AssociationMode, BeamMode};
use crate::error::{Error, Result};
use crate::network::{Action, Beam, BestResponse, Profile, RegretTerms, Snapshot};
use crate::phy::{realize_channel, BeamVector, Codebook, CodebookNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    BkcUcb,
    OracleCsi,
    Wcs,
    DkUcbLite,
    Layer1Restart,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::OracleCsi,
        PolicyKind::Wcs,
        PolicyKind::DkUcbLite,
        PolicyKind::BkcUcb,
        PolicyKind::Layer1Restart,
        PolicyKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::BkcUcb => "bkc_ucb",
            PolicyKind::OracleCsi => "oracle_csi",
            PolicyKind::Wcs => "wcs",
            PolicyKind::DkUcbLite => "dk_ucb_lite",
            PolicyKind::Layer1Restart => "layer1_restart",
            PolicyKind::Random => "random",
        }
    }

    /// Agent behavior for the decentralized policies; `None` for the
    /// centralized ones.
    pub fn agent_modes(self) -> Option<(AssociationMode, BeamMode)> {
        match self {
            PolicyKind::BkcUcb => Some((AssociationMode::Ucb, BeamMode::Kernel)),
            PolicyKind::DkUcbLite => Some((AssociationMode::Ucb, BeamMode::CsiExhaustive)),
            PolicyKind::Layer1Restart => Some((AssociationMode::Ucb, BeamMode::Layer1Restart)),
            PolicyKind::Random => Some((AssociationMode::Random, BeamMode::Random)),
            PolicyKind::OracleCsi | PolicyKind::Wcs => None,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::config("policy.kind", format!("unknown policy `{s}`")))
    }
}

/// Best action of vehicle `i` over its candidate BSs (plus the BS of `own`)
/// and the leaf beams, with the other vehicles frozen at `frozen`. Ties go
/// to the lowest BS id, then the smallest steering angle. The vehicle's own
/// action competes as well, so a wide or off-codebook beam that beats every
/// leaf is its own best response.
pub fn oracle_best_response(snap: &Snapshot<'_>, frozen: &Profile, i: usize, own: Option<&Action>) -> BestResponse {
    let mut stations = snap.candidates[i].clone();
    if let Some(own) = own {
        if let Err(pos) = stations.binary_search(&own.bs) {
            stations.insert(pos, own.bs);
        }
    }
    let mut best: Option<BestResponse> = None;
    for a in stations {
        let interference = frozen.interference(snap, i, a);
        for &j in &snap.leaf_indices {
            let node = snap.nodes[j];
            let rate = snap.rate(snap.node_response(i, a, node), &interference);
            if best.as_ref().is_none_or(|b| rate > b.rate) {
                best = Some(BestResponse {
                    action: Action::node(a, node),
                    rate,
                });
            }
        }
    }
    let mut best = best.expect("candidate set is never empty");
    if let Some(own) = own {
        let rate = frozen.rate_with(snap, i, own);
        if rate > best.rate {
            best = BestResponse {
                action: own.clone(),
                rate,
            };
        }
    }
    best
}

/// Regret of vehicle `i` playing `own` against the frozen-opponent oracle.
/// The association part re-evaluates the own beam on the oracle BS, keeping
/// the beam's layer and its offset from the LOS direction.
pub fn compute_regret(snap: &Snapshot<'_>, frozen: &Profile, i: usize, own: &Action) -> (RegretTerms, BestResponse) {
    let best = oracle_best_response(snap, frozen, i, Some(own));
    let achieved = frozen.rate_with(snap, i, own);
    let total = snap.regret_units(best.rate - achieved);
    let association = if best.action.bs == own.bs {
        0.0
    } else {
        let mapped = map_beam(snap, i, own, best.action.bs);
        snap.regret_units(frozen.rate_with(snap, i, &mapped) - achieved)
    };
    (
        RegretTerms {
            total,
            association,
            beam: total - association,
        },
        best,
    )
}

fn map_beam(snap: &Snapshot<'_>, i: usize, own: &Action, target: usize) -> Action {
    let node = own.beam.node();
    let bias = node.psi() - snap.geometry[i][own.bs].los_steering;
    let psi = snap.geometry[i][target].los_steering + bias;
    Action::node(target, snap.codebook.snap(psi, node.layer()))
}

/// Dominant right singular vector of `h` by power iteration on `h^H h`;
/// `None` if the channel vanishes or the iteration does not settle.
pub fn dominant_singular_vector(h: &DMatrix<Complex64>, max_iter: usize, tol: f64) -> Option<DVector<Complex64>> {
    let gram = h.adjoint() * h;
    let n = gram.nrows();
    if n == 0 || gram.norm() == 0.0 {
        return None;
    }
    let mut x = DVector::from_element(n, Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
    for _ in 0..max_iter {
        let y = &gram * &x;
        let norm = y.norm();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        x = y.unscale(norm);
        let gx = &gram * &x;
        let mu = x.dotc(&gx);
        if (gx - &x * mu).norm() <= tol * mu.norm() {
            return Some(x);
        }
    }
    None
}

/// Leaf with the largest correlation `|w^H v|`.
pub fn nearest_leaf(v: &DVector<Complex64>, codebook: &Codebook) -> CodebookNode {
    let mut best: Option<(CodebookNode, f64)> = None;
    for leaf in codebook.leaves() {
        let c = codebook.beam(leaf).dotc(v).norm();
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((leaf, c));
        }
    }
    best.expect("codebook has leaves").0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WcsBeams {
    /// Singular vectors projected onto the nearest codebook leaf.
    Codebook,
    /// Unconstrained singular vectors.
    Svd,
}

#[derive(Debug, Clone)]
pub struct WcsOutcome {
    pub profile: Profile,
    /// Total rate after initialization and after every accepted swap.
    pub totals: Vec<f64>,
    pub swaps: usize,
}

/// Centralized worst-connection swapping. Vehicles are placed in index
/// order, each on the candidate BS giving it the best rate next to those
/// already placed. Then the lowest-rate vehicle is moved to whichever other
/// candidate raises the total rate most, until its move no longer helps or
/// `|U| * |B|` swaps were made.
pub fn wcs_solve(snap: &Snapshot<'_>, beams: WcsBeams) -> WcsOutcome {
    let n = snap.len();
    let bs_count = snap.bs_count();
    let mut beam_table: Vec<Vec<Option<Beam>>> = vec![vec![None; bs_count]; n];
    for i in 0..n {
        for &a in &snap.candidates[i] {
            beam_table[i][a] = Some(svd_beam(snap, i, a, beams));
        }
    }
    // greedy start: each vehicle takes its rate-best BS given those placed
    let mut profile = Profile::new(n);
    for i in 0..n {
        let mut best: Option<(Action, f64)> = None;
        for &a in &snap.candidates[i] {
            let action = Action {
                bs: a,
                beam: beam_table[i][a].clone().expect("filled"),
            };
            let rate = profile.rate_with(snap, i, &action);
            if best.as_ref().is_none_or(|(_, b)| rate > *b) {
                best = Some((action, rate));
            }
        }
        profile.set(snap, i, best.expect("candidate set is never empty").0);
    }
    let mut totals = vec![profile.total_rate(snap)];
    let mut swaps = 0;
    let cap = n * bs_count;
    while swaps < cap && n > 0 {
        let rates: Vec<f64> = (0..n).map(|i| profile.rate(snap, i)).collect();
        let worst = (0..n).fold(0, |w, i| if rates[i] < rates[w] { i } else { w });
        let current = profile.action(worst).expect("set").bs;
        let base = *totals.last().expect("non-empty");
        let mut best: Option<(Action, f64)> = None;
        for &a in &snap.candidates[worst] {
            if a == current {
                continue;
            }
            let action = Action {
                bs: a,
                beam: beam_table[worst][a].clone().expect("filled"),
            };
            let mut trial = profile.clone();
            trial.set(snap, worst, action.clone());
            let total = trial.total_rate(snap);
            if total > base && best.as_ref().is_none_or(|(_, b)| total > *b) {
                best = Some((action, total));
            }
        }
        match best {
            Some((action, total)) => {
                profile.set(snap, worst, action);
                totals.push(total);
                swaps += 1;
            }
            None => break,
        }
    }
    WcsOutcome { profile, totals, swaps }
}

fn svd_beam(snap: &Snapshot<'_>, i: usize, a: usize, mode: WcsBeams) -> Beam {
    let h = realize_channel(snap.channels[i][a], snap.t);
    match dominant_singular_vector(&h, 100, 1e-10) {
        Some(v) => {
            let nearest = nearest_leaf(&v, &snap.codebook);
            match mode {
                WcsBeams::Codebook => Beam::Node(nearest),
                WcsBeams::Svd => Beam::Free {
                    vector: BeamVector::from(v),
                    nearest,
                },
            }
        }
        None => Beam::Node(snap.best_leaf(i, a)),
    }
}
