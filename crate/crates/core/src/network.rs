//! Per-period snapshot of every vehicle-BS link: receive responses of all
//! codebook beams, the action profile, interference sums and rates.

use std::borrow::Cow;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::phy::{matched_sinr_slice, BeamVector, ChannelState, Codebook, CodebookNode, RadioConfig};
use crate::scenario::LinkGeometry;

/// Transmit beam of an action: a codebook node or an unconstrained vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Beam {
    Node(CodebookNode),
    Free {
        vector: BeamVector,
        /// Closest codebook leaf, used for logging and cross-BS mapping.
        nearest: CodebookNode,
    },
}

impl Beam {
    pub fn node(&self) -> CodebookNode {
        match self {
            Beam::Node(n) => *n,
            Beam::Free { nearest, .. } => *nearest,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub bs: usize,
    pub beam: Beam,
}

impl Action {
    pub fn node(bs: usize, node: CodebookNode) -> Self {
        Self {
            bs,
            beam: Beam::Node(node),
        }
    }
}

/// A best response and the rate it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub action: Action,
    pub rate: f64,
}

/// Regret of one vehicle in normalized-rate units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegretTerms {
    pub total: f64,
    /// Association part: the own beam moved to the best BS.
    pub association: f64,
    /// Beam part under the best BS.
    pub beam: f64,
}

/// Receive-side view of all links in one period. Vehicles are indexed by
/// position in ascending id order.
pub struct Snapshot<'a> {
    pub t: u64,
    pub radio: &'a RadioConfig,
    pub codebook: Codebook,
    /// Every codebook node, ascending steering angle.
    pub nodes: Vec<CodebookNode>,
    /// Position in `nodes` by `2^layer - 2 + index`.
    node_slots: Vec<usize>,
    pub leaf_indices: Vec<usize>,
    pub vehicle_ids: Vec<u64>,
    pub candidates: Vec<Vec<usize>>,
    pub geometry: Vec<Vec<LinkGeometry>>,
    pub channels: Vec<Vec<&'a ChannelState>>,
    /// `responses[i][a]` holds `H_{i,a} w_j` as column `j`.
    responses: Vec<Vec<DMatrix<Complex64>>>,
}

fn slot(node: CodebookNode) -> usize {
    (1usize << node.layer()) - 2 + node.index() as usize
}

impl<'a> Snapshot<'a> {
    /// `projections[i][a]` are the per-path projections of every node of
    /// `codebook.nodes()` on link `(i, a)`, one column per node.
    pub fn new(
        t: u64,
        radio: &'a RadioConfig,
        codebook: Codebook,
        vehicle_ids: Vec<u64>,
        candidates: Vec<Vec<usize>>,
        geometry: Vec<Vec<LinkGeometry>>,
        channels: Vec<Vec<&'a ChannelState>>,
        projections: &[Vec<&DMatrix<Complex64>>],
    ) -> Self {
        let nodes = codebook.nodes();
        let mut node_slots = vec![usize::MAX; (1usize << (codebook.max_layer() + 1)).saturating_sub(2)];
        for (j, n) in nodes.iter().enumerate() {
            node_slots[slot(*n)] = j;
        }
        let leaf_indices = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| codebook.is_leaf(**n))
            .map(|(i, _)| i)
            .collect();
        let responses = channels
            .iter()
            .zip(projections)
            .map(|(links, projs)| links.iter().zip(projs).map(|(ch, p)| ch.combine_all(t, p)).collect())
            .collect();
        Self {
            t,
            radio,
            codebook,
            nodes,
            node_slots,
            leaf_indices,
            vehicle_ids,
            candidates,
            geometry,
            channels,
            responses,
        }
    }

    pub fn len(&self) -> usize {
        self.vehicle_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicle_ids.is_empty()
    }

    pub fn bs_count(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn node_index(&self, node: CodebookNode) -> usize {
        self.node_slots[slot(node)]
    }

    fn column(&self, i: usize, a: usize, j: usize) -> &[Complex64] {
        let n_r = self.radio.n_r;
        &self.responses[i][a].as_slice()[j * n_r..(j + 1) * n_r]
    }

    pub fn node_response(&self, i: usize, a: usize, node: CodebookNode) -> &[Complex64] {
        self.column(i, a, self.node_index(node))
    }

    pub fn response(&self, i: usize, a: usize, beam: &Beam) -> Cow<'_, [Complex64]> {
        match beam {
            Beam::Node(n) => Cow::Borrowed(self.node_response(i, a, *n)),
            Beam::Free { vector, .. } => Cow::Owned(
                self.channels[i][a]
                    .response(self.t, vector)
                    .expect("beam sized to the array")
                    .as_slice()
                    .to_vec(),
            ),
        }
    }

    /// Responses of vehicle `i`'s beam at every BS.
    pub fn footprint(&self, i: usize, beam: &Beam) -> Vec<Vec<Complex64>> {
        (0..self.bs_count()).map(|a| self.response(i, a, beam).into_owned()).collect()
    }

    /// Rate of a link given its receive response and the aggregate
    /// interfering response at the same BS.
    pub fn rate(&self, own: &[Complex64], interference: &[Complex64]) -> f64 {
        matched_sinr_slice(own, interference, self.radio).1
    }

    /// Leaf with the largest receive-response norm on link `(i, a)`; ties go
    /// to the smaller steering angle.
    pub fn best_leaf(&self, i: usize, a: usize) -> CodebookNode {
        let mut best = (self.leaf_indices[0], f64::NEG_INFINITY);
        for &j in &self.leaf_indices {
            let g: f64 = self.column(i, a, j).iter().map(|c| c.norm_sqr()).sum();
            if g > best.1 {
                best = (j, g);
            }
        }
        self.nodes[best.0]
    }

    /// Normalized reward.
    pub fn reward(&self, rate: f64) -> f64 {
        self.radio.normalize_rate(rate)
    }

    /// Regret scale: rates are divided by the rate at the SINR cap.
    pub fn regret_units(&self, rate_gap: f64) -> f64 {
        rate_gap / self.radio.rate_scale()
    }
}

/// Action profile of all vehicles with each beam's response at every BS.
#[derive(Debug, Clone, Default)]
pub struct Profile {
    pub actions: Vec<Option<Action>>,
    footprints: Vec<Option<Vec<Vec<Complex64>>>>,
}

impl Profile {
    pub fn new(n: usize) -> Self {
        Self {
            actions: vec![None; n],
            footprints: vec![None; n],
        }
    }

    pub fn set(&mut self, snap: &Snapshot<'_>, i: usize, action: Action) {
        self.footprints[i] = Some(snap.footprint(i, &action.beam));
        self.actions[i] = Some(action);
    }

    pub fn action(&self, i: usize) -> Option<&Action> {
        self.actions[i].as_ref()
    }

    /// `sum_{k != i} H_{k,a} w_k` over vehicles with an action, ascending.
    pub fn interference(&self, snap: &Snapshot<'_>, i: usize, a: usize) -> Vec<Complex64> {
        let mut sum = vec![Complex64::new(0.0, 0.0); snap.radio.n_r];
        for (k, fp) in self.footprints.iter().enumerate() {
            if k == i {
                continue;
            }
            if let Some(fp) = fp {
                for (s, v) in sum.iter_mut().zip(&fp[a]) {
                    *s += v;
                }
            }
        }
        sum
    }

    /// Rate of vehicle `i` under the profile.
    pub fn rate(&self, snap: &Snapshot<'_>, i: usize) -> f64 {
        match &self.actions[i] {
            None => 0.0,
            Some(action) => {
                let interference = self.interference(snap, i, action.bs);
                let own = &self.footprints[i].as_ref().expect("set with action")[action.bs];
                snap.rate(own, &interference)
            }
        }
    }

    /// Rate vehicle `i` would get with `action` while others stay fixed.
    pub fn rate_with(&self, snap: &Snapshot<'_>, i: usize, action: &Action) -> f64 {
        let interference = self.interference(snap, i, action.bs);
        snap.rate(&snap.response(i, action.bs, &action.beam), &interference)
    }

    pub fn total_rate(&self, snap: &Snapshot<'_>) -> f64 {
        (0..self.actions.len()).map(|i| self.rate(snap, i)).sum()
    }
}
