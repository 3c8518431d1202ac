//! Per-vehicle learning agent: periodic BS association by UCB over the
//! association kernel, kernel-guided beam reset, per-period hierarchical
//! beam descent and event-triggered synchronization.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{
    information_gain, trigger_fires, ucb_score, ucb_select, KernelModel, Posterior, Sample, SampleId, SampleStore,
    UcbParams,
};
use crate::error::{Error, Result};
use crate::geom::wrap_angle;
use crate::kernels::{KernelKind, KernelParams};
use crate::phy::{Codebook, CodebookNode};
use crate::scenario::{Context, LinkGeometry};

/// How the agent picks its parent beam and descends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamMode {
    /// Kernel-estimated reset followed by two-child descent.
    Kernel,
    /// Restart from the layer-1 sector containing the LOS direction.
    Layer1Restart,
    /// Exhaustive leaf search with channel knowledge of the serving link.
    CsiExhaustive,
    /// Uniform random leaf every period.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationMode {
    Ucb,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub codebook: Codebook,
    pub kernel: KernelParams,
    pub ucb: UcbParams,
    pub association_interval: u64,
    pub beam_mode: BeamMode,
    pub association_mode: AssociationMode,
    /// Also store probe measurements as samples.
    pub include_probes: bool,
}

/// What the agent can observe about its links during one period.
pub trait LinkOracle {
    /// Candidate BSs, ascending id, never empty in a valid world.
    fn candidates(&self) -> Vec<usize>;
    fn geometry(&self, bs: usize) -> Result<LinkGeometry>;
    /// Normalized reward the beam would obtain on `bs` this period.
    fn probe(&mut self, bs: usize, node: CodebookNode) -> f64;
    /// Best leaf of the link under full channel knowledge.
    fn best_leaf(&self, bs: usize) -> CodebookNode;
}

/// The action an agent takes in one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub bs_id: usize,
    pub node: CodebookNode,
    /// Parent the descent started from.
    pub parent: CodebookNode,
    /// Whether the association was re-evaluated this period.
    pub associated: bool,
    /// Beams measured besides the transmitted one.
    pub probes: Vec<(CodebookNode, f64)>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub vehicle_id: u64,
    config: AgentConfig,
    first_period: u64,
    bs: Option<usize>,
    node: Option<CodebookNode>,
    stores: BTreeMap<usize, SampleStore>,
    models: BTreeMap<(usize, KernelKind), KernelModel>,
    t_syn: u64,
    seq: u32,
    last_load: BTreeMap<usize, u32>,
    broadcast_load: BTreeMap<usize, u32>,
    rng: ChaCha8Rng,
    pending: Vec<(Context, f64)>,
    transmitted: Option<Context>,
    syncs: u64,
}

impl Agent {
    pub fn new(vehicle_id: u64, first_period: u64, config: AgentConfig, seed: u64) -> Self {
        Self {
            vehicle_id,
            config,
            first_period,
            bs: None,
            node: None,
            stores: BTreeMap::new(),
            models: BTreeMap::new(),
            t_syn: first_period,
            seq: 0,
            last_load: BTreeMap::new(),
            broadcast_load: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: Vec::new(),
            transmitted: None,
            syncs: 0,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn serving_bs(&self) -> Option<usize> {
        self.bs
    }

    pub fn beam(&self) -> Option<CodebookNode> {
        self.node
    }

    pub fn last_sync(&self) -> u64 {
        self.t_syn
    }

    pub fn sync_count(&self) -> u64 {
        self.syncs
    }

    pub fn store(&self, bs: usize) -> Option<&SampleStore> {
        self.stores.get(&bs)
    }

    pub fn stores_mut(&mut self) -> impl Iterator<Item = (&usize, &mut SampleStore)> {
        self.stores.iter_mut()
    }

    /// Records the load a BS broadcast, used until the agent has its own
    /// observation of that BS.
    pub fn hear_load(&mut self, bs: usize, load: u32) {
        self.broadcast_load.insert(bs, load);
    }

    pub fn is_association_period(&self, t: u64) -> bool {
        (t - self.first_period).is_multiple_of(self.config.association_interval)
    }

    pub fn is_sync_period(&self, t: u64) -> bool {
        let n = self.config.association_interval;
        (t - self.first_period) % n == n - 1
    }

    fn load(&self, bs: usize) -> u32 {
        self.last_load
            .get(&bs)
            .or_else(|| self.broadcast_load.get(&bs))
            .copied()
            .unwrap_or(1)
    }

    pub fn context(&self, geometry: &LinkGeometry, beam_bias: f64) -> Context {
        Context::from_geometry(geometry, self.load(geometry.bs_id), beam_bias)
    }

    /// Store for `bs`, created empty if the agent has none yet.
    pub fn store_mut(&mut self, bs: usize) -> &mut SampleStore {
        self.store_entry(bs)
    }

    fn store_entry(&mut self, bs: usize) -> &mut SampleStore {
        let capacity = self.config.ucb.capacity;
        self.stores.entry(bs).or_insert_with(|| SampleStore::new(capacity))
    }

    /// Synchronized model for `(bs, kind)`.
    pub fn model(&mut self, bs: usize, kind: KernelKind) -> Result<&mut KernelModel> {
        let params = self.config.kernel;
        self.store_entry(bs);
        let store = &self.stores[&bs];
        let model = self
            .models
            .entry((bs, kind))
            .or_insert_with(|| KernelModel::new(kind, params));
        model.sync(store)?;
        Ok(model)
    }

    pub fn posterior(&mut self, query: &Context, kind: KernelKind) -> Result<Posterior> {
        Ok(self.model(query.bs_id, kind)?.posterior(query))
    }

    fn alpha(&mut self, t: u64, bs: usize) -> Result<f64> {
        let ucb = self.config.ucb;
        let lambda = self.config.kernel.lambda_k;
        let log_det = match ucb.schedule {
            crate::bandit::AlphaSchedule::Constant => 0.0,
            crate::bandit::AlphaSchedule::Confidence => self.model(bs, KernelKind::Association)?.log_det(),
        };
        Ok(ucb.alpha_at(t, log_det, lambda))
    }

    /// UCB scores of the candidate BSs under the association kernel.
    pub fn association_scores(&mut self, t: u64, view: &dyn LinkOracle) -> Result<Vec<(usize, f64)>> {
        let mut scores = Vec::new();
        for bs in view.candidates() {
            let ctx = self.context(&view.geometry(bs)?, 0.0);
            let post = self.posterior(&ctx, KernelKind::Association)?;
            let alpha = self.alpha(t, bs)?;
            scores.push((bs, ucb_score(&post, alpha)));
        }
        Ok(scores)
    }

    pub fn decide_association(&mut self, t: u64, view: &dyn LinkOracle) -> Result<usize> {
        let candidates = view.candidates();
        if candidates.is_empty() {
            return Err(Error::EmptyCandidates);
        }
        match self.config.association_mode {
            AssociationMode::Random => Ok(candidates[self.rng.random_range(0..candidates.len())]),
            AssociationMode::Ucb => ucb_select(&self.association_scores(t, view)?).ok_or(Error::EmptyCandidates),
        }
    }

    /// Bias grid: every leaf steering angle relative to the LOS steering.
    pub fn bias_grid(&self, los_steering: f64) -> Vec<f64> {
        self.config
            .codebook
            .leaves()
            .map(|leaf| wrap_angle(leaf.psi() - los_steering))
            .collect()
    }

    /// Parent beam after (re)association: the bias with the highest
    /// estimated reward, at a layer that narrows as the estimate firms up.
    pub fn reset_beam(&mut self, geometry: &LinkGeometry) -> Result<CodebookNode> {
        let rho = geometry.los_steering;
        let mut best: Option<(usize, f64, Posterior)> = None;
        for (n, bias) in self.bias_grid(rho).into_iter().enumerate() {
            let ctx = self.context(geometry, bias);
            let post = self.posterior(&ctx, KernelKind::BeamTracking)?;
            let better = match &best {
                None => true,
                Some((_, b, p)) => post.mean > p.mean || (post.mean == p.mean && bias.abs() < b.abs()),
            };
            if better {
                best = Some((n, bias, post));
            }
        }
        let (_, bias, post) = best.expect("codebook has leaves");
        let layer = reset_layer(
            self.config.codebook.max_layer(),
            self.config.kernel.lambda_k,
            post.deviation,
        );
        Ok(self.config.codebook.snap(bias + rho, layer))
    }

    /// One step of hierarchical search from `parent`: the better of its two
    /// children, or at the leaf layer the best of the beam and its
    /// neighbors.
    pub fn descend(
        &self,
        bs: usize,
        parent: CodebookNode,
        view: &mut dyn LinkOracle,
    ) -> Result<(CodebookNode, Vec<(CodebookNode, f64)>)> {
        let cb = &self.config.codebook;
        if !cb.is_leaf(parent) {
            let (left, right) = cb.children(parent)?;
            let rl = view.probe(bs, left);
            let rr = view.probe(bs, right);
            let chosen = if rr > rl { right } else { left };
            return Ok((chosen, vec![(left, rl), (right, rr)]));
        }
        let mut best = (parent, view.probe(bs, parent));
        let mut probes = Vec::new();
        let (lo, hi) = cb.neighbors(parent);
        for node in [lo, hi].into_iter().flatten() {
            let r = view.probe(bs, node);
            probes.push((node, r));
            if r > best.1 {
                best = (node, r);
            }
        }
        Ok((best.0, probes))
    }

    /// Chooses association and beam for period `t`.
    pub fn step(&mut self, t: u64, view: &mut dyn LinkOracle) -> Result<Decision> {
        let associated = self.bs.is_none() || self.is_association_period(t);
        let bs = if associated {
            self.decide_association(t, &*view)?
        } else {
            self.bs.expect("associated before")
        };
        let geometry = view.geometry(bs)?;
        let cb = self.config.codebook;

        let (parent, node, probes) = match self.config.beam_mode {
            BeamMode::Random => {
                let leaves: Vec<CodebookNode> = cb.leaves().collect();
                let leaf = leaves[self.rng.random_range(0..leaves.len())];
                (leaf, leaf, Vec::new())
            }
            BeamMode::CsiExhaustive => {
                let leaf = view.best_leaf(bs);
                (leaf, leaf, Vec::new())
            }
            mode => {
                let parent = match (associated, self.node) {
                    (false, Some(prev)) => prev,
                    _ if mode == BeamMode::Layer1Restart => cb.snap(geometry.los_steering, 1),
                    _ => self.reset_beam(&geometry)?,
                };
                let (node, probes) = self.descend(bs, parent, view)?;
                (parent, node, probes)
            }
        };

        self.bs = Some(bs);
        self.node = Some(node);
        let rho = geometry.los_steering;
        self.transmitted = Some(self.context(&geometry, node.psi() - rho));
        self.pending = if self.config.include_probes {
            probes
                .iter()
                .map(|(n, r)| (self.context(&geometry, n.psi() - rho), *r))
                .collect()
        } else {
            Vec::new()
        };
        Ok(Decision {
            bs_id: bs,
            node,
            parent,
            associated,
            probes,
        })
    }

    fn next_id(&mut self) -> SampleId {
        let id = SampleId::new(self.vehicle_id, self.seq);
        self.seq = self.seq.wrapping_add(1);
        id
    }

    /// Stores the realized reward of this period's transmission and the load
    /// observed at the serving BS.
    pub fn observe(&mut self, t: u64, reward: f64, load: u32) {
        let Some(ctx) = self.transmitted.take() else {
            return;
        };
        self.last_load.insert(ctx.bs_id, load);
        let pending = std::mem::take(&mut self.pending);
        for (context, r) in pending.into_iter().chain(std::iter::once((ctx, reward))) {
            let id = self.next_id();
            self.store_entry(context.bs_id).push(Sample {
                id,
                period: t,
                context,
                reward: r.clamp(0.0, 1.0),
            });
        }
    }

    /// Information gain of the serving BS's new samples.
    pub fn information_gain(&mut self) -> Result<f64> {
        let Some(bs) = self.bs else { return Ok(0.0) };
        let form = self.config.ucb.trigger;
        let watermark = self.store_entry(bs).watermark();
        let model = self.model(bs, KernelKind::Association)?;
        information_gain(model, watermark, form)
    }

    /// Whether the agent synchronizes at the end of period `t`.
    pub fn wants_sync(&mut self, t: u64) -> Result<bool> {
        if !self.is_sync_period(t) || self.bs.is_none() {
            return Ok(false);
        }
        let elapsed = t.saturating_sub(self.t_syn);
        if elapsed == 0 {
            return Ok(false);
        }
        let gain = self.information_gain()?;
        Ok(trigger_fires(elapsed, gain, self.config.ucb.sync_threshold))
    }

    pub fn mark_synced(&mut self, t: u64) {
        self.t_syn = t;
        self.syncs += 1;
        for store in self.stores.values_mut() {
            store.mark_synced();
        }
    }
}

/// `clamp(ceil(L_m (1 - lambda sigma^2)) - 1, 1, L_m)`.
pub fn reset_layer(max_layer: u32, lambda_k: f64, deviation: f64) -> u32 {
    let confidence = (1.0 - lambda_k * deviation * deviation).clamp(0.0, 1.0);
    let raw = (max_layer as f64 * confidence).ceil() as i64 - 1;
    raw.clamp(1, max_layer as i64) as u32
}
