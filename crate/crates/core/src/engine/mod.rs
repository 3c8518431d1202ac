//! Period loop: mobility, channel realization, policy decisions, rates,
//! regret against the frozen-opponent oracle, the sync barrier and metrics.

mod batch;
mod metrics;
mod persist;

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use batch::{run_batch, Aggregate, BatchOutput, MemberAggregate, MemberRun, Stat};
pub use metrics::{summarize, window_mean, PeriodMetrics, RateWindow, RunSummary, VehicleRecord};
pub use persist::{log_to_csv, persist, read_json, read_log, write_json, write_log};

use crate::agent::{Agent, AgentConfig, Decision, LinkOracle};
use crate::bandit::SyncHub;
use crate::baselines::{compute_regret, oracle_best_response, wcs_solve, PolicyKind};
use crate::config::RunConfig;
use crate::error::Result;
use crate::network::{Action, Profile, RegretTerms, Snapshot};
use crate::phy::{BeamVector, ChannelState, Codebook, CodebookNode};
use crate::scenario::{candidate_set, link_geometry, LinkGeometry, World};
use crate::trace::{load_trace, MobilityTimeline};

const WORLD_STREAM: u64 = 0x0057_4f52_4c44;
const CHANNEL_STREAM: u64 = 0x4348_414e;
const AGENT_STREAM: u64 = 0x0041_4745_4e54;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a tuple of integers, used to derive independent
/// random streams from the run seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6a09_e667_f3bc_c909, |h, &p| splitmix(h ^ splitmix(p)))
}

struct Link {
    state: ChannelState,
    epoch: u64,
    /// Per-path projections of every codebook node, one column per node in
    /// snapshot order.
    projections: DMatrix<Complex64>,
}

/// Everything produced by one period.
#[derive(Debug, Clone)]
pub struct PeriodOutcome {
    pub metrics: PeriodMetrics,
    pub records: Vec<VehicleRecord>,
    pub regrets: Vec<RegretTerms>,
    /// Agent decisions in vehicle order (empty for centralized policies).
    pub decisions: Vec<Decision>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub periods: Vec<PeriodMetrics>,
    pub log: Vec<VehicleRecord>,
}

/// Agent's view of its links: probes see the other vehicles' actions of the
/// previous period.
struct View<'a, 's> {
    snap: &'a Snapshot<'s>,
    previous: &'a Profile,
    i: usize,
    interference: HashMap<usize, Vec<Complex64>>,
}

impl LinkOracle for View<'_, '_> {
    fn candidates(&self) -> Vec<usize> {
        self.snap.candidates[self.i].clone()
    }

    fn geometry(&self, bs: usize) -> Result<LinkGeometry> {
        Ok(self.snap.geometry[self.i][bs])
    }

    fn probe(&mut self, bs: usize, node: CodebookNode) -> f64 {
        let (snap, previous, i) = (self.snap, self.previous, self.i);
        let interference = self
            .interference
            .entry(bs)
            .or_insert_with(|| previous.interference(snap, i, bs));
        snap.reward(snap.rate(snap.node_response(i, bs, node), interference))
    }

    fn best_leaf(&self, bs: usize) -> CodebookNode {
        self.snap.best_leaf(self.i, bs)
    }
}

pub struct Simulation {
    config: RunConfig,
    seed: u64,
    digest: String,
    codebook: Codebook,
    beams: Vec<BeamVector>,
    world: World,
    rng: ChaCha8Rng,
    timeline: Option<MobilityTimeline>,
    links: HashMap<(u64, usize), Link>,
    agent_config: Option<AgentConfig>,
    agents: BTreeMap<u64, Agent>,
    hub: SyncHub,
    previous: BTreeMap<u64, Action>,
}

impl Simulation {
    pub fn new(config: RunConfig, seed: u64) -> Result<Self> {
        let timeline = match &config.scenario.trace {
            Some(path) => Some(load_trace(path, config.scenario.period_s)?),
            None => None,
        };
        Self::build(config, seed, timeline)
    }

    /// Runs the given mobility timeline instead of the configured model.
    pub fn with_timeline(config: RunConfig, seed: u64, timeline: MobilityTimeline) -> Result<Self> {
        Self::build(config, seed, Some(timeline))
    }

    fn build(config: RunConfig, seed: u64, timeline: Option<MobilityTimeline>) -> Result<Self> {
        config.validate()?;
        let codebook = config.codebook()?;
        let beams = codebook.nodes().into_iter().map(|n| codebook.beam(n)).collect();
        let mut world = World::new(&config.scenario, config.radio.n_t, config.radio.n_r)?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, WORLD_STREAM]));
        match &timeline {
            Some(tl) => {
                world.apply_trace(0, tl.at(0));
            }
            None if config.scenario.initial_population => world.populate_stationary(&config.scenario, &mut rng),
            None => {}
        }
        let agent_config = match config.policy.kind.agent_modes() {
            Some(_) => Some(config.agent_config()?),
            None => None,
        };
        let hub = SyncHub::new(config.ucb.capacity);
        Ok(Self {
            digest: config.digest(),
            config,
            seed,
            codebook,
            beams,
            world,
            rng,
            timeline,
            links: HashMap::new(),
            agent_config,
            agents: BTreeMap::new(),
            hub,
            previous: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn agent(&self, vehicle_id: u64) -> Option<&Agent> {
        self.agents.get(&vehicle_id)
    }

    pub fn hub(&self) -> &SyncHub {
        &self.hub
    }

    pub fn period(&self) -> u64 {
        self.world.period
    }

    fn advance_world(&mut self) {
        let t = self.world.period + 1;
        match &self.timeline {
            Some(tl) => {
                self.world.apply_trace(t, tl.at(t));
            }
            None => {
                self.world.step(&self.config.scenario, &mut self.rng);
            }
        }
        let present: Vec<u64> = self.world.vehicles.iter().map(|v| v.id).collect();
        let is_present = |id: &u64| present.binary_search(id).is_ok();
        self.agents.retain(|id, _| is_present(id));
        self.previous.retain(|id, _| is_present(id));
        self.links.retain(|(id, _), _| is_present(id));
    }

    /// Redraws the multipath of links whose vehicle moved beyond the
    /// resampling distance since the last draw.
    fn refresh_links(&mut self) -> Result<()> {
        let radio = &self.config.radio;
        let period_s = self.config.scenario.period_s;
        for v in &self.world.vehicles {
            for bs in &self.world.base_stations {
                let key = (v.id, bs.id);
                let epoch = match self.links.get(&key) {
                    Some(link) if (v.position - link.state.anchor).norm() <= radio.resample_distance_m => continue,
                    Some(link) => link.epoch + 1,
                    None => 0,
                };
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[self.seed, CHANNEL_STREAM, v.id, bs.id as u64, epoch]));
                let blocked = self.world.los_blocked(v.position, bs.position);
                let state = ChannelState::sample(v.position, v.velocity, bs.position, blocked, radio, period_s, &mut rng);
                let projections = state.project_all(&self.beams)?;
                self.links.insert(
                    key,
                    Link {
                        state,
                        epoch,
                        projections,
                    },
                );
            }
        }
        Ok(())
    }

    /// Advances one period and returns its log rows and aggregates.
    pub fn step(&mut self) -> Result<PeriodOutcome> {
        self.advance_world();
        self.refresh_links()?;
        let t = self.world.period;
        let kind = self.config.policy.kind;
        let policy = kind.to_string();
        let radio = &self.config.radio;
        let wavelength = radio.wavelength_m;

        let vehicles = &self.world.vehicles;
        let stations = &self.world.base_stations;
        let ids: Vec<u64> = vehicles.iter().map(|v| v.id).collect();
        let candidates = vehicles
            .iter()
            .map(|v| candidate_set(v.position, stations, self.config.scenario.candidate_radius_m))
            .collect();
        let geometry = vehicles
            .iter()
            .map(|v| stations.iter().map(|bs| link_geometry(v, bs, wavelength)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let links: Vec<Vec<&Link>> = vehicles
            .iter()
            .map(|v| stations.iter().map(|bs| &self.links[&(v.id, bs.id)]).collect())
            .collect();
        let channels = links.iter().map(|row| row.iter().map(|l| &l.state).collect()).collect();
        let projections: Vec<Vec<&DMatrix<Complex64>>> = links
            .iter()
            .map(|row| row.iter().map(|l| &l.projections).collect())
            .collect();
        let snap = Snapshot::new(t, radio, self.codebook, ids.clone(), candidates, geometry, channels, &projections);
        let n = snap.len();

        let mut previous = Profile::new(n);
        for (i, id) in ids.iter().enumerate() {
            if let Some(action) = self.previous.get(id) {
                previous.set(&snap, i, action.clone());
            }
        }

        let mut decisions = Vec::new();
        let profile = match kind {
            PolicyKind::OracleCsi => {
                let actions: Vec<Action> = (0..n)
                    .into_par_iter()
                    .map(|i| oracle_best_response(&snap, &previous, i, None).action)
                    .collect();
                let mut profile = Profile::new(n);
                for (i, action) in actions.into_iter().enumerate() {
                    profile.set(&snap, i, action);
                }
                profile
            }
            PolicyKind::Wcs => wcs_solve(&snap, self.config.policy.wcs_beams).profile,
            _ => {
                let agent_config = self.agent_config.as_ref().expect("decentralized policy has an agent config");
                for &id in &ids {
                    if self.agents.contains_key(&id) {
                        continue;
                    }
                    // arrivals start from the latest shared samples and loads
                    let mut agent = Agent::new(id, t, agent_config.clone(), mix_seed(&[self.seed, AGENT_STREAM, id]));
                    for bs in self.hub.bs_ids().collect::<Vec<_>>() {
                        self.hub.download(bs, agent.store_mut(bs));
                    }
                    for (&bs, &load) in &self.hub.loads {
                        agent.hear_load(bs, load);
                    }
                    self.agents.insert(id, agent);
                }
                decisions = self
                    .agents
                    .values_mut()
                    .enumerate()
                    .collect::<Vec<_>>()
                    .into_par_iter()
                    .map(|(i, agent)| {
                        let mut view = View {
                            snap: &snap,
                            previous: &previous,
                            i,
                            interference: HashMap::new(),
                        };
                        agent.step(t, &mut view)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut profile = Profile::new(n);
                for (i, d) in decisions.iter().enumerate() {
                    profile.set(&snap, i, Action::node(d.bs_id, d.node));
                }
                profile
            }
        };

        let evaluated: Vec<(f64, RegretTerms)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let own = profile.action(i).expect("every vehicle acts");
                (profile.rate(&snap, i), compute_regret(&snap, &previous, i, own).0)
            })
            .collect();

        let mut loads: BTreeMap<usize, u32> = stations.iter().map(|bs| (bs.id, 0)).collect();
        for i in 0..n {
            *loads.entry(profile.action(i).expect("every vehicle acts").bs).or_default() += 1;
        }

        if !decisions.is_empty() {
            for (agent, (rate, _)) in self.agents.values_mut().zip(&evaluated) {
                let bs = agent.serving_bs().expect("agent just decided");
                agent.observe(t, snap.reward(*rate), loads[&bs]);
            }
        }

        // sync barrier, ascending vehicle id
        let mut synced = vec![false; n];
        if !decisions.is_empty() {
            self.hub.loads = loads.clone();
            for (i, agent) in self.agents.values_mut().enumerate() {
                if !agent.wants_sync(t)? {
                    continue;
                }
                for bs in stations.iter().map(|b| b.id) {
                    self.hub.exchange(bs, agent.store_mut(bs));
                }
                agent.mark_synced(t);
                for (&bs, &load) in &self.hub.loads {
                    agent.hear_load(bs, load);
                }
                synced[i] = true;
            }
        }

        let probe_fraction = self.config.policy.probe_fraction;
        let mut records = Vec::with_capacity(n);
        let mut total_rate = 0.0;
        let mut effective_sum = 0.0;
        let mut regret_sum = 0.0;
        let mut probing = 0usize;
        for i in 0..n {
            let action = profile.action(i).expect("every vehicle acts");
            let node = action.beam.node();
            let (rate, regret) = evaluated[i];
            let probed = decisions.get(i).is_some_and(|d| !d.probes.is_empty());
            total_rate += rate;
            effective_sum += if probed { rate * (1.0 - probe_fraction) } else { rate };
            regret_sum += regret.total;
            probing += probed as usize;
            records.push(VehicleRecord {
                period: t,
                vehicle_id: ids[i],
                policy: policy.clone(),
                bs_id: action.bs,
                psi_rad: node.psi(),
                layer: node.layer(),
                rate_bps: rate,
                regret: regret.total,
                regret1: regret.association,
                regret2: regret.beam,
                synced: synced[i],
            });
        }
        let per_vehicle = |sum: f64| if n == 0 { 0.0 } else { sum / n as f64 };
        let metrics = PeriodMetrics {
            period: t,
            active_vehicles: n,
            total_rate_bps: total_rate,
            mean_effective_rate_bps: per_vehicle(effective_sum),
            mean_regret: per_vehicle(regret_sum),
            sync_events: synced.iter().filter(|&&s| s).count(),
            probe_overhead: per_vehicle(probing as f64),
        };

        self.previous = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (*id, profile.action(i).expect("every vehicle acts").clone()))
            .collect();

        Ok(PeriodOutcome {
            metrics,
            records,
            regrets: evaluated.into_iter().map(|(_, r)| r).collect(),
            decisions,
        })
    }

    /// Runs the configured horizon. The per-vehicle log is kept only when
    /// `keep_log` is set.
    pub fn run(mut self, keep_log: bool) -> Result<RunOutput> {
        let horizon = self.config.scenario.periods;
        let mut periods = Vec::with_capacity(horizon as usize);
        let mut log = Vec::new();
        for _ in 0..horizon {
            let outcome = self.step()?;
            periods.push(outcome.metrics);
            if keep_log {
                log.extend(outcome.records);
            }
        }
        let summary = summarize(
            &periods,
            self.config.engine.rate_window,
            self.digest.clone(),
            self.seed,
            self.config.policy.kind.to_string(),
        );
        Ok(RunOutput { summary, periods, log })
    }
}

/// Builds and runs one seed of a validated configuration.
pub fn run(config: &RunConfig, seed: u64) -> Result<RunOutput> {
    Simulation::new(config.clone(), seed)?.run(true)
}
