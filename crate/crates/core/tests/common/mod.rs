//! Test-side oracles written independently of the library: kernels from
//! their closed forms, a dense Gaussian-elimination solver, determinants by
//! elimination, and contexts drawn from simulator geometry.

#![allow(dead_code)]

use std::f64::consts::PI;

use bkcucb_core::geom::Vec2;
use bkcucb_core::kernels::{KernelKind, KernelParams};
use bkcucb_core::scenario::{link_geometry, BaseStation, Context, ScenarioConfig, Vehicle, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shortest-arc distance between two angles, in `[0, pi]`.
pub fn arc(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

pub fn oracle_kernel(params: &KernelParams, kind: KernelKind, a: &Context, b: &Context) -> f64 {
    if a.bs_id != b.bs_id {
        return 0.0;
    }
    let d_theta = arc(a.angle, b.angle);
    let k_theta = if d_theta < PI / 2.0 { d_theta.cos() } else { 0.0 };
    let dl = a.distance - b.distance;
    let k_l = (-dl * dl / (2.0 * params.sigma_distance * params.sigma_distance)).exp();
    let k_f = (-(a.doppler - b.doppler).abs() / params.sigma_doppler).exp();
    let dn = (a.load as f64 - b.load as f64).abs();
    let k_n = (1.0 - dn / params.sigma_load).max(0.0);
    let base = k_theta * k_l * k_f * k_n;
    match kind {
        KernelKind::Association => base,
        KernelKind::BeamTracking => {
            let dp = arc(a.beam_bias, b.beam_bias);
            base * (-dp * dp / (2.0 * params.sigma_bias * params.sigma_bias)).exp()
        }
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &r)| {
        let mut row = row.clone();
        row.push(r);
        row
    }).collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

/// `log |det a|` by elimination; 0 for the empty matrix.
pub fn dense_log_det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut log_det = 0.0;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, pivot);
        log_det += m[col][col].abs().ln();
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    log_det
}

/// `I + K / lambda` over `contexts`.
pub fn information_matrix(contexts: &[Context], params: &KernelParams, kind: KernelKind) -> Vec<Vec<f64>> {
    contexts
        .iter()
        .enumerate()
        .map(|(i, a)| {
            contexts
                .iter()
                .enumerate()
                .map(|(j, b)| oracle_kernel(params, kind, a, b) / params.lambda_k + if i == j { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Posterior mean and deviation by a dense solve of `(K + lambda I) x = y`.
pub fn dense_posterior(
    query: &Context,
    contexts: &[Context],
    rewards: &[f64],
    params: &KernelParams,
    kind: KernelKind,
) -> (f64, f64) {
    let lambda = params.lambda_k;
    let a: Vec<Vec<f64>> = contexts
        .iter()
        .enumerate()
        .map(|(i, x)| {
            contexts
                .iter()
                .enumerate()
                .map(|(j, y)| oracle_kernel(params, kind, x, y) + if i == j { lambda } else { 0.0 })
                .collect()
        })
        .collect();
    let k: Vec<f64> = contexts.iter().map(|c| oracle_kernel(params, kind, query, c)).collect();
    let weights = dense_solve(&a, rewards);
    let mean: f64 = k.iter().zip(&weights).map(|(a, b)| a * b).sum();
    let v = dense_solve(&a, &k);
    let quad: f64 = k.iter().zip(&v).map(|(a, b)| a * b).sum();
    let prior = oracle_kernel(params, kind, query, query);
    let deviation = ((prior - quad).max(0.0) / lambda).sqrt();
    (mean, deviation)
}

/// A world with the default layout and random vehicles inside it.
pub struct GeometrySampler {
    pub world: World,
    pub config: ScenarioConfig,
    pub wavelength: f64,
}

impl GeometrySampler {
    pub fn new() -> Self {
        let config = ScenarioConfig::default();
        let world = World::new(&config, 16, 16).unwrap();
        Self {
            world,
            config,
            wavelength: bkcucb_core::phy::RadioConfig::default().wavelength_m,
        }
    }

    pub fn vehicle<R: Rng>(&self, rng: &mut R, id: u64) -> Vehicle {
        let [w, h] = self.config.area_m;
        let [lo, hi] = self.config.speed_mps;
        loop {
            let position = Vec2::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
            if self.world.base_stations.iter().any(|b| (b.position - position).norm() < 1.0) {
                continue;
            }
            let speed = rng.random_range(lo..=hi);
            let heading = rng.random_range(-PI..PI);
            return Vehicle {
                id,
                position,
                velocity: Vec2::from_polar(speed, heading),
                antennas: 16,
                arrival_period: 0,
            };
        }
    }

    /// A context of a random vehicle towards BS `bs`, with a random load and
    /// a random beam bias.
    pub fn context<R: Rng>(&self, rng: &mut R, bs: usize) -> Context {
        let v = self.vehicle(rng, 0);
        let station: &BaseStation = &self.world.base_stations[bs];
        let g = link_geometry(&v, station, self.wavelength).unwrap();
        Context::from_geometry(&g, rng.random_range(1..=6), rng.random_range(-PI / 2.0..PI / 2.0))
    }

    /// `n` contexts spread over the first `bs_count` BSs.
    pub fn contexts<R: Rng>(&self, rng: &mut R, n: usize, bs_count: usize) -> Vec<Context> {
        (0..n).map(|_| {
            let bs = rng.random_range(0..bs_count);
            self.context(rng, bs)
        }).collect()
    }

    pub fn bs_count(&self) -> usize {
        self.world.base_stations.len()
    }
}

/// Vehicles, BSs and sampled channels from which a `Snapshot` can be built.
pub struct Fixture {
    pub radio: bkcucb_core::phy::RadioConfig,
    pub codebook: bkcucb_core::phy::Codebook,
    pub vehicles: Vec<Vehicle>,
    pub stations: Vec<BaseStation>,
    pub states: Vec<Vec<bkcucb_core::phy::ChannelState>>,
    pub projections: Vec<Vec<nalgebra::DMatrix<bkcucb_core::phy::Complex64>>>,
    pub candidates: Vec<Vec<usize>>,
    pub t: u64,
}

impl Fixture {
    pub fn new(radio: bkcucb_core::phy::RadioConfig, vehicles: &[[f64; 2]], stations: &[[f64; 2]], seed: u64) -> Self {
        let codebook = bkcucb_core::phy::Codebook::new(radio.n_t).unwrap();
        let mut r = rng(seed);
        let vehicles: Vec<Vehicle> = vehicles
            .iter()
            .enumerate()
            .map(|(i, p)| Vehicle {
                id: i as u64,
                position: Vec2::new(p[0], p[1]),
                velocity: Vec2::new(10.0, 0.0),
                antennas: radio.n_t,
                arrival_period: 0,
            })
            .collect();
        let stations: Vec<BaseStation> = stations
            .iter()
            .enumerate()
            .map(|(a, p)| BaseStation {
                id: a,
                position: Vec2::new(p[0], p[1]),
                antennas: radio.n_r,
            })
            .collect();
        let beams: Vec<_> = codebook.nodes().into_iter().map(|n| codebook.beam(n)).collect();
        let states: Vec<Vec<_>> = vehicles
            .iter()
            .map(|v| {
                stations
                    .iter()
                    .map(|b| {
                        bkcucb_core::phy::ChannelState::sample(v.position, v.velocity, b.position, false, &radio, 0.01, &mut r)
                    })
                    .collect()
            })
            .collect();
        let projections = states
            .iter()
            .map(|row: &Vec<bkcucb_core::phy::ChannelState>| row.iter().map(|s| s.project_all(&beams).unwrap()).collect())
            .collect();
        let candidates = vec![(0..stations.len()).collect(); vehicles.len()];
        Self {
            radio,
            codebook,
            vehicles,
            stations,
            states,
            projections,
            candidates,
            t: 3,
        }
    }

    pub fn geometry(&self, i: usize, a: usize) -> bkcucb_core::scenario::LinkGeometry {
        link_geometry(&self.vehicles[i], &self.stations[a], self.radio.wavelength_m).unwrap()
    }

    pub fn snapshot(&self) -> bkcucb_core::network::Snapshot<'_> {
        let n = self.vehicles.len();
        let geometry = (0..n).map(|i| (0..self.stations.len()).map(|a| self.geometry(i, a)).collect()).collect();
        let channels = self.states.iter().map(|row| row.iter().collect()).collect();
        let projections: Vec<Vec<_>> = self.projections.iter().map(|row| row.iter().collect()).collect();
        bkcucb_core::network::Snapshot::new(
            self.t,
            &self.radio,
            self.codebook,
            self.vehicles.iter().map(|v| v.id).collect(),
            self.candidates.clone(),
            geometry,
            channels,
            &projections,
        )
    }

    /// Rate of vehicle `i` on BS `a` with beam `w` against the given
    /// interfering `(vehicle, beam)` pairs, from explicit channel matrices.
    pub fn direct_rate(
        &self,
        i: usize,
        a: usize,
        w: &nalgebra::DVector<bkcucb_core::phy::Complex64>,
        others: &[(usize, nalgebra::DVector<bkcucb_core::phy::Complex64>)],
    ) -> f64 {
        use bkcucb_core::phy::{realize_channel, Complex64};
        let own = realize_channel(&self.states[i][a], self.t) * w;
        let mut interference = nalgebra::DVector::<Complex64>::zeros(self.radio.n_r);
        for (k, wk) in others {
            interference += realize_channel(&self.states[*k][a], self.t) * wk;
        }
        let norm = own.norm();
        let (signal, leak) = if norm > 0.0 {
            (norm, own.dotc(&interference) / norm)
        } else {
            (0.0, interference[0])
        };
        let p = self.radio.tx_power_w;
        let sinr = p * signal * signal / (p * leak.norm_sqr() + self.radio.noise_power());
        self.radio.bandwidth_hz * (1.0 + sinr).log2()
    }
}
