//! World state: base-station layout, buildings, vehicle arrivals and
//! straight-line mobility, and extraction of bandit context features from
//! link geometry.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{wrap_angle, Rect, Vec2};
use crate::trace::TraceRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: usize,
    pub position: Vec2,
    pub antennas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u64,
    pub position: Vec2,
    pub velocity: Vec2,
    pub antennas: usize,
    pub arrival_period: u64,
}

/// Bandit context attached to every sample: serving BS, bearing of the
/// BS-to-vehicle vector, distance, Doppler spread, BS load and beam bias.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub bs_id: usize,
    /// Radians in `[-pi, pi)`.
    pub angle: f64,
    /// Meters, strictly positive.
    pub distance: f64,
    /// Hz, non-negative.
    pub doppler: f64,
    pub load: u32,
    /// Transmit steering angle minus LOS steering angle, wrapped to `[-pi, pi)`.
    pub beam_bias: f64,
}

impl Context {
    pub fn from_geometry(geometry: &LinkGeometry, load: u32, beam_bias: f64) -> Self {
        Self {
            bs_id: geometry.bs_id,
            angle: geometry.angle,
            distance: geometry.distance,
            doppler: geometry.doppler,
            load,
            beam_bias: wrap_angle(beam_bias),
        }
    }

    pub fn with_bias(mut self, beam_bias: f64) -> Self {
        self.beam_bias = wrap_angle(beam_bias);
        self
    }
}

/// Geometric features of one vehicle-BS link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub bs_id: usize,
    /// Bearing of the BS-to-vehicle vector.
    pub angle: f64,
    pub distance: f64,
    pub doppler: f64,
    /// Steering angle of the LOS path at the vehicle array, in `[-pi/2, pi/2]`.
    ///
    /// All arrays have their broadside along +x, so the steering angle of a
    /// bearing `b` is `asin(sin b)`.
    pub los_steering: f64,
}

pub fn link_geometry(vehicle: &Vehicle, bs: &BaseStation, wavelength: f64) -> Result<LinkGeometry> {
    let offset = vehicle.position - bs.position;
    let distance = offset.norm();
    if distance == 0.0 || !distance.is_finite() {
        return Err(Error::DegenerateGeometry {
            vehicle: vehicle.id,
            bs: bs.id,
        });
    }
    let unit = offset * (1.0 / distance);
    let tangential = vehicle.velocity.cross(unit).abs();
    let angle = offset.bearing();
    Ok(LinkGeometry {
        bs_id: bs.id,
        angle,
        distance,
        doppler: tangential / wavelength,
        los_steering: steering_of_bearing(angle + PI),
    })
}

/// Steering angle seen by a broadside-+x array for a plane wave leaving
/// along `bearing`.
pub fn steering_of_bearing(bearing: f64) -> f64 {
    bearing.sin().clamp(-1.0, 1.0).asin()
}

pub fn extract_context(
    vehicle: &Vehicle,
    bs: &BaseStation,
    load: u32,
    beam_bias: f64,
    wavelength: f64,
) -> Result<Context> {
    let geometry = link_geometry(vehicle, bs, wavelength)?;
    Ok(Context::from_geometry(&geometry, load, beam_bias))
}

/// BSs within `radius` of `position` in ascending id; the nearest BS alone
/// when none qualifies. `None` means an unbounded radius.
pub fn candidate_set(position: Vec2, base_stations: &[BaseStation], radius: Option<f64>) -> Vec<usize> {
    let mut within: Vec<usize> = base_stations
        .iter()
        .filter(|bs| radius.is_none_or(|r| (position - bs.position).norm() <= r))
        .map(|bs| bs.id)
        .collect();
    if within.is_empty() {
        if let Some(nearest) = base_stations.iter().min_by(|a, b| {
            let da = (position - a.position).norm();
            let db = (position - b.position).norm();
            da.total_cmp(&db).then(a.id.cmp(&b.id))
        }) {
            within.push(nearest.id);
        }
    }
    within.sort_unstable();
    within
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Width and height of the simulated area, meters.
    pub area_m: [f64; 2],
    /// Poisson arrival intensity, vehicles per second.
    pub arrival_rate: f64,
    /// Horizon T in periods.
    pub periods: u64,
    /// Duration of one period, seconds.
    pub period_s: f64,
    /// Association interval N_A in periods.
    pub association_interval: u64,
    /// Candidate radius R_max in meters; `null` means unbounded.
    pub candidate_radius_m: Option<f64>,
    /// Number of BSs placed uniformly at random (ignored when positions are given).
    pub bs_count: usize,
    pub bs_positions: Option<Vec<[f64; 2]>>,
    /// Seeds the static layout (BS positions and buildings).
    pub placement_seed: u64,
    /// Vehicle speed range, m/s.
    pub speed_mps: [f64; 2],
    /// Start from the stationary occupancy instead of an empty area.
    pub initial_population: bool,
    pub max_vehicles: usize,
    pub buildings: usize,
    /// Building side length range, meters.
    pub building_size_m: [f64; 2],
    /// Mobility trace replacing the synthetic model.
    pub trace: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_m: [600.0, 400.0],
            arrival_rate: 0.4,
            periods: 2000,
            period_s: 0.01,
            association_interval: 100,
            candidate_radius_m: Some(250.0),
            bs_count: 5,
            bs_positions: None,
            placement_seed: 7,
            speed_mps: [8.0, 14.0],
            initial_population: true,
            max_vehicles: 200,
            buildings: 12,
            building_size_m: [20.0, 60.0],
            trace: None,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let p = |field: &str| format!("scenario.{field}");
        if !(self.area_m[0] > 0.0 && self.area_m[1] > 0.0 && self.area_m.iter().all(|v| v.is_finite())) {
            return Err(Error::config(p("area_m"), "area dimensions must be positive and finite"));
        }
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return Err(Error::config(p("arrival_rate"), "must be finite and >= 0"));
        }
        if !(self.period_s > 0.0 && self.period_s.is_finite()) {
            return Err(Error::config(p("period_s"), "must be positive"));
        }
        if self.association_interval < 1 {
            return Err(Error::config(p("association_interval"), "must be >= 1"));
        }
        if let Some(r) = self.candidate_radius_m {
            if !(r > 0.0) {
                return Err(Error::config(p("candidate_radius_m"), "must be positive (or null for unbounded)"));
            }
        }
        match &self.bs_positions {
            Some(positions) if positions.is_empty() => {
                return Err(Error::config(p("bs_positions"), "at least one BS is required"));
            }
            None if self.bs_count == 0 => {
                return Err(Error::config(p("bs_count"), "at least one BS is required"));
            }
            _ => {}
        }
        let [lo, hi] = self.speed_mps;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::config(p("speed_mps"), "expected 0 < min <= max"));
        }
        let [lo, hi] = self.building_size_m;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::config(p("building_size_m"), "expected 0 < min <= max"));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.area_m[0] * self.area_m[1]
    }

    pub fn v_max(&self) -> f64 {
        self.speed_mps[1]
    }

    /// Mean dwell time of a vehicle entering through the boundary: the mean
    /// chord of an isotropic random line through a convex region is
    /// `pi * A / P`, traversed at the harmonic-mean speed.
    pub fn mean_dwell_s(&self) -> f64 {
        let [w, h] = self.area_m;
        let chord = PI * w * h / (2.0 * (w + h));
        let [lo, hi] = self.speed_mps;
        let inv_speed = if hi > lo { (hi / lo).ln() / (hi - lo) } else { 1.0 / lo };
        chord * inv_speed
    }

    /// Stationary expected vehicle count (M/G/inf occupancy).
    pub fn expected_occupancy(&self) -> f64 {
        self.arrival_rate * self.mean_dwell_s()
    }
}

/// Outcome of advancing the world by one period.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepReport {
    pub arrivals: usize,
    pub departures: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub area: [f64; 2],
    pub base_stations: Vec<BaseStation>,
    pub buildings: Vec<Rect>,
    /// Active vehicles in ascending id.
    pub vehicles: Vec<Vehicle>,
    pub period: u64,
    pub dropped_arrivals: u64,
    next_vehicle_id: u64,
    vehicle_antennas: usize,
}

impl World {
    /// Builds the static layout. BS positions and buildings depend only on
    /// the placement seed, so every run seed shares the same city.
    pub fn new(config: &ScenarioConfig, vehicle_antennas: usize, bs_antennas: usize) -> Result<World> {
        config.validate()?;
        let [w, h] = config.area_m;
        let mut layout_rng = ChaCha8Rng::seed_from_u64(config.placement_seed);
        let positions: Vec<Vec2> = match &config.bs_positions {
            Some(list) => list.iter().map(|p| Vec2::new(p[0], p[1])).collect(),
            None => (0..config.bs_count)
                .map(|_| Vec2::new(layout_rng.random_range(0.0..w), layout_rng.random_range(0.0..h)))
                .collect(),
        };
        let base_stations: Vec<BaseStation> = positions
            .into_iter()
            .enumerate()
            .map(|(id, position)| BaseStation {
                id,
                position,
                antennas: bs_antennas,
            })
            .collect();

        let mut buildings = Vec::with_capacity(config.buildings);
        let [smin, smax] = config.building_size_m;
        let mut attempts = 0;
        while buildings.len() < config.buildings && attempts < 100 * (config.buildings + 1) {
            attempts += 1;
            let bw = layout_rng.random_range(smin..=smax);
            let bh = layout_rng.random_range(smin..=smax);
            let min = Vec2::new(layout_rng.random_range(0.0..w), layout_rng.random_range(0.0..h));
            let rect = Rect {
                min,
                max: Vec2::new((min.x + bw).min(w), (min.y + bh).min(h)),
            };
            // keep BS sites outdoors
            let clearance = Rect {
                min: rect.min - Vec2::new(5.0, 5.0),
                max: rect.max + Vec2::new(5.0, 5.0),
            };
            if base_stations.iter().any(|bs| clearance.contains(bs.position)) {
                continue;
            }
            buildings.push(rect);
        }

        Ok(World {
            area: config.area_m,
            base_stations,
            buildings,
            vehicles: Vec::new(),
            period: 0,
            dropped_arrivals: 0,
            next_vehicle_id: 0,
            vehicle_antennas,
        })
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= 0.0 && p.x <= self.area[0] && p.y >= 0.0 && p.y <= self.area[1]
    }

    pub fn los_blocked(&self, a: Vec2, b: Vec2) -> bool {
        self.buildings.iter().any(|r| r.intersects_segment(a, b))
    }

    pub fn vehicle(&self, id: u64) -> Option<&Vehicle> {
        self.vehicles
            .binary_search_by_key(&id, |v| v.id)
            .ok()
            .map(|idx| &self.vehicles[idx])
    }

    fn spawn(&mut self, position: Vec2, velocity: Vec2, arrival_period: u64, max: usize) -> bool {
        if self.vehicles.len() >= max {
            self.dropped_arrivals += 1;
            return false;
        }
        let id = self.next_vehicle_id;
        self.next_vehicle_id += 1;
        self.vehicles.push(Vehicle {
            id,
            position,
            velocity,
            antennas: self.vehicle_antennas,
            arrival_period,
        });
        true
    }

    /// Seeds the area with a stationary population: Poisson count with the
    /// M/G/inf mean, uniform positions and isotropic headings.
    pub fn populate_stationary(&mut self, config: &ScenarioConfig, rng: &mut ChaCha8Rng) {
        let mean = config.expected_occupancy();
        if mean <= 0.0 {
            return;
        }
        let count = Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0);
        let [w, h] = self.area;
        for _ in 0..count {
            let position = Vec2::new(rng.random_range(0.0..=w), rng.random_range(0.0..=h));
            let heading = rng.random_range(-PI..PI);
            let speed = draw_speed(config, rng);
            self.spawn(position, Vec2::from_polar(speed, heading), self.period, config.max_vehicles);
        }
    }

    /// Advances one period: moves vehicles, removes those that left the area,
    /// then draws Poisson arrivals entering through the boundary.
    pub fn step(&mut self, config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> StepReport {
        self.period += 1;
        let dt = config.period_s;
        for v in &mut self.vehicles {
            v.position = v.position + v.velocity * dt;
        }
        let before = self.vehicles.len();
        let area = self.area;
        self.vehicles.retain(|v| {
            v.position.x >= 0.0 && v.position.x <= area[0] && v.position.y >= 0.0 && v.position.y <= area[1]
        });
        let departures = before - self.vehicles.len();

        let mean = config.arrival_rate * dt;
        let count = if mean > 0.0 {
            Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0)
        } else {
            0
        };
        let mut report = StepReport {
            arrivals: 0,
            departures,
            dropped: 0,
        };
        for _ in 0..count {
            let (position, heading) = boundary_entry(self.area, rng);
            let speed = draw_speed(config, rng);
            if self.spawn(position, Vec2::from_polar(speed, heading), self.period, config.max_vehicles) {
                report.arrivals += 1;
            } else {
                report.dropped += 1;
            }
        }
        report
    }

    /// Replaces the population with the trace rows recorded for the current
    /// period. Vehicles absent from the rows have departed.
    pub fn apply_trace(&mut self, period: u64, rows: &[TraceRow]) -> StepReport {
        self.period = period;
        let before: Vec<u64> = self.vehicles.iter().map(|v| v.id).collect();
        let mut next: Vec<Vehicle> = rows
            .iter()
            .map(|row| {
                let arrival_period = self.vehicle(row.vehicle_id).map_or(period, |v| v.arrival_period);
                Vehicle {
                    id: row.vehicle_id,
                    position: row.position,
                    velocity: row.velocity,
                    antennas: self.vehicle_antennas,
                    arrival_period,
                }
            })
            .collect();
        next.sort_by_key(|v| v.id);
        let arrivals = next.iter().filter(|v| !before.contains(&v.id)).count();
        let departures = before
            .iter()
            .filter(|id| next.binary_search_by_key(*id, |v| v.id).is_err())
            .count();
        self.vehicles = next;
        StepReport {
            arrivals,
            departures,
            dropped: 0,
        }
    }
}

fn draw_speed(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> f64 {
    let [lo, hi] = config.speed_mps;
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Uniform point on the perimeter with a cosine-weighted inward heading, so
/// that entering trajectories form an isotropic line process.
fn boundary_entry(area: [f64; 2], rng: &mut ChaCha8Rng) -> (Vec2, f64) {
    let [w, h] = area;
    let s = rng.random_range(0.0..2.0 * (w + h));
    let (position, normal) = if s < w {
        (Vec2::new(s, 0.0), PI / 2.0)
    } else if s < w + h {
        (Vec2::new(w, s - w), PI)
    } else if s < 2.0 * w + h {
        (Vec2::new(2.0 * w + h - s, h), -PI / 2.0)
    } else {
        (Vec2::new(0.0, 2.0 * (w + h) - s), 0.0)
    };
    let offset = (2.0 * rng.random::<f64>() - 1.0).asin();
    (position, wrap_angle(normal + offset))
}
