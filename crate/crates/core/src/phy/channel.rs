//! Rician geometric multipath channel.
//!
//! One LOS path (log-distance path loss, blocked when the segment crosses a
//! building) plus a configurable number of Rayleigh NLOS paths with random
//! departure/arrival bearings. The array gain `sqrt(N_T * N_R)` is folded
//! into the path gains so that unit-norm beams and combiners recover it.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::array::{steering_unchecked, BeamVector};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::scenario::steering_of_bearing;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    /// Vehicle transmit power P_v, watts.
    pub tx_power_w: f64,
    /// Bandwidth W, Hz.
    pub bandwidth_hz: f64,
    /// Thermal noise density N_o, W/Hz.
    pub noise_density_w_per_hz: f64,
    /// Carrier wavelength, meters.
    pub wavelength_m: f64,
    /// Vehicle array size N_T.
    pub n_t: usize,
    /// BS array size N_R.
    pub n_r: usize,
    pub path_loss_exponent: f64,
    pub rician_k_db: f64,
    pub nlos_paths: usize,
    /// Link displacement that triggers resampling of the multipath state.
    pub resample_distance_m: f64,
    /// SINR mapped to reward 1 when normalizing rates.
    pub sinr_cap: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            tx_power_w: 1.0,
            bandwidth_hz: 100e6,
            // -174 dBm/Hz
            noise_density_w_per_hz: 10f64.powf(-17.4) * 1e-3,
            wavelength_m: 299_792_458.0 / 28e9,
            n_t: 16,
            n_r: 8,
            path_loss_exponent: 2.1,
            rician_k_db: 10.0,
            nlos_paths: 3,
            resample_distance_m: 1.0,
            sinr_cap: 1e6,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tx_power_w", self.tx_power_w),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_density_w_per_hz", self.noise_density_w_per_hz),
            ("wavelength_m", self.wavelength_m),
            ("path_loss_exponent", self.path_loss_exponent),
            ("resample_distance_m", self.resample_distance_m),
            ("sinr_cap", self.sinr_cap),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config(format!("radio.{name}"), "must be positive and finite"));
            }
        }
        if !self.rician_k_db.is_finite() {
            return Err(Error::config("radio.rician_k_db", "must be finite"));
        }
        if self.n_t < 2 || !self.n_t.is_power_of_two() {
            return Err(Error::config("radio.n_t", "must be a power of two >= 2"));
        }
        if self.n_r < 1 || !self.n_r.is_power_of_two() {
            return Err(Error::config("radio.n_r", "must be a power of two >= 1"));
        }
        Ok(())
    }

    pub fn tx_power_dbm(dbm: f64) -> f64 {
        10f64.powf(dbm / 10.0) * 1e-3
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_density_w_per_hz * self.bandwidth_hz
    }

    /// Rate at the SINR cap, used as the reward scale.
    pub fn rate_scale(&self) -> f64 {
        self.bandwidth_hz * (1.0 + self.sinr_cap).log2()
    }

    /// Reward in `[0, 1]` for a rate in bit/s.
    pub fn normalize_rate(&self, rate: f64) -> f64 {
        (rate / self.rate_scale()).clamp(0.0, 1.0)
    }

    fn rician_k(&self) -> f64 {
        10f64.powf(self.rician_k_db / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub gain: Complex64,
    /// Steering angle at the vehicle array.
    pub departure: f64,
    /// Steering angle at the BS array.
    pub arrival: f64,
    pub doppler_hz: f64,
    pub blocked: bool,
}

/// Multipath parameters of one vehicle-BS link.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    paths: Vec<Path>,
    n_t: usize,
    n_r: usize,
    period_s: f64,
    /// Vehicle position when the state was drawn.
    pub anchor: Vec2,
    tx_steering: Vec<DVector<Complex64>>,
    rx_steering: Vec<DVector<Complex64>>,
    /// Receive steering vectors as columns.
    rx_matrix: DMatrix<Complex64>,
}

impl ChannelState {
    pub fn new(paths: Vec<Path>, n_t: usize, n_r: usize, period_s: f64) -> Self {
        let tx_steering = paths.iter().map(|p| steering_unchecked(p.departure, n_t)).collect();
        let rx_steering: Vec<DVector<Complex64>> = paths.iter().map(|p| steering_unchecked(p.arrival, n_r)).collect();
        let rx_matrix = DMatrix::from_fn(n_r, paths.len(), |r, p| rx_steering[p][r]);
        Self {
            paths,
            n_t,
            n_r,
            period_s,
            anchor: Vec2::default(),
            tx_steering,
            rx_steering,
            rx_matrix,
        }
    }

    /// Draws a fresh multipath state for the link.
    pub fn sample<R: Rng + ?Sized>(
        vehicle: Vec2,
        velocity: Vec2,
        bs: Vec2,
        los_blocked: bool,
        radio: &RadioConfig,
        period_s: f64,
        rng: &mut R,
    ) -> Self {
        let offset = bs - vehicle;
        let distance = offset.norm().max(1.0);
        let wl = radio.wavelength_m;
        let reference = (wl / (4.0 * PI)).powi(2);
        let path_gain = reference * distance.powf(-radio.path_loss_exponent);
        let array_gain = (radio.n_t * radio.n_r) as f64;
        let k = radio.rician_k();
        let doppler = |bearing: f64| velocity.dot(Vec2::from_polar(1.0, bearing)) / wl;

        let mut paths = Vec::with_capacity(1 + radio.nlos_paths);
        let los_bearing = offset.bearing();
        let los_amp = (k / (k + 1.0) * path_gain * array_gain).sqrt();
        // propagation phase of the LOS path; later evolution comes from Doppler
        let los_phase = -2.0 * PI * (distance / wl).fract();
        paths.push(Path {
            gain: Complex64::from_polar(los_amp, los_phase),
            departure: steering_of_bearing(los_bearing),
            arrival: steering_of_bearing(los_bearing + PI),
            doppler_hz: doppler(los_bearing),
            blocked: los_blocked,
        });
        if radio.nlos_paths > 0 {
            let sigma = (path_gain * array_gain / ((k + 1.0) * radio.nlos_paths as f64) / 2.0).sqrt();
            for _ in 0..radio.nlos_paths {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                let departure_bearing = rng.random_range(-PI..PI);
                let arrival_bearing = rng.random_range(-PI..PI);
                paths.push(Path {
                    gain: Complex64::new(re * sigma, im * sigma),
                    departure: steering_of_bearing(departure_bearing),
                    arrival: steering_of_bearing(arrival_bearing),
                    doppler_hz: doppler(departure_bearing),
                    blocked: false,
                });
            }
        }
        let mut state = Self::new(paths, radio.n_t, radio.n_r, period_s);
        state.anchor = vehicle;
        state
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    fn rotation(&self, path: &Path, t: u64) -> Complex64 {
        let phase = 2.0 * PI * (path.doppler_hz * self.period_s * t as f64).fract();
        Complex64::from_polar(1.0, phase)
    }

    /// Per-path transmit projections `a_T(departure)^H w`. They do not depend
    /// on time, so callers may cache them for repeated beams.
    pub fn project(&self, w: &DVector<Complex64>) -> Result<Vec<Complex64>> {
        if w.len() != self.n_t {
            return Err(Error::Dimension(format!("beam has {} entries, array has {}", w.len(), self.n_t)));
        }
        Ok(self.tx_steering.iter().map(|a| a.dotc(w)).collect())
    }

    /// `H(t) w` assembled from cached projections.
    pub fn combine(&self, t: u64, projections: &[Complex64]) -> DVector<Complex64> {
        let mut out = DVector::zeros(self.n_r);
        for ((path, a_r), proj) in self.paths.iter().zip(&self.rx_steering).zip(projections) {
            if path.blocked {
                continue;
            }
            let coeff = path.gain * self.rotation(path, t) * proj;
            out.axpy(coeff, a_r, Complex64::new(1.0, 0.0));
        }
        out
    }

    /// Per-path projections of several beams, one column per beam.
    pub fn project_all(&self, beams: &[BeamVector]) -> Result<DMatrix<Complex64>> {
        let mut out = DMatrix::zeros(self.paths.len(), beams.len());
        for (j, w) in beams.iter().enumerate() {
            for (p, proj) in self.project(w)?.into_iter().enumerate() {
                out[(p, j)] = proj;
            }
        }
        Ok(out)
    }

    /// Complex path coefficients at period `t`; blocked paths contribute 0.
    pub fn coefficients(&self, t: u64) -> Vec<Complex64> {
        self.paths
            .iter()
            .map(|p| if p.blocked { Complex64::new(0.0, 0.0) } else { p.gain * self.rotation(p, t) })
            .collect()
    }

    /// `H(t) W` for the beams whose projections are the columns of
    /// `projections`.
    pub fn combine_all(&self, t: u64, projections: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut scaled = projections.clone();
        for (p, c) in self.coefficients(t).into_iter().enumerate() {
            for x in scaled.row_mut(p).iter_mut() {
                *x *= c;
            }
        }
        &self.rx_matrix * scaled
    }

    /// `H(t) w` without forming the channel matrix.
    pub fn response(&self, t: u64, w: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        Ok(self.combine(t, &self.project(w)?))
    }
}

/// `H(t) = sum_p alpha_p exp(j 2 pi f_p t T) a_R(phi_p) a_T(theta_p)^H` over
/// unblocked paths.
pub fn realize_channel(state: &ChannelState, t: u64) -> DMatrix<Complex64> {
    let mut h = DMatrix::zeros(state.n_r, state.n_t);
    for ((path, a_r), a_t) in state.paths.iter().zip(&state.rx_steering).zip(&state.tx_steering) {
        if path.blocked {
            continue;
        }
        let coeff = path.gain * state.rotation(path, t);
        h += (a_r * a_t.adjoint()) * coeff;
    }
    h
}
