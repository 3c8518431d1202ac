//! Context kernels and Gram matrices.
//!
//! Each context feature has its own similarity: a truncated cosine on the
//! bearing, Gaussians on distance and beam bias, a Laplacian on Doppler and
//! a triangular hinge on load. The association kernel multiplies the first
//! four; the beam-tracking kernel also multiplies in the bias term. Contexts
//! of different BSs never share information.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::angle_distance;
use crate::scenario::Context;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Angle, distance, Doppler and load.
    Association,
    /// Association kernel times the beam-bias similarity.
    BeamTracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelParams {
    /// Distance bandwidth, meters.
    pub sigma_distance: f64,
    /// Doppler bandwidth, Hz.
    pub sigma_doppler: f64,
    /// Load hinge width, in concurrent transmissions.
    pub sigma_load: f64,
    /// Beam-bias bandwidth, radians.
    pub sigma_bias: f64,
    /// Ridge regularization.
    pub lambda_k: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            sigma_distance: 100.0,
            sigma_doppler: 200.0,
            sigma_load: 5.0,
            // one leaf width of a 16-element array
            sigma_bias: 2.0 * std::f64::consts::PI / 16.0,
            lambda_k: 1.0,
        }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("sigma_distance", self.sigma_distance),
            ("sigma_doppler", self.sigma_doppler),
            ("sigma_load", self.sigma_load),
            ("sigma_bias", self.sigma_bias),
            ("lambda_k", self.lambda_k),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config(format!("kernel.{name}"), format!("must be positive and finite, got {value}")));
            }
        }
        Ok(())
    }

    /// Product kernel without the beam-bias factor.
    pub fn kappa(&self, a: &Context, b: &Context) -> f64 {
        if a.bs_id != b.bs_id {
            return 0.0;
        }
        k_angle(a.angle, b.angle)
            * k_distance(a.distance - b.distance, self.sigma_distance)
            * k_doppler(a.doppler - b.doppler, self.sigma_doppler)
            * k_load(a.load as f64 - b.load as f64, self.sigma_load)
    }

    /// Product kernel including the beam-bias factor.
    pub fn kappa_bt(&self, a: &Context, b: &Context) -> f64 {
        let base = self.kappa(a, b);
        if base == 0.0 {
            return 0.0;
        }
        base * k_bias(angle_distance(a.beam_bias, b.beam_bias), self.sigma_bias)
    }

    pub fn eval(&self, kind: KernelKind, a: &Context, b: &Context) -> f64 {
        match kind {
            KernelKind::Association => self.kappa(a, b),
            KernelKind::BeamTracking => self.kappa_bt(a, b),
        }
    }
}

/// `cos(d)` for shortest-arc difference `d < pi/2`, else 0.
pub fn k_angle(a: f64, b: f64) -> f64 {
    let d = angle_distance(a, b);
    if d < FRAC_PI_2 {
        d.cos().max(0.0)
    } else {
        0.0
    }
}

pub fn k_distance(delta: f64, sigma: f64) -> f64 {
    (-delta * delta / (2.0 * sigma * sigma)).exp()
}

pub fn k_doppler(delta: f64, sigma: f64) -> f64 {
    (-delta.abs() / sigma).exp()
}

pub fn k_load(delta: f64, sigma: f64) -> f64 {
    (1.0 - delta.abs() / sigma).max(0.0)
}

pub fn k_bias(delta: f64, sigma: f64) -> f64 {
    (-delta * delta / (2.0 * sigma * sigma)).exp()
}

/// Pairwise kernel matrix over `contexts`, exactly symmetric.
pub fn gram(contexts: &[Context], params: &KernelParams, kind: KernelKind) -> DMatrix<f64> {
    let n = contexts.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = params.eval(kind, &contexts[i], &contexts[i]);
        for j in 0..i {
            let v = params.eval(kind, &contexts[i], &contexts[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Kernel values between `query` and each context.
pub fn cross(query: &Context, contexts: &[Context], params: &KernelParams, kind: KernelKind) -> DVector<f64> {
    DVector::from_iterator(contexts.len(), contexts.iter().map(|c| params.eval(kind, query, c)))
}
