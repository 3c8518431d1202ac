use serde::{Deserialize, Serialize};

/// One row of the per-period log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub period: u64,
    pub vehicle_id: u64,
    pub policy: String,
    pub bs_id: usize,
    pub psi_rad: f64,
    pub layer: u32,
    pub rate_bps: f64,
    pub regret: f64,
    pub regret1: f64,
    pub regret2: f64,
    pub synced: bool,
}

/// Network-level aggregates of one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodMetrics {
    pub period: u64,
    pub active_vehicles: usize,
    /// Sum of the per-vehicle rates, bit/s.
    pub total_rate_bps: f64,
    /// Mean rate after deducting probe airtime, bit/s per vehicle.
    pub mean_effective_rate_bps: f64,
    pub mean_regret: f64,
    pub sync_events: usize,
    /// Share of vehicles that spent airtime on probes.
    pub probe_overhead: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateWindow {
    pub start_period: u64,
    pub end_period: u64,
    /// Mean effective rate per active vehicle over the window, bit/s.
    pub mean_rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_digest: String,
    pub seed: u64,
    /// Cumulative mean per-vehicle regret divided by the period index.
    pub ert_curve: Vec<f64>,
    pub avg_rate_windows: Vec<RateWindow>,
    /// Sync events per active vehicle-period.
    pub sync_rate: f64,
    pub total_periods: u64,
    pub policy: String,
}

/// Builds the summary series from the period aggregates.
pub fn summarize(
    periods: &[PeriodMetrics],
    window: u64,
    config_digest: String,
    seed: u64,
    policy: String,
) -> RunSummary {
    let mut ert_curve = Vec::with_capacity(periods.len());
    let mut cumulative = 0.0;
    for (k, p) in periods.iter().enumerate() {
        cumulative += p.mean_regret;
        ert_curve.push((cumulative / (k + 1) as f64).max(0.0));
    }

    let window = window.max(1) as usize;
    let avg_rate_windows = periods
        .chunks(window)
        .map(|chunk| {
            let vehicle_periods: usize = chunk.iter().map(|p| p.active_vehicles).sum();
            let rate_sum: f64 = chunk
                .iter()
                .map(|p| p.mean_effective_rate_bps * p.active_vehicles as f64)
                .sum();
            RateWindow {
                start_period: chunk[0].period,
                end_period: chunk[chunk.len() - 1].period,
                mean_rate_bps: if vehicle_periods == 0 {
                    0.0
                } else {
                    rate_sum / vehicle_periods as f64
                },
            }
        })
        .collect();

    let vehicle_periods: usize = periods.iter().map(|p| p.active_vehicles).sum();
    let syncs: usize = periods.iter().map(|p| p.sync_events).sum();
    let sync_rate = if vehicle_periods == 0 {
        0.0
    } else {
        syncs as f64 / vehicle_periods as f64
    };

    RunSummary {
        config_digest,
        seed,
        ert_curve,
        avg_rate_windows,
        sync_rate,
        total_periods: periods.len() as u64,
        policy,
    }
}

/// Mean of `curve` over the 1-based inclusive period range.
pub fn window_mean(curve: &[f64], first: u64, last: u64) -> f64 {
    let lo = (first.max(1) - 1) as usize;
    let hi = (last as usize).min(curve.len());
    if lo >= hi {
        return 0.0;
    }
    curve[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
}
