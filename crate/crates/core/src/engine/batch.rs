//! Seed batches: every (variant, seed) pair runs independently, then the
//! summaries are aggregated into means and standard errors.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::RunSummary;
use super::persist::{persist, write_json};
use super::{PeriodMetrics, Simulation};
use crate::config::RunConfig;
use crate::error::{Error, Result};

/// Mean and standard error of the mean over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat { mean: 0.0, se: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n < 2 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Stat { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberAggregate {
    pub label: String,
    pub policy: String,
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub final_ert: Stat,
    pub sync_rate: Stat,
    /// Mean effective rate per vehicle over the whole run, bit/s.
    pub mean_rate_bps: Stat,
    pub ert_curve: Vec<Stat>,
    pub avg_rate_windows: Vec<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub config_digest: String,
    pub preset: Option<String>,
    /// False when any run failed; the outputs present are then partial.
    pub complete: bool,
    pub failures: Vec<String>,
    pub members: Vec<MemberAggregate>,
    /// Every file written by the batch, relative to the output directory.
    pub manifest: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct MemberRun {
    pub label: String,
    pub summary: RunSummary,
    pub mean_rate_bps: f64,
}

#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub aggregate: Aggregate,
    pub runs: Vec<MemberRun>,
}

fn mean_rate(periods: &[PeriodMetrics]) -> f64 {
    let vehicle_periods: usize = periods.iter().map(|p| p.active_vehicles).sum();
    if vehicle_periods == 0 {
        return 0.0;
    }
    periods
        .iter()
        .map(|p| p.mean_effective_rate_bps * p.active_vehicles as f64)
        .sum::<f64>()
        / vehicle_periods as f64
}

fn pointwise(series: &[&[f64]]) -> Vec<Stat> {
    let len = series.iter().map(|s| s.len()).min().unwrap_or(0);
    (0..len)
        .map(|k| Stat::of(&series.iter().map(|s| s[k]).collect::<Vec<_>>()))
        .collect()
}

fn aggregate_member(label: &str, runs: &[&MemberRun]) -> MemberAggregate {
    let summaries: Vec<&RunSummary> = runs.iter().map(|r| &r.summary).collect();
    let erts: Vec<&[f64]> = summaries.iter().map(|s| s.ert_curve.as_slice()).collect();
    let windows: Vec<Vec<f64>> = summaries
        .iter()
        .map(|s| s.avg_rate_windows.iter().map(|w| w.mean_rate_bps).collect())
        .collect();
    let window_refs: Vec<&[f64]> = windows.iter().map(Vec::as_slice).collect();
    MemberAggregate {
        label: label.to_string(),
        policy: summaries.first().map(|s| s.policy.clone()).unwrap_or_default(),
        config_digest: summaries.first().map(|s| s.config_digest.clone()).unwrap_or_default(),
        seeds: summaries.iter().map(|s| s.seed).collect(),
        final_ert: Stat::of(&summaries.iter().map(|s| s.ert_curve.last().copied().unwrap_or(0.0)).collect::<Vec<_>>()),
        sync_rate: Stat::of(&summaries.iter().map(|s| s.sync_rate).collect::<Vec<_>>()),
        mean_rate_bps: Stat::of(&runs.iter().map(|r| r.mean_rate_bps).collect::<Vec<_>>()),
        ert_curve: pointwise(&erts),
        avg_rate_windows: pointwise(&window_refs),
    }
}

/// Runs every member of `config` over its seed list. With an output
/// directory, writes `config.json`, `<label>/seed_<n>.json` (and `.csv` when
/// period logs are on) and `aggregate.json`. A failed run still produces an
/// aggregate flagged incomplete before the error is returned.
pub fn run_batch(config: &RunConfig, out_dir: Option<&Path>) -> Result<BatchOutput> {
    config.validate()?;
    let members = config.members()?;
    let jobs: Vec<(usize, u64)> = (0..members.len())
        .flat_map(|m| config.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let keep_log = out_dir.is_some() && config.output.period_logs;

    let results: Vec<Result<(MemberRun, Vec<String>)>> = jobs
        .par_iter()
        .map(|&(m, seed)| {
            let (label, member) = &members[m];
            let output = Simulation::new(member.clone(), seed)?.run(keep_log)?;
            let mut files = Vec::new();
            if let Some(dir) = out_dir {
                let sub = dir.join(label);
                let log = keep_log.then_some(output.log.as_slice());
                for name in persist(log, &output.summary, &sub, &format!("seed_{seed}"))? {
                    files.push(format!("{label}/{name}"));
                }
            }
            Ok((
                MemberRun {
                    label: label.clone(),
                    mean_rate_bps: mean_rate(&output.periods),
                    summary: output.summary,
                },
                files,
            ))
        })
        .collect();

    let mut runs = Vec::new();
    let mut manifest = Vec::new();
    let mut failures = Vec::new();
    let mut first_error = None;
    for ((m, seed), result) in jobs.iter().zip(results) {
        match result {
            Ok((run, files)) => {
                runs.push(run);
                manifest.extend(files);
            }
            Err(e) => {
                failures.push(format!("{} seed {seed}: {e}", members[*m].0));
                first_error.get_or_insert(e);
            }
        }
    }

    let member_aggregates = members
        .iter()
        .map(|(label, _)| {
            let of_member: Vec<&MemberRun> = runs.iter().filter(|r| &r.label == label).collect();
            aggregate_member(label, &of_member)
        })
        .collect();

    if out_dir.is_some() {
        manifest.insert(0, "config.json".to_string());
        manifest.push("aggregate.json".to_string());
    }
    let aggregate = Aggregate {
        config_digest: config.digest(),
        preset: config.preset.clone(),
        complete: first_error.is_none(),
        failures,
        members: member_aggregates,
        manifest,
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(dir.join("config.json"), config)?;
        write_json(dir.join("aggregate.json"), &aggregate)?;
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(BatchOutput { aggregate, runs }),
    }
}
