//! Mobility trace ingestion.
//!
//! Format: UTF-8 text with a required header line
//! `period,vehicle_id,x_m,y_m,vx_mps,vy_mps` followed by one record per line.
//! Periods must be strictly ascending per vehicle. Velocities are recomputed
//! from consecutive positions (forward difference, backward for a vehicle's
//! last row); the recorded velocity is only used for single-row vehicles.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Vec2;

pub const TRACE_HEADER: [&str; 6] = ["period", "vehicle_id", "x_m", "y_m", "vx_mps", "vy_mps"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub period: u64,
    pub vehicle_id: u64,
    pub position: Vec2,
    pub velocity: Vec2,
}

/// Per-period vehicle states replacing the synthetic mobility model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MobilityTimeline {
    periods: BTreeMap<u64, Vec<TraceRow>>,
}

impl MobilityTimeline {
    /// Rows active at `period`, in ascending vehicle id.
    pub fn at(&self, period: u64) -> &[TraceRow] {
        self.periods.get(&period).map_or(&[], Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn vehicle_count(&self) -> usize {
        let mut ids: Vec<u64> = self.periods.values().flatten().map(|r| r.vehicle_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn last_period(&self) -> Option<u64> {
        self.periods.keys().next_back().copied()
    }
}

pub fn load_trace(path: impl AsRef<Path>, period_s: f64) -> Result<MobilityTimeline> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text, period_s)
}

pub fn parse_trace(text: &str, period_s: f64) -> Result<MobilityTimeline> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Ok(MobilityTimeline::default());
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns != TRACE_HEADER {
        return Err(Error::TraceParse {
            line: 1,
            message: format!("expected header `{}`", TRACE_HEADER.join(",")),
        });
    }

    let mut by_vehicle: BTreeMap<u64, Vec<TraceRow>> = BTreeMap::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != TRACE_HEADER.len() {
            return Err(Error::TraceParse {
                line: line_no,
                message: format!("expected {} fields, found {}", TRACE_HEADER.len(), fields.len()),
            });
        }
        let int = |i: usize| -> Result<u64> {
            fields[i].parse().map_err(|_| Error::TraceParse {
                line: line_no,
                message: format!("`{}` is not a valid {}", fields[i], TRACE_HEADER[i]),
            })
        };
        let real = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::TraceParse {
                    line: line_no,
                    message: format!("`{}` is not a valid {}", fields[i], TRACE_HEADER[i]),
                })
        };
        let row = TraceRow {
            period: int(0)?,
            vehicle_id: int(1)?,
            position: Vec2::new(real(2)?, real(3)?),
            velocity: Vec2::new(real(4)?, real(5)?),
        };
        let rows = by_vehicle.entry(row.vehicle_id).or_default();
        if let Some(prev) = rows.last() {
            if row.period <= prev.period {
                return Err(Error::TraceValidation(format!(
                    "vehicle {} has non-increasing periods {} then {} (line {line_no})",
                    row.vehicle_id, prev.period, row.period
                )));
            }
        }
        rows.push(row);
    }

    let mut periods: BTreeMap<u64, Vec<TraceRow>> = BTreeMap::new();
    for rows in by_vehicle.values() {
        for (i, row) in rows.iter().enumerate() {
            let pair = if i + 1 < rows.len() {
                Some((row, &rows[i + 1]))
            } else if i > 0 {
                Some((&rows[i - 1], row))
            } else {
                None
            };
            let velocity = match pair {
                Some((a, b)) => (b.position - a.position) * (1.0 / ((b.period - a.period) as f64 * period_s)),
                None => row.velocity,
            };
            periods.entry(row.period).or_default().push(TraceRow { velocity, ..*row });
        }
    }
    // BTreeMap iteration over vehicles keeps each period's rows in id order
    Ok(MobilityTimeline { periods })
}
