use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::scenario::Context;

/// Globally unique sample identifier: the producing vehicle in the high 32
/// bits, its per-vehicle sequence number in the low 32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampleId(pub u64);

impl SampleId {
    pub fn new(vehicle: u64, seq: u32) -> Self {
        Self((vehicle << 32) | seq as u64)
    }

    pub fn vehicle(self) -> u64 {
        self.0 >> 32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: SampleId,
    pub period: u64,
    pub context: Context,
    /// Normalized reward in `[0, 1]`.
    pub reward: f64,
}

/// Flat, serializable form of a sample for exchange logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: u64,
    pub vehicle_id: u64,
    pub bs_id: usize,
    pub period: u64,
    pub angle: f64,
    pub distance: f64,
    pub doppler: f64,
    pub load: u32,
    pub beam_bias: f64,
    pub reward_norm: f64,
}

impl From<&Sample> for SampleRecord {
    fn from(s: &Sample) -> Self {
        Self {
            sample_id: s.id.0,
            vehicle_id: s.id.vehicle(),
            bs_id: s.context.bs_id,
            period: s.period,
            angle: s.context.angle,
            distance: s.context.distance,
            doppler: s.context.doppler,
            load: s.context.load,
            beam_bias: s.context.beam_bias,
            reward_norm: s.reward,
        }
    }
}

impl From<&SampleRecord> for Sample {
    fn from(r: &SampleRecord) -> Self {
        Self {
            id: SampleId(r.sample_id),
            period: r.period,
            context: Context {
                bs_id: r.bs_id,
                angle: r.angle,
                distance: r.distance,
                doppler: r.doppler,
                load: r.load,
                beam_bias: r.beam_bias,
            },
            reward: r.reward_norm,
        }
    }
}

/// Context-reward samples of one vehicle for one BS, in insertion order,
/// with the sync watermark: the first `watermark` samples were present at
/// the last synchronization.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStore {
    samples: Vec<Sample>,
    ids: HashSet<SampleId>,
    watermark: usize,
    capacity: usize,
}

impl SampleStore {
    pub fn new(capacity: usize) -> Self {
        Self {
            samples: Vec::new(),
            ids: HashSet::new(),
            watermark: 0,
            capacity: capacity.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn watermark(&self) -> usize {
        self.watermark
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Samples added since the last synchronization.
    pub fn new_samples(&self) -> &[Sample] {
        &self.samples[self.watermark..]
    }

    pub fn contains(&self, id: SampleId) -> bool {
        self.ids.contains(&id)
    }

    pub fn contexts(&self) -> Vec<Context> {
        self.samples.iter().map(|s| s.context).collect()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.reward).collect()
    }

    /// Appends a sample (ignored if its id is already stored), evicting the
    /// oldest by period beyond capacity.
    pub fn push(&mut self, sample: Sample) {
        if self.ids.insert(sample.id) {
            self.samples.push(sample);
            self.evict();
        }
    }

    /// Union with `foreign` (deduplicated by id), evicts beyond capacity and
    /// moves the watermark to the new size.
    pub fn merge_shared(&mut self, foreign: &[Sample]) {
        for s in foreign {
            if self.ids.insert(s.id) {
                self.samples.push(*s);
            }
        }
        self.evict();
        self.mark_synced();
    }

    pub fn mark_synced(&mut self) {
        self.watermark = self.samples.len();
    }

    fn evict(&mut self) {
        while self.samples.len() > self.capacity {
            // oldest period, earliest inserted among equals
            let idx = self
                .samples
                .iter()
                .enumerate()
                .min_by(|(i, a), (j, b)| a.period.cmp(&b.period).then(i.cmp(j)))
                .map(|(i, _)| i)
                .expect("store is non-empty");
            let gone = self.samples.remove(idx);
            self.ids.remove(&gone.id);
            if idx < self.watermark {
                self.watermark -= 1;
            }
        }
    }
}
