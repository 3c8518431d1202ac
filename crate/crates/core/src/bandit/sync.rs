//! Event-triggered synchronization: the information-gain predicate and the
//! shared sample pool.

use std::collections::BTreeMap;

use super::model::KernelModel;
use super::store::{Sample, SampleStore};
use super::ucb::{trigger_fires, TriggerForm};
use crate::error::Result;
use crate::kernels::{KernelKind, KernelParams};

/// Log-determinant ratio of the store's samples against those present at
/// the last synchronization (or, in the literal form, against the new
/// samples alone).
pub fn information_gain(model: &KernelModel, watermark: usize, form: TriggerForm) -> Result<f64> {
    match form {
        TriggerForm::Conditional => Ok(model.conditional_log_det(watermark)),
        TriggerForm::Literal => Ok(model.log_det() - model.marginal_log_det(watermark)?),
    }
}

/// Evaluates the sync predicate for one store at period `t`.
pub fn sync_trigger(
    store: &SampleStore,
    params: &KernelParams,
    t: u64,
    t_syn: u64,
    threshold: f64,
    form: TriggerForm,
) -> Result<bool> {
    let elapsed = t.saturating_sub(t_syn);
    if elapsed == 0 {
        return Ok(false);
    }
    let mut model = KernelModel::new(KernelKind::Association, *params);
    model.sync(store)?;
    Ok(trigger_fires(elapsed, information_gain(&model, store.watermark(), form)?, threshold))
}

/// Samples uploaded by synchronizing vehicles, per BS, bounded to the
/// newest `capacity` by period.
#[derive(Debug, Clone, Default)]
pub struct SyncHub {
    pools: BTreeMap<usize, Vec<Sample>>,
    capacity: usize,
    /// Load each BS broadcast at the last barrier.
    pub loads: BTreeMap<usize, u32>,
}

impl SyncHub {
    pub fn new(capacity: usize) -> Self {
        Self {
            pools: BTreeMap::new(),
            capacity: capacity.max(1),
            loads: BTreeMap::new(),
        }
    }

    pub fn pool(&self, bs: usize) -> &[Sample] {
        self.pools.get(&bs).map_or(&[], Vec::as_slice)
    }

    pub fn upload(&mut self, bs: usize, samples: &[Sample]) {
        let pool = self.pools.entry(bs).or_default();
        for s in samples {
            if !pool.iter().any(|p| p.id == s.id) {
                pool.push(*s);
            }
        }
        if pool.len() > self.capacity {
            // stable: among equal periods the earlier upload goes first
            pool.sort_by_key(|s| std::cmp::Reverse(s.period));
            pool.truncate(self.capacity);
            pool.reverse();
        }
    }

    /// Uploads the store's new samples, then merges the pool back into it.
    pub fn exchange(&mut self, bs: usize, store: &mut SampleStore) {
        self.upload(bs, store.new_samples());
        self.download(bs, store);
    }

    /// Merges the pool into the store without uploading anything.
    pub fn download(&self, bs: usize, store: &mut SampleStore) {
        let incoming: Vec<Sample> = self.pool(bs).iter().filter(|s| !store.contains(s.id)).copied().collect();
        store.merge_shared(&incoming);
    }

    pub fn bs_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.pools.keys().copied()
    }
}
