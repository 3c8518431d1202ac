//! Kernel-ridge posterior, UCB scoring, sample storage and the
//! synchronization trigger.

mod model;
mod store;
mod sync;
mod ucb;

pub use model::{posterior, KernelModel, Posterior};
pub use store::{Sample, SampleId, SampleRecord, SampleStore};
pub use sync::{information_gain, sync_trigger, SyncHub};
pub use ucb::{trigger_fires, ucb_score, ucb_select, AlphaSchedule, TriggerForm, UcbParams};
