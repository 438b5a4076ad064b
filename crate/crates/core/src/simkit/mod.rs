//! Discrete-event engine, per-link channel model and the shared radio medium.

mod engine;
mod medium;
mod trace;

pub use engine::Scheduler;
pub use medium::{Delivery, Medium, MediumEvent, NodeId, Outcome, Transmission, TxId, TxKind};
pub use trace::Trace;

use alloc::collections::BTreeMap;

use crate::Micros;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("event scheduled at {at} before current time {now}")]
    PastEvent { now: Micros, at: Micros },
    #[error("node {0} already listens on an overlapping window")]
    ListenConflict(u16),
    #[error("unknown node {0}")]
    UnknownNode(u16),
    #[error("invalid transmission: {0}")]
    InvalidTransmission(crate::phy::PhyError),
    #[error("beacon tick at {0} is off the period grid")]
    Misaligned(Micros),
}

/// Per-link mean attenuation plus Gaussian SNR jitter.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub noise_floor_dbm: f64,
    pub snr_jitter_sigma_db: f64,
    attenuation_db: BTreeMap<(NodeId, NodeId), f64>,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel { noise_floor_dbm: -117.0, snr_jitter_sigma_db: 1.0, attenuation_db: BTreeMap::new() }
    }
}

impl ChannelModel {
    pub fn new(noise_floor_dbm: f64, snr_jitter_sigma_db: f64) -> Self {
        ChannelModel { noise_floor_dbm, snr_jitter_sigma_db, attenuation_db: BTreeMap::new() }
    }

    /// Sets the same attenuation in both directions. Negative values are clamped to 0.
    pub fn set_link(&mut self, a: NodeId, b: NodeId, db: f64) {
        self.set_directed(a, b, db);
        self.set_directed(b, a, db);
    }

    pub fn set_directed(&mut self, from: NodeId, to: NodeId, db: f64) {
        self.attenuation_db.insert((from, to), db.max(0.0));
    }

    /// `None` means no link (infinite attenuation).
    pub fn attenuation(&self, from: NodeId, to: NodeId) -> Option<f64> {
        self.attenuation_db.get(&(from, to)).copied().filter(|d| d.is_finite())
    }
}
