//! Transmitter–receiver association: learned rate estimates from link
//! exploration, weighted utilities, receiver-proposing deferred acceptance,
//! and the two baselines (minimum distance and asynchronous long-term pairing).

mod baselines;
mod learning;
mod matching;
mod utility;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VehicleId;

pub use baselines::{asyn_candidate, mind_pairing, AsynState};
pub use learning::{estimate_rate, exploration_matching, recency_weights, CsiLog, CsiRecord, RateEstimate};
pub use matching::{
    blocking_pairs, deferred_acceptance, is_stable, stable_matchings, DaOutcome, Preferences,
};
pub use utility::{utilities, UtilityPair, UtilityParams};

/// A matched transmitter/receiver pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub tx: VehicleId,
    pub rx: VehicleId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssociationConfig {
    /// Per-slot decay of the exploration sample weights.
    pub recency_decay: f64,
    /// Relative-speed normaliser; defaults to the lane speed spread.
    pub speed_normalizer_kmh: Option<f64>,
    /// Queue-length normaliser; defaults to half the buffer size.
    pub queue_threshold_packets: Option<f64>,
    /// Beamwidth used by both ends of an exploration pilot.
    pub exploration_beamwidth_deg: f64,
    /// Longitudinal window from the segment start in which the asynchronous
    /// baseline looks for partners.
    pub asyn_window_m: f64,
}

impl Default for AssociationConfig {
    fn default() -> Self {
        AssociationConfig {
            recency_decay: 0.9,
            speed_normalizer_kmh: None,
            queue_threshold_packets: None,
            exploration_beamwidth_deg: 45.0,
            asyn_window_m: 20.0,
        }
    }
}

impl AssociationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.recency_decay > 0.0 && self.recency_decay <= 1.0) {
            return bad("association.recency_decay must lie in (0, 1]");
        }
        if matches!(self.speed_normalizer_kmh, Some(v) if !(v > 0.0)) {
            return bad("association.speed_normalizer_kmh must be > 0");
        }
        if matches!(self.queue_threshold_packets, Some(v) if !(v > 0.0)) {
            return bad("association.queue_threshold_packets must be > 0");
        }
        if !(self.exploration_beamwidth_deg > 0.0 && self.exploration_beamwidth_deg <= 360.0) {
            return bad("association.exploration_beamwidth_deg must lie in (0, 360]");
        }
        if !(self.asyn_window_m >= 0.0) {
            return bad("association.asyn_window_m must be >= 0");
        }
        Ok(())
    }
}
