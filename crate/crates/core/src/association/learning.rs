use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use super::Pair;
use crate::geometry::VehicleId;

/// One exploration sample seen by a receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsiRecord {
    pub slot: u64,
    pub tx: VehicleId,
    pub sinr: f64,
}

/// Exploration samples of one scheduling window, keyed by receiver.
#[derive(Debug, Clone, Default)]
pub struct CsiLog {
    by_rx: BTreeMap<VehicleId, Vec<CsiRecord>>,
}

impl CsiLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, rx: VehicleId, rec: CsiRecord) {
        self.by_rx.entry(rx).or_default().push(rec);
    }

    pub fn records(&self, rx: VehicleId) -> &[CsiRecord] {
        self.by_rx.get(&rx).map_or(&[], Vec::as_slice)
    }

    /// Transmitters heard by `rx`, ascending.
    pub fn heard(&self, rx: VehicleId) -> BTreeSet<VehicleId> {
        self.records(rx).iter().map(|r| r.tx).collect()
    }

    pub fn len(&self) -> usize {
        self.by_rx.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_rx.is_empty()
    }

    pub fn clear(&mut self) {
        self.by_rx.clear();
    }
}

/// Random one-to-one exploration pairing: receivers in random order each pick
/// a uniformly random still-free transmitter from their neighbourhood.
///
/// `candidates` lists every receiver with its in-range transmitters.
pub fn exploration_matching<R: Rng + ?Sized>(candidates: &[(VehicleId, Vec<VehicleId>)], rng: &mut R) -> Vec<Pair> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.shuffle(rng);
    let mut taken = BTreeSet::new();
    let mut out = Vec::new();
    let mut free = Vec::new();
    for k in order {
        let (rx, txs) = &candidates[k];
        free.clear();
        free.extend(txs.iter().copied().filter(|t| !taken.contains(t)));
        if free.is_empty() {
            continue;
        }
        let tx = free[rng.random_range(0..free.len())];
        taken.insert(tx);
        out.push(Pair { tx, rx: *rx });
    }
    out.sort();
    out
}

/// Normalised recency weights `w_k ∝ decay^(now - slot_k)`.
pub fn recency_weights(slots: &[u64], now: u64, decay: f64) -> Vec<f64> {
    let newest = slots.iter().copied().max().unwrap_or(now);
    // Factor out decay^(now - newest) so long gaps cannot underflow.
    let raw: Vec<f64> = slots.iter().map(|&s| decay.powf((newest - s) as f64)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub rate_bps: f64,
    pub weights: Vec<f64>,
}

/// Recency-weighted average of the per-sample rates of transmitter `tx`
/// among `records`. `sample_rate` maps a sample SINR to a rate in bits/s.
pub fn estimate_rate(
    records: &[CsiRecord],
    tx: VehicleId,
    now: u64,
    decay: f64,
    sample_rate: impl Fn(f64) -> f64,
) -> Option<RateEstimate> {
    let mine: Vec<&CsiRecord> = records.iter().filter(|r| r.tx == tx).collect();
    if mine.is_empty() {
        return None;
    }
    let slots: Vec<u64> = mine.iter().map(|r| r.slot).collect();
    let weights = recency_weights(&slots, now, decay);
    let rate_bps = mine.iter().zip(&weights).map(|(r, w)| w * sample_rate(r.sinr)).sum();
    Some(RateEstimate { rate_bps, weights })
}
