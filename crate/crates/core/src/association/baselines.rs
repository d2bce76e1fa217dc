use std::collections::{BTreeMap, BTreeSet};

use super::Pair;
use crate::geometry::{Role, Vehicle, VehicleId};

/// Distance-based pairing: transmitters in order of position from the
/// segment start each take the nearest unpaired receiver in range.
pub fn mind_pairing(vehicles: &[Vehicle], coverage_radius_m: f64) -> Vec<Pair> {
    let mut txs: Vec<&Vehicle> = vehicles.iter().filter(|v| v.role == Role::Vtx).collect();
    txs.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.id.cmp(&b.id)));
    let mut rxs: Vec<&Vehicle> = vehicles.iter().filter(|v| v.role == Role::Vrx).collect();
    rxs.sort_by_key(|v| v.id);
    let mut taken = BTreeSet::new();
    let mut out = Vec::new();
    for tx in txs {
        let p = tx.position();
        let best = rxs
            .iter()
            .filter(|r| !taken.contains(&r.id))
            .map(|r| (p.distance(r.position()), r.id))
            .filter(|&(d, _)| d <= coverage_radius_m)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, rx)) = best {
            taken.insert(rx);
            out.push(Pair { tx: tx.id, rx });
        }
    }
    out.sort();
    out
}

/// Nearest eligible partner for a vehicle joining the asynchronous scheme:
/// opposite role, single, inside the entry window, same or adjacent lane and
/// within coverage.
pub fn asyn_candidate(
    v: &Vehicle,
    vehicles: &[Vehicle],
    is_single: impl Fn(VehicleId) -> bool,
    window_m: f64,
    coverage_radius_m: f64,
) -> Option<VehicleId> {
    let p = v.position();
    vehicles
        .iter()
        .filter(|o| {
            o.role != v.role
                && o.id != v.id
                && o.x <= window_m
                && o.lane.abs_diff(v.lane) <= 1
                && is_single(o.id)
        })
        .map(|o| (p.distance(o.position()), o.id))
        .filter(|&(d, _)| d <= coverage_radius_m)
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, id)| id)
}

/// Long-term pairs of the asynchronous baseline. A pair lives until one of
/// its members leaves; the survivor then stays unmatched for good.
#[derive(Debug, Clone, Default)]
pub struct AsynState {
    partner: BTreeMap<VehicleId, VehicleId>,
    retired: BTreeSet<VehicleId>,
}

impl AsynState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_single(&self, id: VehicleId) -> bool {
        !self.partner.contains_key(&id) && !self.retired.contains(&id)
    }

    pub fn partner(&self, id: VehicleId) -> Option<VehicleId> {
        self.partner.get(&id).copied()
    }

    /// Forgets a departed vehicle; returns the broken pair, if any.
    pub fn on_exit(&mut self, v: &Vehicle) -> Option<Pair> {
        self.retired.remove(&v.id);
        let other = self.partner.remove(&v.id)?;
        self.partner.remove(&other);
        self.retired.insert(other);
        Some(match v.role {
            Role::Vtx => Pair { tx: v.id, rx: other },
            Role::Vrx => Pair { tx: other, rx: v.id },
        })
    }

    /// Processes entry events in the given order; returns the pairs formed.
    pub fn on_entries(
        &mut self,
        entered: &[VehicleId],
        vehicles: &[Vehicle],
        window_m: f64,
        coverage_radius_m: f64,
    ) -> Vec<Pair> {
        let mut formed = Vec::new();
        for id in entered {
            let Some(v) = vehicles.iter().find(|o| o.id == *id) else {
                continue;
            };
            if !self.is_single(v.id) || v.x > window_m {
                continue;
            }
            if let Some(o) = asyn_candidate(v, vehicles, |c| self.is_single(c), window_m, coverage_radius_m) {
                self.partner.insert(v.id, o);
                self.partner.insert(o, v.id);
                formed.push(match v.role {
                    Role::Vtx => Pair { tx: v.id, rx: o },
                    Role::Vrx => Pair { tx: o, rx: v.id },
                });
            }
        }
        formed
    }

    /// Current pairs, ascending.
    pub fn pairs(&self, roles: impl Fn(VehicleId) -> Option<Role>) -> Vec<Pair> {
        self.partner
            .iter()
            .filter(|(a, _)| roles(**a) == Some(Role::Vtx))
            .map(|(a, b)| Pair { tx: *a, rx: *b })
            .collect()
    }
}
