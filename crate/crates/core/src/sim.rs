//! The two-timescale slot loop.
//!
//! Per transmission slot `t` the order is fixed:
//!
//! 1. mobility (for `t > 0`): advance, drop departed vehicles' links and
//!    queues, admit entrants (asynchronous pairing reacts here);
//! 2. scheduling, when `t` starts a scheduling slot: close the previous
//!    window's statistics, estimate rates from the previous window's
//!    exploration samples, associate, choose beamwidths and align;
//! 3. drift: alignment errors from the current geometry;
//! 4. SINR and rate of every active link (alignment delay charged in the
//!    slot the beams were trained);
//! 5. service;
//! 6. deadline enforcement;
//! 7. arrivals, stamped at the slot end;
//! 8. exploration sampling for the next window.

use std::collections::{BTreeMap, HashMap};

use crate::association::{
    blocking_pairs, deferred_acceptance, estimate_rate, exploration_matching, mind_pairing, utilities, AsynState, CsiLog, CsiRecord,
    Pair, Preferences, UtilityParams,
};
use crate::config::{Method, SimConfig};
use crate::error::Result;
use crate::geometry::{BlockerIndex, Highway, Point, Role, Vehicle, VehicleId};
use crate::metrics::{Counters, MetricsBundle, SchedPoint};
use crate::pso::{self, Bounds};
use crate::queue::{draw_arrivals, scheduling_stats, PacketQueue, SlotRecord};
use crate::radio::{channel_gain_db, rate, ActiveLink, BlockageParams, LinkSet, RadioParams};
use crate::rng::{derive_seed, stream, Stream, StreamKind};
use crate::units::deg;

/// One step of the slot loop, for ordering checks and debugging.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Mobility { slot: u64, exited: usize, entered: usize },
    Schedule { slot: u64, pairs: Vec<Pair> },
    Rates { slot: u64, links: usize },
    Service { slot: u64, delivered: usize },
    Deadlines { slot: u64, dropped: u32 },
    Arrivals { slot: u64, packets: u32 },
    Explore { slot: u64, samples: usize },
}

impl TraceEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            TraceEvent::Mobility { .. } => "mobility",
            TraceEvent::Schedule { .. } => "schedule",
            TraceEvent::Rates { .. } => "rates",
            TraceEvent::Service { .. } => "service",
            TraceEvent::Deadlines { .. } => "deadlines",
            TraceEvent::Arrivals { .. } => "arrivals",
            TraceEvent::Explore { .. } => "explore",
        }
    }
}

#[derive(Debug, Clone)]
struct Link {
    pair: Pair,
    widths: (f64, f64),
    tx_steer: f64,
    rx_steer: f64,
    tau_ms: f64,
    /// Slot in which beam training airtime is charged.
    charge_slot: Option<u64>,
    window_start: u64,
    window: Vec<SlotRecord>,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    params: RadioParams,
    blockage: BlockageParams,
    n: u64,
    highway: Highway,
    queues: BTreeMap<VehicleId, PacketQueue>,
    arrival_rngs: BTreeMap<VehicleId, Stream>,
    links: Vec<Link>,
    asyn: AsynState,
    explore_rng: Stream,
    csi: CsiLog,
    explore_candidates: Vec<(VehicleId, Vec<VehicleId>)>,
    index: BlockerIndex,
    blockers: HashMap<(VehicleId, VehicleId), usize>,
    bundle: MetricsBundle,
    trace: Option<Vec<TraceEvent>>,
}

/// Runs the configured simulation.
pub fn run(cfg: &SimConfig) -> Result<MetricsBundle> {
    Ok(run_inner(cfg, false)?.0)
}

/// Runs the simulation and also returns the per-slot event trace.
pub fn run_traced(cfg: &SimConfig) -> Result<(MetricsBundle, Vec<TraceEvent>)> {
    let (b, t) = run_inner(cfg, true)?;
    Ok((b, t.unwrap_or_default()))
}

fn run_inner(cfg: &SimConfig, traced: bool) -> Result<(MetricsBundle, Option<Vec<TraceEvent>>)> {
    cfg.validate()?;
    let mut e = Engine::new(cfg, traced)?;
    for t in 0..cfg.total_slots() {
        e.slot(t).map_err(|err| err.at_slot(t))?;
    }
    e.finish();
    Ok((e.bundle, e.trace))
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig, traced: bool) -> Result<Self> {
        let highway = Highway::spawn(cfg.highway.clone(), cfg.seed)?;
        let index = BlockerIndex::new(highway.vehicles());
        let mut e = Engine {
            cfg,
            params: RadioParams::new(&cfg.radio, &cfg.antenna, cfg.transmission_slot_ms),
            blockage: cfg.radio.blockage.clone(),
            n: cfg.slots_per_schedule(),
            highway,
            queues: BTreeMap::new(),
            arrival_rngs: BTreeMap::new(),
            links: Vec::new(),
            asyn: AsynState::new(),
            explore_rng: stream(cfg.seed, StreamKind::Exploration, 0),
            csi: CsiLog::new(),
            explore_candidates: Vec::new(),
            index,
            blockers: HashMap::new(),
            bundle: MetricsBundle {
                config_hash: cfg.hash(),
                seeds: vec![cfg.seed],
                method: method_label(cfg),
                deadline_ms: cfg.traffic.deadline(),
                ..MetricsBundle::default()
            },
            trace: traced.then(Vec::new),
        };
        let ids: Vec<VehicleId> = e
            .highway
            .vehicles()
            .iter()
            .filter(|v| v.role == Role::Vtx)
            .map(|v| v.id)
            .collect();
        for id in ids {
            e.add_transmitter(id);
        }
        Ok(e)
    }

    fn emit(&mut self, ev: TraceEvent) {
        if let Some(t) = &mut self.trace {
            t.push(ev);
        }
    }

    fn add_transmitter(&mut self, id: VehicleId) {
        self.queues.insert(id, PacketQueue::new(&self.cfg.traffic));
        self.arrival_rngs
            .insert(id, stream(self.cfg.seed, StreamKind::Arrivals, id as u64));
    }

    fn slot_ms(&self) -> f64 {
        self.cfg.transmission_slot_ms
    }

    fn vehicle(&self, id: VehicleId) -> &Vehicle {
        self.highway.get(id).expect("linked vehicles are present")
    }

    /// Beamwidth used by fixed-beam links. A width above the sector needs no
    /// refinement, so its training costs a single pilot.
    fn fixed_widths(&self) -> (f64, f64) {
        let w = deg(self.cfg.fixed_beamwidth_deg);
        (w, w)
    }

    fn training_delay(&self, (tx, rx): (f64, f64)) -> Result<f64> {
        let p = &self.params;
        crate::radio::alignment_delay(tx, rx, p.sector.max(tx), p.sector.max(rx), p.pilot_ms, p.slot_ms)
    }

    fn pathloss_db(&mut self, tx: (VehicleId, Point), rx: (VehicleId, Point)) -> Result<f64> {
        let cap = self.blockage.saturation();
        let index = &self.index;
        let n = *self
            .blockers
            .entry((tx.0, rx.0))
            .or_insert_with(|| index.count(tx.1, tx.0, rx.1, rx.0, cap));
        channel_gain_db(tx.1.distance(rx.1), n, &self.blockage)
    }

    fn link_set(&mut self, geometry: &[(VehicleId, VehicleId, ActiveLink)]) -> Result<LinkSet> {
        let n = geometry.len();
        let mut pl = vec![0.0; n * n];
        for z in 0..n {
            for k in 0..n {
                pl[z * n + k] = self.pathloss_db((geometry[z].0, geometry[z].2.tx), (geometry[k].1, geometry[k].2.rx))?;
            }
        }
        let links: Vec<ActiveLink> = geometry.iter().map(|g| g.2).collect();
        Ok(LinkSet::new(&links, &self.params, |z, k| pl[z * n + k]))
    }

    fn slot(&mut self, t: u64) -> Result<()> {
        if t > 0 {
            self.mobility(t)?;
        } else if self.cfg.method == Method::Asyn {
            let mut initial: Vec<&Vehicle> = self.highway.vehicles().iter().collect();
            initial.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.id.cmp(&b.id)));
            let ids: Vec<VehicleId> = initial.iter().map(|v| v.id).collect();
            self.asyn.on_entries(
                &ids,
                self.highway.vehicles(),
                self.cfg.association.asyn_window_m,
                self.cfg.highway.coverage_radius_m,
            );
        }
        if t % self.n == 0 {
            self.schedule(t)?;
        }
        let rates = self.link_rates(t)?;
        self.service(t, &rates);
        self.deadlines_and_arrivals(t, &rates);
        if self.cfg.method.uses_learning() {
            self.explore(t)?;
        }
        Ok(())
    }

    fn mobility(&mut self, t: u64) -> Result<()> {
        let adv = self.highway.advance(self.slot_ms());
        let mut gone: Vec<&Vehicle> = adv.exited.iter().collect();
        gone.sort_by_key(|v| v.id);
        for v in &gone {
            if let Some(mut q) = self.queues.remove(&v.id) {
                self.bundle.counters.flushed += q.flush() as u64;
                self.retire_queue_counts(&q);
                self.arrival_rngs.remove(&v.id);
            }
            if self.cfg.method == Method::Asyn {
                self.asyn.on_exit(v);
            }
        }
        let mut k = 0;
        while k < self.links.len() {
            let p = self.links[k].pair;
            if gone.iter().any(|v| v.id == p.tx || v.id == p.rx) {
                let l = self.links.remove(k);
                self.close_window(&l);
            } else {
                k += 1;
            }
        }
        let mut entered: Vec<&Vehicle> = adv.entered.iter().collect();
        entered.sort_by_key(|v| v.id);
        for v in &entered {
            if v.role == Role::Vtx {
                self.add_transmitter(v.id);
            }
        }
        if self.cfg.method == Method::Asyn && !entered.is_empty() {
            let ids: Vec<VehicleId> = entered.iter().map(|v| v.id).collect();
            let formed = self.asyn.on_entries(
                &ids,
                self.highway.vehicles(),
                self.cfg.association.asyn_window_m,
                self.cfg.highway.coverage_radius_m,
            );
            let widths = self.fixed_widths();
            for pair in formed {
                let link = self.align(pair, widths, Some(t), t)?;
                self.links.push(link);
            }
            self.links.sort_by_key(|l| l.pair);
        }
        self.emit(TraceEvent::Mobility {
            slot: t,
            exited: adv.exited.len(),
            entered: adv.entered.len(),
        });
        Ok(())
    }

    fn retire_queue_counts(&mut self, q: &PacketQueue) {
        let c = &mut self.bundle.counters;
        c.arrivals += q.arrivals();
        c.delivered += q.delivered();
        c.dropped += q.dropped();
    }

    fn align(&self, pair: Pair, widths: (f64, f64), charge_slot: Option<u64>, t: u64) -> Result<Link> {
        let a = ActiveLink::aligned(self.vehicle(pair.tx).position(), self.vehicle(pair.rx).position());
        Ok(Link {
            pair,
            widths,
            tx_steer: a.tx_steer,
            rx_steer: a.rx_steer,
            tau_ms: self.training_delay(widths)?,
            charge_slot,
            window_start: t,
            window: Vec::new(),
        })
    }

    fn close_window(&mut self, l: &Link) {
        if l.window.is_empty() {
            return;
        }
        let s = scheduling_stats(&l.window);
        self.bundle.points.push(SchedPoint {
            slot: l.window_start,
            tx: l.pair.tx,
            rx: l.pair.rx,
            mean_delay_ms: s.mean_delay_ms.unwrap_or(0.0),
            drop_ratio: s.drop_ratio,
            arrivals: l.window.iter().map(|r| r.arrivals).sum(),
            delivered: l.window.iter().map(|r| r.delays_ms.len() as u32).sum(),
        });
    }

    fn schedule(&mut self, t: u64) -> Result<()> {
        // pairs trained earlier in this very slot keep their charge
        let mut fresh = Vec::new();
        for l in std::mem::take(&mut self.links) {
            if l.charge_slot == Some(t) {
                fresh.push(l.pair);
            }
            self.close_window(&l);
        }
        self.index = BlockerIndex::new(self.highway.vehicles());
        self.blockers.clear();
        self.bundle.scheduling_events += 1;

        let bootstrap = t == 0;
        let rc = self.cfg.highway.coverage_radius_m;
        let pairs = match self.cfg.method {
            Method::Mind => mind_pairing(self.highway.vehicles(), rc),
            Method::Asyn => self.asyn.pairs(|id| self.highway.get(id).map(|v| v.role)),
            Method::Waf | Method::Pso if bootstrap => mind_pairing(self.highway.vehicles(), rc),
            Method::Waf | Method::Pso => self.learned_matching(t),
        };

        let widths: Vec<(f64, f64)> = match self.cfg.method {
            Method::Waf | Method::Pso if bootstrap => vec![(self.params.sector, self.params.sector); pairs.len()],
            Method::Pso => self.optimize_beams(&pairs, t)?,
            _ => vec![self.fixed_widths(); pairs.len()],
        };
        // Long-term pairs re-steer at every boundary but pay for training
        // only when formed.
        let mut links = Vec::with_capacity(pairs.len());
        for (pair, w) in pairs.iter().zip(widths) {
            let charge = (self.cfg.method != Method::Asyn || bootstrap || fresh.contains(pair)).then_some(t);
            links.push(self.align(*pair, w, charge, t)?);
        }
        self.links = links;

        let n_tx = self.queues.len();
        if n_tx > 0 {
            self.bundle.pairing.push(self.links.len() as f64 / n_tx as f64);
        }

        if self.cfg.method.uses_learning() {
            self.csi.clear();
            let vs = self.highway.vehicles();
            self.explore_candidates = vs
                .iter()
                .filter(|v| v.role == Role::Vrx)
                .map(|rx| {
                    let p = rx.position();
                    let txs = vs
                        .iter()
                        .filter(|v| v.role == Role::Vtx && p.distance(v.position()) <= rc)
                        .map(|v| v.id)
                        .collect();
                    (rx.id, txs)
                })
                .collect();
        }
        self.emit(TraceEvent::Schedule { slot: t, pairs });
        Ok(())
    }

    /// Deferred acceptance over utilities learned from the last window.
    fn learned_matching(&mut self, t: u64) -> Vec<Pair> {
        let cfg = self.cfg;
        let vs = self.highway.vehicles();
        let txs: Vec<&Vehicle> = vs.iter().filter(|v| v.role == Role::Vtx).collect();
        let rxs: Vec<&Vehicle> = vs.iter().filter(|v| v.role == Role::Vrx).collect();
        let spread = cfg.highway.speed_spread_kmh();
        let up = UtilityParams {
            influx_bits_per_ms: cfg.traffic.influx(),
            speed_normalizer_kmh: cfg
                .association
                .speed_normalizer_kmh
                .unwrap_or(if spread > 0.0 { spread } else { 1.0 }),
            queue_threshold_packets: cfg
                .association
                .queue_threshold_packets
                .unwrap_or(cfg.traffic.max_queue_packets as f64 / 2.0),
            packet_size_bits: cfg.traffic.packet_size_bits,
            slot_ms: cfg.transmission_slot_ms,
        };
        let prefs = learned_preferences(
            &txs,
            &rxs,
            &self.csi,
            t,
            cfg,
            &up,
            |sinr| self.exploration_sample_rate(sinr),
        );
        let outcome = deferred_acceptance(&prefs);
        self.bundle.counters.stability_checks += 1;
        self.bundle.counters.blocking_pairs += blocking_pairs(&prefs, &outcome.tx_of_rx).len() as u64;
        outcome
            .pairs()
            .into_iter()
            .map(|(i, j)| Pair {
                tx: txs[i].id,
                rx: rxs[j].id,
            })
            .collect()
    }

    fn exploration_widths(&self) -> (f64, f64) {
        let w = deg(self.cfg.association.exploration_beamwidth_deg);
        (w, w)
    }

    fn exploration_sample_rate(&self, sinr: f64) -> f64 {
        let tau = self.training_delay(self.exploration_widths()).unwrap_or(self.params.slot_ms);
        rate(sinr, tau, self.params.slot_ms, self.params.bandwidth_hz, true)
    }

    fn optimize_beams(&mut self, pairs: &[Pair], t: u64) -> Result<Vec<(f64, f64)>> {
        let geometry: Vec<_> = pairs
            .iter()
            .map(|p| {
                let a = ActiveLink::aligned(self.vehicle(p.tx).position(), self.vehicle(p.rx).position());
                (p.tx, p.rx, a)
            })
            .collect();
        let ls = self.link_set(&geometry)?;
        let params = self.params;
        let seed = derive_seed(self.cfg.seed, StreamKind::Pso, t);
        let r = pso::optimize(
            pairs.len(),
            |x| pso::fitness(x, &ls, &params),
            &self.cfg.pso,
            Bounds::from_params(&params),
            seed,
        );
        if !r.trace.is_empty() {
            self.bundle.pso_traces.push(r.trace);
        }
        Ok(r.widths)
    }

    /// Drift and SINR of every active link at the current geometry; returns
    /// the rate per link (bits/s), in link order.
    fn link_rates(&mut self, t: u64) -> Result<Vec<f64>> {
        let geometry: Vec<_> = self
            .links
            .iter()
            .map(|l| {
                let a = ActiveLink {
                    tx: self.vehicle(l.pair.tx).position(),
                    rx: self.vehicle(l.pair.rx).position(),
                    tx_steer: l.tx_steer,
                    rx_steer: l.rx_steer,
                };
                (l.pair.tx, l.pair.rx, a)
            })
            .collect();
        let ls = self.link_set(&geometry)?;
        let widths: Vec<(f64, f64)> = self.links.iter().map(|l| l.widths).collect();
        let rates: Vec<f64> = self
            .links
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let aligning = l.charge_slot == Some(t);
                rate(ls.sinr(k, &widths), l.tau_ms, self.params.slot_ms, self.params.bandwidth_hz, aligning)
            })
            .collect();
        self.bundle.rate_samples_bps.extend(&rates);
        self.emit(TraceEvent::Rates {
            slot: t,
            links: rates.len(),
        });
        Ok(rates)
    }

    fn service(&mut self, t: u64, rates: &[f64]) {
        let start = t as f64 * self.slot_ms();
        let slot_ms = self.slot_ms();
        let mut delivered = 0;
        for (l, &r) in self.links.iter_mut().zip(rates) {
            let q = self.queues.get_mut(&l.pair.tx).expect("linked transmitter has a queue");
            let out = q.serve(r, start, slot_ms);
            delivered += out.delays_ms.len();
            for &d in &out.delays_ms {
                self.bundle.counters.max_delay_ms = self.bundle.counters.max_delay_ms.max(d);
            }
            self.bundle.delays_ms.extend(&out.delays_ms);
            l.window.push(SlotRecord {
                arrivals: 0,
                delays_ms: out.delays_ms,
                dropped: out.dropped,
            });
        }
        self.emit(TraceEvent::Service { slot: t, delivered });
    }

    fn deadlines_and_arrivals(&mut self, t: u64, rates: &[f64]) {
        let end = (t + 1) as f64 * self.slot_ms();
        let boundary = t % self.n == 0;
        let by_tx: BTreeMap<VehicleId, usize> = self.links.iter().enumerate().map(|(k, l)| (l.pair.tx, k)).collect();
        let lambda = self.cfg.traffic.arrival_rate_per_ms;
        let slot_ms = self.slot_ms();
        let mut dropped_total = 0;
        let mut arrived_total = 0;
        let mut violations = 0;
        for (id, q) in self.queues.iter_mut() {
            let rng = self.arrival_rngs.get_mut(id).expect("every queue has an arrival stream");
            let n = draw_arrivals(rng, lambda, slot_ms);
            let link = by_tx.get(id).copied();
            let dropped = q.enforce_deadlines(end, n > 0 || boundary, link.map(|k| rates[k]));
            let overflow = q.push_arrivals(n, end);
            if let Some(k) = link {
                let rec = self.links[k].window.last_mut().expect("service pushed a record");
                rec.dropped += dropped + overflow;
                rec.arrivals += n;
            }
            dropped_total += dropped + overflow;
            arrived_total += n;
            if !q.is_conserved() {
                violations += 1;
            }
        }
        self.bundle.counters.conservation_violations += violations;
        self.emit(TraceEvent::Deadlines {
            slot: t,
            dropped: dropped_total,
        });
        self.emit(TraceEvent::Arrivals {
            slot: t,
            packets: arrived_total,
        });
    }

    fn explore(&mut self, t: u64) -> Result<()> {
        let present: Vec<(VehicleId, Vec<VehicleId>)> = self
            .explore_candidates
            .iter()
            .filter(|(rx, _)| self.highway.get(*rx).is_some())
            .map(|(rx, txs)| (*rx, txs.iter().copied().filter(|tx| self.highway.get(*tx).is_some()).collect()))
            .collect();
        let pairs = exploration_matching(&present, &mut self.explore_rng);
        if !pairs.is_empty() {
            let geometry: Vec<_> = pairs
                .iter()
                .map(|p| {
                    let a = ActiveLink::aligned(self.vehicle(p.tx).position(), self.vehicle(p.rx).position());
                    (p.tx, p.rx, a)
                })
                .collect();
            let ls = self.link_set(&geometry)?;
            let widths = vec![self.exploration_widths(); pairs.len()];
            for (k, p) in pairs.iter().enumerate() {
                self.csi.push(
                    p.rx,
                    CsiRecord {
                        slot: t,
                        tx: p.tx,
                        sinr: ls.sinr(k, &widths),
                    },
                );
            }
        }
        self.emit(TraceEvent::Explore {
            slot: t,
            samples: pairs.len(),
        });
        Ok(())
    }

    fn finish(&mut self) {
        for l in std::mem::take(&mut self.links) {
            self.close_window(&l);
        }
        let queues = std::mem::take(&mut self.queues);
        for q in queues.values() {
            self.bundle.counters.residual += q.in_queue() as u64;
            self.retire_queue_counts(q);
        }
        self.bundle.slots = self.cfg.total_slots();
        let c: &Counters = &self.bundle.counters;
        debug_assert!(c.arrivals >= c.delivered + c.dropped);
    }
}

/// Utility tables for deferred acceptance: a pair is acceptable when both
/// ends are in range, the receiver sampled the transmitter in the last window
/// and both utilities are defined.
pub fn learned_preferences(
    txs: &[&Vehicle],
    rxs: &[&Vehicle],
    csi: &CsiLog,
    now: u64,
    cfg: &SimConfig,
    up: &UtilityParams,
    sample_rate: impl Fn(f64) -> f64,
) -> Preferences {
    let mut prefs = Preferences::new(txs.len(), rxs.len());
    let rc = cfg.highway.coverage_radius_m;
    for (j, rx) in rxs.iter().enumerate() {
        let records = csi.records(rx.id);
        if records.is_empty() {
            continue;
        }
        for (i, tx) in txs.iter().enumerate() {
            if tx.position().distance(rx.position()) > rc {
                continue;
            }
            let Some(est) = estimate_rate(records, tx.id, now, cfg.association.recency_decay, &sample_rate) else {
                continue;
            };
            let dv = (tx.speed_kmh - rx.speed_kmh).abs();
            if let Some(u) = utilities(est.rate_bps, dv, up) {
                prefs.set(i, j, u.tx, u.rx);
            }
        }
    }
    prefs
}

fn method_label(cfg: &SimConfig) -> String {
    match cfg.method {
        Method::Pso => "pso".into(),
        m => format!("{}:{}", m, cfg.fixed_beamwidth_deg),
    }
}
