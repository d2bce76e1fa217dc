//! Per-transmitter packet queues: Poisson arrivals, rate-driven head-of-line
//! service with sub-slot delivery times, deadline drops, and the delay /
//! drop-ratio statistics at slot and scheduling-slot granularity.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual bits below this are treated as a completed packet.
const BIT_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    pub packet_size_bits: f64,
    /// Mean arrivals per ms.
    pub arrival_rate_per_ms: f64,
    /// Hard per-packet deadline; defaults to `1 / arrival_rate_per_ms`.
    pub deadline_ms: Option<f64>,
    pub max_queue_packets: usize,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            packet_size_bits: 3200.0,
            arrival_rate_per_ms: 0.5,
            deadline_ms: None,
            max_queue_packets: 100,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.packet_size_bits > 0.0) {
            return Err(Error::Config("traffic.packet_size_bits must be > 0".into()));
        }
        if !(self.arrival_rate_per_ms > 0.0) {
            return Err(Error::Config("traffic.arrival_rate_per_ms must be > 0".into()));
        }
        if self.max_queue_packets == 0 {
            return Err(Error::Config("traffic.max_queue_packets must be > 0".into()));
        }
        if let Some(d) = self.deadline_ms {
            if !(d > 0.0) {
                return Err(Error::Config("traffic.deadline_ms must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn deadline(&self) -> f64 {
        self.deadline_ms.unwrap_or(1.0 / self.arrival_rate_per_ms)
    }

    /// Traffic influx in bits per ms.
    pub fn influx(&self) -> f64 {
        self.arrival_rate_per_ms * self.packet_size_bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub arrival_ms: f64,
    pub bits_remaining: f64,
}

/// Draws the number of packets arriving in one slot of `slot_ms`.
pub fn draw_arrivals<R: Rng + ?Sized>(rng: &mut R, rate_per_ms: f64, slot_ms: f64) -> u32 {
    let mean = rate_per_ms * slot_ms;
    if !(mean > 0.0) {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as u32
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServiceOutcome {
    pub delays_ms: Vec<f64>,
    /// Packets abandoned because they could not finish before their deadline.
    pub dropped: u32,
}

#[derive(Debug, Clone)]
pub struct PacketQueue {
    packets: VecDeque<Packet>,
    packet_size_bits: f64,
    capacity: usize,
    deadline_ms: f64,
    arrivals: u64,
    delivered: u64,
    dropped: u64,
}

impl PacketQueue {
    pub fn new(cfg: &TrafficConfig) -> Self {
        PacketQueue {
            packets: VecDeque::new(),
            packet_size_bits: cfg.packet_size_bits,
            capacity: cfg.max_queue_packets,
            deadline_ms: cfg.deadline(),
            arrivals: 0,
            delivered: 0,
            dropped: 0,
        }
    }

    /// Queue length in packets, counting a partially served head fractionally.
    pub fn length(&self) -> f64 {
        self.packets.iter().map(|p| p.bits_remaining).sum::<f64>() / self.packet_size_bits
    }

    /// Packets held, partially served head included.
    pub fn in_queue(&self) -> usize {
        self.packets.len()
    }

    pub fn packets(&self) -> impl Iterator<Item = &Packet> {
        self.packets.iter()
    }

    pub fn arrivals(&self) -> u64 {
        self.arrivals
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn deadline_ms(&self) -> f64 {
        self.deadline_ms
    }

    /// Appends `count` packets stamped `at_ms`; packets beyond the buffer
    /// size are dropped on arrival. Returns the number dropped.
    pub fn push_arrivals(&mut self, count: u32, at_ms: f64) -> u32 {
        let mut overflow = 0;
        for _ in 0..count {
            self.arrivals += 1;
            if self.packets.len() < self.capacity {
                self.packets.push_back(Packet {
                    arrival_ms: at_ms,
                    bits_remaining: self.packet_size_bits,
                });
            } else {
                overflow += 1;
            }
        }
        self.dropped += overflow as u64;
        overflow
    }

    /// Drains `rate_bps` over the slot `[start_ms, start_ms + slot_ms)`.
    ///
    /// A packet is delivered at the instant its last bit leaves; one that
    /// cannot finish by its deadline at this rate is abandoned without
    /// consuming airtime.
    pub fn serve(&mut self, rate_bps: f64, start_ms: f64, slot_ms: f64) -> ServiceOutcome {
        let mut out = ServiceOutcome::default();
        if !(rate_bps > 0.0) {
            return out;
        }
        let bits_per_ms = rate_bps / 1000.0;
        let end_ms = start_ms + slot_ms;
        let mut cursor = start_ms;
        while let Some(head) = self.packets.front_mut() {
            let budget = (end_ms - cursor) * bits_per_ms;
            if budget <= BIT_EPS {
                break;
            }
            let deadline_at = head.arrival_ms + self.deadline_ms;
            let finish = (cursor + head.bits_remaining / bits_per_ms).min(end_ms);
            if head.bits_remaining <= budget + BIT_EPS {
                if finish <= deadline_at {
                    out.delays_ms.push(finish - head.arrival_ms);
                    self.delivered += 1;
                    cursor = finish;
                } else {
                    out.dropped += 1;
                    self.dropped += 1;
                }
                self.packets.pop_front();
            } else {
                head.bits_remaining -= budget;
                break;
            }
        }
        out
    }

    /// Deadline enforcement at time `now_ms`.
    ///
    /// Packets older than the deadline are always dropped. At an arrival event
    /// or scheduling boundary, a transmitter with an active link (`rate_bps`
    /// is `Some`) also drops every packet whose projected completion at the
    /// current rate would exceed its deadline.
    pub fn enforce_deadlines(&mut self, now_ms: f64, event: bool, rate_bps: Option<f64>) -> u32 {
        let deadline = self.deadline_ms;
        let before = self.packets.len();
        self.packets.retain(|p| now_ms - p.arrival_ms <= deadline);
        if event {
            if let Some(r) = rate_bps {
                let bits_per_ms = r / 1000.0;
                let mut queued_bits = 0.0;
                self.packets.retain(|p| {
                    let completion = if bits_per_ms > 0.0 {
                        now_ms + (queued_bits + p.bits_remaining) / bits_per_ms
                    } else {
                        f64::INFINITY
                    };
                    let keep = completion - p.arrival_ms <= deadline;
                    if keep {
                        queued_bits += p.bits_remaining;
                    }
                    keep
                });
            }
        }
        let dropped = (before - self.packets.len()) as u32;
        self.dropped += dropped as u64;
        dropped
    }

    /// Discards everything still queued (vehicle left the segment). Returns
    /// the number of packets discarded; they are not counted as drops.
    pub fn flush(&mut self) -> usize {
        let n = self.packets.len();
        self.packets.clear();
        n
    }

    /// `arrivals == delivered + dropped + in_queue`.
    pub fn is_conserved(&self) -> bool {
        self.arrivals == self.delivered + self.dropped + self.packets.len() as u64
    }
}

/// What happened to one queue during one transmission slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotRecord {
    pub arrivals: u32,
    pub delays_ms: Vec<f64>,
    pub dropped: u32,
}

impl SlotRecord {
    pub fn mean_delay(&self) -> Option<f64> {
        (!self.delays_ms.is_empty()).then(|| self.delays_ms.iter().sum::<f64>() / self.delays_ms.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlotDelayStats {
    /// `None` when nothing was delivered.
    pub mean_delay_ms: Option<f64>,
    pub drop_ratio: f64,
}

impl SlotDelayStats {
    pub fn success_ratio(&self) -> f64 {
        1.0 - self.drop_ratio
    }
}

fn drop_ratio(dropped: u64, arrivals: u64) -> f64 {
    if arrivals == 0 {
        0.0
    } else {
        (dropped as f64 / arrivals as f64).clamp(0.0, 1.0)
    }
}

pub fn slot_stats(rec: &SlotRecord) -> SlotDelayStats {
    SlotDelayStats {
        mean_delay_ms: rec.mean_delay(),
        drop_ratio: drop_ratio(rec.dropped as u64, rec.arrivals as u64),
    }
}

/// Scheduling-slot statistics: the delay is the mean of the per-slot means
/// over slots that delivered something; the drop ratio pools the window.
pub fn scheduling_stats(window: &[SlotRecord]) -> SlotDelayStats {
    let means: Vec<f64> = window.iter().filter_map(SlotRecord::mean_delay).collect();
    let mean_delay_ms = (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64);
    let arrivals: u64 = window.iter().map(|r| r.arrivals as u64).sum();
    let dropped: u64 = window.iter().map(|r| r.dropped as u64).sum();
    SlotDelayStats {
        mean_delay_ms,
        drop_ratio: drop_ratio(dropped, arrivals),
    }
}
