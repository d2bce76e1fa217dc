/// Constants shared by every pair's utilities in one scheduling slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityParams {
    /// Traffic influx, bits per ms.
    pub influx_bits_per_ms: f64,
    pub speed_normalizer_kmh: f64,
    pub queue_threshold_packets: f64,
    pub packet_size_bits: f64,
    pub slot_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityPair {
    pub tx_weight: f64,
    pub rx_weight: f64,
    /// Transmitter's utility of being matched with the receiver.
    pub tx: f64,
    /// Receiver's utility of being matched with the transmitter.
    pub rx: f64,
}

/// Weighted delay-fair utilities of a candidate pair.
///
/// The transmitter weight grows with the relative speed; the receiver weight
/// shrinks as the expected queue (packets left after one slot of service at
/// the estimated rate) grows. Returns `None` for an infeasible pair: zero
/// estimated rate or a non-positive receiver weight.
pub fn utilities(est_rate_bps: f64, relative_speed_kmh: f64, p: &UtilityParams) -> Option<UtilityPair> {
    if !(est_rate_bps > 0.0) || !est_rate_bps.is_finite() {
        return None;
    }
    let rho = p.influx_bits_per_ms;
    let rate = est_rate_bps / 1000.0;
    let tx_weight = rho * (1.0 + relative_speed_kmh.abs() / p.speed_normalizer_kmh);
    let expected_queue = p.packet_size_bits / (rate * p.slot_ms);
    let rx_weight = rho * (2.0 - expected_queue / p.queue_threshold_packets);
    if !(rx_weight > 0.0) {
        return None;
    }
    Some(UtilityPair {
        tx_weight,
        rx_weight,
        tx: -tx_weight / rate,
        rx: -rx_weight / rate,
    })
}
