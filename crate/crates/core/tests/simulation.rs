use std::collections::{BTreeMap, HashSet};

use mmv2v::sim::{run_traced, TraceEvent};
use mmv2v::{run, Method, SimConfig};

fn small(method: Method) -> SimConfig {
    let mut c = SimConfig {
        method,
        total_time_ms: 200.0,
        scheduling_slot_ms: 20.0,
        ..SimConfig::default()
    };
    c.highway.segment_length_m = 300.0;
    c.highway.density_per_km = 120.0;
    c.pso.iterations = 5;
    c.pso.swarm_size = 6;
    c
}

fn slot_of(e: &TraceEvent) -> u64 {
    match e {
        TraceEvent::Mobility { slot, .. }
        | TraceEvent::Schedule { slot, .. }
        | TraceEvent::Rates { slot, .. }
        | TraceEvent::Service { slot, .. }
        | TraceEvent::Deadlines { slot, .. }
        | TraceEvent::Arrivals { slot, .. }
        | TraceEvent::Explore { slot, .. } => *slot,
    }
}

#[test]
fn phases_run_in_order_every_slot() {
    for m in Method::ALL {
        let c = small(m);
        let n = c.slots_per_schedule();
        let (b, trace) = run_traced(&c).unwrap();
        let mut by_slot: BTreeMap<u64, Vec<&str>> = BTreeMap::new();
        let mut last = 0;
        for e in &trace {
            assert!(slot_of(e) >= last, "{m}: events out of slot order");
            last = slot_of(e);
            by_slot.entry(slot_of(e)).or_default().push(e.kind());
        }
        assert_eq!(by_slot.len() as u64, b.slots);
        for (t, kinds) in by_slot {
            let mut want = Vec::new();
            if t > 0 {
                want.push("mobility");
            }
            if t % n == 0 {
                want.push("schedule");
            }
            want.extend(["rates", "service", "deadlines", "arrivals"]);
            if m.uses_learning() {
                want.push("explore");
            }
            assert_eq!(kinds, want, "{m} slot {t}");
        }
    }
}

#[test]
fn schedules_are_matchings() {
    for m in Method::ALL {
        let (_, trace) = run_traced(&small(m)).unwrap();
        for e in &trace {
            if let TraceEvent::Schedule { pairs, .. } = e {
                let mut seen = HashSet::new();
                for p in pairs {
                    assert_ne!(p.tx, p.rx);
                    assert!(seen.insert(p.tx) && seen.insert(p.rx), "{m}: vehicle in two links");
                }
            }
        }
    }
}

#[test]
fn config_round_trip_reproduces_run() {
    let c = small(Method::Pso);
    let again = SimConfig::from_toml_str(&c.to_toml_string()).unwrap();
    assert_eq!(c.hash(), again.hash());
    assert_eq!(run(&c).unwrap(), run(&again).unwrap());
}

#[test]
fn seeds_change_outcomes() {
    let a = run(&small(Method::Waf)).unwrap();
    let b = run(&SimConfig { seed: 2, ..small(Method::Waf) }).unwrap();
    assert_ne!(a.rate_samples_bps, b.rate_samples_bps);
}

#[test]
fn conservation_under_heavy_load() {
    for m in Method::ALL {
        let mut c = small(m);
        c.traffic.arrival_rate_per_ms = 5.0;
        c.traffic.max_queue_packets = 8;
        c.traffic.packet_size_bits = 1e6;
        let b = run(&c).unwrap();
        let k = &b.counters;
        assert_eq!(k.conservation_violations, 0, "{m}");
        assert_eq!(k.arrivals, k.delivered + k.dropped + k.flushed + k.residual, "{m}");
        assert!(k.dropped > 0, "{m}: overload must drop packets");
        assert!(k.max_delay_ms <= b.deadline_ms + 1e-9);
    }
}

#[test]
fn outputs_are_written() {
    let c = small(Method::Waf);
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("simulation-outputs");
    run(&c).unwrap().write_outputs(&dir, &c.report).unwrap();
    for f in ["cdf_rate.csv", "cdf_delay.csv", "scatter_delay_drop.csv", "table_joint_bounds.json", "summary.json"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
    let csv = std::fs::read_to_string(dir.join("cdf_rate.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains(&c.hash()));
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config_hash"], c.hash());
}
