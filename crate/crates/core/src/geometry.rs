//! Highway scenario: vehicle placement, constant-speed motion, segment
//! entry/exit with density maintenance, and plan-view geometric queries.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream, StreamKind};
use crate::units::kmh_to_mps;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub length_m: f64,
    pub width_m: f64,
}

impl Body {
    pub const fn new(length_m: f64, width_m: f64) -> Self {
        Body { length_m, width_m }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HighwayConfig {
    pub segment_length_m: f64,
    pub lane_count: usize,
    pub lane_width_m: f64,
    /// Leftmost lane first.
    pub lane_speeds_kmh: Vec<f64>,
    pub density_per_km: f64,
    /// Fraction of cars; the remainder are trucks.
    pub car_ratio: f64,
    pub vtx_probability: f64,
    pub coverage_radius_m: f64,
    /// Bumper-to-bumper gap between consecutive vehicles in a lane.
    pub min_headway_m: f64,
    pub car_models: Vec<Body>,
    pub truck_models: Vec<Body>,
}

impl Default for HighwayConfig {
    fn default() -> Self {
        HighwayConfig {
            segment_length_m: 500.0,
            lane_count: 6,
            lane_width_m: 3.0,
            lane_speeds_kmh: vec![140.0, 130.0, 125.0, 110.0, 90.0, 70.0],
            density_per_km: 70.0,
            car_ratio: 0.8,
            vtx_probability: 0.5,
            coverage_radius_m: 100.0,
            min_headway_m: 2.0,
            car_models: vec![
                Body::new(4.0, 1.8),
                Body::new(4.25, 1.8),
                Body::new(4.5, 1.8),
                Body::new(4.75, 1.8),
                Body::new(5.0, 1.8),
            ],
            truck_models: vec![Body::new(12.0, 2.5)],
        }
    }
}

impl HighwayConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.segment_length_m > 0.0) {
            return bad(format!("segment_length_m must be > 0, got {}", self.segment_length_m));
        }
        if self.lane_count == 0 {
            return bad("lane_count must be >= 1".into());
        }
        if !(self.lane_width_m > 0.0) {
            return bad("lane_width_m must be > 0".into());
        }
        if self.lane_speeds_kmh.len() != self.lane_count {
            return bad(format!(
                "lane_speeds_kmh has {} entries, lane_count is {}",
                self.lane_speeds_kmh.len(),
                self.lane_count
            ));
        }
        if let Some(s) = self.lane_speeds_kmh.iter().find(|s| !(**s > 0.0)) {
            return bad(format!("lane speeds must be > 0, got {s}"));
        }
        if !(self.density_per_km > 0.0) {
            return bad(format!("density_per_km must be > 0, got {}", self.density_per_km));
        }
        for (name, p) in [("car_ratio", self.car_ratio), ("vtx_probability", self.vtx_probability)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(self.coverage_radius_m > 0.0) {
            return bad("coverage_radius_m must be > 0".into());
        }
        if !(self.min_headway_m >= 0.0) {
            return bad("min_headway_m must be >= 0".into());
        }
        if self.car_models.is_empty() || self.truck_models.is_empty() {
            return bad("car_models and truck_models must be non-empty".into());
        }
        for b in self.car_models.iter().chain(&self.truck_models) {
            if !(b.length_m > 0.0 && b.width_m > 0.0 && b.width_m <= self.lane_width_m) {
                return bad(format!("vehicle body {b:?} must be positive and fit its lane"));
            }
        }
        Ok(())
    }

    /// Number of vehicles kept on the segment.
    pub fn target_count(&self) -> usize {
        (self.density_per_km * self.segment_length_m / 1000.0).round() as usize
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        (lane as f64 + 0.5) * self.lane_width_m
    }

    /// Largest absolute speed difference between any two lanes.
    pub fn speed_spread_kmh(&self) -> f64 {
        let max = self.lane_speeds_kmh.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.lane_speeds_kmh.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Vtx,
    Vrx,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Vtx => "vtx",
            Role::Vrx => "vrx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleKind {
    Car,
    Truck,
}

pub type VehicleId = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, o: Point) -> f64 {
        (o.x - self.x).hypot(o.y - self.y)
    }

    /// Direction of `o` seen from `self`, radians.
    pub fn bearing(self, o: Point) -> f64 {
        (o.y - self.y).atan2(o.x - self.x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub role: Role,
    pub lane: usize,
    /// Longitudinal position of the body centre.
    pub x: f64,
    /// Lateral position of the body centre (lane centre).
    pub y: f64,
    pub speed_kmh: f64,
    pub body: Body,
    pub kind: VehicleKind,
}

impl Vehicle {
    /// Antenna anchor point: the body centre.
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn rear(&self) -> f64 {
        self.x - self.body.length_m / 2.0
    }

    pub fn front(&self) -> f64 {
        self.x + self.body.length_m / 2.0
    }

    pub fn speed_mps(&self) -> f64 {
        kmh_to_mps(self.speed_kmh)
    }

    /// Position after `dt_ms` of straight-line motion.
    pub fn position_after(&self, dt_ms: f64) -> Point {
        Point::new(self.x + self.speed_mps() * dt_ms / 1000.0, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeKinematics {
    pub distance_m: f64,
    /// Relative speed averaged over a scheduling slot; speeds are constant so
    /// this is the instantaneous difference.
    pub mean_relative_speed_kmh: f64,
    /// Bearing from the first vehicle toward the second.
    pub bearing_from_a: f64,
    /// Bearing from the second vehicle toward the first.
    pub bearing_from_b: f64,
}

pub fn kinematics(a: &Vehicle, b: &Vehicle) -> RelativeKinematics {
    let pa = a.position();
    let pb = b.position();
    RelativeKinematics {
        distance_m: pa.distance(pb),
        mean_relative_speed_kmh: (a.speed_kmh - b.speed_kmh).abs(),
        bearing_from_a: pa.bearing(pb),
        bearing_from_b: pb.bearing(pa),
    }
}

/// Vehicles of the opposite role within the closed coverage ball of `v`.
pub fn neighbors<'a>(v: &Vehicle, vehicles: &'a [Vehicle], coverage_radius_m: f64) -> Vec<&'a Vehicle> {
    let p = v.position();
    vehicles
        .iter()
        .filter(|o| o.role != v.role && o.id != v.id && p.distance(o.position()) <= coverage_radius_m)
        .collect()
}

/// Parameter interval `[t0, t1]` of the line `a + t (b - a)` inside the
/// closed axis-aligned rectangle, if any.
fn clip_segment(a: Point, b: Point, xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Option<(f64, f64)> {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (p, q) in [
        (-dx, a.x - xmin),
        (dx, xmax - a.x),
        (-dy, a.y - ymin),
        (dy, ymax - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

/// Whether the open segment `a -> b` touches the closed body rectangle of `v`.
pub fn segment_hits_body(a: Point, b: Point, v: &Vehicle) -> bool {
    let hl = v.body.length_m / 2.0;
    let hw = v.body.width_m / 2.0;
    match clip_segment(a, b, v.x - hl, v.x + hl, v.y - hw, v.y + hw) {
        Some((t0, t1)) => t0 < 1.0 && t1 > 0.0,
        None => false,
    }
}

/// Number of other vehicles whose body obstructs the line of sight between
/// the antenna points of `tx` and `rx`.
pub fn count_blockers(tx: &Vehicle, rx: &Vehicle, vehicles: &[Vehicle]) -> usize {
    let a = tx.position();
    let b = rx.position();
    vehicles
        .iter()
        .filter(|v| v.id != tx.id && v.id != rx.id && segment_hits_body(a, b, v))
        .count()
}

/// Longitudinally sorted view of a snapshot for fast blocker queries.
#[derive(Debug, Clone)]
pub struct BlockerIndex {
    sorted: Vec<Vehicle>,
    max_half_length: f64,
}

impl BlockerIndex {
    pub fn new(vehicles: &[Vehicle]) -> Self {
        let mut sorted = vehicles.to_vec();
        sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.id.cmp(&b.id)));
        let max_half_length = sorted.iter().map(|v| v.body.length_m / 2.0).fold(0.0, f64::max);
        BlockerIndex { sorted, max_half_length }
    }

    /// Blocker count between two antenna points, excluding the two endpoint
    /// vehicles, saturating at `cap`.
    pub fn count(&self, a: Point, a_id: VehicleId, b: Point, b_id: VehicleId, cap: usize) -> usize {
        let lo = a.x.min(b.x) - self.max_half_length;
        let hi = a.x.max(b.x) + self.max_half_length;
        let start = self.sorted.partition_point(|v| v.x < lo);
        let mut n = 0;
        for v in &self.sorted[start..] {
            if v.x > hi || n >= cap {
                break;
            }
            if v.id != a_id && v.id != b_id && segment_hits_body(a, b, v) {
                n += 1;
            }
        }
        n
    }
}

/// Highway segment with density maintenance.
#[derive(Debug, Clone)]
pub struct Highway {
    config: HighwayConfig,
    vehicles: Vec<Vehicle>,
    target: usize,
    next_id: VehicleId,
    rng: Stream,
}

#[derive(Debug, Clone, Default)]
pub struct Advance {
    pub exited: Vec<Vehicle>,
    pub entered: Vec<Vehicle>,
}

impl Highway {
    pub fn spawn(config: HighwayConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let target = config.target_count();
        let mut hw = Highway {
            rng: rng::stream(seed, StreamKind::Mobility, 0),
            config,
            vehicles: Vec::with_capacity(target),
            target,
            next_id: 0,
        };
        for placed in 0..target {
            let (kind, body) = hw.draw_body();
            let role = if hw.rng.random::<f64>() < hw.config.vtx_probability {
                Role::Vtx
            } else {
                Role::Vrx
            };
            let lanes = hw.lanes_by_crowding();
            let spot = lanes.into_iter().find_map(|lane| hw.draw_spawn_position(lane, body).map(|x| (lane, x)));
            let Some((lane, x)) = spot else {
                return Err(Error::ScenarioInfeasible {
                    target,
                    placed,
                    headway_m: hw.config.min_headway_m,
                });
            };
            let v = hw.make_vehicle(role, lane, x, body, kind);
            hw.vehicles.push(v);
        }
        Ok(hw)
    }

    pub fn config(&self) -> &HighwayConfig {
        &self.config
    }

    /// Present vehicles, ordered by id.
    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn target(&self) -> usize {
        self.target
    }

    /// Replacements still waiting for a lane that admits the headway.
    pub fn deficit(&self) -> usize {
        self.target.saturating_sub(self.vehicles.len())
    }

    pub fn get(&self, id: VehicleId) -> Option<&Vehicle> {
        self.vehicles
            .binary_search_by_key(&id, |v| v.id)
            .ok()
            .map(|i| &self.vehicles[i])
    }

    /// Moves every vehicle by `dt_ms`, removes those past the segment end and
    /// inserts replacements at the segment start.
    pub fn advance(&mut self, dt_ms: f64) -> Advance {
        assert!(dt_ms > 0.0, "advance requires dt > 0");
        let len = self.config.segment_length_m;
        let mut out = Advance::default();
        for v in &mut self.vehicles {
            v.x += v.speed_mps() * dt_ms / 1000.0;
        }
        let (stay, gone): (Vec<_>, Vec<_>) = self.vehicles.drain(..).partition(|v| v.x < len);
        self.vehicles = stay;
        out.exited = gone;

        while self.vehicles.len() < self.target {
            let (kind, body) = self.draw_body();
            let role = if self.rng.random::<f64>() < 0.5 { Role::Vtx } else { Role::Vrx };
            let lanes = self.lanes_by_crowding();
            let spot = lanes
                .into_iter()
                .find_map(|lane| self.draw_entry_position(lane, body).map(|x| (lane, x)));
            let Some((lane, x)) = spot else { break };
            let v = self.make_vehicle(role, lane, x, body, kind);
            out.entered.push(v.clone());
            self.vehicles.push(v);
        }
        out
    }

    fn make_vehicle(&mut self, role: Role, lane: usize, x: f64, body: Body, kind: VehicleKind) -> Vehicle {
        let id = self.next_id;
        self.next_id += 1;
        Vehicle {
            id,
            role,
            lane,
            x,
            y: self.config.lane_center(lane),
            speed_kmh: self.config.lane_speeds_kmh[lane],
            body,
            kind,
        }
    }

    fn draw_body(&mut self) -> (VehicleKind, Body) {
        if self.rng.random::<f64>() < self.config.car_ratio {
            let i = self.rng.random_range(0..self.config.car_models.len());
            (VehicleKind::Car, self.config.car_models[i])
        } else {
            let i = self.rng.random_range(0..self.config.truck_models.len());
            (VehicleKind::Truck, self.config.truck_models[i])
        }
    }

    /// Lanes ordered by ascending vehicle count, ties by lane index.
    fn lanes_by_crowding(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.config.lane_count];
        for v in &self.vehicles {
            counts[v.lane] += 1;
        }
        let mut lanes: Vec<usize> = (0..self.config.lane_count).collect();
        lanes.sort_by_key(|&l| (counts[l], l));
        lanes
    }

    /// Uniform draw over every centre position in `[0, L]` that keeps the
    /// headway to the lane's current occupants.
    fn draw_spawn_position(&mut self, lane: usize, body: Body) -> Option<f64> {
        let h = self.config.min_headway_m;
        let half = body.length_m / 2.0;
        let mut occupied: Vec<(f64, f64)> = self
            .vehicles
            .iter()
            .filter(|v| v.lane == lane)
            .map(|v| (v.rear() - h - half, v.front() + h + half))
            .collect();
        occupied.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut free = Vec::new();
        let mut cursor = 0.0;
        for (lo, hi) in occupied {
            if lo > cursor {
                free.push((cursor, lo.min(self.config.segment_length_m)));
            }
            cursor = cursor.max(hi);
        }
        if cursor <= self.config.segment_length_m {
            free.push((cursor, self.config.segment_length_m));
        }
        free.retain(|(a, b)| b >= a);
        let total: f64 = free.iter().map(|(a, b)| b - a).sum();
        if free.is_empty() {
            return None;
        }
        if total <= 0.0 {
            return Some(free[0].0);
        }
        let mut u = self.rng.random::<f64>() * total;
        for (a, b) in &free {
            if u <= b - a {
                return Some(a + u);
            }
            u -= b - a;
        }
        free.last().map(|(_, b)| *b)
    }

    /// Entry position in `[0, min_headway)` behind the lane's rearmost vehicle.
    fn draw_entry_position(&mut self, lane: usize, body: Body) -> Option<f64> {
        let h = self.config.min_headway_m;
        let rear = self
            .vehicles
            .iter()
            .filter(|v| v.lane == lane)
            .map(|v| v.rear())
            .fold(f64::INFINITY, f64::min);
        let room = rear - h - body.length_m / 2.0;
        if room < 0.0 {
            return None;
        }
        let upper = h.min(room);
        if upper <= 0.0 {
            return Some(0.0);
        }
        Some(self.rng.random::<f64>() * upper)
    }
}

/// Spawns the initial population for `(config, seed)`.
pub fn spawn_scenario(config: &HighwayConfig, seed: u64) -> Result<Vec<Vehicle>> {
    Ok(Highway::spawn(config.clone(), seed)?.vehicles)
}

/// Bumper-to-bumper gap between two vehicles of the same lane.
pub fn headway(a: &Vehicle, b: &Vehicle) -> f64 {
    let (back, front) = if a.x <= b.x { (a, b) } else { (b, a) };
    front.rear() - back.front()
}
