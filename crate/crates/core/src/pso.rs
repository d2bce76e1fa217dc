//! Particle swarm beamwidth allocation.
//!
//! A position holds `(tx, rx)` beamwidths for every matched link, flattened as
//! `[tx0, rx0, tx1, rx1, ...]`. Fitness is the mean alignment-slot rate over
//! the links under the interference pattern implied by all candidate widths.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::{rate, LinkSet, RadioParams};
use crate::rng::{stream, Stream, StreamKind};
use crate::units::deg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub iterations: usize,
    pub init_beamwidth_deg: f64,
    /// Initial velocities are drawn uniformly from this range, degrees.
    pub init_velocity_deg: [f64; 2],
    /// Draw the random coefficients per dimension rather than per particle.
    pub per_dimension_draws: bool,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            swarm_size: 30,
            inertia: 0.5,
            cognitive: 1.5,
            social: 1.5,
            iterations: 50,
            init_beamwidth_deg: 5.0,
            init_velocity_deg: [5.0, 45.0],
            per_dimension_draws: true,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.swarm_size == 0 {
            return bad("pso.swarm_size must be >= 1");
        }
        if self.iterations == 0 {
            return bad("pso.iterations must be >= 1");
        }
        let [lo, hi] = self.init_velocity_deg;
        if !(lo <= hi) {
            return bad("pso.init_velocity_deg must be ordered");
        }
        if !(self.init_beamwidth_deg > 0.0) {
            return bad("pso.init_beamwidth_deg must be > 0");
        }
        Ok(())
    }
}

/// Feasible region of one link's `(tx, rx)` widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
    /// Lower bound on `tx * rx` keeping alignment within a slot.
    pub min_product: f64,
}

impl Bounds {
    pub fn from_params(p: &RadioParams) -> Self {
        Bounds {
            min: p.min_beamwidth,
            max: p.sector,
            min_product: p.min_beamwidth_product(),
        }
    }

    pub fn is_feasible(&self, tx: f64, rx: f64) -> bool {
        let tol = 1e-12;
        tx >= self.min * (1.0 - tol)
            && tx <= self.max * (1.0 + tol)
            && rx >= self.min * (1.0 - tol)
            && rx <= self.max * (1.0 + tol)
            && tx * rx >= self.min_product * (1.0 - tol)
    }

    /// Clamps a pair into the box, then scales it up to the product bound if
    /// needed.
    pub fn repair(&self, tx: &mut f64, rx: &mut f64) {
        *tx = tx.clamp(self.min, self.max);
        *rx = rx.clamp(self.min, self.max);
        if *tx * *rx < self.min_product {
            let k = (self.min_product / (*tx * *rx)).sqrt();
            *tx = (*tx * k).min(self.max);
            *rx = (*rx * k).min(self.max);
            // one side saturated: raise the other to the boundary
            if *tx * *rx < self.min_product {
                if *tx >= *rx {
                    *rx = (self.min_product / *tx).min(self.max);
                } else {
                    *tx = (self.min_product / *rx).min(self.max);
                }
            }
        }
    }

    pub fn repair_position(&self, pos: &mut [f64]) {
        for pair in pos.chunks_exact_mut(2) {
            let (a, b) = pair.split_at_mut(1);
            self.repair(&mut a[0], &mut b[0]);
        }
    }
}

/// Mean alignment-slot rate over all links, bits/s.
pub fn fitness(position: &[f64], links: &LinkSet, params: &RadioParams) -> f64 {
    let n = links.len();
    if n == 0 {
        return 0.0;
    }
    let widths: Vec<(f64, f64)> = position.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    let mut total = 0.0;
    for (k, &(tx, rx)) in widths.iter().enumerate() {
        let tau = params.alignment_delay(tx, rx).unwrap_or(params.slot_ms);
        total += rate(links.sinr(k, &widths), tau, params.slot_ms, params.bandwidth_hz, true);
    }
    total / n as f64
}

#[derive(Debug, Clone)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub fitness: f64,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    rng: Stream,
}

#[derive(Debug, Clone)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    cfg: PsoConfig,
    bounds: Bounds,
}

impl Swarm {
    /// All particles start at the initial width with random velocities,
    /// except particle 0 which stays put so the initial point is always scored.
    pub fn new(dims: usize, cfg: &PsoConfig, bounds: Bounds, seed: u64, f: &impl Fn(&[f64]) -> f64) -> Self {
        let [vlo, vhi] = cfg.init_velocity_deg.map(deg);
        let particles: Vec<Particle> = (0..cfg.swarm_size)
            .map(|k| {
                let mut rng = stream(seed, StreamKind::Pso, k as u64);
                let mut position = vec![deg(cfg.init_beamwidth_deg); dims];
                bounds.repair_position(&mut position);
                let velocity = if k == 0 {
                    vec![0.0; dims]
                } else {
                    (0..dims).map(|_| rng.random_range(vlo..=vhi)).collect()
                };
                let fitness = f(&position);
                Particle {
                    best_position: position.clone(),
                    best_fitness: fitness,
                    position,
                    velocity,
                    fitness,
                    rng,
                }
            })
            .collect();
        let mut swarm = Swarm {
            best_position: particles[0].position.clone(),
            best_fitness: f64::NEG_INFINITY,
            particles,
            cfg: cfg.clone(),
            bounds,
        };
        swarm.update_global();
        swarm
    }

    fn update_global(&mut self) {
        for p in &self.particles {
            if p.best_fitness > self.best_fitness {
                self.best_fitness = p.best_fitness;
                self.best_position.clone_from(&p.best_position);
            }
        }
    }

    /// One synchronous iteration: move every particle against the current
    /// global best, then refresh personal and global bests.
    pub fn step(&mut self, f: &impl Fn(&[f64]) -> f64) {
        let (w, c1, c2) = (self.cfg.inertia, self.cfg.cognitive, self.cfg.social);
        let per_dim = self.cfg.per_dimension_draws;
        let global = &self.best_position;
        for p in &mut self.particles {
            let (mut r1, mut r2) = (p.rng.random::<f64>(), p.rng.random::<f64>());
            for d in 0..p.position.len() {
                if per_dim && d > 0 {
                    r1 = p.rng.random();
                    r2 = p.rng.random();
                }
                p.velocity[d] = w * p.velocity[d]
                    + c1 * r1 * (p.best_position[d] - p.position[d])
                    + c2 * r2 * (global[d] - p.position[d]);
                p.position[d] += p.velocity[d];
            }
            self.bounds.repair_position(&mut p.position);
            p.fitness = f(&p.position);
            if p.fitness > p.best_fitness {
                p.best_fitness = p.fitness;
                p.best_position.clone_from(&p.position);
            }
        }
        self.update_global();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub widths: Vec<(f64, f64)>,
    pub fitness: f64,
    /// Global-best fitness after initialisation and after every iteration.
    pub trace: Vec<f64>,
}

/// Runs the swarm for the configured number of iterations over `n_links`
/// links and returns the best widths found.
pub fn optimize(n_links: usize, f: impl Fn(&[f64]) -> f64, cfg: &PsoConfig, bounds: Bounds, seed: u64) -> PsoResult {
    if n_links == 0 {
        return PsoResult {
            widths: Vec::new(),
            fitness: 0.0,
            trace: Vec::new(),
        };
    }
    let mut swarm = Swarm::new(2 * n_links, cfg, bounds, seed, &f);
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    trace.push(swarm.best_fitness);
    for _ in 0..cfg.iterations {
        swarm.step(&f);
        trace.push(swarm.best_fitness);
    }
    PsoResult {
        widths: swarm.best_position.chunks_exact(2).map(|c| (c[0], c[1])).collect(),
        fitness: swarm.best_fitness,
        trace,
    }
}
