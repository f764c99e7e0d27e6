//! Inertia-weight, global-best particle swarm optimizer.
//!
//! Velocity and position updates follow the standard form
//!
//! ```text
//! v <- w v + c1 r1 (pbest - x) + c2 r2 (gbest - x)
//! x <- x + v
//! ```
//!
//! with per-dimension velocity clamping at `vmax_fraction` of the search
//! range and positions clamped to the bounds (the offending velocity
//! component is zeroed on contact).
//!
//! Determinism: every random number for an iteration is drawn up front from
//! a ChaCha8 stream in particle order, and fitness results are collected in
//! particle order, so parallel evaluation (rayon) cannot change the search
//! path. Uniform doubles come from the top 53 bits of the generator output,
//! which keeps the stream independent of any distribution-crate internals.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PsoError {
    #[error("invalid swarm configuration: {0}")]
    InvalidConfig(String),
}

/// Search-space and algorithm settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmConfig {
    pub n_particles: usize,
    pub n_iterations: usize,
    /// Inertia weight w.
    pub inertia: f64,
    /// Cognitive acceleration c1 (pull toward the particle's own best).
    pub cognitive: f64,
    /// Social acceleration c2 (pull toward the swarm best).
    pub social: f64,
    /// Per-dimension `[low, high]` search bounds.
    pub bounds: Vec<[f64; 2]>,
    /// Velocity clamp as a fraction of each dimension's range.
    pub vmax_fraction: f64,
    /// Seed for the ChaCha8 stream driving the whole run.
    pub seed: u64,
    /// Optional early-exit threshold on the swarm best fitness.
    pub target_fitness: Option<f64>,
}

impl SwarmConfig {
    /// Defaults for the given bounds: 30 particles, 50 iterations,
    /// w = 0.7298, c1 = c2 = 1.49618, vmax at 20% of range, seed 42.
    pub fn new(bounds: Vec<[f64; 2]>) -> Self {
        SwarmConfig {
            n_particles: 30,
            n_iterations: 50,
            inertia: 0.7298,
            cognitive: 1.49618,
            social: 1.49618,
            bounds,
            vmax_fraction: 0.2,
            seed: 42,
            target_fitness: None,
        }
    }

    pub fn dimensions(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<(), PsoError> {
        if self.n_particles == 0 {
            return Err(PsoError::InvalidConfig("need at least one particle".into()));
        }
        if self.n_iterations == 0 {
            return Err(PsoError::InvalidConfig("need at least one iteration".into()));
        }
        if self.bounds.is_empty() {
            return Err(PsoError::InvalidConfig("search space has no dimensions".into()));
        }
        for (d, b) in self.bounds.iter().enumerate() {
            if !(b[0].is_finite() && b[1].is_finite()) {
                return Err(PsoError::InvalidConfig(format!("bounds for dimension {d} must be finite")));
            }
            if b[0] > b[1] {
                return Err(PsoError::InvalidConfig(format!(
                    "bounds for dimension {d} are inverted ({} > {})",
                    b[0], b[1]
                )));
            }
        }
        for (name, v) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PsoError::InvalidConfig(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if !(self.vmax_fraction.is_finite() && self.vmax_fraction > 0.0) {
            return Err(PsoError::InvalidConfig(format!(
                "vmax_fraction must be positive, got {}",
                self.vmax_fraction
            )));
        }
        Ok(())
    }

    fn vmax(&self, dim: usize) -> f64 {
        self.vmax_fraction * (self.bounds[dim][1] - self.bounds[dim][0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
}

/// Swarm state between iterations. Owns its RNG so that a run is a pure
/// function of the configuration.
#[derive(Debug, Clone)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub evaluations: u64,
    pub non_finite_evaluations: u64,
    rng: ChaCha8Rng,
}

/// Swarm best after one iteration, as recorded in the convergence history.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub best_fitness: f64,
    pub best_position: Vec<f64>,
}

/// Final outcome of `optimize`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwarmResult {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// One record per completed iteration; `best_fitness` is non-increasing.
    pub history: Vec<IterationRecord>,
    pub evaluations: u64,
    pub non_finite_evaluations: u64,
}

fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    // 53 uniform mantissa bits in [0, 1).
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn uniform_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit_uniform(rng)
}

/// Scatter particles uniformly over the bounds with velocities uniform in
/// `[-vmax, vmax]`. Personal bests start at the initial positions with
/// unevaluated (+inf) fitness.
pub fn init_swarm(cfg: &SwarmConfig) -> Result<Swarm, PsoError> {
    cfg.validate()?;
    let dims = cfg.dimensions();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut particles = Vec::with_capacity(cfg.n_particles);
    for _ in 0..cfg.n_particles {
        let position: Vec<f64> =
            (0..dims).map(|d| uniform_in(&mut rng, cfg.bounds[d][0], cfg.bounds[d][1])).collect();
        let velocity: Vec<f64> = (0..dims)
            .map(|d| {
                let vmax = cfg.vmax(d);
                uniform_in(&mut rng, -vmax, vmax)
            })
            .collect();
        particles.push(Particle {
            best_position: position.clone(),
            position,
            velocity,
            best_fitness: f64::INFINITY,
        });
    }
    let best_position = particles[0].position.clone();
    Ok(Swarm {
        particles,
        best_position,
        best_fitness: f64::INFINITY,
        evaluations: 0,
        non_finite_evaluations: 0,
        rng,
    })
}

/// One iteration: evaluate every particle at its current position, update
/// personal and swarm bests (strict improvement only, ties keep the
/// incumbent), then move the swarm. Non-finite fitness values count as +inf
/// and the search continues.
pub fn pso_step<F>(swarm: &mut Swarm, fitness: &F, cfg: &SwarmConfig) -> IterationRecord
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dims = cfg.dimensions();

    // Evaluation is the only parallel section; results come back in particle
    // order, so the reduction below is order-stable.
    let raw: Vec<f64> =
        swarm.particles.par_iter().map(|p| fitness(&p.position)).collect();
    swarm.evaluations += raw.len() as u64;

    for (p, &f_raw) in swarm.particles.iter_mut().zip(raw.iter()) {
        let f = if f_raw.is_finite() {
            f_raw
        } else {
            swarm.non_finite_evaluations += 1;
            f64::INFINITY
        };
        if f < p.best_fitness {
            p.best_fitness = f;
            p.best_position.copy_from_slice(&p.position);
        }
    }
    for p in &swarm.particles {
        if p.best_fitness < swarm.best_fitness {
            swarm.best_fitness = p.best_fitness;
            swarm.best_position.copy_from_slice(&p.best_position);
        }
    }

    let record = IterationRecord {
        best_fitness: swarm.best_fitness,
        best_position: swarm.best_position.clone(),
    };

    // Draw all randomness for the move in particle order before touching any
    // particle, then apply the deterministic update.
    let mut draws = Vec::with_capacity(swarm.particles.len() * dims * 2);
    for _ in 0..swarm.particles.len() {
        for _ in 0..dims {
            let r1 = unit_uniform(&mut swarm.rng);
            let r2 = unit_uniform(&mut swarm.rng);
            draws.push((r1, r2));
        }
    }
    let gbest = record.best_position.clone();
    for (i, p) in swarm.particles.iter_mut().enumerate() {
        for d in 0..dims {
            let (r1, r2) = draws[i * dims + d];
            let mut v = cfg.inertia * p.velocity[d]
                + cfg.cognitive * r1 * (p.best_position[d] - p.position[d])
                + cfg.social * r2 * (gbest[d] - p.position[d]);
            let vmax = cfg.vmax(d);
            v = v.clamp(-vmax, vmax);
            let mut x = p.position[d] + v;
            let [lo, hi] = cfg.bounds[d];
            if x < lo {
                x = lo;
                v = 0.0;
            } else if x > hi {
                x = hi;
                v = 0.0;
            }
            p.velocity[d] = v;
            p.position[d] = x;
        }
    }

    record
}

/// Run the full search: initialize, then iterate `n_iterations` times (or
/// until `target_fitness` is reached). The history holds one record per
/// completed iteration.
pub fn optimize<F>(fitness: F, cfg: &SwarmConfig) -> Result<SwarmResult, PsoError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut swarm = init_swarm(cfg)?;
    let mut history = Vec::with_capacity(cfg.n_iterations);
    for _ in 0..cfg.n_iterations {
        let record = pso_step(&mut swarm, &fitness, cfg);
        let reached = cfg.target_fitness.is_some_and(|t| record.best_fitness <= t);
        history.push(record);
        if reached {
            break;
        }
    }
    Ok(SwarmResult {
        best_position: swarm.best_position,
        best_fitness: swarm.best_fitness,
        history,
        evaluations: swarm.evaluations,
        non_finite_evaluations: swarm.non_finite_evaluations,
    })
}

pub mod benchmarks {
    //! Standard test functions and the self-check suite built on them.

    use super::{optimize, PsoError, SwarmConfig};

    /// Sum of squares; global minimum 0 at the origin.
    pub fn sphere(z: &[f64]) -> f64 {
        z.iter().map(|v| v * v).sum()
    }

    /// Banana-valley function; global minimum 0 at (1, ..., 1).
    pub fn rosenbrock(z: &[f64]) -> f64 {
        z.windows(2)
            .map(|w| {
                let a = 1.0 - w[0];
                let b = w[1] - w[0] * w[0];
                a * a + 100.0 * b * b
            })
            .sum()
    }

    /// Best fitness required of every sphere run.
    pub const SPHERE_TOLERANCE: f64 = 1e-6;
    /// Best fitness required of a passing rosenbrock run.
    pub const ROSENBROCK_TOLERANCE: f64 = 1e-2;

    /// One benchmark run's outcome.
    #[derive(Debug, Clone, PartialEq)]
    pub struct SuiteOutcome {
        pub function: &'static str,
        pub seed: u64,
        pub best_fitness: f64,
        pub threshold: f64,
        pub passed: bool,
    }

    /// Aggregated suite result. The suite passes when every sphere run meets
    /// its tolerance and at most one rosenbrock run misses its tolerance.
    #[derive(Debug, Clone, PartialEq)]
    pub struct SuiteReport {
        pub outcomes: Vec<SuiteOutcome>,
        pub sphere_passes: usize,
        pub rosenbrock_passes: usize,
        pub passed: bool,
    }

    /// Run sphere and rosenbrock in two dimensions over the given seeds.
    pub fn run_suite(
        seeds: &[u64],
        particles: usize,
        sphere_iterations: usize,
        rosenbrock_iterations: usize,
    ) -> Result<SuiteReport, PsoError> {
        let mut outcomes = Vec::with_capacity(2 * seeds.len());
        for &seed in seeds {
            let mut cfg = SwarmConfig::new(vec![[-10.0, 10.0], [-10.0, 10.0]]);
            cfg.n_particles = particles;
            cfg.n_iterations = sphere_iterations;
            cfg.seed = seed;
            let result = optimize(sphere, &cfg)?;
            outcomes.push(SuiteOutcome {
                function: "sphere",
                seed,
                best_fitness: result.best_fitness,
                threshold: SPHERE_TOLERANCE,
                passed: result.best_fitness < SPHERE_TOLERANCE,
            });
        }
        for &seed in seeds {
            let mut cfg = SwarmConfig::new(vec![[-5.0, 5.0], [-5.0, 5.0]]);
            cfg.n_particles = particles;
            cfg.n_iterations = rosenbrock_iterations;
            cfg.seed = seed;
            let result = optimize(rosenbrock, &cfg)?;
            outcomes.push(SuiteOutcome {
                function: "rosenbrock",
                seed,
                best_fitness: result.best_fitness,
                threshold: ROSENBROCK_TOLERANCE,
                passed: result.best_fitness < ROSENBROCK_TOLERANCE,
            });
        }
        let sphere_passes = outcomes.iter().filter(|o| o.function == "sphere" && o.passed).count();
        let rosenbrock_passes =
            outcomes.iter().filter(|o| o.function == "rosenbrock" && o.passed).count();
        let passed = sphere_passes == seeds.len()
            && rosenbrock_passes + 1 >= seeds.len()
            && rosenbrock_passes >= 1;
        Ok(SuiteReport { outcomes, sphere_passes, rosenbrock_passes, passed })
    }
}
