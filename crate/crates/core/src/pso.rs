//! Box-constrained particle swarm optimizer with coordinate projection and
//! a pair-violation penalty. Maximizes.

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::geometry::{violating_pairs, Point};
use crate::numerics::RngStream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub max_iters: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub penalty: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 30,
            max_iters: 50,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            penalty: 1e4,
            seed: 0,
        }
    }
}

impl PsoConfig {
    /// `strict` additionally requires the nominal ranges (inertia in (0, 1],
    /// positive learning factors); degenerate swarms used for testing pass
    /// `strict = false`.
    pub fn validate(&self, strict: bool) -> Result<()> {
        if self.swarm_size == 0 {
            return Err(Error::Config("swarm size must be >= 1".into()));
        }
        if !(self.penalty >= 0.0) {
            return Err(Error::Config("penalty must be >= 0".into()));
        }
        if strict
            && !(self.inertia > 0.0 && self.inertia <= 1.0 && self.cognitive > 0.0 && self.social > 0.0)
        {
            return Err(Error::Config(format!(
                "PSO parameters out of range: inertia {} c1 {} c2 {}",
                self.inertia, self.cognitive, self.social
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_value: f64,
}

/// `v <- w v + c1 r1 (p_best - x) + c2 r2 (g_best - x)` with given scalars.
pub fn velocity_update_with(p: &Particle, global_best: &[f64], cfg: &PsoConfig, r1: f64, r2: f64) -> Vec<f64> {
    p.velocity
        .iter()
        .zip(&p.position)
        .zip(&p.best_position)
        .zip(global_best)
        .map(|(((&v, &x), &pb), &gb)| {
            cfg.inertia * v + cfg.cognitive * r1 * (pb - x) + cfg.social * r2 * (gb - x)
        })
        .collect()
}

/// Velocity update with fresh scalar `r1, r2 ~ U(0, 1)`.
pub fn velocity_update(p: &Particle, global_best: &[f64], cfg: &PsoConfig, rng: &mut RngStream) -> Vec<f64> {
    let r1 = rng.uniform();
    let r2 = rng.uniform();
    velocity_update_with(p, global_best, cfg, r1, r2)
}

/// `x <- clamp(x + v)` per coordinate.
pub fn position_update(position: &[f64], velocity: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    position
        .iter()
        .zip(velocity)
        .zip(bounds)
        .map(|((&x, &v), &(lo, hi))| (x + v).clamp(lo, hi))
        .collect()
}

/// `raw - tau * #{pairs closer than d}`.
pub fn penalized_fitness(raw: f64, t: &[Point], d: f64, tau: f64) -> f64 {
    let violations = violating_pairs(t, d);
    if violations == 0 {
        raw
    } else {
        raw - tau * violations as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub best_position: Vec<f64>,
    pub best_value: f64,
    /// Global best after each iteration.
    pub history: Vec<f64>,
}

pub fn pso_optimize<F>(objective: F, bounds: &[(f64, f64)], cfg: &PsoConfig, exec: Execution) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    pso_optimize_seeded(objective, bounds, cfg, None, exec)
}

/// Like [`pso_optimize`], but particle 0 starts at `incumbent`, so the result
/// is never worse than the incumbent.
pub fn pso_optimize_seeded<F>(
    objective: F,
    bounds: &[(f64, f64)],
    cfg: &PsoConfig,
    incumbent: Option<&[f64]>,
    exec: Execution,
) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    cfg.validate(false)?;
    if bounds.iter().any(|&(lo, hi)| !(lo <= hi)) {
        return Err(Error::Config("PSO bounds must satisfy lo <= hi".into()));
    }
    if let Some(x) = incumbent {
        if x.len() != bounds.len() {
            return Err(Error::Dimension(format!(
                "incumbent has {} coordinates, bounds have {}",
                x.len(),
                bounds.len()
            )));
        }
    }
    let mut rng = RngStream::new(cfg.seed);
    let mut swarm: Vec<Particle> = (0..cfg.swarm_size)
        .map(|i| {
            let position: Vec<f64> = match incumbent {
                Some(x) if i == 0 => position_update(x, &vec![0.0; x.len()], bounds),
                _ => bounds.iter().map(|&(lo, hi)| rng.uniform_range(lo, hi)).collect(),
            };
            let velocity = bounds
                .iter()
                .map(|&(lo, hi)| 0.1 * (hi - lo) * rng.uniform_range(-1.0, 1.0))
                .collect();
            Particle {
                best_position: position.clone(),
                position,
                velocity,
                best_value: f64::NEG_INFINITY,
            }
        })
        .collect();

    let mut best_position = swarm[0].position.clone();
    let mut best_value = f64::NEG_INFINITY;
    let mut history = Vec::with_capacity(cfg.max_iters);

    for iter in 0..cfg.max_iters {
        let values = exec.map(swarm.len(), |i| objective(&swarm[i].position));
        for (p, &v) in swarm.iter_mut().zip(&values) {
            if v > p.best_value {
                p.best_value = v;
                p.best_position.clone_from(&p.position);
            }
            if v > best_value {
                best_value = v;
                best_position.clone_from(&p.position);
            }
        }
        history.push(best_value);
        if iter + 1 == cfg.max_iters {
            break;
        }
        for p in swarm.iter_mut() {
            let v = velocity_update(p, &best_position, cfg, &mut rng);
            p.position = position_update(&p.position, &v, bounds);
            p.velocity = v;
        }
    }
    if cfg.max_iters == 0 {
        best_value = objective(&best_position);
    }
    Ok(PsoResult {
        best_position,
        best_value,
        history,
    })
}
