use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cross-entropy method settings over a 3-D search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CemConfig {
    pub n_samples: usize,
    pub elite_fraction: f64,
    /// Stop once KL(new || old) between successive sampling distributions
    /// drops to this.
    pub kl_tolerance: f64,
    pub max_iters: usize,
    /// Independent runs per planning call; the planner keeps the best.
    pub restarts: usize,
    /// Lower bound on each refitted standard deviation.
    pub min_std: [f64; 3],
    /// Initial sampling mean; the planner defaults it to the belief-weighted
    /// mean predicted position and half the horizon.
    pub init_mean: Option<[f64; 3]>,
    /// Initial sampling std; the planner defaults it to the spread of the
    /// predicted positions and half the horizon.
    pub init_std: Option<[f64; 3]>,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            n_samples: 100,
            elite_fraction: 0.1,
            kl_tolerance: 0.2,
            max_iters: 30,
            restarts: 3,
            min_std: [0.05, 0.05, 0.5],
            init_mean: None,
            init_std: None,
        }
    }
}

impl CemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 10 {
            return Err(Error::Config(format!("cem.n_samples must be >= 10, got {}", self.n_samples)));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 1.0) {
            return Err(Error::Config(format!("cem.elite_fraction must be in (0, 1), got {}", self.elite_fraction)));
        }
        if !(self.kl_tolerance > 0.0) {
            return Err(Error::Config("cem.kl_tolerance must be positive".into()));
        }
        if self.restarts < 1 {
            return Err(Error::Config("cem.restarts must be >= 1".into()));
        }
        if self.max_iters < 1 || self.min_std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("cem.max_iters must be >= 1 and cem.min_std positive".into()));
        }
        if self.init_std.is_some_and(|s| s.iter().any(|v| !(*v > 0.0))) {
            return Err(Error::Config("cem.init_std must be positive".into()));
        }
        Ok(())
    }
}

/// `ceil(gamma * n)`, at least 1 and at most `n`.
pub fn elite_count(gamma: f64, n: usize) -> usize {
    // The slack absorbs rounding in products like 0.7 * 10.
    ((gamma * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Axis-aligned Gaussian over the search space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagGaussian {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

/// KL(new || old) for diagonal Gaussians.
pub fn kl_diag(new: &DiagGaussian, old: &DiagGaussian) -> f64 {
    (0..3)
        .map(|d| {
            let (sn, so) = (new.std[d], old.std[d]);
            let dm = new.mean[d] - old.mean[d];
            (so / sn).ln() + (sn * sn + dm * dm) / (2.0 * so * so) - 0.5
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CemOutcome {
    /// Best evaluated point and its value over all iterations.
    pub best: Option<([f64; 3], f64)>,
    /// Final sampling distribution.
    pub dist: DiagGaussian,
    pub iterations: usize,
    pub converged: bool,
    /// Elites used for each refit.
    pub elite_counts: Vec<usize>,
}

/// Maximizes `f` with the cross-entropy method.
///
/// `f` maps a raw sample to the point it actually evaluated (after any
/// projection) and its value, or `None` if infeasible. Distributions are
/// refitted to the evaluated points of the top `ceil(gamma * N)` feasible
/// samples. When a whole batch is infeasible the std is doubled and the
/// batch redrawn, at most three times.
pub fn cem_maximize<F>(mut f: F, init: DiagGaussian, cfg: &CemConfig, seed: u64) -> CemOutcome
where
    F: FnMut(&[f64; 3]) -> Option<([f64; 3], f64)>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_elite = elite_count(cfg.elite_fraction, cfg.n_samples);
    let mut dist = init;
    let mut best: Option<([f64; 3], f64)> = None;
    let mut elite_counts = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let mut scored = Vec::new();
        let mut widen = 1.0;
        for escalation in 0..=3 {
            if escalation > 0 {
                widen *= 2.0;
            }
            scored.clear();
            for _ in 0..cfg.n_samples {
                let mut z = [0.0; 3];
                for d in 0..3 {
                    let n: f64 = rng.sample(StandardNormal);
                    z[d] = dist.mean[d] + widen * dist.std[d] * n;
                }
                if let Some((p, v)) = f(&z) {
                    if v.is_finite() {
                        scored.push((p, v));
                    }
                }
            }
            if !scored.is_empty() {
                break;
            }
        }
        if scored.is_empty() {
            break;
        }
        // Stable sort keeps sample order among ties.
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        if best.map_or(true, |(_, v)| scored[0].1 > v) {
            best = Some(scored[0]);
        }
        let elites = &scored[..n_elite.min(scored.len())];
        elite_counts.push(elites.len());
        let k = elites.len() as f64;
        let mut next = DiagGaussian { mean: [0.0; 3], std: [0.0; 3] };
        for d in 0..3 {
            let m = elites.iter().map(|(p, _)| p[d]).sum::<f64>() / k;
            let var = elites.iter().map(|(p, _)| (p[d] - m).powi(2)).sum::<f64>() / k;
            next.mean[d] = m;
            next.std[d] = var.sqrt().max(cfg.min_std[d]);
        }
        let kl = kl_diag(&next, &dist);
        dist = next;
        if kl <= cfg.kl_tolerance {
            converged = true;
            break;
        }
    }
    CemOutcome { best, dist, iterations, converged, elite_counts }
}
