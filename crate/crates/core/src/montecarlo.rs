//! Euler–Maruyama ensembles, an independent check on density-based orbits.
//!
//! Paths are split into fixed-size blocks. Block `k` draws from a ChaCha8
//! generator seeded with `seed` on stream `k`, so the result does not depend
//! on how many threads run the blocks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fpe::{EvolveStats, TimeSpec};
use crate::orbit::{MeanOrbit, OrbitFlags};
use crate::systems::SdeSystem;

pub const MIN_PATHS: usize = 100;
pub const BLOCK_SIZE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    /// Paths leaving `[-clip, clip]` are frozen and dropped from the mean.
    pub domain_clip: f64,
    /// Record every `stride`-th step.
    pub stride: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dt: 1e-3,
            t_final: 5.0,
            seed: 42,
            domain_clip: 6.0,
            stride: 100,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<TimeSpec> {
        if self.n_paths < MIN_PATHS {
            return Err(Error::Precondition(format!(
                "n_paths must be at least {MIN_PATHS}, got {}",
                self.n_paths
            )));
        }
        if !(self.domain_clip > 0.0) {
            return Err(Error::Precondition("domain_clip must be positive".into()));
        }
        TimeSpec::new(self.t_final, self.dt, self.stride)
    }
}

/// Per-sample sums over the surviving paths of one block.
struct BlockSums {
    alive: Vec<u64>,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

fn run_block(
    system: &SdeSystem,
    r: f64,
    x0: f64,
    cfg: &EnsembleConfig,
    time: TimeSpec,
    block: usize,
    paths: usize,
) -> BlockSums {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(block as u64);
    let steps = time.steps();
    let samples = (0..=steps).filter(|&k| time.is_sample(k)).count();
    let mut out = BlockSums {
        alive: vec![0; samples],
        sum: vec![0.0; samples],
        sum_sq: vec![0.0; samples],
    };
    let sqrt_dt = cfg.dt.sqrt();
    let clip = cfg.domain_clip;
    let mut x = vec![x0; paths];
    let mut live = vec![x0.abs() <= clip; paths];

    let mut record = |s: usize, x: &[f64], live: &[bool]| {
        for (xi, _) in x.iter().zip(live).filter(|(_, &l)| l) {
            out.alive[s] += 1;
            out.sum[s] += xi;
            out.sum_sq[s] += xi * xi;
        }
    };
    record(0, &x, &live);
    let mut s = 1;
    for k in 1..=steps {
        for (xi, li) in x.iter_mut().zip(live.iter_mut()) {
            // every path draws every step so streams stay aligned
            let z: f64 = StandardNormal.sample(&mut rng);
            if !*li {
                continue;
            }
            let next = *xi + system.drift(r, *xi) * cfg.dt + system.diffusion(*xi) * sqrt_dt * z;
            if next.is_finite() && next.abs() <= clip {
                *xi = next;
            } else {
                *li = false;
            }
        }
        if time.is_sample(k) {
            record(s, &x, &live);
            s += 1;
        }
    }
    out
}

/// Ensemble mean orbit over surviving paths, with standard errors.
///
/// `surviving_mass` holds the fraction of unclipped paths. When every path
/// is clipped the orbit ends at the last sample that still had survivors
/// and is flagged truncated.
pub fn em_mean_orbit(
    system: &SdeSystem,
    r: f64,
    x0: f64,
    config: &EnsembleConfig,
) -> Result<MeanOrbit> {
    let time = config.validate()?;
    let blocks: Vec<usize> = (0..config.n_paths.div_ceil(BLOCK_SIZE)).collect();
    let sums: Vec<BlockSums> = blocks
        .par_iter()
        .map(|&b| {
            let paths = BLOCK_SIZE.min(config.n_paths - b * BLOCK_SIZE);
            run_block(system, r, x0, config, time, b, paths)
        })
        .collect();

    let samples: Vec<usize> = (0..=time.steps()).filter(|&k| time.is_sample(k)).collect();
    let mut orbit = MeanOrbit {
        x0,
        r,
        times: Vec::with_capacity(samples.len()),
        means: Vec::with_capacity(samples.len()),
        surviving_mass: Vec::with_capacity(samples.len()),
        std_errors: Vec::with_capacity(samples.len()),
        flags: OrbitFlags::default(),
        stats: EvolveStats::default(),
    };
    let n = config.n_paths as f64;
    for (s, &k) in samples.iter().enumerate() {
        // fixed block order keeps the sums reproducible
        let (mut alive, mut sum, mut sum_sq) = (0u64, 0.0, 0.0);
        for b in &sums {
            alive += b.alive[s];
            sum += b.sum[s];
            sum_sq += b.sum_sq[s];
        }
        if alive == 0 {
            orbit.flags.truncated = true;
            break;
        }
        let m = alive as f64;
        let mean = sum / m;
        let var = if alive > 1 {
            ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0)
        } else {
            0.0
        };
        orbit.times.push(if k == time.steps() {
            config.t_final
        } else {
            k as f64 * config.dt
        });
        orbit.means.push(mean);
        orbit.surviving_mass.push(m / n);
        orbit.std_errors.push((var / m).sqrt());
        if alive < config.n_paths as u64 {
            orbit.flags.conditioned = true;
        }
    }
    orbit.stats.steps = time.steps();
    Ok(orbit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{lookup_builtin, parse_polynomial_system};

    #[test]
    fn noise_free_paths_follow_the_ode() {
        let sys = lookup_builtin("pitchfork").unwrap().deterministic();
        let cfg = EnsembleConfig {
            n_paths: 100,
            dt: 1e-4,
            t_final: 1.0,
            stride: 1000,
            ..EnsembleConfig::default()
        };
        let o = em_mean_orbit(&sys, 1.0, 0.5, &cfg).unwrap();
        // x' = x - x^3 from 0.5: x(t)^2 = 1 / (1 + 3 e^{-2t})
        let exact = (1.0 / (1.0 + 3.0 * (-2.0f64).exp())).sqrt();
        assert!((o.final_mean() - exact).abs() < 1e-3 * exact);
        assert!(o.std_errors.iter().all(|&se| se < 1e-6));
        assert_eq!(o.final_time(), 1.0);
    }

    #[test]
    fn gbm_mean_within_three_standard_errors() {
        let sys = parse_polynomial_system(&[(1, 0.0, 1.0)], &[(1, 0.3, 0.0)]).unwrap();
        let cfg = EnsembleConfig {
            n_paths: 20_000,
            dt: 1e-3,
            t_final: 1.0,
            domain_clip: 100.0,
            ..EnsembleConfig::default()
        };
        let o = em_mean_orbit(&sys, 0.5, 1.0, &cfg).unwrap();
        let se = *o.std_errors.last().unwrap();
        assert!(
            (o.final_mean() - 0.5f64.exp()).abs() < 3.0 * se,
            "{} ± {se}",
            o.final_mean()
        );
        assert_eq!(*o.surviving_mass.last().unwrap(), 1.0);
    }

    #[test]
    fn seeded_runs_repeat_exactly() {
        let sys = lookup_builtin("transcritical").unwrap();
        let cfg = EnsembleConfig {
            n_paths: 2500,
            t_final: 0.5,
            stride: 50,
            ..EnsembleConfig::default()
        };
        let a = em_mean_orbit(&sys, 0.5, 1.0, &cfg).unwrap();
        let b = em_mean_orbit(&sys, 0.5, 1.0, &cfg).unwrap();
        assert_eq!(a, b);
        let c = em_mean_orbit(&sys, 0.5, 1.0, &EnsembleConfig { seed: 7, ..cfg }).unwrap();
        assert_ne!(a.means, c.means);
    }

    #[test]
    fn all_clipped_truncates() {
        let sys = parse_polynomial_system(&[(0, 10.0, 0.0)], &[]).unwrap();
        let cfg = EnsembleConfig {
            n_paths: 100,
            dt: 1e-2,
            t_final: 2.0,
            domain_clip: 1.0,
            stride: 1,
            ..EnsembleConfig::default()
        };
        let o = em_mean_orbit(&sys, 0.0, 0.0, &cfg).unwrap();
        assert!(o.flags.truncated);
        assert!(o.final_time() < 0.2);
    }

    #[test]
    fn rejects_small_ensembles() {
        let sys = lookup_builtin("pitchfork").unwrap();
        let cfg = EnsembleConfig {
            n_paths: 99,
            ..EnsembleConfig::default()
        };
        assert!(matches!(
            em_mean_orbit(&sys, 0.0, 0.0, &cfg),
            Err(Error::Precondition(_))
        ));
    }
}
