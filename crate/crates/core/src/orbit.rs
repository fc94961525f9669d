//! Mean orbits `X̄(x0, t) = ∫ ξ p(ξ, t | x0, 0) dξ` from evolved densities.

use crate::error::{Error, Result};
use crate::fpe::{evolve_with, BoundaryPolicy, DensityField, EvolveStats, Grid, TimeSpec};
use crate::systems::SdeSystem;

/// Mass below which a density no longer defines a mean.
pub const VANISHED_MASS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OrbitFlags {
    /// Means are divided by the surviving mass (absorbing boundaries).
    pub conditioned: bool,
    /// The orbit stopped early because the mass vanished.
    pub truncated: bool,
}

/// Time series of the first moment for one initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanOrbit {
    pub x0: f64,
    pub r: f64,
    pub times: Vec<f64>,
    pub means: Vec<f64>,
    pub surviving_mass: Vec<f64>,
    /// Standard error of each mean; empty for density-based orbits.
    pub std_errors: Vec<f64>,
    pub flags: OrbitFlags,
    pub stats: EvolveStats,
}

impl MeanOrbit {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn final_mean(&self) -> f64 {
        *self.means.last().unwrap_or(&f64::NAN)
    }

    /// Mean at the sample closest to `t`.
    pub fn mean_near(&self, t: f64) -> f64 {
        let idx = self.times.partition_point(|&s| s < t);
        let pick = match (idx.checked_sub(1), self.times.get(idx)) {
            (Some(lo), Some(&hi)) if (t - self.times[lo]) <= (hi - t) => lo,
            (Some(lo), None) => lo,
            _ => idx.min(self.times.len().saturating_sub(1)),
        };
        self.means[pick]
    }
}

/// Conditioned first moment `h Σ x_i p_i / mass`.
pub fn first_moment(field: &DensityField) -> Result<f64> {
    let mass = field.mass();
    if !(mass > VANISHED_MASS) {
        return Err(Error::VanishedMass {
            mass,
            time: field.time(),
        });
    }
    Ok(field.integrate(|x| x) / mass)
}

/// Evolve the density from `x0` and record its mean at every sample.
///
/// Under absorbing boundaries the means are conditioned on survival and
/// `surviving_mass` holds the survival probability. If the surviving mass
/// vanishes the orbit stops there and is flagged truncated.
pub fn mean_orbit(
    system: &SdeSystem,
    r: f64,
    grid: &Grid,
    x0: f64,
    time: TimeSpec,
) -> Result<MeanOrbit> {
    let cap = time.steps() / time.stride + 2;
    let mut orbit = MeanOrbit {
        x0,
        r,
        times: Vec::with_capacity(cap),
        means: Vec::with_capacity(cap),
        surviving_mass: Vec::with_capacity(cap),
        std_errors: Vec::new(),
        flags: OrbitFlags {
            conditioned: grid.policy() == BoundaryPolicy::Absorbing,
            truncated: false,
        },
        stats: EvolveStats::default(),
    };
    let stats = evolve_with(
        system,
        r,
        grid,
        x0,
        time,
        |field, survival| match first_moment(field) {
            Ok(m) => {
                orbit.times.push(field.time());
                orbit.means.push(m);
                orbit.surviving_mass.push(survival);
                true
            }
            Err(_) => {
                orbit.flags.truncated = true;
                false
            }
        },
    )?;
    if stats.vanished {
        orbit.flags.truncated = true;
    }
    orbit.stats = stats;
    Ok(orbit)
}

/// Write orbits as CSV `r,x0,t,mean,mass`, adding a `stderr` column when
/// any orbit carries standard errors.
pub fn write_orbits_csv<W: std::io::Write>(
    mut out: W,
    orbits: &[MeanOrbit],
) -> std::io::Result<()> {
    let with_se = orbits.iter().any(|o| !o.std_errors.is_empty());
    if with_se {
        writeln!(out, "r,x0,t,mean,mass,stderr")?;
    } else {
        writeln!(out, "r,x0,t,mean,mass")?;
    }
    for o in orbits {
        for i in 0..o.len() {
            write!(
                out,
                "{},{},{},{},{}",
                o.r, o.x0, o.times[i], o.means[i], o.surviving_mass[i]
            )?;
            if with_se {
                write!(out, ",{}", o.std_errors.get(i).copied().unwrap_or(f64::NAN))?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpe::delta_init;
    use crate::systems::{lookup_builtin, parse_polynomial_system};

    fn grid(lo: f64, hi: f64, n: usize) -> Grid {
        Grid::new(lo, hi, n, BoundaryPolicy::Reflecting).unwrap()
    }

    /// Classical RK4 for the noise-free oracle.
    fn rk4(f: impl Fn(f64) -> f64, x0: f64, t: f64, dt: f64) -> f64 {
        let steps = (t / dt).round() as usize;
        let mut x = x0;
        for _ in 0..steps {
            let k1 = f(x);
            let k2 = f(x + 0.5 * dt * k1);
            let k3 = f(x + 0.5 * dt * k2);
            let k4 = f(x + dt * k3);
            x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        x
    }

    #[test]
    fn first_moment_examples() {
        let g = grid(-5.0, 5.0, 1000);
        let sym = delta_init(&g, 0.0).unwrap();
        assert!(first_moment(&sym).unwrap().abs() < 1e-9);
        let d = delta_init(&g, 1.3).unwrap();
        assert!((first_moment(&d).unwrap() - 1.3).abs() < 0.005);
        let empty = DensityField::new(g, vec![0.0; 1000], 2.0).unwrap();
        assert!(matches!(
            first_moment(&empty),
            Err(Error::VanishedMass { .. })
        ));
    }

    #[test]
    fn first_moment_of_gbm_density() {
        let sys = parse_polynomial_system(&[(1, 0.0, 1.0)], &[(1, 0.3, 0.0)]).unwrap();
        let g = grid(-2.0, 10.0, 2400);
        let o = mean_orbit(&sys, 0.5, &g, 1.0, TimeSpec::new(1.0, 1e-3, 100).unwrap()).unwrap();
        let exact = 0.5f64.exp();
        assert!(
            (o.final_mean() - exact).abs() < 0.01 * exact,
            "{}",
            o.final_mean()
        );
    }

    #[test]
    fn zero_system_orbit_is_constant() {
        let sys = parse_polynomial_system(&[], &[]).unwrap();
        let g = grid(-2.0, 2.0, 400);
        let o = mean_orbit(&sys, 0.0, &g, 0.7, TimeSpec::new(2.0, 1e-2, 10).unwrap()).unwrap();
        assert_eq!(o.times[0], 0.0);
        for m in &o.means {
            assert!((m - 0.7).abs() < 0.5 * g.h());
        }
        assert!(o.surviving_mass.iter().all(|m| (m - 1.0).abs() < 1e-6));
        assert!(!o.flags.conditioned && !o.flags.truncated);
    }

    #[test]
    fn deterministic_pitchfork_tracks_ode() {
        let sys = lookup_builtin("pitchfork").unwrap().deterministic();
        let g = grid(-3.0, 3.0, 3000);
        let o = mean_orbit(&sys, 1.0, &g, 0.5, TimeSpec::new(4.0, 1e-3, 100).unwrap()).unwrap();
        for t in [1.0, 2.0, 4.0] {
            let exact = rk4(|x| x - x * x * x, 0.5, t, 1e-5);
            let m = o.mean_near(t);
            assert!((m - exact).abs() < 0.01 * exact, "t={t}: {m} vs {exact}");
        }
    }

    #[test]
    fn stochastic_pitchfork_orbit_settles() {
        let sys = lookup_builtin("pitchfork").unwrap();
        let g = grid(-6.0, 6.0, 600);
        let o = mean_orbit(&sys, 1.0, &g, 1.0, TimeSpec::new(40.0, 1e-2, 100).unwrap()).unwrap();
        assert!((o.mean_near(40.0) - o.mean_near(20.0)).abs() < 1e-3);
    }

    #[test]
    fn absorbing_orbit_is_conditioned_and_can_truncate() {
        let sys = parse_polynomial_system(&[(0, 5.0, 0.0)], &[]).unwrap();
        let g = Grid::new(-1.0, 1.0, 64, BoundaryPolicy::Absorbing).unwrap();
        let o = mean_orbit(&sys, 0.0, &g, 0.0, TimeSpec::new(10.0, 1e-2, 10).unwrap()).unwrap();
        assert!(o.flags.conditioned);
        assert!(o.flags.truncated);
        assert!(o.final_time() < 10.0);
        assert!(o.surviving_mass.iter().all(|&m| m > 0.0 && m <= 1.0));
        // the conditioned law piles up against the outflow boundary
        assert!(o.final_mean() > 0.9);
    }

    #[test]
    fn csv_layout() {
        let sys = parse_polynomial_system(&[], &[]).unwrap();
        let g = grid(-1.0, 1.0, 32);
        let o = mean_orbit(&sys, 0.0, &g, 0.0, TimeSpec::new(1.0, 0.5, 1).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_orbits_csv(&mut buf, &[o]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,x0,t,mean,mass\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
