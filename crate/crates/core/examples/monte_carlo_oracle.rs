//! Check a density-based mean orbit against an Euler–Maruyama ensemble.
//!
//! ```bash
//! cargo run --release --example monte_carlo_oracle
//! ```

use stochbif::cli::compare_orbits;
use stochbif::fpe::{BoundaryPolicy, Grid, TimeSpec};
use stochbif::montecarlo::{em_mean_orbit, EnsembleConfig};
use stochbif::orbit::mean_orbit;
use stochbif::systems::lookup_builtin;

fn main() -> stochbif::error::Result<()> {
    let (r, x0) = (0.5, 1.0);
    let sys = lookup_builtin("transcritical")?;
    let grid = Grid::new(-6.0, 6.0, 2400, BoundaryPolicy::Reflecting)?;
    let fpe = mean_orbit(&sys, r, &grid, x0, TimeSpec::new(3.0, 1e-3, 500)?)?;
    let ensemble = EnsembleConfig {
        n_paths: 20_000,
        t_final: 3.0,
        stride: 500,
        seed: 7,
        ..EnsembleConfig::default()
    };
    let mc = em_mean_orbit(&sys, r, x0, &ensemble)?;

    println!(
        "{:>5} {:>9} {:>9} {:>8}  ok",
        "t", "density", "ensemble", "stderr"
    );
    for c in compare_orbits(&fpe, &mc) {
        println!(
            "{:>5.2} {:>9.5} {:>9.5} {:>8.5}  {}",
            c.t,
            c.fpe_mean,
            c.mc_mean,
            c.std_error,
            c.agrees()
        );
    }
    Ok(())
}
