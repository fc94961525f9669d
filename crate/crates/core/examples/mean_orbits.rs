//! Mean orbits of the pitchfork system with and without noise.
//!
//! With noise the mean settles well inside the deterministic equilibrium
//! `sqrt(r)`.
//!
//! ```bash
//! cargo run --release --example mean_orbits
//! ```

use stochbif::fpe::{BoundaryPolicy, Grid, TimeSpec};
use stochbif::orbit::{mean_orbit, write_orbits_csv};
use stochbif::systems::lookup_builtin;

fn main() -> stochbif::error::Result<()> {
    let r = 1.0;
    let noisy = lookup_builtin("pitchfork")?;
    let quiet = noisy.deterministic();
    let grid = Grid::new(-6.0, 6.0, 1200, BoundaryPolicy::Reflecting)?;
    let time = TimeSpec::new(20.0, 1e-3, 1000)?;

    let mut orbits = Vec::new();
    for x0 in [-2.0, -0.5, 0.5, 2.0] {
        let a = mean_orbit(&quiet, r, &grid, x0, time)?;
        let b = mean_orbit(&noisy, r, &grid, x0, time)?;
        println!(
            "x0 = {x0:>4}: deterministic -> {:.4}, stochastic -> {:.4}",
            a.final_mean(),
            b.final_mean()
        );
        orbits.push(b);
    }
    println!();
    write_orbits_csv(std::io::stdout().lock(), &orbits[2..3])?;
    Ok(())
}
