//! Evolve the Fokker–Planck density of geometric Brownian motion and compare
//! its mean with `x0 e^{rt}`.
//!
//! ```bash
//! cargo run --release --example density_evolution > density.csv
//! ```

use stochbif::fpe::{evolve, write_snapshots_csv, BoundaryPolicy, Grid, TimeSpec};
use stochbif::systems::parse_polynomial_system;

fn main() -> stochbif::error::Result<()> {
    let r = 0.5;
    let gbm = parse_polynomial_system(&[(1, 0.0, 1.0)], &[(1, 0.3, 0.0)])?;
    let grid = Grid::new(-2.0, 10.0, 2400, BoundaryPolicy::Reflecting)?;
    let snaps = evolve(&gbm, r, &grid, 1.0, TimeSpec::new(2.0, 1e-3, 500)?)?;

    for s in &snaps {
        let mass = s.mass();
        let mean = s.integrate(|x| x) / mass;
        eprintln!(
            "t = {:.1}  mass = {:.9}  mean = {:.5}  exact = {:.5}",
            s.time(),
            mass,
            mean,
            (r * s.time()).exp()
        );
    }
    write_snapshots_csv(std::io::stdout().lock(), &snaps)?;
    Ok(())
}
