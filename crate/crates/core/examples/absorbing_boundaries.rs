//! Saddle-node with r > 0 pushes all mass to +infinity. With absorbing
//! boundaries the mean is conditioned on survival and settles at a value
//! that depends on where the domain is cut.
//!
//! ```bash
//! cargo run --release --example absorbing_boundaries
//! ```

use stochbif::fpe::{BoundaryPolicy, Grid, TimeSpec};
use stochbif::orbit::mean_orbit;
use stochbif::systems::lookup_builtin;

fn main() -> stochbif::error::Result<()> {
    let sys = lookup_builtin("saddle-node")?;
    let time = TimeSpec::new(20.0, 1e-2, 100)?;
    for half_width in [4.0, 6.0, 8.0] {
        let grid = Grid::new(
            -half_width,
            half_width,
            (200.0 * half_width) as usize,
            BoundaryPolicy::Absorbing,
        )?;
        let o = mean_orbit(&sys, 1.0, &grid, 0.0, time)?;
        println!(
            "domain ±{half_width}: conditioned mean {:.4}, survival {:.3e}, truncated = {}",
            o.final_mean(),
            o.surviving_mass.last().unwrap(),
            o.flags.truncated
        );
    }
    Ok(())
}
