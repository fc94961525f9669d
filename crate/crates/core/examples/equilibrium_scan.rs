//! Mean equilibria of the stochastic pitchfork at one parameter value.
//!
//! ```bash
//! cargo run --release --example equilibrium_scan -- 1.0
//! ```

use stochbif::equilibria::{detect_equilibria, ScanConfig};
use stochbif::systems::lookup_builtin;

fn main() -> stochbif::error::Result<()> {
    let r: f64 = std::env::args()
        .nth(1)
        .map_or(1.0, |a| a.parse().expect("r must be a number"));
    let sys = lookup_builtin("pitchfork")?;
    // a coarser time step keeps this quick; the defaults are dt = 1e-3
    let config = ScanConfig {
        dt: 1e-2,
        stride: 10,
        ..ScanConfig::default()
    };
    let scan = detect_equilibria(&sys, r, &config)?;

    println!("r = {r}: {}", scan.signature());
    for e in &scan.equilibria {
        println!(
            "  {:>9.5} {:<8} from {} orbits {}",
            e.location,
            e.stability.to_string(),
            e.basin_sample.len(),
            e.notes.join("; ")
        );
    }
    for d in &scan.diagnostics {
        println!("  note: {d}");
    }
    Ok(())
}
