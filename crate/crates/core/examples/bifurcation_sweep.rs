//! Deterministic saddle-node diagram: two equilibria `±sqrt(-r)` for r < 0,
//! none for r > 0.
//!
//! ```bash
//! cargo run --release --example bifurcation_sweep > diagram.csv
//! ```

use stochbif::bifurcation::{sweep, write_diagram_csv, Mode, SweepConfig};
use stochbif::equilibria::ScanConfig;
use stochbif::fpe::DomainSpec;
use stochbif::systems::lookup_builtin;

fn main() -> stochbif::error::Result<()> {
    let sys = lookup_builtin("saddle-node")?;
    let mut config = SweepConfig::new(Mode::Deterministic, -1.0, 1.0, 10);
    config.scan = ScanConfig {
        domain: DomainSpec {
            x_min: Some(-3.0),
            x_max: Some(3.0),
            cells: Some(300),
            ..DomainSpec::default()
        },
        t_final: 60.0,
        dt: 1e-2,
        ..ScanConfig::default()
    };
    config.refine_width = Some(0.05);

    let diagram = sweep(&sys, &config)?;
    for b in &diagram.bifurcations {
        eprintln!("bifurcation: {b}");
    }
    write_diagram_csv(std::io::stdout().lock(), &diagram)?;
    Ok(())
}
