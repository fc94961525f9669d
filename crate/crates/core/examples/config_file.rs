//! Drive a run from a TOML config the way the `stochbif` binary does.
//! Flags would override anything set here.
//!
//! ```bash
//! cargo run --release --example config_file
//! ```

use stochbif::cli::{CommandKind, Plan, Settings};

const CONFIG: &str = r#"
drift = [[1, 0.0, 1.0], [3, -1.0, 0.0]]
diffusion = [[1, 1.0, 0.0]]
r = 1.0
x0 = [0.5, 2.0]
t_final = 5.0
dt = 0.01
stride = 50
"#;

fn main() -> stochbif::error::Result<()> {
    let file = Settings::from_toml(CONFIG)?;
    let out = std::env::temp_dir().join("stochbif-config-example");
    let flags = Settings {
        out_dir: Some(out),
        ..Settings::default()
    };
    let plan = Plan::new(CommandKind::Orbit, flags, Some(file))?;
    for path in plan.execute()? {
        println!("{}", path.display());
        print!("{}", std::fs::read_to_string(path)?);
    }
    Ok(())
}
