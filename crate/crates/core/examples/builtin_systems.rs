//! The three builtin systems and a user-defined polynomial one.
//!
//! ```bash
//! cargo run --example builtin_systems
//! ```

use stochbif::systems::{lookup_builtin, parse_polynomial_system, BUILTIN_NAMES};

fn main() -> stochbif::error::Result<()> {
    for name in BUILTIN_NAMES {
        let sys = lookup_builtin(name)?;
        let drift = sys.drift_spec().expect("builtins are polynomial");
        println!(
            "{name:>14}: f(r, x) = {drift}, sigma(x) = {}",
            sys.diffusion_spec().unwrap()
        );
        println!(
            "{:>14}  f(1, 2) = {}, sigma(2) = {}",
            "",
            sys.drift(1.0, 2.0),
            sys.diffusion(2.0)
        );
    }

    // (power, constant, r_multiplier): dX = (r x - x^5) dt + 0.5 x dB
    let quintic = parse_polynomial_system(&[(1, 0.0, 1.0), (5, -1.0, 0.0)], &[(1, 0.5, 0.0)])?;
    println!("\ncustom: f(r, x) = {}", quintic.drift_spec().unwrap());
    println!("        f(0.5, 1.2) = {:.6}", quintic.drift(0.5, 1.2));

    // duplicate powers are rejected rather than summed
    let err = parse_polynomial_system(&[(2, 1.0, 0.0), (2, 0.5, 0.0)], &[]).unwrap_err();
    println!("        {err}");
    Ok(())
}
