//! Parameter sweeps and bifurcation diagrams.
//!
//! A bifurcation is reported as the interval between adjacent `r` samples
//! whose equilibrium signatures (number of stable and unstable points)
//! differ. Drift of locations alone is not flagged.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{detect_equilibria, EquilibriumScan, ScanConfig, Signature};
use crate::error::{Error, Result};
use crate::fpe::BoundaryPolicy;
use crate::systems::SdeSystem;

pub const DEFAULT_REFINE_WIDTH: f64 = 0.01;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Deterministic,
    #[default]
    Stochastic,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Deterministic => "deterministic",
            Mode::Stochastic => "stochastic",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(Mode::Deterministic),
            "stochastic" => Ok(Mode::Stochastic),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (valid: deterministic, stochastic)"
            ))),
        }
    }
}

impl Mode {
    /// The system as integrated in this mode.
    pub fn apply(self, system: &SdeSystem) -> SdeSystem {
        match self {
            Mode::Deterministic => system.deterministic(),
            Mode::Stochastic => system.clone(),
        }
    }

    /// Scan settings adjusted for this mode. Without noise there is nothing
    /// to condition on, so unset boundary policies become reflecting and
    /// runaway orbits pile up at the wall, where they count as escapes.
    pub fn scan_config(self, config: &ScanConfig) -> ScanConfig {
        let mut c = config.clone();
        if self == Mode::Deterministic && c.domain.policy.is_none() {
            c.domain.policy = Some(BoundaryPolicy::Reflecting);
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub mode: Mode,
    pub r_min: f64,
    pub r_max: f64,
    /// Number of `r` samples, endpoints included.
    pub r_steps: usize,
    pub scan: ScanConfig,
    /// Bisect each flagged interval down to this width.
    pub refine_width: Option<f64>,
}

impl SweepConfig {
    pub fn new(mode: Mode, r_min: f64, r_max: f64, r_steps: usize) -> Self {
        Self {
            mode,
            r_min,
            r_max,
            r_steps,
            scan: ScanConfig::default(),
            refine_width: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min.is_finite() && self.r_max.is_finite() && self.r_min < self.r_max) {
            return Err(Error::Precondition(format!(
                "r_min = {} must be below r_max = {}",
                self.r_min, self.r_max
            )));
        }
        if self.r_steps < 2 {
            return Err(Error::Precondition(format!(
                "r_steps must be at least 2, got {}",
                self.r_steps
            )));
        }
        if let Some(w) = self.refine_width {
            if !(w > 0.0) {
                return Err(Error::Precondition("refine width must be positive".into()));
            }
        }
        self.scan.validate()
    }

    pub fn r_values(&self) -> Vec<f64> {
        // weighted form keeps round grids like -1..1 free of drift noise
        let last = (self.r_steps - 1) as f64;
        (0..self.r_steps)
            .map(|i| {
                let i = i as f64;
                (self.r_min * (last - i) + self.r_max * i) / last
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectedBifurcation {
    pub r_lo: f64,
    pub r_hi: f64,
    pub before: Signature,
    pub after: Signature,
}

impl DetectedBifurcation {
    pub fn contains(&self, r: f64) -> bool {
        self.r_lo <= r && r <= self.r_hi
    }

    pub fn intersects(&self, lo: f64, hi: f64) -> bool {
        self.r_lo <= hi && lo <= self.r_hi
    }
}

impl fmt::Display for DetectedBifurcation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "r in [{}, {}]: {} -> {}",
            self.r_lo, self.r_hi, self.before, self.after
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationDiagram {
    pub system: String,
    pub mode: Mode,
    pub r_values: Vec<f64>,
    pub scans: Vec<EquilibriumScan>,
    pub bifurcations: Vec<DetectedBifurcation>,
}

impl BifurcationDiagram {
    pub fn scan_at(&self, r: f64) -> Option<&EquilibriumScan> {
        self.scans.iter().find(|s| s.r == r)
    }

    /// Per-r notes: failures and scan diagnostics.
    pub fn annotations(&self) -> Vec<(f64, String)> {
        self.scans
            .iter()
            .flat_map(|s| s.diagnostics.iter().map(move |d| (s.r, d.clone())))
            .collect()
    }
}

fn scan_or_record(system: &SdeSystem, r: f64, config: &ScanConfig) -> EquilibriumScan {
    match detect_equilibria(system, r, config) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("scan at r = {r} failed: {e}");
            EquilibriumScan::failed(r, config, e.to_string())
        }
    }
}

/// Sweep `r` over a uniform grid and flag signature changes.
///
/// Scan failures never abort the sweep; they are kept as annotated empty
/// scans and no bifurcation is flagged next to them.
pub fn sweep(system: &SdeSystem, config: &SweepConfig) -> Result<BifurcationDiagram> {
    config.validate()?;
    let system = config.mode.apply(system);
    let scan_cfg = config.mode.scan_config(&config.scan);
    let r_values = config.r_values();

    let scans: Vec<EquilibriumScan> = r_values
        .par_iter()
        .map(|&r| scan_or_record(&system, r, &scan_cfg))
        .collect();

    let coarse: Vec<DetectedBifurcation> = scans
        .windows(2)
        .filter(|w| w[0].error.is_none() && w[1].error.is_none())
        .filter(|w| w[0].signature() != w[1].signature())
        .map(|w| DetectedBifurcation {
            r_lo: w[0].r,
            r_hi: w[1].r,
            before: w[0].signature(),
            after: w[1].signature(),
        })
        .collect();

    let bifurcations = match config.refine_width {
        None => coarse,
        Some(width) => coarse
            .into_par_iter()
            .map(|b| refine(&system, &scan_cfg, b, width))
            .collect(),
    };

    Ok(BifurcationDiagram {
        system: system.name().to_string(),
        mode: config.mode,
        r_values,
        scans,
        bifurcations,
    })
}

/// Narrow a flagged interval by bisection in `r`. Stops early when the
/// midpoint matches neither end, since the interval then holds more than
/// one change.
fn refine(
    system: &SdeSystem,
    config: &ScanConfig,
    mut b: DetectedBifurcation,
    width: f64,
) -> DetectedBifurcation {
    while b.r_hi - b.r_lo > width {
        let mid = 0.5 * (b.r_lo + b.r_hi);
        let scan = scan_or_record(system, mid, config);
        if scan.error.is_some() {
            break;
        }
        let sig = scan.signature();
        if sig == b.before {
            b.r_lo = mid;
        } else if sig == b.after {
            b.r_hi = mid;
        } else {
            break;
        }
    }
    b
}

/// Diagram CSV: one row per equilibrium per `r`; empty scans get a
/// `NaN,escape` row.
pub fn write_diagram_csv<W: Write>(
    mut out: W,
    diagram: &BifurcationDiagram,
) -> std::io::Result<()> {
    writeln!(out, "r,location,stability,residual,mode")?;
    for scan in &diagram.scans {
        if scan.equilibria.is_empty() {
            writeln!(out, "{},NaN,escape,NaN,{}", scan.r, diagram.mode)?;
        }
        for e in &scan.equilibria {
            writeln!(
                out,
                "{},{},{},{},{}",
                scan.r, e.location, e.stability, e.residual, diagram.mode
            )?;
        }
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(
    mut out: W,
    diagram: &BifurcationDiagram,
) -> std::io::Result<()> {
    writeln!(out, "r_lo,r_hi,signature_before,signature_after")?;
    for b in &diagram.bifurcations {
        writeln!(out, "{},{},{},{}", b.r_lo, b.r_hi, b.before, b.after)?;
    }
    Ok(())
}
