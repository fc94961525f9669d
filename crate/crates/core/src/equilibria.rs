//! Mean equilibrium states and their stability.
//!
//! A fan of initial points is evolved to `t_final`. Orbits whose mean has
//! stopped moving (`|X̄(T) - X̄(T - T/10)| < settle_tol`) are clustered by
//! terminal value; clusters supported by at least two orbits are stable mean
//! equilibria. Unstable equilibria are the thresholds in `x0` separating
//! different long-time outcomes (two clusters, or a cluster and an escape),
//! located by bisection on the initial point.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fpe::{DomainSpec, Grid, TimeSpec};
use crate::orbit::{mean_orbit, MeanOrbit};
use crate::systems::SdeSystem;

pub const DEFAULT_T_FINAL: f64 = 40.0;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_STRIDE: usize = 100;
pub const DEFAULT_SETTLE_TOL: f64 = 1e-4;
pub const DEFAULT_MERGE_TOL: f64 = 0.02;
pub const DEFAULT_FAN_COUNT: usize = 21;
pub const DEFAULT_FAN_FRACTION: f64 = 0.8;
/// Orbits whose mean leaves this fraction of the half-width are escaping.
pub const ESCAPE_FRACTION: f64 = 0.9;
const MIN_FAN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stability {
    Stable,
    Unstable,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Negative,
    Positive,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Negative => "-",
            Direction::Positive => "+",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanEquilibrium {
    pub location: f64,
    pub stability: Stability,
    /// Initial points whose orbits support the classification.
    pub basin_sample: Vec<f64>,
    /// Largest settle residual among the supporting orbits.
    pub residual: f64,
    pub notes: Vec<String>,
}

/// Long-time behaviour of one mean orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Settled { terminal: f64, residual: f64 },
    Unsettled { terminal: f64, residual: f64 },
    Escaped(Direction),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FanOrbit {
    pub x0: f64,
    pub outcome: Outcome,
    /// Survival probability at the end of the orbit.
    pub survival: f64,
}

/// Initial-condition fan.
#[derive(Debug, Clone, PartialEq)]
pub enum FanSpec {
    /// `count` equispaced points over the central `fraction` of the domain.
    Uniform {
        count: usize,
        fraction: f64,
    },
    Points(Vec<f64>),
}

impl Default for FanSpec {
    fn default() -> Self {
        FanSpec::Uniform {
            count: DEFAULT_FAN_COUNT,
            fraction: DEFAULT_FAN_FRACTION,
        }
    }
}

impl FanSpec {
    pub fn points(&self, grid: &Grid) -> Vec<f64> {
        match self {
            FanSpec::Uniform { count, fraction } => {
                let c = grid.center();
                let w = fraction * grid.half_width();
                match count {
                    0 => Vec::new(),
                    1 => vec![c],
                    &k => (0..k)
                        .map(|i| c - w + 2.0 * w * i as f64 / (k - 1) as f64)
                        .collect(),
                }
            }
            FanSpec::Points(p) => {
                let mut p = p.clone();
                p.sort_by(f64::total_cmp);
                p
            }
        }
    }
}

/// Settings for [`detect_equilibria`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub domain: DomainSpec,
    pub t_final: f64,
    pub dt: f64,
    pub stride: usize,
    pub fan: FanSpec,
    pub settle_tol: f64,
    pub merge_tol: f64,
    /// Locate unstable equilibria by bisection on `x0`. When off, the
    /// midpoint of the fan bracket is reported.
    pub bisect: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            domain: DomainSpec::default(),
            t_final: DEFAULT_T_FINAL,
            dt: DEFAULT_DT,
            stride: DEFAULT_STRIDE,
            fan: FanSpec::default(),
            settle_tol: DEFAULT_SETTLE_TOL,
            merge_tol: DEFAULT_MERGE_TOL,
            bisect: true,
        }
    }
}

impl ScanConfig {
    pub fn time_spec(&self) -> Result<TimeSpec> {
        TimeSpec::new(self.t_final, self.dt, self.stride)
    }

    /// `merge_tol`, widened to two cells on coarse grids.
    pub fn effective_merge_tol(&self, grid: &Grid) -> f64 {
        if grid.h() > 0.01 {
            self.merge_tol.max(2.0 * grid.h())
        } else {
            self.merge_tol
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.time_spec()?;
        if !(self.settle_tol > 0.0) {
            return Err(Error::Precondition("settle_tol must be positive".into()));
        }
        if !(self.merge_tol > 0.0) {
            return Err(Error::Precondition("merge_tol must be positive".into()));
        }
        if let FanSpec::Uniform { count, fraction } = self.fan {
            if count < MIN_FAN {
                return Err(Error::Precondition(format!(
                    "fan needs at least {MIN_FAN} points, got {count}"
                )));
            }
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::Precondition(format!(
                    "fan fraction must lie in (0, 1), got {fraction}"
                )));
            }
        }
        Ok(())
    }
}

/// Equilibria found at one parameter value, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumScan {
    pub r: f64,
    pub equilibria: Vec<MeanEquilibrium>,
    pub x0_fan: Vec<f64>,
    pub fan: Vec<FanOrbit>,
    pub escapes: Vec<(f64, Direction)>,
    pub diagnostics: Vec<String>,
    pub grid: Option<Grid>,
    pub t_final: f64,
    pub dt: f64,
    pub settle_tol: f64,
    pub merge_tol: f64,
    /// Means were conditioned on survival (absorbing boundaries).
    pub conditioned: bool,
    /// Set when the scan could not run.
    pub error: Option<String>,
}

impl EquilibriumScan {
    /// A scan that could not run; the reason goes into the diagnostics.
    pub fn failed(r: f64, config: &ScanConfig, reason: String) -> Self {
        Self {
            r,
            equilibria: Vec::new(),
            x0_fan: Vec::new(),
            fan: Vec::new(),
            escapes: Vec::new(),
            diagnostics: vec![format!("failed: {reason}")],
            grid: None,
            t_final: config.t_final,
            dt: config.dt,
            settle_tol: config.settle_tol,
            merge_tol: config.merge_tol,
            conditioned: false,
            error: Some(reason),
        }
    }

    pub fn signature(&self) -> Signature {
        Signature {
            stable: self.count(Stability::Stable),
            unstable: self.count(Stability::Unstable),
        }
    }

    pub fn count(&self, s: Stability) -> usize {
        self.equilibria.iter().filter(|e| e.stability == s).count()
    }

    pub fn of_kind(&self, s: Stability) -> impl Iterator<Item = &MeanEquilibrium> {
        self.equilibria.iter().filter(move |e| e.stability == s)
    }
}

/// Equilibrium count and stability multiset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Signature {
    pub stable: usize,
    pub unstable: usize,
}

impl Signature {
    pub fn count(&self) -> usize {
        self.stable + self.unstable
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.count() == 0 {
            return f.write_str("none");
        }
        write!(f, "{}S{}U", self.stable, self.unstable)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Label {
    Cluster(usize),
    Escape(Direction),
}

struct Cluster {
    location: f64,
    members: Vec<(f64, f64)>, // (x0, residual)
}

struct Scanner<'a> {
    system: &'a SdeSystem,
    r: f64,
    grid: Grid,
    time: TimeSpec,
    settle_tol: f64,
    merge_tol: f64,
}

impl Scanner<'_> {
    fn orbit(&self, x0: f64) -> Result<MeanOrbit> {
        mean_orbit(self.system, self.r, &self.grid, x0, self.time)
            .map_err(|e| e.at(self.r, Some(x0)))
    }

    fn classify(&self, orbit: &MeanOrbit) -> Outcome {
        let center = self.grid.center();
        let last = orbit.final_mean();
        let direction = if last < center {
            Direction::Negative
        } else {
            Direction::Positive
        };
        if orbit.flags.truncated || (last - center).abs() > ESCAPE_FRACTION * self.grid.half_width()
        {
            return Outcome::Escaped(direction);
        }
        let t = orbit.final_time();
        let residual = (last - orbit.mean_near(t - 0.1 * t)).abs();
        if residual < self.settle_tol {
            Outcome::Settled {
                terminal: last,
                residual,
            }
        } else {
            Outcome::Unsettled {
                terminal: last,
                residual,
            }
        }
    }

    fn run(&self, x0: f64) -> Result<FanOrbit> {
        let orbit = self.orbit(x0)?;
        Ok(FanOrbit {
            x0,
            outcome: self.classify(&orbit),
            survival: *orbit.surviving_mass.last().unwrap_or(&1.0),
        })
    }

    fn label(&self, outcome: &Outcome, clusters: &[Cluster]) -> Option<Label> {
        match *outcome {
            Outcome::Escaped(d) => Some(Label::Escape(d)),
            Outcome::Settled { terminal, .. } => clusters
                .iter()
                .enumerate()
                .map(|(k, c)| (k, (c.location - terminal).abs()))
                .filter(|&(_, d)| d <= self.merge_tol)
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(k, _)| Label::Cluster(k)),
            Outcome::Unsettled { .. } => None,
        }
    }

    /// Where an outcome leaves the mean: its terminal value, or the wall.
    fn value(&self, outcome: &Outcome) -> f64 {
        match *outcome {
            Outcome::Settled { terminal, .. } | Outcome::Unsettled { terminal, .. } => terminal,
            Outcome::Escaped(d) => self.wall(d),
        }
    }

    fn wall(&self, d: Direction) -> f64 {
        match d {
            Direction::Negative => self.grid.x_min(),
            Direction::Positive => self.grid.x_max(),
        }
    }

    fn anchor(&self, label: Label, clusters: &[Cluster]) -> f64 {
        match label {
            Label::Cluster(k) => clusters[k].location,
            Label::Escape(d) => self.wall(d),
        }
    }

    /// Locate the `x0` threshold between two outcomes.
    fn boundary(
        &self,
        (mut lo, left): (f64, Label),
        (mut hi, right): (f64, Label),
        clusters: &[Cluster],
        bisect: bool,
    ) -> Result<MeanEquilibrium> {
        let mut residual: f64 = 0.0;
        let mut notes = Vec::new();
        let mut mixed = false;
        while bisect && hi - lo > self.merge_tol {
            let mid = 0.5 * (lo + hi);
            let fo = self.run(mid)?;
            if let Outcome::Settled { residual: res, .. } = fo.outcome {
                residual = residual.max(res);
            }
            match self.label(&fo.outcome, clusters) {
                Some(l) if l == left => lo = mid,
                Some(l) if l == right => hi = mid,
                _ => {
                    // part of the density goes each way; follow the dominant part
                    let v = self.value(&fo.outcome);
                    let dl = (v - self.anchor(left, clusters)).abs();
                    let dr = (v - self.anchor(right, clusters)).abs();
                    if (dl - dr).abs() <= 1e-6 * (dl + dr) {
                        // an even split: `mid` is the threshold
                        lo = mid;
                        hi = mid;
                    } else if dl < dr {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    mixed = true;
                }
            }
        }
        if mixed {
            notes.push("threshold orbits split between both outcomes".to_string());
        }
        if !bisect {
            notes.push("located by fan bracket only".to_string());
        }
        Ok(MeanEquilibrium {
            location: 0.5 * (lo + hi),
            stability: Stability::Unstable,
            basin_sample: vec![lo, hi],
            residual,
            notes,
        })
    }
}

fn cluster_terminals(points: &mut [(f64, f64, f64)], merge_tol: f64) -> Vec<Cluster> {
    // points: (terminal, x0, residual)
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut clusters: Vec<Vec<(f64, f64, f64)>> = Vec::new();
    for &p in points.iter() {
        match clusters.last_mut() {
            Some(c) if p.0 - c.last().unwrap().0 <= merge_tol => c.push(p),
            _ => clusters.push(vec![p]),
        }
    }
    clusters
        .into_iter()
        .map(|c| Cluster {
            location: c.iter().map(|p| p.0).sum::<f64>() / c.len() as f64,
            members: c.iter().map(|p| (p.1, p.2)).collect(),
        })
        .collect()
}

/// Resolve unstable points that collide with stable ones.
fn merge_collisions(mut eqs: Vec<MeanEquilibrium>, merge_tol: f64) -> Vec<MeanEquilibrium> {
    eqs.sort_by(|a, b| a.location.total_cmp(&b.location));

    // coincident unstable points
    let mut merged: Vec<MeanEquilibrium> = Vec::with_capacity(eqs.len());
    for e in eqs {
        match merged.last_mut() {
            Some(prev)
                if prev.stability == Stability::Unstable
                    && e.stability == Stability::Unstable
                    && e.location - prev.location < merge_tol =>
            {
                prev.location = 0.5 * (prev.location + e.location);
                prev.basin_sample.extend(e.basin_sample);
                prev.residual = prev.residual.max(e.residual);
            }
            _ => merged.push(e),
        }
    }

    let mut out: Vec<MeanEquilibrium> = Vec::with_capacity(merged.len());
    let mut i = 0;
    while i < merged.len() {
        let e = &merged[i];
        if e.stability == Stability::Stable {
            out.push(e.clone());
            i += 1;
            continue;
        }
        let near_left = out
            .last()
            .filter(|p| p.stability == Stability::Stable && e.location - p.location < merge_tol)
            .is_some();
        let near_right = merged
            .get(i + 1)
            .filter(|n| n.stability == Stability::Stable && n.location - e.location < merge_tol)
            .is_some();
        match (near_left, near_right) {
            (false, false) => out.push(e.clone()),
            (true, false) => {
                let p = out.last_mut().unwrap();
                p.notes.push(format!(
                    "half-stable: repels on the right (threshold at {:.4})",
                    e.location
                ));
            }
            (false, true) => {
                let mut n = merged[i + 1].clone();
                n.notes.push(format!(
                    "half-stable: repels on the left (threshold at {:.4})",
                    e.location
                ));
                out.push(n);
                i += 1;
            }
            (true, true) => {
                // two stable points straddling an unstable one within merge_tol
                let n = merged[i + 1].clone();
                let p = out.last_mut().unwrap();
                p.location = (p.location + e.location + n.location) / 3.0;
                p.basin_sample.extend(n.basin_sample);
                p.residual = p.residual.max(n.residual);
                p.notes
                    .push("merged with an unresolved stable/unstable pair".into());
                i += 1;
            }
        }
        i += 1;
    }
    out
}

/// Detect mean equilibria of `system` at parameter `r`.
///
/// Orbits that never settle, or whose mean escapes the domain, contribute no
/// equilibrium; they are recorded in the diagnostics and `escapes`.
pub fn detect_equilibria(
    system: &SdeSystem,
    r: f64,
    config: &ScanConfig,
) -> Result<EquilibriumScan> {
    config.validate()?;
    let grid = config.domain.resolve(system.name(), r)?;
    let merge_tol = config.effective_merge_tol(&grid);
    let scanner = Scanner {
        system,
        r,
        grid,
        time: config.time_spec()?,
        settle_tol: config.settle_tol,
        merge_tol,
    };

    let x0_fan = config.fan.points(&grid);
    let interior = x0_fan
        .iter()
        .filter(|&&x| x > grid.x_min() + 3.0 * grid.h() && x < grid.x_max() - 3.0 * grid.h())
        .count();
    if interior < MIN_FAN || interior < x0_fan.len() {
        return Err(Error::Precondition(format!(
            "fan needs at least {MIN_FAN} points, all inside the grid interior ({interior} of {} are)",
            x0_fan.len()
        )));
    }

    let fan: Vec<FanOrbit> = x0_fan
        .par_iter()
        .map(|&x0| scanner.run(x0))
        .collect::<Result<_>>()?;

    let mut diagnostics = Vec::new();
    let conditioned = grid.policy() == crate::fpe::BoundaryPolicy::Absorbing;
    if conditioned {
        diagnostics.push(
            "conditioned means under absorbing boundaries; locations depend on the domain truncation"
                .to_string(),
        );
    }

    let escapes: Vec<(f64, Direction)> = fan
        .iter()
        .filter_map(|f| match f.outcome {
            Outcome::Escaped(d) => Some((f.x0, d)),
            _ => None,
        })
        .collect();
    let unsettled: Vec<f64> = fan
        .iter()
        .filter(|f| matches!(f.outcome, Outcome::Unsettled { .. }))
        .map(|f| f.x0)
        .collect();
    if !unsettled.is_empty() {
        diagnostics.push(format!(
            "{} unsettled orbit(s) from x0 = {:?}",
            unsettled.len(),
            unsettled
        ));
    }

    let mut settled: Vec<(f64, f64, f64)> = fan
        .iter()
        .filter_map(|f| match f.outcome {
            Outcome::Settled { terminal, residual } => Some((terminal, f.x0, residual)),
            _ => None,
        })
        .collect();
    let all_clusters = cluster_terminals(&mut settled, merge_tol);

    let stationary = all_clusters
        .iter()
        .filter(|c| c.members.len() == 1 && (c.members[0].0 - c.location).abs() < merge_tol)
        .count();
    let mut scan = EquilibriumScan {
        r,
        equilibria: Vec::new(),
        x0_fan: x0_fan.clone(),
        fan,
        escapes,
        diagnostics,
        grid: Some(grid),
        t_final: config.t_final,
        dt: config.dt,
        settle_tol: config.settle_tol,
        merge_tol,
        conditioned,
        error: None,
    };
    if 2 * stationary > scan.fan.len() {
        scan.diagnostics
            .push("degenerate: continuum of equilibria (orbits do not move)".to_string());
        return Ok(scan);
    }

    let (clusters, isolated): (Vec<Cluster>, Vec<Cluster>) =
        all_clusters.into_iter().partition(|c| c.members.len() >= 2);
    if !isolated.is_empty() {
        let locs: Vec<String> = isolated
            .iter()
            .map(|c| format!("{:.4} (x0 = {})", c.location, c.members[0].0))
            .collect();
        scan.diagnostics
            .push(format!("isolated terminal values: {}", locs.join(", ")));
    }
    if clusters.is_empty() && scan.escapes.is_empty() {
        scan.diagnostics.push("no settled orbit".to_string());
    }

    let mut equilibria: Vec<MeanEquilibrium> = clusters
        .iter()
        .map(|c| {
            let mut notes = Vec::new();
            let below = c.members.iter().any(|m| m.0 < c.location);
            let above = c.members.iter().any(|m| m.0 > c.location);
            if !(below && above) {
                notes.push("approached from one side only".to_string());
            }
            MeanEquilibrium {
                location: c.location,
                stability: Stability::Stable,
                basin_sample: c.members.iter().map(|m| m.0).collect(),
                residual: c.members.iter().map(|m| m.1).fold(0.0, f64::max),
                notes,
            }
        })
        .collect();

    // thresholds between consecutive labelled fan points
    let labelled: Vec<(f64, Label)> = scan
        .fan
        .iter()
        .filter_map(|f| scanner.label(&f.outcome, &clusters).map(|l| (f.x0, l)))
        .collect();
    let brackets: Vec<((f64, Label), (f64, Label))> = labelled
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| (w[0], w[1]))
        .collect();
    let unstable: Vec<MeanEquilibrium> = brackets
        .into_par_iter()
        .map(|(a, b)| scanner.boundary(a, b, &clusters, config.bisect))
        .collect::<Result<_>>()?;
    equilibria.extend(unstable);

    scan.equilibria = merge_collisions(equilibria, merge_tol);
    if conditioned {
        for e in &mut scan.equilibria {
            e.notes
                .push("conditioned mean; truncation-dependent".to_string());
        }
    }
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpe::BoundaryPolicy;
    use crate::systems::{lookup_builtin, parse_polynomial_system};

    fn det_config() -> ScanConfig {
        ScanConfig {
            domain: DomainSpec::fixed(-3.0, 3.0, 600, BoundaryPolicy::Reflecting),
            t_final: 40.0,
            dt: 1e-2,
            stride: 10,
            ..ScanConfig::default()
        }
    }

    fn locations(scan: &EquilibriumScan, s: Stability) -> Vec<f64> {
        scan.of_kind(s).map(|e| e.location).collect()
    }

    #[test]
    fn deterministic_pitchfork_three_equilibria() {
        let sys = lookup_builtin("pitchfork").unwrap().deterministic();
        let scan = detect_equilibria(&sys, 1.0, &det_config()).unwrap();
        let stable = locations(&scan, Stability::Stable);
        let unstable = locations(&scan, Stability::Unstable);
        assert_eq!(stable.len(), 2, "{scan:#?}");
        assert!((stable[0] + 1.0).abs() < 0.02 && (stable[1] - 1.0).abs() < 0.02);
        assert_eq!(unstable.len(), 1);
        assert!(unstable[0].abs() < 0.02);
    }

    #[test]
    fn deterministic_transcritical_negative_r() {
        let sys = lookup_builtin("transcritical").unwrap().deterministic();
        let scan = detect_equilibria(&sys, -1.0, &det_config()).unwrap();
        let stable = locations(&scan, Stability::Stable);
        let unstable = locations(&scan, Stability::Unstable);
        assert_eq!(stable.len(), 1, "{scan:#?}");
        assert!(stable[0].abs() < 0.02);
        assert_eq!(unstable.len(), 1);
        assert!((unstable[0] + 1.0).abs() < 0.02, "{unstable:?}");
        assert!(scan
            .escapes
            .iter()
            .all(|&(x0, d)| x0 < -1.0 && d == Direction::Negative));
    }

    #[test]
    fn zero_system_is_degenerate() {
        let sys = parse_polynomial_system(&[], &[]).unwrap();
        let cfg = ScanConfig {
            t_final: 2.0,
            dt: 0.1,
            stride: 1,
            ..det_config()
        };
        let scan = detect_equilibria(&sys, 0.0, &cfg).unwrap();
        assert!(scan.equilibria.is_empty());
        assert!(scan.diagnostics.iter().any(|d| d.starts_with("degenerate")));
    }

    #[test]
    fn saddle_node_positive_r_all_escape() {
        let sys = lookup_builtin("saddle-node").unwrap().deterministic();
        let scan = detect_equilibria(&sys, 1.0, &det_config()).unwrap();
        assert!(scan.equilibria.is_empty());
        assert_eq!(scan.escapes.len(), scan.fan.len());
        assert!(scan.escapes.iter().all(|e| e.1 == Direction::Positive));
    }

    #[test]
    fn small_fan_rejected() {
        let sys = lookup_builtin("pitchfork").unwrap();
        let cfg = ScanConfig {
            fan: FanSpec::Points(vec![-1.0, 0.0, 1.0]),
            ..det_config()
        };
        assert!(matches!(
            detect_equilibria(&sys, 1.0, &cfg),
            Err(Error::Precondition(_))
        ));
        let cfg = ScanConfig {
            fan: FanSpec::Points(vec![-1.0, -0.5, 0.0, 0.5, 1.0, 2.999]),
            ..det_config()
        };
        assert!(detect_equilibria(&sys, 1.0, &cfg).is_err());
    }

    #[test]
    fn fan_spans_central_fraction() {
        let g = Grid::new(-6.0, 6.0, 1200, BoundaryPolicy::Reflecting).unwrap();
        let pts = FanSpec::default().points(&g);
        assert_eq!(pts.len(), 21);
        assert!((pts[0] + 4.8).abs() < 1e-12 && (pts[20] - 4.8).abs() < 1e-12);
        assert!(pts[10].abs() < 1e-12);
    }

    #[test]
    fn signature_display() {
        assert_eq!(
            Signature {
                stable: 2,
                unstable: 1
            }
            .to_string(),
            "2S1U"
        );
        assert_eq!(Signature::default().to_string(), "none");
    }

    fn eq(location: f64, stability: Stability) -> MeanEquilibrium {
        MeanEquilibrium {
            location,
            stability,
            basin_sample: vec![],
            residual: 0.0,
            notes: vec![],
        }
    }

    #[test]
    fn collisions_resolve_to_half_stable_or_merge() {
        use Stability::*;
        let out = merge_collisions(
            vec![eq(0.0, Stable), eq(0.01, Unstable), eq(1.0, Stable)],
            0.02,
        );
        assert_eq!(out.len(), 2);
        assert!(out[0].notes[0].starts_with("half-stable"));

        let out = merge_collisions(
            vec![eq(-0.015, Stable), eq(0.0, Unstable), eq(0.015, Stable)],
            0.02,
        );
        assert_eq!(out.len(), 1);
        assert!(out[0].location.abs() < 1e-12);

        let out = merge_collisions(
            vec![eq(-1.0, Stable), eq(0.0, Unstable), eq(1.0, Stable)],
            0.02,
        );
        assert_eq!(out.len(), 3);
    }
}
