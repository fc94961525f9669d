//! Finite-volume solver for the 1-D Fokker-Planck equation
//!
//! ```text
//! p_t = -(f(r, x) p)_x + 1/2 (σ(x)² p)_xx
//! ```
//!
//! on a truncated, cell-centered grid. Interface fluxes upwind the advective
//! part by the sign of the drift at the interface and difference `σ²p`
//! between neighbouring cell centers, so the discrete operator conserves
//! mass exactly under zero-flux boundaries and has nonnegative
//! off-diagonals. Time stepping is implicit Euler with a Thomas solve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::systems::SdeSystem;

pub const MIN_CELLS: usize = 16;
const PIVOT_FLOOR: f64 = 1e-300;
const CLIP_RELATIVE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPolicy {
    /// Zero flux through both ends; mass is conserved.
    #[default]
    Reflecting,
    /// Zero density in the ghost cells; mass leaks out.
    Absorbing,
}

impl std::str::FromStr for BoundaryPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflecting" => Ok(Self::Reflecting),
            "absorbing" => Ok(Self::Absorbing),
            other => Err(Error::Config(format!(
                "unknown boundary policy `{other}` (valid: reflecting, absorbing)"
            ))),
        }
    }
}

impl std::fmt::Display for BoundaryPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Reflecting => "reflecting",
            Self::Absorbing => "absorbing",
        })
    }
}

/// How the diffusive part of the interface flux is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FluxForm {
    /// `F = (f - D')⁺ p_i + (f - D')⁻ p_{i+1} - D(x_{i+½}) (p_{i+1} - p_i) / h`
    /// with `D = σ²/2` and `D'` differenced between the adjacent cell centers.
    /// The flux vanishes wherever both `f` and `σ` vanish at an interface.
    #[default]
    Interface,
    /// `F = f⁺ p_i + f⁻ p_{i+1} - (D_{i+1} p_{i+1} - D_i p_i) / h`, differencing
    /// `σ²p` between cell centers.
    CellCenter,
}

impl std::str::FromStr for FluxForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interface" => Ok(Self::Interface),
            "cell-center" => Ok(Self::CellCenter),
            other => Err(Error::Config(format!(
                "unknown flux form `{other}` (valid: interface, cell-center)"
            ))),
        }
    }
}

impl std::fmt::Display for FluxForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Interface => "interface",
            Self::CellCenter => "cell-center",
        })
    }
}

/// Uniform cell-centered mesh on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
    h: f64,
    policy: BoundaryPolicy,
    flux: FluxForm,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize, policy: BoundaryPolicy) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::InvalidRange { x_min, x_max });
        }
        if n < MIN_CELLS {
            return Err(Error::TooFewCells(n));
        }
        Ok(Self {
            x_min,
            x_max,
            n,
            h: (x_max - x_min) / n as f64,
            policy,
            flux: FluxForm::default(),
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn policy(&self) -> BoundaryPolicy {
        self.policy
    }

    pub fn with_policy(mut self, policy: BoundaryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn flux(&self) -> FluxForm {
        self.flux
    }

    pub fn with_flux(mut self, flux: FluxForm) -> Self {
        self.flux = flux;
        self
    }

    /// Center of cell `i`.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.h
    }

    /// Left edge of cell `i` (`i == n` gives `x_max`).
    #[inline]
    pub fn interface(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.x_min + self.x_max)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.x_max - self.x_min)
    }
}

/// Build a grid, validating the range and cell count.
pub fn build_grid(x_min: f64, x_max: f64, n: usize, policy: BoundaryPolicy) -> Result<Grid> {
    Grid::new(x_min, x_max, n, policy)
}

/// Target cell width for grids whose cell count is not given.
pub const DEFAULT_CELL_WIDTH: f64 = 0.01;
/// Half-width of the default symmetric domain.
pub const DEFAULT_HALF_WIDTH: f64 = 6.0;

/// Default truncated domain and boundary policy for a system at parameter `r`.
///
/// The saddle-node drift `r + x²` pushes all mass to `+∞` in finite time when
/// `r > 0`; there the default is absorbing (means conditioned on survival).
/// For `r < 0` the domain widens to keep `±√-r` well inside.
pub fn default_domain(system_name: &str, r: f64) -> (f64, f64, BoundaryPolicy) {
    match system_name {
        "saddle-node" => {
            let half = DEFAULT_HALF_WIDTH.max(3.0 * r.abs().sqrt());
            let policy = if r > 0.0 {
                BoundaryPolicy::Absorbing
            } else {
                BoundaryPolicy::Reflecting
            };
            (-half, half, policy)
        }
        _ => (
            -DEFAULT_HALF_WIDTH,
            DEFAULT_HALF_WIDTH,
            BoundaryPolicy::Reflecting,
        ),
    }
}

/// Grid request; unset fields fall back to [`default_domain`] and
/// [`DEFAULT_CELL_WIDTH`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub cells: Option<usize>,
    pub policy: Option<BoundaryPolicy>,
    pub flux: Option<FluxForm>,
}

impl DomainSpec {
    pub fn fixed(x_min: f64, x_max: f64, cells: usize, policy: BoundaryPolicy) -> Self {
        Self {
            x_min: Some(x_min),
            x_max: Some(x_max),
            cells: Some(cells),
            policy: Some(policy),
            flux: None,
        }
    }

    pub fn resolve(&self, system_name: &str, r: f64) -> Result<Grid> {
        let (lo, hi, policy) = default_domain(system_name, r);
        let x_min = self.x_min.unwrap_or(lo);
        let x_max = self.x_max.unwrap_or(hi);
        let cells = match self.cells {
            Some(n) => n,
            None => {
                // even count so a symmetric domain has an interface at 0
                let n = ((x_max - x_min) / DEFAULT_CELL_WIDTH).round().max(0.0) as usize;
                n + n % 2
            }
        };
        Ok(
            Grid::new(x_min, x_max, cells, self.policy.unwrap_or(policy))?
                .with_flux(self.flux.unwrap_or_default()),
        )
    }
}

/// Discretized probability density on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
    time: f64,
}

impl DensityField {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "density has {} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Precondition(
                "density values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { grid, values, time })
    }

    /// Uniform density `1 / (x_max - x_min)`.
    pub fn uniform(grid: Grid) -> Self {
        let v = 1.0 / (grid.x_max - grid.x_min);
        Self {
            grid,
            values: vec![v; grid.len()],
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn mass(&self) -> f64 {
        self.grid.h * self.values.iter().sum::<f64>()
    }

    /// `h Σ φ(x_i) p_i`, not normalized by the mass.
    pub fn integrate(&self, phi: impl Fn(f64) -> f64) -> f64 {
        let g = &self.grid;
        g.h * self
            .values
            .iter()
            .enumerate()
            .map(|(i, p)| phi(g.node(i)) * p)
            .sum::<f64>()
    }

    /// Raw (unnormalized) second moment about `c`.
    pub fn central_moment2(&self, c: f64) -> f64 {
        self.integrate(|x| (x - c) * (x - c)) / self.mass()
    }

    /// Density in the two outermost cells, the boundary-leakage indicator.
    pub fn boundary_density(&self) -> f64 {
        self.values[0].max(self.values[self.values.len() - 1])
    }
}

/// Gaussian approximation of `δ(x - x0)` with standard deviation `2h`,
/// normalized to unit discrete mass.
pub fn delta_init(grid: &Grid, x0: f64) -> Result<DensityField> {
    let h = grid.h;
    if !(x0 > grid.x_min + 3.0 * h && x0 < grid.x_max - 3.0 * h) {
        return Err(Error::X0NearBoundary {
            x0,
            x_min: grid.x_min,
            x_max: grid.x_max,
        });
    }
    let s = 2.0 * h;
    let mut values: Vec<f64> = (0..grid.n)
        .map(|i| {
            let z = (grid.node(i) - x0) / s;
            (-0.5 * z * z).exp()
        })
        .collect();
    let mass = h * values.iter().sum::<f64>();
    values.iter_mut().for_each(|v| *v /= mass);
    Ok(DensityField {
        grid: *grid,
        values,
        time: 0.0,
    })
}

/// Tridiagonal spatial operator `L` with `dp/dt = L p`.
///
/// Row `i` reads `(L p)_i = sub[i] p[i-1] + diag[i] p[i] + sup[i] p[i+1]`;
/// `sub[0]` and `sup[n-1]` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FpeOperator {
    grid: Grid,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl FpeOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sub(&self) -> &[f64] {
        &self.sub
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn sup(&self) -> &[f64] {
        &self.sup
    }

    /// Largest entry magnitude, for relative tolerances.
    pub fn scale(&self) -> f64 {
        self.sub
            .iter()
            .chain(&self.diag)
            .chain(&self.sup)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let n = p.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * p[i];
                if i > 0 {
                    acc += self.sub[i] * p[i - 1];
                }
                if i + 1 < n {
                    acc += self.sup[i] * p[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Sums of each column, zero for a mass-conserving operator.
    pub fn column_sums(&self) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|j| {
                let mut s = self.diag[j];
                if j > 0 {
                    s += self.sup[j - 1];
                }
                if j + 1 < n {
                    s += self.sub[j + 1];
                }
                s
            })
            .collect()
    }
}

/// Assemble the flux-form operator for `system` at parameter `r`.
pub fn assemble_operator(system: &SdeSystem, r: f64, grid: &Grid) -> FpeOperator {
    let n = grid.n;
    let h = grid.h;
    let inv_h = 1.0 / h;
    // D_i = σ(x_i)² / 2 at cell centers
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let s = system.diffusion(grid.node(i));
            0.5 * s * s
        })
        .collect();

    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];

    // Interior interface between cells i and i+1, with F/h = a p_i + b p_{i+1}
    for i in 0..n - 1 {
        let xf = grid.interface(i + 1);
        let f = system.drift(r, xf);
        let (a, b) = match grid.flux {
            FluxForm::Interface => {
                let s = system.diffusion(xf);
                let d_face = 0.5 * s * s;
                let v = f - (d[i + 1] - d[i]) * inv_h;
                (
                    (v.max(0.0) + d_face * inv_h) * inv_h,
                    (v.min(0.0) - d_face * inv_h) * inv_h,
                )
            }
            FluxForm::CellCenter => (
                (f.max(0.0) + d[i] * inv_h) * inv_h,
                (f.min(0.0) - d[i + 1] * inv_h) * inv_h,
            ),
        };
        diag[i] -= a;
        sup[i] -= b;
        sub[i + 1] += a;
        diag[i + 1] += b;
    }

    if grid.policy == BoundaryPolicy::Absorbing {
        // ghost cells hold zero density
        let half_d = |x: f64| {
            let s = system.diffusion(x);
            0.5 * s * s
        };
        let f_left = system.drift(r, grid.x_min);
        let f_right = system.drift(r, grid.x_max);
        let (out_left, out_right) = match grid.flux {
            FluxForm::Interface => {
                let v_left = f_left - (d[0] - half_d(grid.x_min - 0.5 * h)) * inv_h;
                let v_right = f_right - (half_d(grid.x_max + 0.5 * h) - d[n - 1]) * inv_h;
                (
                    v_left.min(0.0) - half_d(grid.x_min) * inv_h,
                    v_right.max(0.0) + half_d(grid.x_max) * inv_h,
                )
            }
            FluxForm::CellCenter => (
                f_left.min(0.0) - d[0] * inv_h,
                f_right.max(0.0) + d[n - 1] * inv_h,
            ),
        };
        diag[0] += out_left * inv_h;
        diag[n - 1] -= out_right * inv_h;
    }

    FpeOperator {
        grid: *grid,
        sub,
        diag,
        sup,
    }
}

/// Outcome bookkeeping for one implicit step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    /// Most negative pre-clipping value relative to `max(p)` (0 when none).
    pub negativity: f64,
    /// Whether any value was clipped to zero.
    pub clipped: bool,
}

/// Pre-factored `(I - dt L)` for repeated implicit Euler steps.
#[derive(Debug, Clone)]
pub struct ImplicitStepper {
    grid: Grid,
    dt: f64,
    sub: Vec<f64>,
    sup_scaled: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl ImplicitStepper {
    pub fn new(op: &FpeOperator, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Precondition(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let n = op.diag.len();
        let sub: Vec<f64> = op.sub.iter().map(|v| -dt * v).collect();
        let mut sup_scaled = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            let b = 1.0 - dt * op.diag[i];
            let pivot = if i == 0 { b } else { b - sub[i] * prev };
            if !(pivot.abs() >= PIVOT_FLOOR) {
                return Err(Error::SingularSystem { row: i, pivot });
            }
            let inv = 1.0 / pivot;
            inv_pivot[i] = inv;
            prev = -dt * op.sup[i] * inv;
            sup_scaled[i] = prev;
        }
        Ok(Self {
            grid: op.grid,
            dt,
            sub,
            sup_scaled,
            inv_pivot,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance `field` in place by one step.
    pub fn advance(&self, field: &mut DensityField) -> Result<StepStats> {
        if field.grid != self.grid {
            return Err(Error::GridMismatch);
        }
        let old_mass = field.mass();
        let p = &mut field.values;
        let n = p.len();
        // forward sweep
        p[0] *= self.inv_pivot[0];
        for i in 1..n {
            p[i] = (p[i] - self.sub[i] * p[i - 1]) * self.inv_pivot[i];
        }
        // back substitution
        for i in (0..n - 1).rev() {
            p[i] -= self.sup_scaled[i] * p[i + 1];
        }
        field.time += self.dt;

        let mut stats = StepStats::default();
        let (min, max) = p.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        if !min.is_finite() || !max.is_finite() {
            return Err(Error::SingularSystem {
                row: 0,
                pivot: f64::NAN,
            });
        }
        if min < 0.0 {
            stats.negativity = -min / max.max(f64::MIN_POSITIVE);
            stats.clipped = true;
            if stats.negativity > CLIP_RELATIVE {
                log::warn!(
                    "clipping negative density {:e} (relative {:e}) at t = {}",
                    min,
                    stats.negativity,
                    field.time
                );
            }
            p.iter_mut().for_each(|v| *v = v.max(0.0));
            if self.grid.policy == BoundaryPolicy::Reflecting {
                let new_mass = field.mass();
                if new_mass > 0.0 {
                    let k = old_mass / new_mass;
                    field.values.iter_mut().for_each(|v| *v *= k);
                }
            }
        }
        Ok(stats)
    }
}

/// One implicit Euler step `(I - dt L) p_new = p_old`.
pub fn step(op: &FpeOperator, field: &DensityField, dt: f64) -> Result<DensityField> {
    if field.grid != op.grid {
        return Err(Error::GridMismatch);
    }
    let stepper = ImplicitStepper::new(op, dt)?;
    let mut next = field.clone();
    stepper.advance(&mut next)?;
    Ok(next)
}

/// Time-integration settings shared by the evolution drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub t_final: f64,
    pub dt: f64,
    /// Number of steps between recorded samples.
    pub stride: usize,
}

impl TimeSpec {
    pub fn new(t_final: f64, dt: f64, stride: usize) -> Result<Self> {
        let spec = Self {
            t_final,
            dt,
            stride,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Precondition(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if !(self.dt > 0.0 && self.dt <= self.t_final) {
            return Err(Error::Precondition(format!(
                "dt must lie in (0, t_final], got {}",
                self.dt
            )));
        }
        if self.stride == 0 {
            return Err(Error::Precondition("sample stride must be positive".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }

    /// Whether step `k` (1-based, after the step) is recorded.
    pub fn is_sample(&self, k: usize) -> bool {
        k % self.stride == 0 || k == self.steps()
    }
}

/// Summary of a completed evolution.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvolveStats {
    pub steps: usize,
    pub max_negativity: f64,
    pub clipped_steps: usize,
    pub max_boundary_density: f64,
    /// Survival probability at the last completed step.
    pub survival: f64,
    /// The surviving mass underflowed and the evolution stopped early.
    pub vanished: bool,
}

/// Evolve from `delta_init(grid, x0)`, calling `observe(field, survival)` on
/// the initial field and at every sample. `observe` returns `false` to stop.
///
/// Under absorbing boundaries the field handed to `observe` is the density
/// conditioned on survival (unit mass); the survival probability is tracked
/// separately in log space so long runs never underflow the density itself.
pub fn evolve_with<F>(
    system: &SdeSystem,
    r: f64,
    grid: &Grid,
    x0: f64,
    time: TimeSpec,
    mut observe: F,
) -> Result<EvolveStats>
where
    F: FnMut(&DensityField, f64) -> bool,
{
    time.validate()?;
    let mut field = delta_init(grid, x0)?;
    let op = assemble_operator(system, r, grid);
    let stepper = ImplicitStepper::new(&op, time.dt)?;
    let absorbing = grid.policy == BoundaryPolicy::Absorbing;
    let mut log_survival = 0.0f64;
    let mut stats = EvolveStats {
        survival: 1.0,
        ..Default::default()
    };
    if !observe(&field, 1.0) {
        return Ok(stats);
    }
    let steps = time.steps();
    for k in 1..=steps {
        let s = stepper.advance(&mut field)?;
        // recompute rather than accumulate so sample times print cleanly
        field.time = if k == steps {
            time.t_final
        } else {
            k as f64 * time.dt
        };
        if s.clipped {
            stats.clipped_steps += 1;
            stats.max_negativity = stats.max_negativity.max(s.negativity);
        }
        let survival = if absorbing {
            let m = field.mass();
            log_survival += m.ln();
            if !(m > 0.0 && log_survival >= f64::MIN_POSITIVE.ln()) {
                stats.vanished = true;
                break;
            }
            let inv = 1.0 / m;
            field.values.iter_mut().for_each(|v| *v *= inv);
            log_survival.exp()
        } else {
            field.mass()
        };
        stats.steps = k;
        stats.survival = survival;
        if time.is_sample(k) {
            stats.max_boundary_density = stats.max_boundary_density.max(field.boundary_density());
            if !observe(&field, survival) {
                break;
            }
        }
    }
    Ok(stats)
}

/// Evolve and collect density snapshots at every sample time.
///
/// Snapshots carry the unconditioned density, so under absorbing boundaries
/// their mass is the survival probability.
pub fn evolve(
    system: &SdeSystem,
    r: f64,
    grid: &Grid,
    x0: f64,
    time: TimeSpec,
) -> Result<Vec<DensityField>> {
    let mut snaps = Vec::new();
    let absorbing = grid.policy == BoundaryPolicy::Absorbing;
    evolve_with(system, r, grid, x0, time, |f, survival| {
        let mut snap = f.clone();
        if absorbing {
            snap.values.iter_mut().for_each(|v| *v *= survival);
        }
        snaps.push(snap);
        true
    })?;
    Ok(snaps)
}

/// Write snapshots as CSV with header `t,x,p`.
pub fn write_snapshots_csv<W: std::io::Write>(
    mut out: W,
    snapshots: &[DensityField],
) -> std::io::Result<()> {
    writeln!(out, "t,x,p")?;
    for s in snapshots {
        for (i, p) in s.values.iter().enumerate() {
            writeln!(out, "{},{},{}", s.time, s.grid.node(i), p)?;
        }
    }
    Ok(())
}
