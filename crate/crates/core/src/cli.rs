//! Command-line front end.
//!
//! Settings come from flags, then an optional TOML file (`--config`), then
//! defaults. Everything is validated before any computation, so a bad
//! setting never leaves partial output behind. Every CSV starts with `#`
//! lines echoing the effective settings.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bifurcation::{
    sweep, write_diagram_csv, write_summary_csv, BifurcationDiagram, Mode, SweepConfig,
};
use crate::equilibria::{detect_equilibria, EquilibriumScan, FanSpec, ScanConfig};
use crate::error::{Error, Result};
use crate::fpe::{
    evolve, write_snapshots_csv, BoundaryPolicy, DomainSpec, FluxForm, Grid, TimeSpec,
};
use crate::montecarlo::{em_mean_orbit, EnsembleConfig};
use crate::orbit::{mean_orbit, write_orbits_csv, MeanOrbit};
use crate::systems::{lookup_builtin, parse_polynomial_system, SdeSystem};

/// Default output directory when `--out-dir` is not given.
pub const OUT_DIR_ENV: &str = "STOCHBIF_OUT_DIR";

const ORACLE_T_FINAL: f64 = 5.0;
const DETERMINISTIC_T_FINAL: f64 = 200.0;
const DETERMINISTIC_DT: f64 = 1e-2;

/// Sweeps run by `reproduce`: system, r range, number of samples.
pub const REPRODUCE_SWEEPS: [(&str, f64, f64, usize); 3] = [
    ("saddle-node", -1.0, 1.0, 41),
    ("transcritical", -5.0, 2.0, 36),
    ("pitchfork", -0.5, 1.0, 31),
];

/// Polynomial coefficients `power:constant:r_multiplier`, comma separated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coeffs(pub Vec<(u32, f64, f64)>);

impl FromStr for Coeffs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |t: &str| {
            Error::Config(format!(
                "bad coefficient `{t}`, expected power:constant:r_multiplier"
            ))
        };
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                let parts: Vec<&str> = t.split(':').collect();
                if parts.len() != 3 {
                    return Err(bad(t));
                }
                Ok((
                    parts[0].parse().map_err(|_| bad(t))?,
                    parts[1].parse().map_err(|_| bad(t))?,
                    parts[2].parse().map_err(|_| bad(t))?,
                ))
            })
            .collect::<Result<_>>()
            .map(Coeffs)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "stochbif",
    version,
    about = "Mean phase portraits and bifurcation diagrams of scalar SDEs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Orbit,
    Scan,
    Sweep,
    Oracle,
    Reproduce,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Mean orbits from one or more initial points.
    Orbit(Args),
    /// Mean equilibria at one parameter value.
    Scan(Args),
    /// Bifurcation diagram over a range of r.
    Sweep(Args),
    /// Compare density-based orbits against an Euler–Maruyama ensemble.
    Oracle(Args),
    /// Stochastic and deterministic diagrams for the three builtin systems.
    Reproduce(Args),
}

impl Command {
    fn split(self) -> (CommandKind, Args) {
        match self {
            Command::Orbit(a) => (CommandKind::Orbit, a),
            Command::Scan(a) => (CommandKind::Scan, a),
            Command::Sweep(a) => (CommandKind::Sweep, a),
            Command::Oracle(a) => (CommandKind::Oracle, a),
            Command::Reproduce(a) => (CommandKind::Reproduce, a),
        }
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommandKind::Orbit => "orbit",
            CommandKind::Scan => "scan",
            CommandKind::Sweep => "sweep",
            CommandKind::Oracle => "oracle",
            CommandKind::Reproduce => "reproduce",
        })
    }
}

#[derive(clap::Args, Debug, Default)]
pub struct Args {
    /// TOML file with any of the settings below; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

/// All settings, as flags or config-file keys. Unset means default.
#[derive(clap::Args, Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Builtin system: saddle-node, transcritical or pitchfork.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    /// Polynomial drift, e.g. `0:0:1,2:1:0` for r + x².
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<Coeffs>,
    /// Polynomial diffusion σ(x), e.g. `1:1:0` for x.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<Coeffs>,
    /// deterministic drops the noise.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,

    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Initial points, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,

    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    /// Number of grid cells.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    /// reflecting or absorbing.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryPolicy>,
    /// interface or cell-center.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flux: Option<FluxForm>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Record every n-th time step.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fan_count: Option<usize>,
    /// Fraction of the domain covered by the fan.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fan_fraction: Option<f64>,
    /// Explicit fan points, comma separated; overrides count and fraction.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fan_points: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub settle_tol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub merge_tol: Option<f64>,
    /// Refine unstable points by bisection on x0.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bisect: Option<bool>,

    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    /// Number of r samples, endpoints included.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_steps: Option<usize>,
    /// Bisect bifurcation intervals in r down to this width.
    #[arg(long, num_args = 0..=1, default_missing_value = "0.01")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine: Option<f64>,

    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Ensemble paths leaving [-clip, clip] are dropped.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip: Option<f64>,

    /// Output directory; defaults to $STOCHBIF_OUT_DIR, then `.`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Also write the density snapshots of an orbit run.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_density: Option<bool>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr; $($f:ident),* $(,)?) => {
        Settings { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Settings {
    /// Fields set in `self` win over those in `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        overlay!(self, lower;
            system, drift, diffusion, mode, r, x0, x_min, x_max, cells, boundary, flux,
            t_final, dt, stride, fan_count, fan_fraction, fan_points, settle_tol, merge_tol,
            bisect, r_min, r_max, r_steps, refine, n_paths, seed, clip, out_dir, threads,
            dump_density)
    }

    pub fn from_toml(text: &str) -> Result<Settings> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    fn system(&self) -> Result<SdeSystem> {
        match (&self.system, &self.drift, &self.diffusion) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(Error::Config(
                "give either a builtin system or drift/diffusion coefficients, not both".into(),
            )),
            (Some(name), None, None) => lookup_builtin(name),
            (None, None, None) => Err(Error::Config("no system given".into())),
            (None, drift, diffusion) => parse_polynomial_system(
                drift.as_ref().map_or(&[][..], |c| &c.0),
                diffusion.as_ref().map_or(&[][..], |c| &c.0),
            ),
        }
    }

    fn require<T: Copy>(v: Option<T>, name: &str, cmd: CommandKind) -> Result<T> {
        v.ok_or_else(|| Error::Config(format!("`{cmd}` needs --{}", name.replace('_', "-"))))
    }

    fn domain(&self) -> DomainSpec {
        DomainSpec {
            x_min: self.x_min,
            x_max: self.x_max,
            cells: self.cells,
            policy: self.boundary,
            flux: self.flux,
        }
    }

    fn fan(&self) -> FanSpec {
        match &self.fan_points {
            Some(p) => FanSpec::Points(p.clone()),
            None => FanSpec::Uniform {
                count: self
                    .fan_count
                    .unwrap_or(crate::equilibria::DEFAULT_FAN_COUNT),
                fraction: self
                    .fan_fraction
                    .unwrap_or(crate::equilibria::DEFAULT_FAN_FRACTION),
            },
        }
    }

    fn scan_config(&self) -> ScanConfig {
        let d = ScanConfig::default();
        ScanConfig {
            domain: self.domain(),
            t_final: self.t_final.unwrap_or(d.t_final),
            dt: self.dt.unwrap_or(d.dt),
            stride: self.stride.unwrap_or(d.stride),
            fan: self.fan(),
            settle_tol: self.settle_tol.unwrap_or(d.settle_tol),
            merge_tol: self.merge_tol.unwrap_or(d.merge_tol),
            bisect: self.bisect.unwrap_or(d.bisect),
        }
    }

    /// Record the defaults that apply to `cmd` so the header shows them.
    fn fill_defaults(&mut self, cmd: CommandKind) {
        let scan = ScanConfig::default();
        self.mode.get_or_insert(Mode::default());
        let t_default = if cmd == CommandKind::Oracle {
            ORACLE_T_FINAL
        } else {
            scan.t_final
        };
        if cmd != CommandKind::Reproduce {
            self.t_final.get_or_insert(t_default);
            self.dt.get_or_insert(scan.dt);
        }
        self.stride.get_or_insert(scan.stride);
        self.flux.get_or_insert(FluxForm::default());
        if matches!(
            cmd,
            CommandKind::Scan | CommandKind::Sweep | CommandKind::Reproduce
        ) {
            if self.fan_points.is_none() {
                self.fan_count
                    .get_or_insert(crate::equilibria::DEFAULT_FAN_COUNT);
                self.fan_fraction
                    .get_or_insert(crate::equilibria::DEFAULT_FAN_FRACTION);
            }
            self.settle_tol.get_or_insert(scan.settle_tol);
            self.merge_tol.get_or_insert(scan.merge_tol);
            self.bisect.get_or_insert(scan.bisect);
        }
        if cmd == CommandKind::Oracle {
            let e = EnsembleConfig::default();
            self.n_paths.get_or_insert(e.n_paths);
            self.seed.get_or_insert(e.seed);
        }
        if cmd == CommandKind::Orbit {
            self.dump_density.get_or_insert(false);
        }
    }

    /// Pin the grid in the settings when it does not vary with r.
    fn pin_grid(&mut self, grid: &Grid) {
        self.x_min = Some(grid.x_min());
        self.x_max = Some(grid.x_max());
        self.cells = Some(grid.len());
        self.boundary = Some(grid.policy());
    }
}

/// A fully validated run, ready to execute.
enum Job {
    Orbit {
        system: SdeSystem,
        r: f64,
        x0: Vec<f64>,
        grid: Grid,
        time: TimeSpec,
        dump: bool,
    },
    Scan {
        system: SdeSystem,
        r: f64,
        mode: Mode,
        scan: ScanConfig,
    },
    Sweep {
        system: SdeSystem,
        sweep: SweepConfig,
    },
    Oracle {
        system: SdeSystem,
        r: f64,
        x0: Vec<f64>,
        grid: Grid,
        time: TimeSpec,
        ensemble: EnsembleConfig,
    },
    Reproduce(Vec<(String, SdeSystem, SweepConfig)>),
}

/// Resolved settings plus the work they describe.
pub struct Plan {
    pub command: CommandKind,
    pub settings: Settings,
    pub out_dir: PathBuf,
    job: Job,
}

fn check_x0(grid: &Grid, x0: &[f64]) -> Result<()> {
    if x0.is_empty() {
        return Err(Error::Config("--x0 needs at least one value".into()));
    }
    let margin = 3.0 * grid.h();
    for &x in x0 {
        if !(x > grid.x_min() + margin && x < grid.x_max() - margin) {
            return Err(Error::X0NearBoundary {
                x0: x,
                x_min: grid.x_min(),
                x_max: grid.x_max(),
            });
        }
    }
    Ok(())
}

impl Plan {
    /// Merge the layers and validate everything `cmd` will use.
    pub fn new(cmd: CommandKind, flags: Settings, file: Option<Settings>) -> Result<Plan> {
        let mut s = flags.over(file.unwrap_or_default());
        s.fill_defaults(cmd);
        if let Some(0) = s.threads {
            return Err(Error::Config("--threads must be positive".into()));
        }
        let mode = s.mode.unwrap_or_default();
        let out_dir = s
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));

        let job = match cmd {
            CommandKind::Orbit => {
                let system = mode.apply(&s.system()?);
                let r = Settings::require(s.r, "r", cmd)?;
                let x0 =
                    s.x0.clone()
                        .ok_or_else(|| Error::Config("`orbit` needs --x0".into()))?;
                let grid = s.domain().resolve(system.name(), r)?;
                check_x0(&grid, &x0)?;
                let time = TimeSpec::new(s.t_final.unwrap(), s.dt.unwrap(), s.stride.unwrap())?;
                let dump = s.dump_density.unwrap_or(false);
                if dump && x0.len() > 1 {
                    return Err(Error::Config("--dump-density takes a single --x0".into()));
                }
                s.pin_grid(&grid);
                Job::Orbit {
                    system,
                    r,
                    x0,
                    grid,
                    time,
                    dump,
                }
            }
            CommandKind::Scan => {
                let system = s.system()?;
                let r = Settings::require(s.r, "r", cmd)?;
                let scan = mode.scan_config(&s.scan_config());
                scan.validate()?;
                let grid = scan.domain.resolve(system.name(), r)?;
                s.pin_grid(&grid);
                Job::Scan {
                    system,
                    r,
                    mode,
                    scan,
                }
            }
            CommandKind::Sweep => {
                let system = s.system()?;
                let sweep = SweepConfig {
                    mode,
                    r_min: Settings::require(s.r_min, "r_min", cmd)?,
                    r_max: Settings::require(s.r_max, "r_max", cmd)?,
                    r_steps: Settings::require(s.r_steps, "r_steps", cmd)?,
                    scan: s.scan_config(),
                    refine_width: s.refine,
                };
                sweep.validate()?;
                let scan = mode.scan_config(&sweep.scan);
                for r in [sweep.r_min, sweep.r_max] {
                    scan.domain.resolve(system.name(), r)?;
                }
                Job::Sweep { system, sweep }
            }
            CommandKind::Oracle => {
                let system = mode.apply(&s.system()?);
                let r = Settings::require(s.r, "r", cmd)?;
                let x0 =
                    s.x0.clone()
                        .ok_or_else(|| Error::Config("`oracle` needs --x0".into()))?;
                let grid = s.domain().resolve(system.name(), r)?;
                check_x0(&grid, &x0)?;
                let time = TimeSpec::new(s.t_final.unwrap(), s.dt.unwrap(), s.stride.unwrap())?;
                let clip = *s
                    .clip
                    .get_or_insert(grid.x_min().abs().max(grid.x_max().abs()));
                let ensemble = EnsembleConfig {
                    n_paths: s.n_paths.unwrap(),
                    dt: time.dt,
                    t_final: time.t_final,
                    seed: s.seed.unwrap(),
                    domain_clip: clip,
                    stride: time.stride,
                };
                ensemble.validate()?;
                s.pin_grid(&grid);
                Job::Oracle {
                    system,
                    r,
                    x0,
                    grid,
                    time,
                    ensemble,
                }
            }
            CommandKind::Reproduce => {
                if s.system.is_some() || s.drift.is_some() || s.diffusion.is_some() {
                    return Err(Error::Config(
                        "`reproduce` runs the builtin systems; drop --system".into(),
                    ));
                }
                let mut jobs = Vec::new();
                for (name, r_min, r_max, r_steps) in REPRODUCE_SWEEPS {
                    let system = lookup_builtin(name)?;
                    for mode in [Mode::Stochastic, Mode::Deterministic] {
                        let mut scan = s.scan_config();
                        let (t, dt) = match mode {
                            Mode::Stochastic => (scan.t_final, scan.dt),
                            Mode::Deterministic => (DETERMINISTIC_T_FINAL, DETERMINISTIC_DT),
                        };
                        scan.t_final = s.t_final.unwrap_or(t);
                        scan.dt = s.dt.unwrap_or(dt);
                        let sweep = SweepConfig {
                            mode,
                            r_min,
                            r_max,
                            r_steps,
                            scan,
                            refine_width: s.refine,
                        };
                        sweep.validate()?;
                        let scan = mode.scan_config(&sweep.scan);
                        for r in [r_min, r_max] {
                            scan.domain.resolve(name, r)?;
                        }
                        jobs.push((format!("{name}_{mode}.csv"), system.clone(), sweep));
                    }
                }
                Job::Reproduce(jobs)
            }
        };
        Ok(Plan {
            command: cmd,
            settings: s,
            out_dir,
            job,
        })
    }

    /// Comment header echoing the effective settings.
    pub fn header(&self, extra: &[String]) -> String {
        let mut h = format!(
            "# stochbif {} {}\n",
            env!("CARGO_PKG_VERSION"),
            self.command
        );
        let mut shown = self.settings.clone();
        shown.out_dir = None;
        shown.threads = None;
        let body = toml::to_string(&shown).unwrap_or_default();
        for line in body.lines() {
            h.push_str("# ");
            h.push_str(line);
            h.push('\n');
        }
        if self.settings.x_min.is_none() || self.settings.cells.is_none() {
            h.push_str("# domain: per-r default; saddle-node uses half-width max(6, 3 sqrt|r|), absorbing for r > 0\n");
        }
        for e in extra {
            h.push_str("# ");
            h.push_str(e);
            h.push('\n');
        }
        h
    }

    /// Run the job and write its files; returns the paths written.
    pub fn execute(&self) -> Result<Vec<PathBuf>> {
        if let Some(n) = self.settings.threads {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                log::debug!("thread pool already configured: {e}");
            }
        }
        // compute everything first so failures leave no partial files
        let outputs: Vec<(String, String)> = match &self.job {
            Job::Orbit {
                system,
                r,
                x0,
                grid,
                time,
                dump,
            } => {
                let orbits: Vec<MeanOrbit> = x0
                    .iter()
                    .map(|&x| mean_orbit(system, *r, grid, x, *time).map_err(|e| e.at(*r, Some(x))))
                    .collect::<Result<_>>()?;
                let notes = orbit_notes(&orbits);
                let mut body = Vec::new();
                write_orbits_csv(&mut body, &orbits)?;
                let mut out = vec![("orbit.csv".to_string(), self.header(&notes) + &utf8(body))];
                if *dump {
                    let snaps = evolve(system, *r, grid, x0[0], *time)
                        .map_err(|e| e.at(*r, Some(x0[0])))?;
                    let mut body = Vec::new();
                    write_snapshots_csv(&mut body, &snaps)?;
                    out.push(("density.csv".to_string(), self.header(&[]) + &utf8(body)));
                }
                out
            }
            Job::Scan {
                system,
                r,
                mode,
                scan,
            } => {
                let sys = mode.apply(system);
                let result = detect_equilibria(&sys, *r, scan).map_err(|e| e.at(*r, None))?;
                let notes = scan_notes(&result);
                let diagram = BifurcationDiagram {
                    system: sys.name().to_string(),
                    mode: *mode,
                    r_values: vec![*r],
                    scans: vec![result],
                    bifurcations: Vec::new(),
                };
                let mut body = Vec::new();
                write_diagram_csv(&mut body, &diagram)?;
                vec![("scan.csv".to_string(), self.header(&notes) + &utf8(body))]
            }
            Job::Sweep { system, sweep: cfg } => {
                let diagram = sweep(system, cfg)?;
                diagram_files(self, &diagram, "diagram.csv", Some("bifurcations.csv"))?
            }
            Job::Oracle {
                system,
                r,
                x0,
                grid,
                time,
                ensemble,
            } => {
                let mut mc = Vec::new();
                let mut rows =
                    String::from("r,x0,t,fpe_mean,mc_mean,stderr,fpe_survival,mc_survival,agree\n");
                for &x in x0 {
                    let f =
                        mean_orbit(system, *r, grid, x, *time).map_err(|e| e.at(*r, Some(x)))?;
                    let m =
                        em_mean_orbit(system, *r, x, ensemble).map_err(|e| e.at(*r, Some(x)))?;
                    for c in compare_orbits(&f, &m) {
                        rows.push_str(&c.to_string());
                        rows.push('\n');
                    }
                    mc.push(m);
                }
                let mut body = Vec::new();
                write_orbits_csv(&mut body, &mc)?;
                vec![
                    ("oracle.csv".to_string(), self.header(&[]) + &utf8(body)),
                    ("oracle_compare.csv".to_string(), self.header(&[]) + &rows),
                ]
            }
            Job::Reproduce(jobs) => {
                let mut out = Vec::new();
                for (file, system, cfg) in jobs {
                    log::info!("sweeping {file}");
                    let diagram = sweep(system, cfg)?;
                    out.extend(diagram_files(self, &diagram, file, None)?);
                }
                out
            }
        };
        write_outputs(&self.out_dir, &outputs)
    }
}

fn utf8(bytes: Vec<u8>) -> String {
    String::from_utf8(bytes).expect("csv writers emit utf-8")
}

fn orbit_notes(orbits: &[MeanOrbit]) -> Vec<String> {
    let mut notes = Vec::new();
    for o in orbits {
        if o.flags.conditioned {
            notes.push(format!("x0 = {}: means conditioned on survival", o.x0));
        }
        if o.flags.truncated {
            notes.push(format!(
                "x0 = {}: truncated at t = {} (mass vanished)",
                o.x0,
                o.final_time()
            ));
        }
    }
    notes
}

fn scan_notes(scan: &EquilibriumScan) -> Vec<String> {
    let mut notes: Vec<String> = scan
        .diagnostics
        .iter()
        .map(|d| format!("r = {}: {d}", scan.r))
        .collect();
    for (x0, d) in &scan.escapes {
        notes.push(format!("r = {}: escape {d} from x0 = {x0}", scan.r));
    }
    for e in &scan.equilibria {
        for n in &e.notes {
            notes.push(format!(
                "r = {}: {} {:.6}: {n}",
                scan.r, e.stability, e.location
            ));
        }
    }
    notes
}

fn diagram_files(
    plan: &Plan,
    diagram: &BifurcationDiagram,
    file: &str,
    summary: Option<&str>,
) -> Result<Vec<(String, String)>> {
    let mut notes: Vec<String> = diagram.scans.iter().flat_map(scan_notes).collect();
    notes.insert(
        0,
        format!("system = {}, mode = {}", diagram.system, diagram.mode),
    );
    for b in &diagram.bifurcations {
        notes.push(format!("bifurcation: {b}"));
    }
    let mut body = Vec::new();
    write_diagram_csv(&mut body, diagram)?;
    let mut out = vec![(file.to_string(), plan.header(&notes) + &utf8(body))];
    if let Some(name) = summary {
        let mut body = Vec::new();
        write_summary_csv(&mut body, diagram)?;
        out.push((name.to_string(), plan.header(&[]) + &utf8(body)));
    }
    Ok(out)
}

fn write_outputs(dir: &Path, outputs: &[(String, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, text) in outputs {
        let path = dir.join(name);
        let mut w = BufWriter::new(fs::File::create(&path)?);
        w.write_all(text.as_bytes())?;
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// One sample of a density-vs-ensemble comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitComparison {
    pub r: f64,
    pub x0: f64,
    pub t: f64,
    pub fpe_mean: f64,
    pub mc_mean: f64,
    pub std_error: f64,
    pub fpe_survival: f64,
    pub mc_survival: f64,
}

impl OrbitComparison {
    /// Within 2% or four standard errors, whichever is larger.
    pub fn agrees(&self) -> bool {
        let tol = (0.02 * self.fpe_mean.abs()).max(4.0 * self.std_error);
        (self.fpe_mean - self.mc_mean).abs() <= tol
    }

    /// Both methods kept more than 99% of the mass.
    pub fn comparable(&self) -> bool {
        self.fpe_survival > 0.99 && self.mc_survival > 0.99
    }
}

impl fmt::Display for OrbitComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{},{},{},{}",
            self.r,
            self.x0,
            self.t,
            self.fpe_mean,
            self.mc_mean,
            self.std_error,
            self.fpe_survival,
            self.mc_survival,
            self.agrees()
        )
    }
}

/// Pair up samples taken at the same times.
pub fn compare_orbits(fpe: &MeanOrbit, mc: &MeanOrbit) -> Vec<OrbitComparison> {
    fpe.times
        .iter()
        .zip(&mc.times)
        .enumerate()
        .take_while(|(_, (a, b))| (*a - *b).abs() < 1e-9)
        .map(|(i, (&t, _))| OrbitComparison {
            r: fpe.r,
            x0: fpe.x0,
            t,
            fpe_mean: fpe.means[i],
            mc_mean: mc.means[i],
            std_error: mc.std_errors[i],
            fpe_survival: fpe.surviving_mass[i],
            mc_survival: mc.surviving_mass[i],
        })
        .collect()
}

/// Parse, plan and run; returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_cli(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run_cli(cli: Cli) -> Result<Vec<PathBuf>> {
    let (kind, args) = cli.command.split();
    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            Some(Settings::from_toml(&text)?)
        }
        None => None,
    };
    Plan::new(kind, args.settings, file)?.execute()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_parsing() {
        let c: Coeffs = "0:0:1, 2:1:0".parse().unwrap();
        assert_eq!(c.0, vec![(0, 0.0, 1.0), (2, 1.0, 0.0)]);
        assert!("".parse::<Coeffs>().unwrap().0.is_empty());
        assert!("1:2".parse::<Coeffs>().is_err());
        assert!("a:1:1".parse::<Coeffs>().is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = Settings::from_toml("system = \"pitchfork\"\nr = 0.5\ndt = 0.01\n").unwrap();
        let flags = Settings {
            r: Some(1.0),
            ..Settings::default()
        };
        let s = flags.over(file);
        assert_eq!(s.r, Some(1.0));
        assert_eq!(s.dt, Some(0.01));
        assert_eq!(s.system.as_deref(), Some("pitchfork"));
    }

    #[test]
    fn config_file_polynomial_system() {
        let s = Settings::from_toml(
            "drift = [[0, 0.0, 1.0], [2, 1.0, 0.0]]\ndiffusion = [[1, 1.0, 0.0]]\n",
        )
        .unwrap();
        let sys = s.system().unwrap();
        assert_eq!(sys.drift(0.5, 2.0), 4.5);
        assert_eq!(sys.diffusion(3.0), 3.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            Settings::from_toml("sistem = 1"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn header_echoes_defaults() {
        let flags = Settings {
            system: Some("pitchfork".into()),
            r: Some(1.0),
            x0: Some(vec![0.5]),
            ..Settings::default()
        };
        let plan = Plan::new(CommandKind::Orbit, flags, None).unwrap();
        let h = plan.header(&[]);
        assert!(h.starts_with("# stochbif "));
        for key in [
            "dt = 0.001",
            "t_final = 40.0",
            "cells = 1200",
            "boundary = \"reflecting\"",
        ] {
            assert!(h.contains(key), "{key} missing from\n{h}");
        }
        assert!(h.lines().all(|l| l.starts_with('#')));
    }

    #[test]
    fn missing_and_conflicting_settings() {
        let both = Settings {
            system: Some("pitchfork".into()),
            drift: Some(Coeffs(vec![])),
            r: Some(0.0),
            ..Settings::default()
        };
        assert!(matches!(
            Plan::new(CommandKind::Scan, both, None),
            Err(Error::Config(_))
        ));
        let no_r = Settings {
            system: Some("pitchfork".into()),
            ..Settings::default()
        };
        assert!(Plan::new(CommandKind::Scan, no_r, None).is_err());
    }
}
