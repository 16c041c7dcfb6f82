//! Batch front-end: run configurations, the `density` / `simulate` /
//! `compare` commands, and their artifacts.
//!
//! A run configuration is a TOML document; see the README for the grammar.
//! Command-line overrides take precedence over the file, which takes
//! precedence over built-in defaults.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::density::{
    csv_export_with_meta, density_grid_with, unwrap_embedding, DensityCurve, DensityOptions, GridMode, GridSpec,
    DEFAULT_EPSILON,
};
use crate::error::Error;
use crate::matcx::ComplexMatrix;
use crate::models::{
    uniform_weights, validate_pair, Atom, CovarianceMap, DiscreteModel, Monomial, OperatorModel, SemicircularModel,
};
use crate::rmt_oracle::{binned_l1_distance, binning_floor, l1_distance, product_spectrum, EmpiricalSpectrum, SimulationSpec};
use crate::subordination::IterationConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_THRESHOLD: f64 = 0.1;

/// A configuration problem: exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line and column of a syntax error.
    pub position: Option<(usize, usize)>,
    /// Dotted field path of a semantic error, e.g. `x.weights`.
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(field: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            position: None,
            field: Some(field.into()),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.position, &self.field) {
            (Some((l, c)), _) => write!(f, "line {l}, column {c}: {}", self.message),
            (None, Some(p)) => write!(f, "{p}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numerical(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Numerical(e)
    }
}

// ---- raw TOML schema ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    unwrap_k: Option<usize>,
    output_dir: Option<PathBuf>,
    x: RawModel,
    y: RawModel,
    grid: Option<RawGrid>,
    iteration: Option<RawIteration>,
    simulation: Option<RawSimulation>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawModel {
    Discrete {
        dim: Option<usize>,
        weights: Option<Vec<f64>>,
        atoms: Vec<RawMatrix>,
    },
    ScalarBlock {
        dim: Option<usize>,
        support: Vec<f64>,
        weights: Option<Vec<f64>>,
        pattern: Vec<Vec<RawMonomial>>,
    },
    Semicircular {
        dim: Option<usize>,
        family: Vec<RawMatrix>,
        shift: Option<f64>,
    },
}

type RawMatrix = Vec<Vec<RawEntry>>;

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Real(f64),
    Complex([f64; 2]),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawMonomial {
    Power(u32),
    Word(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    t_min: Option<f64>,
    t_max: Option<f64>,
    points: Option<usize>,
    epsilon: Option<f64>,
    mode: Option<String>,
    richardson: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIteration {
    tol: Option<f64>,
    max_iter: Option<usize>,
    damping: Option<f64>,
    accelerate: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    size: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
    bins: Option<usize>,
    clip_negative: Option<f64>,
}

// ---- validated configuration ----

/// Grid section; bounds may be left open and filled from a simulated spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSettings {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub points: usize,
    pub epsilon: f64,
    pub mode: GridMode,
    pub richardson: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    pub size: usize,
    pub trials: usize,
    pub seed: u64,
    pub bins: usize,
    pub clip_negative: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            size: 500,
            trials: 100,
            seed: 0,
            bins: 200,
            clip_negative: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub x: OperatorModel,
    pub y: OperatorModel,
    pub grid: GridSettings,
    pub iteration: IterationConfig,
    pub simulation: SimulationSettings,
    pub unwrap_k: usize,
    pub output_dir: PathBuf,
    pub skip_bad_points: bool,
    /// SHA-256 of the configuration text.
    pub hash: String,
    pub warnings: Vec<String>,
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn matrix_from_raw(raw: &RawMatrix, field: &str) -> Result<ComplexMatrix, ConfigError> {
    let rows: Vec<Vec<Complex64>> = raw
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| match e {
                    RawEntry::Real(v) => Complex64::new(*v, 0.0),
                    RawEntry::Complex([re, im]) => Complex64::new(*re, *im),
                })
                .collect()
        })
        .collect();
    ComplexMatrix::from_rows(&rows).map_err(|e| ConfigError::at(field, e))
}

fn model_error(field: &str, e: Error) -> ConfigError {
    let message = match e {
        Error::InvalidModel(m) => m,
        other => other.to_string(),
    };
    ConfigError::at(field, message)
}

fn model_from_raw(raw: &RawModel, field: &str) -> Result<OperatorModel, ConfigError> {
    let (declared, model) = match raw {
        RawModel::Discrete { dim, weights, atoms } => {
            if atoms.is_empty() {
                return Err(ConfigError::at(format!("{field}.atoms"), "at least one atom is required"));
            }
            let weights = weights.clone().unwrap_or_else(|| uniform_weights(atoms.len()));
            if weights.len() != atoms.len() {
                return Err(ConfigError::at(
                    format!("{field}.weights"),
                    format!("{} weights for {} atoms", weights.len(), atoms.len()),
                ));
            }
            let atoms = atoms
                .iter()
                .zip(&weights)
                .enumerate()
                .map(|(i, (m, &w))| {
                    Ok(Atom {
                        weight: w,
                        matrix: matrix_from_raw(m, &format!("{field}.atoms[{i}]"))?,
                    })
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;
            let model = DiscreteModel::new(atoms).map_err(|e| {
                let sub = if e.to_string().contains("weight") { "weights" } else { "atoms" };
                model_error(&format!("{field}.{sub}"), e)
            })?;
            (*dim, OperatorModel::from(model))
        }
        RawModel::ScalarBlock {
            dim,
            support,
            weights,
            pattern,
        } => {
            let weights = weights.clone().unwrap_or_else(|| uniform_weights(support.len()));
            let pattern = pattern
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|m| match m {
                            RawMonomial::Power(k) => Ok(Monomial::Power(*k)),
                            RawMonomial::Word(w) if w == "zero" => Ok(Monomial::Zero),
                            RawMonomial::Word(w) => Err(ConfigError::at(
                                format!("{field}.pattern"),
                                format!("entry `{w}` is neither an exponent nor \"zero\""),
                            )),
                        })
                        .collect()
                })
                .collect::<Result<Vec<Vec<_>>, _>>()?;
            let model = DiscreteModel::scalar_block(support, &weights, &pattern).map_err(|e| {
                let msg = e.to_string();
                let sub = if msg.contains("pattern") {
                    "pattern"
                } else if msg.contains("weight") {
                    "weights"
                } else {
                    "support"
                };
                model_error(&format!("{field}.{sub}"), e)
            })?;
            (*dim, OperatorModel::from(model))
        }
        RawModel::Semicircular { dim, family, shift } => {
            let matrices = family
                .iter()
                .enumerate()
                .map(|(i, m)| matrix_from_raw(m, &format!("{field}.family[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            let n = match (dim, matrices.first()) {
                (Some(d), _) => *d,
                (None, Some(m)) => m.dim(),
                (None, None) => {
                    return Err(ConfigError::at(format!("{field}.dim"), "required when the family is empty"));
                }
            };
            let cov = CovarianceMap::new(n, matrices).map_err(|e| model_error(&format!("{field}.family"), e))?;
            let model = SemicircularModel::new(cov, shift.unwrap_or(0.0)).map_err(|e| model_error(field, e))?;
            (*dim, OperatorModel::from(model))
        }
    };
    if let Some(d) = declared {
        if d != model.dim() {
            return Err(ConfigError::at(
                format!("{field}.dim"),
                format!("declared {d} but the matrices are {}x{}", model.dim(), model.dim()),
            ));
        }
    }
    Ok(model)
}

/// Parses and validates a run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        position: e.span().map(|s| position(text, s.start)),
        field: None,
        message: e.message().trim().to_string(),
    })?;
    let x = model_from_raw(&raw.x, "x")?;
    let y = model_from_raw(&raw.y, "y")?;
    if x.dim() != y.dim() {
        return Err(ConfigError::at(
            "y",
            format!("dimension {} does not match x dimension {}", y.dim(), x.dim()),
        ));
    }
    let report = validate_pair(&x, &y);
    if let Some(first) = report.errors.first() {
        return Err(ConfigError::at("x", first));
    }

    let g = raw.grid.unwrap_or(RawGrid {
        t_min: None,
        t_max: None,
        points: None,
        epsilon: None,
        mode: None,
        richardson: None,
    });
    let mode = match g.mode.as_deref() {
        None | Some("warm") => GridMode::WarmStart,
        Some("parallel") => GridMode::Parallel,
        Some(other) => {
            return Err(ConfigError::at(
                "grid.mode",
                format!("expected \"warm\" or \"parallel\", got \"{other}\""),
            ))
        }
    };
    let grid = GridSettings {
        t_min: g.t_min,
        t_max: g.t_max,
        points: g.points.unwrap_or(2000),
        epsilon: g.epsilon.unwrap_or(DEFAULT_EPSILON),
        mode,
        richardson: g.richardson.unwrap_or(false),
    };

    let defaults = IterationConfig::default();
    let it = raw.iteration.unwrap_or(RawIteration {
        tol: None,
        max_iter: None,
        damping: None,
        accelerate: None,
    });
    let iteration = IterationConfig {
        tol: it.tol.unwrap_or(defaults.tol),
        max_iter: it.max_iter.unwrap_or(defaults.max_iter),
        damping: it.damping.unwrap_or(defaults.damping),
        accelerate: it.accelerate.unwrap_or(defaults.accelerate),
        ..defaults
    };

    let sd = SimulationSettings::default();
    let simulation = match raw.simulation {
        Some(s) => SimulationSettings {
            size: s.size.unwrap_or(sd.size),
            trials: s.trials.unwrap_or(sd.trials),
            seed: s.seed.unwrap_or(sd.seed),
            bins: s.bins.unwrap_or(sd.bins),
            clip_negative: s.clip_negative.unwrap_or(sd.clip_negative),
        },
        None => sd,
    };

    let config = RunConfig {
        name: raw.name.unwrap_or_else(|| "run".into()),
        x,
        y,
        grid,
        iteration,
        simulation,
        unwrap_k: raw.unwrap_k.unwrap_or(1),
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        skip_bad_points: false,
        hash: hex(&Sha256::digest(text.as_bytes())),
        warnings: report.warnings,
    };
    config.check()?;
    Ok(config)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Reads and parses a configuration file; the run name defaults to the file stem.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError {
        position: None,
        field: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let has_name = text.lines().any(|l| l.trim_start().starts_with("name"));
    let mut cfg = parse_config(&text)?;
    if !has_name {
        if let Some(stem) = path.file_stem() {
            cfg.name = stem.to_string_lossy().into_owned();
        }
    }
    Ok(cfg)
}

/// Command-line overrides; `None` leaves the configured value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub epsilon: Option<f64>,
    pub grid: Option<(f64, f64, usize)>,
    pub grid_points: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub damping: Option<f64>,
    pub trials: Option<usize>,
    pub size: Option<usize>,
    pub seed: Option<u64>,
    pub bins: Option<usize>,
    pub unwrap_k: Option<usize>,
    pub skip_bad_points: bool,
    pub output_dir: Option<PathBuf>,
}

/// Parses `<min>:<max>:<points>`.
pub fn parse_grid_flag(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected <min>:<max>:<points>, got `{s}`"));
    }
    let lo = parts[0].trim().parse::<f64>().map_err(|e| format!("grid min: {e}"))?;
    let hi = parts[1].trim().parse::<f64>().map_err(|e| format!("grid max: {e}"))?;
    let n = parts[2].trim().parse::<usize>().map_err(|e| format!("grid points: {e}"))?;
    Ok((lo, hi, n))
}

impl RunConfig {
    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(e) = o.epsilon {
            self.grid.epsilon = e;
        }
        if let Some((lo, hi, n)) = o.grid {
            self.grid.t_min = Some(lo);
            self.grid.t_max = Some(hi);
            self.grid.points = n;
        }
        if let Some(n) = o.grid_points {
            self.grid.points = n;
        }
        if let Some(v) = o.tol {
            self.iteration.tol = v;
        }
        if let Some(v) = o.max_iter {
            self.iteration.max_iter = v;
        }
        if let Some(v) = o.damping {
            self.iteration.damping = v;
        }
        if let Some(v) = o.trials {
            self.simulation.trials = v;
        }
        if let Some(v) = o.size {
            self.simulation.size = v;
        }
        if let Some(v) = o.seed {
            self.simulation.seed = v;
        }
        if let Some(v) = o.bins {
            self.simulation.bins = v;
        }
        if let Some(v) = o.unwrap_k {
            self.unwrap_k = v;
        }
        self.skip_bad_points |= o.skip_bad_points;
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        self.check()
    }

    fn check(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if !(g.epsilon > 0.0 && g.epsilon.is_finite()) {
            return Err(ConfigError::at("grid.epsilon", format!("must be positive, got {}", g.epsilon)));
        }
        if g.points < 2 {
            return Err(ConfigError::at("grid.points", format!("must be at least 2, got {}", g.points)));
        }
        if let (Some(lo), Some(hi)) = (g.t_min, g.t_max) {
            if !(lo < hi) {
                return Err(ConfigError::at("grid", format!("t_min {lo} must be below t_max {hi}")));
            }
        }
        if g.t_min.is_some() != g.t_max.is_some() {
            return Err(ConfigError::at("grid", "t_min and t_max must be given together"));
        }
        self.iteration
            .validate()
            .map_err(|e| ConfigError::at("iteration", e.to_string().trim_start_matches("invalid argument: ")))?;
        self.simulation_spec()
            .validate()
            .map_err(|e| ConfigError::at("simulation", e.to_string().trim_start_matches("invalid argument: ")))?;
        if self.unwrap_k < 1 {
            return Err(ConfigError::at("unwrap_k", "must be at least 1"));
        }
        Ok(())
    }

    pub fn simulation_spec(&self) -> SimulationSpec {
        SimulationSpec {
            x: self.x.clone(),
            y: self.y.clone(),
            matrix_size: self.simulation.size,
            trials: self.simulation.trials,
            seed: self.simulation.seed,
            bins: self.simulation.bins,
            unwrap_k: self.unwrap_k,
            clip_negative: self.simulation.clip_negative,
        }
    }

    /// The evaluation grid, with open bounds taken from `spectrum` if given.
    pub fn grid_spec(&self, spectrum: Option<&EmpiricalSpectrum>) -> Result<GridSpec, ConfigError> {
        let g = &self.grid;
        let spec = match (g.t_min, g.t_max, spectrum) {
            (Some(lo), Some(hi), _) => GridSpec::new(lo, hi, g.points),
            (_, _, Some(emp)) => GridSpec::around_spectrum(&emp.eigenvalues, g.points),
            _ => {
                return Err(ConfigError::at(
                    "grid",
                    "t_min and t_max are required (or run `compare`, which takes them from the simulation)",
                ))
            }
        }
        .map_err(|e| ConfigError::at("grid", e))?;
        Ok(spec.with_epsilon(g.epsilon))
    }

    pub fn density_options(&self) -> DensityOptions {
        DensityOptions {
            mode: self.grid.mode,
            skip_bad_points: self.skip_bad_points,
            richardson: self.grid.richardson,
        }
    }
}

/// What a command printed and how the process should exit.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub exit_code: i32,
    pub stdout: Vec<String>,
    pub files: Vec<PathBuf>,
}

fn artifact(cfg: &RunConfig, suffix: &str) -> PathBuf {
    cfg.output_dir.join(format!("{}_{suffix}", cfg.name))
}

fn ensure_dir(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::Numerical(Error::io(&cfg.output_dir, e)))
}

fn common_meta(cfg: &RunConfig, command: &str) -> Vec<(String, String)> {
    vec![
        ("tool".into(), "opfree".into()),
        ("version".into(), VERSION.into()),
        ("command".into(), command.into()),
        ("config_name".into(), cfg.name.clone()),
        ("config_hash".into(), cfg.hash.clone()),
    ]
}

fn compute_curve(cfg: &RunConfig, grid: &GridSpec) -> Result<(DensityCurve, f64), CliError> {
    let raw = density_grid_with(&cfg.x, &cfg.y, grid, &cfg.iteration, &cfg.density_options())?;
    let mass_before = raw.total_mass;
    let curve = if cfg.unwrap_k > 1 {
        unwrap_embedding(&raw, cfg.unwrap_k)?
    } else {
        raw
    };
    Ok((curve, mass_before))
}

fn write_curve(cfg: &RunConfig, curve: &DensityCurve, mass_before: f64, wall: f64, command: &str) -> Result<PathBuf, CliError> {
    let path = artifact(cfg, "density.csv");
    let mut meta = common_meta(cfg, command);
    meta.push(("grid_mode".into(), format!("{:?}", cfg.grid.mode)));
    meta.push(("mass_before_unwrap".into(), mass_before.to_string()));
    meta.push(("wall_time_s".into(), format!("{wall:.3}")));
    csv_export_with_meta(curve, &path, &meta)?;
    Ok(path)
}

/// Density curve CSV and sidecar.
pub fn cmd_density(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let grid = cfg.grid_spec(None)?;
    ensure_dir(cfg)?;
    let start = Instant::now();
    let (curve, mass_before) = compute_curve(cfg, &grid)?;
    let path = write_curve(cfg, &curve, mass_before, start.elapsed().as_secs_f64(), "density")?;
    let (lo, med, hi) = curve.iteration_stats();
    Ok(CommandOutput {
        exit_code: 0,
        stdout: vec![
            format!("mass={}", curve.total_mass),
            format!("iterations={lo}/{med}/{hi}"),
            format!("wrote {}", path.display()),
        ],
        files: vec![path.clone(), crate::density::meta_path(&path)],
    })
}

fn simulate(cfg: &RunConfig) -> Result<(EmpiricalSpectrum, Vec<PathBuf>), CliError> {
    ensure_dir(cfg)?;
    let start = Instant::now();
    let emp = product_spectrum(&cfg.simulation_spec())?;
    let wall = start.elapsed().as_secs_f64();
    let ev = artifact(cfg, "eigenvalues.csv");
    let hist = artifact(cfg, "histogram.csv");
    emp.write_eigenvalues_csv(&ev)?;
    emp.write_histogram_csv(&hist)?;
    let meta_path = artifact(cfg, "simulation.meta");
    let mut meta = common_meta(cfg, "simulate");
    let s = &cfg.simulation;
    meta.extend([
        ("matrix_size".into(), s.size.to_string()),
        ("trials".into(), s.trials.to_string()),
        ("seed".into(), s.seed.to_string()),
        ("bins".into(), s.bins.to_string()),
        ("unwrap_k".into(), cfg.unwrap_k.to_string()),
        ("clip_negative".into(), s.clip_negative.to_string()),
        ("eigenvalues".into(), emp.eigenvalues.len().to_string()),
        ("wall_time_s".into(), format!("{wall:.3}")),
    ]);
    let text: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    fs::write(&meta_path, text).map_err(|e| CliError::Numerical(Error::io(&meta_path, e)))?;
    Ok((emp, vec![ev, hist, meta_path]))
}

/// Eigenvalue and histogram CSVs.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let (emp, files) = simulate(cfg)?;
    Ok(CommandOutput {
        exit_code: 0,
        stdout: vec![
            format!("eigenvalues={}", emp.eigenvalues.len()),
            format!("wrote {}", files[1].display()),
        ],
        files,
    })
}

/// Simulation, density on the configured (or spectrum-derived) grid, the
/// L1 distance between them and an SVG overlay. Exit 0 iff `l1 <= threshold`.
pub fn cmd_compare(cfg: &RunConfig, threshold: f64) -> Result<CommandOutput, CliError> {
    let (emp, mut files) = simulate(cfg)?;
    let grid = cfg.grid_spec(Some(&emp))?;
    let start = Instant::now();
    let (curve, mass_before) = compute_curve(cfg, &grid)?;
    let path = write_curve(cfg, &curve, mass_before, start.elapsed().as_secs_f64(), "compare")?;
    files.push(path.clone());
    files.push(crate::density::meta_path(&path));
    let l1 = l1_distance(&curve, &emp)?;
    let svg = artifact(cfg, "overlay.svg");
    fs::write(&svg, overlay_svg(&curve, &emp, &cfg.name)).map_err(|e| CliError::Numerical(Error::io(&svg, e)))?;
    files.push(svg);
    let pass = l1 <= threshold;
    let binned = binned_l1_distance(&curve, &emp)?;
    let floor = binning_floor(&curve, &emp.edges)?;
    let mut stdout = vec![format!("l1={l1}"), format!("l1_binned={binned}"), format!("l1_floor={floor}")];
    if !pass {
        stdout.push(format!("l1 exceeds threshold {threshold}"));
    }
    Ok(CommandOutput {
        exit_code: if pass { 0 } else { 1 },
        stdout,
        files,
    })
}

/// Histogram bars with the density curve drawn over them.
pub fn overlay_svg(curve: &DensityCurve, emp: &EmpiricalSpectrum, title: &str) -> String {
    let (w, h, m) = (800.0, 500.0, 50.0);
    let x_lo = curve.grid[0].min(emp.edges[0]);
    let x_hi = curve.grid[curve.grid.len() - 1].max(emp.edges[emp.edges.len() - 1]);
    let y_hi = curve
        .values
        .iter()
        .chain(&emp.heights)
        .copied()
        .fold(0.0, f64::max)
        .max(1e-12)
        * 1.05;
    let sx = |t: f64| m + (t - x_lo) / (x_hi - x_lo) * (w - 2.0 * m);
    let sy = |v: f64| h - m - v / y_hi * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r##"<g fill="#c8c8c8" stroke="none">"##);
    for (e, v) in emp.edges.windows(2).zip(&emp.heights) {
        let (x0, x1) = (sx(e[0]), sx(e[1]));
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
            sy(*v),
            x1 - x0,
            sy(0.0) - sy(*v)
        );
    }
    let _ = writeln!(s, "</g>");
    let points: Vec<String> = curve
        .grid
        .iter()
        .zip(&curve.values)
        .map(|(t, v)| format!("{:.2},{:.2}", sx(*t), sy(*v)))
        .collect();
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#1f4e9c" stroke-width="1.5" points="{}"/>"##,
        points.join(" ")
    );
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="black"/>"#,
        sy(0.0),
        w - m
    );
    let _ = writeln!(
        s,
        r#"<text x="{m}" y="{:.2}" font-family="sans-serif" font-size="12">{x_lo:.3}</text>"#,
        h - m + 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">{x_hi:.3}</text>"#,
        w - m,
        h - m + 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{m}" y="30" font-family="sans-serif" font-size="14">{}</text>"#,
        title.replace('&', "&amp;").replace('<', "&lt;")
    );
    s.push_str("</svg>\n");
    s
}

/// Which command to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Density,
    Simulate,
    Compare,
}

/// Loads `config`, applies `overrides`, runs `command`; warnings go to `warn`.
pub fn run(
    command: Command,
    config: &Path,
    overrides: &Overrides,
    threshold: f64,
    mut warn: impl FnMut(&str),
) -> Result<CommandOutput, CliError> {
    let mut cfg = load_config(config)?;
    cfg.apply(overrides)?;
    for w in &cfg.warnings {
        warn(&format!("warning: {w}"));
    }
    match command {
        Command::Density => cmd_density(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Compare => cmd_compare(&cfg, threshold),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEMICIRCLE: &str = r#"
name = "sc"
[x]
kind = "scalar_block"
support = [1.0]
pattern = [[1]]
[y]
kind = "semicircular"
family = [[[1.0]]]
[grid]
t_min = -2.5
t_max = 2.5
points = 50
"#;

    #[test]
    fn parses_minimal_config() {
        let cfg = parse_config(SEMICIRCLE).unwrap();
        assert_eq!(cfg.name, "sc");
        assert_eq!(cfg.grid.points, 50);
        assert_eq!(cfg.grid.epsilon, DEFAULT_EPSILON);
        assert_eq!(cfg.unwrap_k, 1);
        assert_eq!(cfg.hash.len(), 64);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_config("[x]\nkind = \"discrete\"\natoms = [[[1.0]]\n").unwrap_err();
        assert_eq!(err.position.map(|p| p.0), Some(3), "{err}");
    }

    #[test]
    fn weight_sum_error_names_field() {
        let text = r#"
[x]
kind = "discrete"
weights = [0.5, 0.6]
atoms = [[[1.0]], [[2.0]]]
[y]
kind = "discrete"
atoms = [[[1.0]]]
"#;
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("x.weights"));
        assert!(err.message.contains("weights sum 1.1"), "{err}");
    }

    #[test]
    fn unshifted_semicircular_x_is_rejected() {
        let text = r#"
[x]
kind = "semicircular"
family = [[[1.0]]]
[y]
kind = "discrete"
atoms = [[[1.0]]]
"#;
        let err = parse_config(text).unwrap_err();
        assert!(err.message.contains("x must be strictly positive"), "{err}");
    }

    #[test]
    fn unknown_fields_and_bad_patterns_are_rejected() {
        let err = parse_config(&SEMICIRCLE.replace("points = 50", "points = 50\nfoo = 1")).unwrap_err();
        assert!(err.message.contains("foo"), "{err}");
        let err = parse_config(&SEMICIRCLE.replace("pattern = [[1]]", "pattern = [[\"one\"]]")).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("x.pattern"));
    }

    #[test]
    fn complex_entries_and_zero_pattern() {
        let text = r#"
[x]
kind = "scalar_block"
support = [1.0, 2.0]
pattern = [[1, "zero"], ["zero", 1]]
[y]
kind = "discrete"
atoms = [[[1.0, [0.0, 1.0]], [[0.0, -1.0], 2.0]]]
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.x.dim(), 2);
        assert_eq!(cfg.y.expectation()[(0, 1)], Complex64::new(0.0, 1.0));
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = parse_config(SEMICIRCLE).unwrap();
        cfg.apply(&Overrides {
            epsilon: Some(1e-5),
            grid_points: Some(4000),
            seed: Some(9),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(cfg.grid.epsilon, 1e-5);
        assert_eq!(cfg.grid.points, 4000);
        assert_eq!(cfg.simulation.seed, 9);
        assert!(cfg.apply(&Overrides { damping: Some(2.0), ..Default::default() }).is_err());
    }

    #[test]
    fn grid_flag_parsing() {
        assert_eq!(parse_grid_flag("-1:2.5:100"), Ok((-1.0, 2.5, 100)));
        assert!(parse_grid_flag("1:2").is_err());
        assert!(parse_grid_flag("a:2:3").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(ConfigError::at("x", "bad")).exit_code(), 2);
        assert_eq!(CliError::Numerical(Error::InvalidArgument("z".into())).exit_code(), 1);
    }
}
