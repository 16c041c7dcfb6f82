//! Spectral densities by Stieltjes inversion at a fixed height `epsilon`:
//! `f(t) = -Im tr G_{xy}((t + i epsilon) I) / pi`, with `tr` the normalized trace.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{validate_pair, OperatorModel};
use crate::subordination::{cauchy_product_at, IterationConfig};

/// Uniform evaluation grid and smoothing height.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub epsilon: f64,
}

pub const DEFAULT_EPSILON: f64 = 1e-4;

impl GridSpec {
    pub fn new(t_min: f64, t_max: f64, points: usize) -> Result<Self> {
        let spec = Self {
            t_min,
            t_max,
            points,
            epsilon: DEFAULT_EPSILON,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// `[min - 0.5, max + 0.5]` of a sampled spectrum.
    pub fn around_spectrum(eigenvalues: &[f64], points: usize) -> Result<Self> {
        let lo = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument("spectrum is empty or not finite".into()));
        }
        Self::new(lo - 0.5, hi + 0.5, points)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min.is_finite() && self.t_max.is_finite() && self.t_min < self.t_max) {
            return Err(Error::InvalidArgument(format!(
                "grid needs t_min < t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.points < 2 {
            return Err(Error::InvalidArgument(format!("grid needs at least 2 points, got {}", self.points)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.t_max - self.t_min) / (self.points - 1) as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.t_max } else { self.t_min + i as f64 * h })
            .collect()
    }
}

/// How the grid sweep is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridMode {
    /// Left to right, each point seeded with the previous `omega2`.
    #[default]
    WarmStart,
    /// Independent points evaluated in parallel from the configured start.
    Parallel,
}

#[derive(Debug, Clone, Default)]
pub struct DensityOptions {
    pub mode: GridMode,
    /// Keep going past failing points; their values are interpolated from
    /// the neighbours and their `t` recorded in [`DensityCurve::skipped`].
    pub skip_bad_points: bool,
    /// Two-point extrapolation `2 f_{eps/2} - f_eps`.
    pub richardson: bool,
}

/// Numerics the curve was produced with, for the sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationSummary {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub accelerate: bool,
}

#[derive(Debug, Clone)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub epsilon: f64,
    pub richardson: bool,
    pub total_mass: f64,
    pub atom_at_zero: Option<f64>,
    /// `1 - total_mass` before any unwrap; a diagnostic, not an atom.
    pub mass_deficit: f64,
    pub moments: (f64, f64, f64),
    pub clip_count: usize,
    pub min_raw_value: f64,
    /// `omega2` iterations per evaluated point (both sweeps under Richardson).
    pub iterations: Vec<usize>,
    pub max_residual: f64,
    pub skipped: Vec<f64>,
    pub unwrap_k: usize,
    pub iteration: IterationSummary,
}

impl DensityCurve {
    /// Builds a curve from raw values, clipping negatives.
    pub fn from_values(grid: Vec<f64>, raw: Vec<f64>, epsilon: f64) -> Result<Self> {
        if grid.len() != raw.len() {
            return Err(Error::DimensionMismatch {
                left: grid.len(),
                right: raw.len(),
            });
        }
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("grid must be strictly increasing with at least 2 points".into()));
        }
        let mut curve = Self {
            grid,
            values: Vec::new(),
            epsilon,
            richardson: false,
            total_mass: 0.0,
            atom_at_zero: None,
            mass_deficit: 0.0,
            moments: (0.0, 0.0, 0.0),
            clip_count: 0,
            min_raw_value: f64::INFINITY,
            iterations: Vec::new(),
            max_residual: 0.0,
            skipped: Vec::new(),
            unwrap_k: 1,
            iteration: IterationSummary {
                tol: f64::NAN,
                max_iter: 0,
                damping: f64::NAN,
                accelerate: false,
            },
        };
        curve.set_values(raw);
        Ok(curve)
    }

    fn set_values(&mut self, raw: Vec<f64>) {
        self.min_raw_value = raw.iter().copied().fold(f64::INFINITY, f64::min);
        self.clip_count = raw.iter().filter(|v| **v < 0.0).count();
        self.values = raw.into_iter().map(|v| v.max(0.0)).collect();
        self.total_mass = trapezoid(&self.grid, &self.values, |_| 1.0);
        self.mass_deficit = 1.0 - self.total_mass;
        self.moments = curve_moments(self);
    }

    /// Iteration count statistics `(min, median, max)`.
    pub fn iteration_stats(&self) -> (usize, usize, usize) {
        if self.iterations.is_empty() {
            return (0, 0, 0);
        }
        let mut sorted = self.iterations.clone();
        sorted.sort_unstable();
        (sorted[0], sorted[sorted.len() / 2], sorted[sorted.len() - 1])
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

fn trapezoid(grid: &[f64], values: &[f64], weight: impl Fn(f64) -> f64) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] * weight(t[0]) + f[1] * weight(t[1])))
        .sum()
}

/// Zeroth, first and second moment: trapezoid quadrature plus the atom at zero.
pub fn curve_moments(curve: &DensityCurve) -> (f64, f64, f64) {
    let m0 = trapezoid(&curve.grid, &curve.values, |_| 1.0) + curve.atom_at_zero.unwrap_or(0.0);
    let m1 = trapezoid(&curve.grid, &curve.values, |t| t);
    let m2 = trapezoid(&curve.grid, &curve.values, |t| t * t);
    (m0, m1, m2)
}

struct PointValue {
    density: f64,
    iterations: usize,
    residual: f64,
}

fn eval_point(x: &OperatorModel, y: &OperatorModel, z: Complex64, cfg: &IterationConfig) -> Result<(PointValue, crate::matcx::ComplexMatrix)> {
    let point = cauchy_product_at(x, y, z, cfg).map_err(|e| Error::GridPoint {
        t: z.re,
        source: Box::new(e),
    })?;
    let density = -point.cauchy.normalized_trace().im / std::f64::consts::PI;
    let sub = point.subordination;
    Ok((
        PointValue {
            density,
            iterations: sub.iterations,
            residual: sub.residual,
        },
        sub.omega2,
    ))
}

fn sweep(
    x: &OperatorModel,
    y: &OperatorModel,
    grid: &[f64],
    epsilon: f64,
    cfg: &IterationConfig,
    opts: &DensityOptions,
) -> Result<Vec<Option<PointValue>>> {
    let handle = |r: Result<PointValue>| -> Result<Option<PointValue>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(_) if opts.skip_bad_points => Ok(None),
            Err(e) => Err(e),
        }
    };
    match opts.mode {
        GridMode::WarmStart => {
            let mut out = Vec::with_capacity(grid.len());
            let mut local = cfg.clone();
            for &t in grid {
                let r = eval_point(x, y, Complex64::new(t, epsilon), &local).map(|(v, w)| {
                    local.w0 = Some(w);
                    v
                });
                out.push(handle(r)?);
            }
            Ok(out)
        }
        GridMode::Parallel => grid
            .par_iter()
            .map(|&t| handle(eval_point(x, y, Complex64::new(t, epsilon), cfg).map(|(v, _)| v)))
            .collect(),
    }
}

// Fills skipped points by linear interpolation between the nearest good ones.
fn fill_gaps(grid: &[f64], values: &mut [Option<f64>]) -> Result<()> {
    let good: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    if good.is_empty() {
        return Err(Error::InvalidArgument("every grid point failed".into()));
    }
    for i in 0..values.len() {
        if values[i].is_some() {
            continue;
        }
        let right = good.iter().copied().find(|&j| j > i);
        let left = good.iter().copied().rev().find(|&j| j < i);
        values[i] = Some(match (left, right) {
            (Some(l), Some(r)) => {
                let (fl, fr) = (values[l].unwrap(), values[r].unwrap());
                fl + (fr - fl) * (grid[i] - grid[l]) / (grid[r] - grid[l])
            }
            (Some(l), None) => values[l].unwrap(),
            (None, Some(r)) => values[r].unwrap(),
            (None, None) => unreachable!(),
        });
    }
    Ok(())
}

/// Density of `x^{1/2} y x^{1/2}` on a grid, with default options.
pub fn density_grid(x: &OperatorModel, y: &OperatorModel, spec: &GridSpec, cfg: &IterationConfig) -> Result<DensityCurve> {
    density_grid_with(x, y, spec, cfg, &DensityOptions::default())
}

pub fn density_grid_with(
    x: &OperatorModel,
    y: &OperatorModel,
    spec: &GridSpec,
    cfg: &IterationConfig,
    opts: &DensityOptions,
) -> Result<DensityCurve> {
    validate_pair(x, y).into_result()?;
    spec.validate()?;
    cfg.validate()?;
    let grid = spec.grid();

    let mut heights = vec![(spec.epsilon, 1.0)];
    if opts.richardson {
        heights = vec![(spec.epsilon / 2.0, 2.0), (spec.epsilon, -1.0)];
    }
    let mut combined = vec![Some(0.0); grid.len()];
    let mut iterations = Vec::new();
    let mut max_residual: f64 = 0.0;
    for (eps, coeff) in heights {
        let points = sweep(x, y, &grid, eps, cfg, opts)?;
        for (acc, p) in combined.iter_mut().zip(&points) {
            match (acc.as_mut(), p) {
                (Some(a), Some(p)) => *a += coeff * p.density,
                _ => *acc = None,
            }
        }
        for p in points.iter().flatten() {
            iterations.push(p.iterations);
            max_residual = max_residual.max(p.residual);
        }
    }
    let skipped: Vec<f64> = grid
        .iter()
        .zip(&combined)
        .filter(|(_, v)| v.is_none())
        .map(|(t, _)| *t)
        .collect();
    fill_gaps(&grid, &mut combined)?;
    let raw = combined.into_iter().map(Option::unwrap).collect();

    let mut curve = DensityCurve::from_values(grid, raw, spec.epsilon)?;
    curve.richardson = opts.richardson;
    curve.iterations = iterations;
    curve.max_residual = max_residual;
    curve.skipped = skipped;
    curve.iteration = IterationSummary {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        damping: cfg.damping,
        accelerate: cfg.accelerate,
    };
    Ok(curve)
}

// Height of the smoothed unit point mass at zero as seen by the curve.
fn smoothed_delta(t: f64, epsilon: f64, richardson: bool) -> f64 {
    let poisson = |e: f64| e / std::f64::consts::PI / (t * t + e * e);
    if richardson {
        2.0 * poisson(epsilon / 2.0) - poisson(epsilon)
    } else {
        poisson(epsilon)
    }
}

/// Recovers the target distribution from a `k x k` embedding whose
/// distribution is `mu / k + (1 - 1/k) delta_0`.
///
/// The smoothed structural point mass is removed exactly before rescaling,
/// so the result does not depend on how well the grid resolves `t = 0`.
pub fn unwrap_embedding(curve: &DensityCurve, k: usize) -> Result<DensityCurve> {
    if k == 0 {
        return Err(Error::InvalidArgument("unwrap factor k must be at least 1".into()));
    }
    if curve.unwrap_k != 1 {
        return Err(Error::InvalidArgument("curve is already unwrapped".into()));
    }
    let kf = k as f64;
    let structural = 1.0 - 1.0 / kf;
    let raw: Vec<f64> = curve
        .grid
        .iter()
        .zip(&curve.values)
        .map(|(&t, &f)| kf * (f - structural * smoothed_delta(t, curve.epsilon, curve.richardson)))
        .collect();
    let mut out = curve.clone();
    out.set_values(raw);
    let scaled_mass = out.total_mass;
    if scaled_mass > 1.0 + 2e-2 {
        return Err(Error::UnwrapInconsistent { scaled_mass });
    }
    out.unwrap_k = k;
    out.mass_deficit = curve.mass_deficit;
    out.clip_count += curve.clip_count;
    out.min_raw_value = out.min_raw_value.min(curve.min_raw_value);
    if k > 1 {
        out.atom_at_zero = Some((1.0 - scaled_mass).max(0.0));
    }
    out.moments = curve_moments(&out);
    Ok(out)
}

/// Decimal rendering with 12 significant digits.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (11 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Sidecar path next to a CSV: same basename, `.meta` suffix.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

/// Writes `t,density` rows and the `.meta` sidecar.
pub fn csv_export(curve: &DensityCurve, path: &Path) -> Result<()> {
    csv_export_with_meta(curve, path, &[])
}

/// As [`csv_export`], with extra `key=value` lines prepended to the sidecar.
pub fn csv_export_with_meta(curve: &DensityCurve, path: &Path, extra: &[(String, String)]) -> Result<()> {
    let mut csv = String::from("t,density\n");
    for (t, f) in curve.grid.iter().zip(&curve.values) {
        let _ = writeln!(csv, "{},{}", format_sig12(*t), format_sig12(*f));
    }
    fs::write(path, csv).map_err(|e| Error::io(path, e))?;

    let mut meta = String::new();
    for (k, v) in extra {
        let _ = writeln!(meta, "{k}={v}");
    }
    let (it_min, it_med, it_max) = curve.iteration_stats();
    let (m0, m1, m2) = curve.moments;
    let skipped: Vec<String> = curve.skipped.iter().map(|t| t.to_string()).collect();
    let entries: [(&str, String); 22] = [
        ("epsilon", curve.epsilon.to_string()),
        ("richardson", curve.richardson.to_string()),
        ("tol", curve.iteration.tol.to_string()),
        ("max_iter", curve.iteration.max_iter.to_string()),
        ("damping", curve.iteration.damping.to_string()),
        ("accelerate", curve.iteration.accelerate.to_string()),
        ("points", curve.grid.len().to_string()),
        ("t_min", curve.grid[0].to_string()),
        ("t_max", curve.grid[curve.grid.len() - 1].to_string()),
        ("iterations_min", it_min.to_string()),
        ("iterations_median", it_med.to_string()),
        ("iterations_max", it_max.to_string()),
        ("residual_max", curve.max_residual.to_string()),
        ("unwrap_k", curve.unwrap_k.to_string()),
        ("total_mass", curve.total_mass.to_string()),
        (
            "atom_at_zero",
            curve.atom_at_zero.map_or_else(|| "none".into(), |a| a.to_string()),
        ),
        ("mass_deficit", curve.mass_deficit.to_string()),
        ("m0", m0.to_string()),
        ("m1", m1.to_string()),
        ("m2", m2.to_string()),
        ("clip_count", curve.clip_count.to_string()),
        ("skipped_points", skipped.join(";")),
    ];
    for (k, v) in entries {
        let _ = writeln!(meta, "{k}={v}");
    }
    let mpath = meta_path(path);
    fs::write(&mpath, meta).map_err(|e| Error::io(&mpath, e))
}

/// Reads a `t,density` CSV back.
pub fn read_curve_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("t,density") {
        return Err(Error::InvalidArgument(format!("{}: missing `t,density` header", path.display())));
    }
    let mut ts = Vec::new();
    let mut fs_ = Vec::new();
    for (i, line) in lines.enumerate() {
        let parsed = line
            .split_once(',')
            .and_then(|(a, b)| Some((a.parse::<f64>().ok()?, b.parse::<f64>().ok()?)));
        let (t, f) = parsed.ok_or_else(|| Error::InvalidArgument(format!("{}:{}: malformed row", path.display(), i + 2)))?;
        ts.push(t);
        fs_.push(f);
    }
    Ok((ts, fs_))
}
