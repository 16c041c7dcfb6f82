//! Monte Carlo ground truth: realize `(x, y)` as block random matrices of
//! size `n N` and collect the eigenvalues of `X^{1/2} Y X^{1/2}`.
//!
//! Discrete models fill diagonal projections deterministically in
//! proportion to the atom weights; semicircular models use independent
//! complex Wigner matrices, `sum_k A_k (x) W_k + shift I`. When both factors
//! are discrete, `X` is conjugated by `I_n (x) U` with `U` Haar distributed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use faer::linalg::matmul::triangular::{self as tri, BlockStructure};
use faer::{Accum, Mat, MatRef, Par, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::density::DensityCurve;
use crate::error::{Error, Result};
use crate::matcx::ComplexMatrix;
use crate::models::{DiscreteModel, OperatorModel, SemicircularModel};

/// Standard normals by the Marsaglia polar method.
pub struct PolarNormal<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: Rng> PolarNormal<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        loop {
            let u = 2.0 * self.rng.random::<f64>() - 1.0;
            let v = 2.0 * self.rng.random::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * factor);
                return u * factor;
            }
        }
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }
}

/// The seeded generator used for trial `trial` of a run with `seed`.
pub fn trial_rng(seed: u64, trial: usize) -> PolarNormal<ChaCha8Rng> {
    PolarNormal::new(ChaCha8Rng::seed_from_u64(seed ^ trial as u64))
}

fn to_faer(m: &ComplexMatrix) -> Mat<Complex64> {
    let n = m.dim();
    Mat::from_fn(n, n, |i, j| m[(i, j)])
}

fn from_faer(m: MatRef<'_, Complex64>) -> ComplexMatrix {
    let n = m.nrows();
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            data.push(m[(i, j)]);
        }
    }
    ComplexMatrix::from_vec(n, data).expect("square by construction")
}

fn wigner_faer<R: Rng>(n: usize, normal: &mut PolarNormal<R>) -> Mat<Complex64> {
    let diag_sd = (1.0 / n as f64).sqrt();
    let off_sd = (0.5 / n as f64).sqrt();
    let mut w = Mat::<Complex64>::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = Complex64::new(diag_sd * normal.sample(), 0.0);
        for j in i + 1..n {
            let z = Complex64::new(off_sd * normal.sample(), off_sd * normal.sample());
            w[(i, j)] = z;
            w[(j, i)] = z.conj();
        }
    }
    w
}

/// Hermitian `N x N` Wigner matrix: complex off-diagonal entries of variance
/// `1/N`, real diagonal of variance `1/N`.
pub fn sample_wigner<R: Rng>(n: usize, normal: &mut PolarNormal<R>) -> Result<ComplexMatrix> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("Wigner size must be at least 2, got {n}")));
    }
    Ok(from_faer(wigner_faer(n, normal).as_ref()))
}

fn haar_faer<R: Rng>(n: usize, normal: &mut PolarNormal<R>) -> Mat<Complex64> {
    let sd = 0.5f64.sqrt();
    let mut g = Mat::<Complex64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            g[(i, j)] = Complex64::new(sd * normal.sample(), sd * normal.sample());
        }
    }
    let qr = g.qr();
    let mut q: Mat<Complex64> = qr.compute_Q();
    let r = qr.R();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar unitary from the QR factorization of a complex Ginibre matrix,
/// with the phases of `diag R` moved into `Q`.
pub fn sample_haar_unitary<R: Rng>(n: usize, normal: &mut PolarNormal<R>) -> Result<ComplexMatrix> {
    if n < 1 {
        return Err(Error::InvalidArgument("Haar size must be at least 1".into()));
    }
    Ok(from_faer(haar_faer(n, normal).as_ref()))
}

/// Atom index of each of the `N` diagonal slots: `floor(p_i N)` copies of
/// atom `i`, remaining slots to the largest weights.
pub fn proportional_fill(weights: &[f64], n: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = weights.iter().map(|p| (p * n as f64).floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut left = n.saturating_sub(counts.iter().sum());
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat(i).take(c)).collect()
}

fn realize_discrete(model: &DiscreteModel, n: usize) -> Mat<Complex64> {
    let dim = model.dim();
    let weights: Vec<f64> = model.atoms().iter().map(|a| a.weight).collect();
    let slots = proportional_fill(&weights, n);
    let mut x = Mat::<Complex64>::zeros(dim * n, dim * n);
    for (r, &i) in slots.iter().enumerate() {
        let m = &model.atoms()[i].matrix;
        for a in 0..dim {
            for b in 0..dim {
                x[(a * n + r, b * n + r)] = m[(a, b)];
            }
        }
    }
    x
}

fn realize_semicircular<R: Rng>(model: &SemicircularModel, n: usize, normal: &mut PolarNormal<R>) -> Mat<Complex64> {
    let dim = model.dim();
    let mut x = Mat::<Complex64>::zeros(dim * n, dim * n);
    for a_k in model.covariance().family() {
        let w = wigner_faer(n, normal);
        for a in 0..dim {
            for b in 0..dim {
                let coeff = a_k[(a, b)];
                if coeff == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for r in 0..n {
                    for s in 0..n {
                        x[(a * n + r, b * n + s)] += coeff * w[(r, s)];
                    }
                }
            }
        }
    }
    for i in 0..dim * n {
        x[(i, i)] += Complex64::new(model.shift(), 0.0);
    }
    x
}

// (I_n (x) U) X (I_n (x) U*), block by block.
fn conjugate_blocks(x: &Mat<Complex64>, u: &Mat<Complex64>, dim: usize) -> Mat<Complex64> {
    let n = u.nrows();
    let mut out = Mat::<Complex64>::zeros(dim * n, dim * n);
    for a in 0..dim {
        for b in 0..dim {
            let block = x.as_ref().submatrix(a * n, b * n, n, n);
            let conj = u * block * u.adjoint();
            out.as_mut().submatrix_mut(a * n, b * n, n, n).copy_from(&conj);
        }
    }
    out
}

fn realize_faer<R: Rng>(model: &OperatorModel, n: usize, normal: &mut PolarNormal<R>, haar_conjugate: bool) -> Mat<Complex64> {
    let x = match model {
        OperatorModel::Discrete(d) => realize_discrete(d, n),
        OperatorModel::Semicircular(s) => realize_semicircular(s, n, normal),
    };
    if haar_conjugate {
        let u = haar_faer(n, normal);
        conjugate_blocks(&x, &u, model.dim())
    } else {
        x
    }
}

/// Hermitian `n N x n N` realization of a model; block `(a, b)` occupies
/// rows `a N..(a+1) N` and columns `b N..(b+1) N`.
pub fn realize_model<R: Rng>(model: &OperatorModel, n: usize, normal: &mut PolarNormal<R>, haar_conjugate: bool) -> Result<ComplexMatrix> {
    if n < 1 {
        return Err(Error::InvalidArgument("matrix size must be at least 1".into()));
    }
    Ok(from_faer(realize_faer(model, n, normal, haar_conjugate).as_ref()))
}

/// Eigen-decomposition based square root of a positive semidefinite matrix.
/// Eigenvalues down to `-(1e-8 ||x|| + clip_negative)` are treated as zero.
pub fn psd_sqrt(x: &ComplexMatrix, clip_negative: f64) -> Result<ComplexMatrix> {
    let xf = to_faer(x);
    let (v, s) = psd_factor(&xf, clip_negative).map_err(|min| Error::NonPositiveRealization { trial: 0, min_eigenvalue: min })?;
    let n = xf.nrows();
    let scaled = Mat::<Complex64>::from_fn(n, n, |i, j| v[(i, j)] * s[j]);
    Ok(from_faer((&scaled * v.adjoint()).as_ref()))
}

// V and the clipped square roots of the eigenvalues; Err carries the
// offending minimum eigenvalue.
fn psd_factor(x: &Mat<Complex64>, clip_negative: f64) -> std::result::Result<(Mat<Complex64>, Vec<f64>), f64> {
    let eig = x.self_adjoint_eigen(Side::Lower).map_err(|_| f64::NAN)?;
    let values: Vec<f64> = (0..x.nrows()).map(|i| eig.S()[i].re).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let norm = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if min < -(1e-8 * norm + clip_negative) {
        return Err(min);
    }
    Ok((eig.U().to_owned(), values.iter().map(|v| v.max(0.0).sqrt()).collect()))
}

/// One Monte Carlo run.
#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub x: OperatorModel,
    pub y: OperatorModel,
    /// `N`, the size of each block.
    pub matrix_size: usize,
    pub trials: usize,
    pub seed: u64,
    pub bins: usize,
    /// For a `k x k` embedding, drop the `(1 - 1/k) n N` eigenvalues
    /// closest to zero in every trial (the structural zeros).
    pub unwrap_k: usize,
    /// Absolute slack below zero tolerated in the spectrum of `X` before a
    /// trial is rejected; clipped eigenvalues are set to zero.
    pub clip_negative: f64,
}

impl SimulationSpec {
    pub fn new(x: OperatorModel, y: OperatorModel) -> Self {
        Self {
            x,
            y,
            matrix_size: 500,
            trials: 100,
            seed: 0,
            bins: 200,
            unwrap_k: 1,
            clip_negative: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.dim() != self.y.dim() {
            return Err(Error::DimensionMismatch {
                left: self.x.dim(),
                right: self.y.dim(),
            });
        }
        if self.matrix_size < 2 {
            return Err(Error::InvalidArgument(format!("matrix size must be at least 2, got {}", self.matrix_size)));
        }
        if self.trials < 1 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.bins < 10 {
            return Err(Error::InvalidArgument(format!("bins must be at least 10, got {}", self.bins)));
        }
        if self.unwrap_k < 1 || (self.x.dim() * self.matrix_size) % self.unwrap_k != 0 {
            return Err(Error::InvalidArgument(format!(
                "unwrap_k = {} must divide n N = {}",
                self.unwrap_k,
                self.x.dim() * self.matrix_size
            )));
        }
        if !(self.clip_negative >= 0.0) {
            return Err(Error::InvalidArgument("clip_negative must be non-negative".into()));
        }
        Ok(())
    }
}

/// Pooled eigenvalues and their density-normalized histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSpectrum {
    pub eigenvalues: Vec<f64>,
    pub edges: Vec<f64>,
    pub heights: Vec<f64>,
}

impl EmpiricalSpectrum {
    pub fn from_eigenvalues(eigenvalues: Vec<f64>, bins: usize) -> Result<Self> {
        let (edges, heights) = histogram(&eigenvalues, bins)?;
        Ok(Self {
            eigenvalues,
            edges,
            heights,
        })
    }

    /// A histogram without samples behind it.
    pub fn from_histogram(edges: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        if edges.len() != heights.len() + 1 || heights.is_empty() || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("histogram needs increasing edges, one more than heights".into()));
        }
        Ok(Self {
            eigenvalues: Vec::new(),
            edges,
            heights,
        })
    }

    pub fn mass(&self) -> f64 {
        self.edges.windows(2).zip(&self.heights).map(|(e, h)| (e[1] - e[0]) * h).sum()
    }

    pub fn write_eigenvalues_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("eigenvalue\n");
        for v in &self.eigenvalues {
            let _ = writeln!(out, "{v}");
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn write_histogram_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("bin_left,bin_right,density\n");
        for (e, h) in self.edges.windows(2).zip(&self.heights) {
            let _ = writeln!(out, "{},{},{}", e[0], e[1], h);
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Equal-width histogram over the sample range, normalized to unit area.
pub fn histogram(samples: &[f64], bins: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("cannot histogram an empty sample".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be positive".into()));
    }
    let mut lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument("samples must be finite".into()));
    }
    if hi - lo < 1e-12 * hi.abs().max(1.0) {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    edges[bins] = hi;
    let mut counts = vec![0usize; bins];
    for &s in samples {
        let idx = (((s - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let total = samples.len() as f64;
    let heights = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| c as f64 / (total * (e[1] - e[0])))
        .collect();
    Ok((edges, heights))
}

// Lower half of L* Y L; the eigensolver reads only that half.
fn lower_congruence(y: &Mat<Complex64>, l: MatRef<'_, Complex64>) -> Mat<Complex64> {
    let n = y.nrows();
    let one = Complex64::new(1.0, 0.0);
    let mut yl = Mat::<Complex64>::zeros(n, n);
    tri::matmul(&mut yl, BlockStructure::Rectangular, Accum::Replace, y, BlockStructure::Rectangular, l, BlockStructure::TriangularLower, one, Par::Seq);
    let mut out = Mat::<Complex64>::zeros(n, n);
    tri::matmul(&mut out, BlockStructure::TriangularLower, Accum::Replace, l.adjoint(), BlockStructure::TriangularUpper, &yl, BlockStructure::Rectangular, one, Par::Seq);
    out
}

fn trial_spectrum(spec: &SimulationSpec, trial: usize) -> Result<Vec<f64>> {
    let mut normal = trial_rng(spec.seed, trial);
    let n = spec.matrix_size;
    let both_discrete = matches!(
        (&spec.x, &spec.y),
        (OperatorModel::Discrete(_), OperatorModel::Discrete(_))
    );
    let x = realize_faer(&spec.x, n, &mut normal, both_discrete);
    let y = realize_faer(&spec.y, n, &mut normal, false);

    let product = match x.llt(Side::Lower) {
        Ok(llt) => lower_congruence(&y, llt.L()),
        Err(_) => {
            let (v, s) = psd_factor(&x, spec.clip_negative).map_err(|min| {
                if min.is_nan() {
                    Error::Eigensolver(format!("eigendecomposition of X failed in trial {trial}"))
                } else {
                    Error::NonPositiveRealization {
                        trial,
                        min_eigenvalue: min,
                    }
                }
            })?;
            let m = v.adjoint() * &y * &v;
            Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (s[i] * s[j]))
        }
    };
    let mut values = product
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("trial {trial}: {e:?}")))?;
    if spec.unwrap_k > 1 {
        let drop = values.len() - values.len() / spec.unwrap_k;
        values.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        values.drain(..drop);
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Eigenvalues of `X^{1/2} Y X^{1/2}` pooled over all trials.
///
/// Trial `i` draws from `ChaCha8Rng::seed_from_u64(seed ^ i)`, so the
/// result does not depend on scheduling. The dense kernels run
/// single-threaded; trials run in parallel.
pub fn product_spectrum(spec: &SimulationSpec) -> Result<EmpiricalSpectrum> {
    spec.validate()?;
    faer::set_global_parallelism(Par::Seq);
    let per_trial: Vec<Vec<f64>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| trial_spectrum(spec, trial))
        .collect::<Result<_>>()?;
    let eigenvalues: Vec<f64> = per_trial.into_iter().flatten().collect();
    EmpiricalSpectrum::from_eigenvalues(eigenvalues, spec.bins)
}

/// `int |f_curve - f_hist| dt`, with the curve linear between grid points
/// and zero outside its grid, the histogram constant on bins and zero
/// outside its edges. Computed exactly on the merged breakpoints.
pub fn l1_distance(curve: &DensityCurve, emp: &EmpiricalSpectrum) -> Result<f64> {
    if emp.heights.is_empty() {
        return Err(Error::InvalidArgument("empty histogram".into()));
    }
    let mut points: Vec<f64> = curve.grid.iter().chain(emp.edges.iter()).copied().collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    let grid = &curve.grid;
    let curve_at = |t: f64| -> f64 {
        if t < grid[0] || t > grid[grid.len() - 1] {
            return 0.0;
        }
        let i = grid.partition_point(|g| *g <= t).clamp(1, grid.len() - 1);
        let (t0, t1) = (grid[i - 1], grid[i]);
        let (f0, f1) = (curve.values[i - 1], curve.values[i]);
        f0 + (f1 - f0) * (t - t0) / (t1 - t0)
    };
    let edges = &emp.edges;
    let hist_on = |mid: f64| -> f64 {
        if mid < edges[0] || mid > edges[edges.len() - 1] {
            return 0.0;
        }
        let i = edges.partition_point(|e| *e <= mid).clamp(1, edges.len() - 1);
        emp.heights[i - 1]
    };

    let mut total = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        // One-sided limits keep the interpolation inside the sub-interval.
        let inside = |t: f64| t >= grid[0] && t <= grid[grid.len() - 1];
        let (fa, fb) = if inside(mid) { (curve_at(a), curve_at(b)) } else { (0.0, 0.0) };
        let h = hist_on(mid);
        let (d0, d1) = (fa - h, fb - h);
        let len = b - a;
        total += if d0 * d1 >= 0.0 {
            0.5 * len * (d0 + d1).abs()
        } else {
            0.5 * len * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
        };
    }
    Ok(total)
}

/// Average of the piecewise-linear curve over each histogram bin.
pub fn bin_averages(curve: &DensityCurve, edges: &[f64]) -> Vec<f64> {
    let grid = &curve.grid;
    let at = |t: f64| -> f64 {
        let i = grid.partition_point(|g| *g <= t).clamp(1, grid.len() - 1);
        let (t0, t1) = (grid[i - 1], grid[i]);
        let (f0, f1) = (curve.values[i - 1], curve.values[i]);
        f0 + (f1 - f0) * (t - t0) / (t1 - t0)
    };
    // Integral of the curve from grid[0] to t, clamped to the grid.
    let cumulative: Vec<f64> = std::iter::once(0.0)
        .chain(grid.windows(2).zip(curve.values.windows(2)).scan(0.0, |acc, (g, v)| {
            *acc += 0.5 * (g[1] - g[0]) * (v[0] + v[1]);
            Some(*acc)
        }))
        .collect();
    let integral_to = |t: f64| -> f64 {
        if t <= grid[0] {
            return 0.0;
        }
        if t >= grid[grid.len() - 1] {
            return cumulative[cumulative.len() - 1];
        }
        let i = grid.partition_point(|g| *g <= t).clamp(1, grid.len() - 1);
        cumulative[i - 1] + 0.5 * (t - grid[i - 1]) * (curve.values[i - 1] + at(t))
    };
    edges
        .windows(2)
        .map(|e| (integral_to(e[1]) - integral_to(e[0])) / (e[1] - e[0]))
        .collect()
}

/// L1 distance at histogram resolution: the curve is first averaged over
/// each bin. Curve mass outside the histogram range counts in full.
pub fn binned_l1_distance(curve: &DensityCurve, emp: &EmpiricalSpectrum) -> Result<f64> {
    if emp.heights.is_empty() {
        return Err(Error::InvalidArgument("empty histogram".into()));
    }
    let avg = bin_averages(curve, &emp.edges);
    let inside: f64 = avg.iter().zip(emp.edges.windows(2)).map(|(a, e)| a * (e[1] - e[0])).sum();
    let outside = (curve.total_mass - inside).max(0.0);
    let diff: f64 = avg
        .iter()
        .zip(&emp.heights)
        .zip(emp.edges.windows(2))
        .map(|((a, h), e)| (a - h).abs() * (e[1] - e[0]))
        .sum();
    Ok(diff + outside)
}

/// `l1_distance` between the curve and its own bin averages: the part of
/// the L1 distance no histogram on these edges can remove.
pub fn binning_floor(curve: &DensityCurve, edges: &[f64]) -> Result<f64> {
    let own = EmpiricalSpectrum::from_histogram(edges.to_vec(), bin_averages(curve, edges))?;
    l1_distance(curve, &own)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DiscreteModel;

    fn semicircle_cdf(x: f64) -> f64 {
        let x = x.clamp(-2.0, 2.0);
        0.5 + x * (4.0 - x * x).sqrt() / (4.0 * std::f64::consts::PI) + (x / 2.0).asin() / std::f64::consts::PI
    }

    fn eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
        to_faer(m).self_adjoint_eigenvalues(Side::Lower).unwrap()
    }

    #[test]
    fn polar_normal_moments() {
        let mut normal = trial_rng(7, 0);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| normal.sample()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 5.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn wigner_examples() {
        let n = 1000;
        let w = sample_wigner(n, &mut trial_rng(1, 0)).unwrap();
        assert!(w.is_hermitian(0.0));
        let mut ev = eigenvalues(&w);
        ev.sort_by(f64::total_cmp);
        let ks = ev
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = semicircle_cdf(x);
                (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks <= 0.05, "KS {ks}");
        let mean = w.as_slice().iter().sum::<Complex64>() / (n * n) as f64;
        assert!(mean.norm() <= 5.0 / n as f64);

        let again = sample_wigner(n, &mut trial_rng(1, 0)).unwrap();
        assert_eq!(w.as_slice(), again.as_slice());
    }

    #[test]
    fn haar_examples() {
        let u = sample_haar_unitary(50, &mut trial_rng(3, 0)).unwrap();
        let defect = (&(u.adjoint() * &u) - &ComplexMatrix::identity(50)).frobenius_norm();
        assert!(defect <= 1e-10);
        let col: f64 = (0..50).map(|i| u[(i, 0)].norm_sqr()).sum();
        assert!((col - 1.0).abs() <= 1e-12);

        let n = 8;
        let draws = 200;
        let mut normal = trial_rng(11, 0);
        let samples: Vec<f64> = (0..draws)
            .map(|_| sample_haar_unitary(n, &mut normal).unwrap()[(0, 0)].norm_sqr())
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        // |Q_11|^2 ~ Beta(1, N - 1).
        let var = (n - 1) as f64 / ((n * n) as f64 * (n + 1) as f64);
        assert!((mean - 1.0 / n as f64).abs() <= 3.0 * (var / draws as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn proportional_fill_counts() {
        let slots = proportional_fill(&[0.5, 0.3, 0.2], 7);
        let count = |i| slots.iter().filter(|&&s| s == i).count();
        assert_eq!(slots.len(), 7);
        assert_eq!((count(0), count(1), count(2)), (4, 2, 1));
    }

    #[test]
    fn realization_examples() {
        let support = [0.4, 0.7, 1.0, 1.3, 1.5, 1.7];
        let c = DiscreteModel::scalar_block(
            &support,
            &crate::models::uniform_weights(6),
            &[
                vec![crate::models::Monomial::Power(1), crate::models::Monomial::Zero],
                vec![crate::models::Monomial::Zero, crate::models::Monomial::Power(1)],
            ],
        )
        .unwrap();
        let x = realize_model(&c.into(), 60, &mut trial_rng(0, 0), false).unwrap();
        for v in eigenvalues(&x) {
            assert!(support.iter().any(|s| (s - v).abs() < 1e-12), "{v}");
        }

        let empty: OperatorModel = SemicircularModel::new(crate::CovarianceMap::new(2, vec![]).unwrap(), 3.0)
            .unwrap()
            .into();
        let m = realize_model(&empty, 10, &mut trial_rng(0, 0), false).unwrap();
        assert!((&m - &ComplexMatrix::scalar(20, Complex64::new(3.0, 0.0))).frobenius_norm() < 1e-15);
    }

    #[test]
    fn psd_sqrt_contract() {
        let a = sample_wigner(40, &mut trial_rng(5, 0)).unwrap();
        let x = &a * &a;
        let s = psd_sqrt(&x, 0.0).unwrap();
        let norm = eigenvalues(&x).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!((&(&s * &s) - &x).frobenius_norm() <= 1e-8 * norm * 40f64.sqrt());
        assert!(matches!(psd_sqrt(&a, 0.0), Err(Error::NonPositiveRealization { .. })));
    }

    #[test]
    fn identity_x_reproduces_y_spectrum() {
        let x: OperatorModel = DiscreteModel::uniform_scalar(&[1.0]).unwrap().into();
        let y: OperatorModel = DiscreteModel::uniform_scalar(&[-1.0, 1.0]).unwrap().into();
        let spec = SimulationSpec {
            matrix_size: 20,
            trials: 3,
            bins: 10,
            ..SimulationSpec::new(x, y)
        };
        let emp = product_spectrum(&spec).unwrap();
        assert_eq!(emp.eigenvalues.len(), 60);
        for v in &emp.eigenvalues {
            assert!((v.abs() - 1.0).abs() < 1e-12);
        }
        assert!((emp.mass() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn spectrum_is_deterministic() {
        let x: OperatorModel = DiscreteModel::uniform_scalar(&[0.5, 2.0]).unwrap().into();
        let y: OperatorModel = DiscreteModel::uniform_scalar(&[-1.0, 1.0, 3.0]).unwrap().into();
        let spec = SimulationSpec {
            matrix_size: 30,
            trials: 4,
            bins: 20,
            seed: 99,
            ..SimulationSpec::new(x, y)
        };
        assert_eq!(product_spectrum(&spec).unwrap(), product_spectrum(&spec).unwrap());
    }

    #[test]
    fn l1_examples() {
        let n = 4001;
        let grid: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64).collect();
        let sc = |t: f64| (4.0 - t * t).max(0.0).sqrt() / (2.0 * std::f64::consts::PI);
        let curve = DensityCurve::from_values(grid.clone(), grid.iter().map(|&t| sc(t)).collect(), 1e-4).unwrap();
        let bins = 200;
        let edges: Vec<f64> = (0..=bins).map(|i| -2.0 + 4.0 * i as f64 / bins as f64).collect();
        let heights = edges
            .windows(2)
            .map(|e| (semicircle_cdf(e[1]) - semicircle_cdf(e[0])) / (e[1] - e[0]))
            .collect();
        let emp = EmpiricalSpectrum::from_histogram(edges, heights).unwrap();
        let d = l1_distance(&curve, &emp).unwrap();
        assert!(d <= 0.02, "self distance {d}");

        let far = EmpiricalSpectrum::from_histogram(vec![10.0, 11.0], vec![1.0]).unwrap();
        let d = l1_distance(&curve, &far).unwrap();
        assert!((d - 2.0).abs() < 1e-3, "{d}");

        let empty = EmpiricalSpectrum {
            eigenvalues: vec![],
            edges: vec![0.0],
            heights: vec![],
        };
        assert!(l1_distance(&curve, &empty).is_err());
    }

    #[test]
    fn l1_exact_on_piecewise_linear() {
        // Curve: triangle on [0, 2] peaking at 1; histogram: 0.5 on [0, 2].
        let curve = DensityCurve::from_values(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0], 1e-4).unwrap();
        let emp = EmpiricalSpectrum::from_histogram(vec![0.0, 2.0], vec![0.5]).unwrap();
        // |t - 0.5| on [0,1], doubled: 2 * (0.125 + 0.125) = 0.5.
        assert!((l1_distance(&curve, &emp).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn triangular_congruence_matches_dense() {
        let n = 24;
        let mut normal = trial_rng(7, 0);
        let y = to_faer(&sample_wigner(n, &mut normal).unwrap());
        let a = to_faer(&sample_wigner(n, &mut normal).unwrap());
        let x = &a * a.adjoint() + Mat::<Complex64>::identity(n, n);
        let llt = x.llt(Side::Lower).unwrap();
        let fast = lower_congruence(&y, llt.L())
            .self_adjoint_eigenvalues(Side::Lower)
            .unwrap();
        let l = llt.L().to_owned();
        let dense = (l.adjoint() * &y * &l).self_adjoint_eigenvalues(Side::Lower).unwrap();
        let scale = dense.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (f, d) in fast.iter().zip(&dense) {
            assert!((f - d).abs() <= 1e-10 * scale, "{f} vs {d}");
        }
    }

    #[test]
    fn binned_diagnostics() {
        // Triangle of mass 1 on [0, 2]; bins [0, 1], [1, 2] average 0.5 each.
        let curve = DensityCurve::from_values(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0], 1e-4).unwrap();
        let edges = vec![0.0, 1.0, 2.0];
        let avg = bin_averages(&curve, &edges);
        assert!((avg[0] - 0.5).abs() < 1e-15 && (avg[1] - 0.5).abs() < 1e-15);
        let exact = EmpiricalSpectrum::from_histogram(edges.clone(), vec![0.5, 0.5]).unwrap();
        assert!(binned_l1_distance(&curve, &exact).unwrap() < 1e-15);
        // |t - 0.5| on [0, 1] twice.
        assert!((binning_floor(&curve, &edges).unwrap() - 0.5).abs() < 1e-14);
        let off = EmpiricalSpectrum::from_histogram(vec![0.0, 1.0], vec![1.0]).unwrap();
        // Bin [0, 1]: |0.5 - 1| = 0.5, plus mass 0.5 outside.
        assert!((binned_l1_distance(&curve, &off).unwrap() - 1.0).abs() < 1e-14);
    }
}
