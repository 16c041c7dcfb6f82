//! `M_n(C)`-valued random variables and their analytic transforms.
//!
//! Two families are supported:
//!
//! * [`DiscreteModel`]: finitely many Hermitian atoms `M_i` with weights `p_i`,
//!   so that `G(b) = sum_i p_i (b - M_i)^-1` exactly.
//! * [`SemicircularModel`]: `gamma * I + S` where `S` is a centered
//!   operator-valued semicircular element with covariance
//!   `eta(b) = sum_k A_k b A_k`. Its Cauchy transform is the fixed point of
//!   `G = (b - eta(G))^-1`, found by the averaged iteration of Helton,
//!   Rashidi Far and Speicher and polished with Newton steps.
//!
//! The public transforms (`cauchy`, `reciprocal_cauchy`, `h_transform`,
//! `eta_transform`) accept arguments in the operator upper or lower
//! half-plane; the lower half-plane is served by the reflection
//! `f(b*) = f(b)*`. The `*_continued` variants additionally accept any
//! argument at which the resolvent exists, which the subordination map needs
//! for its inner evaluations.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matcx::ComplexMatrix;

const WEIGHT_SUM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;

/// Which side of the real axis an argument lies on, in the operator sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfPlane {
    Upper,
    Lower,
    Neither,
}

/// Classifies `b` by the sign of the eigenvalues of `Im b`.
pub fn half_plane(b: &ComplexMatrix) -> Result<HalfPlane> {
    let eig = b.imag_part().hermitian_eigen()?.eigenvalues;
    let lo = eig[0];
    let hi = eig[eig.len() - 1];
    Ok(if lo > 0.0 {
        HalfPlane::Upper
    } else if hi < 0.0 {
        HalfPlane::Lower
    } else {
        HalfPlane::Neither
    })
}

fn domain_escape(what: &'static str, b: &ComplexMatrix) -> Error {
    let im_eigenvalue = b
        .imag_part()
        .hermitian_eigen()
        .map(|e| e.eigenvalues[0])
        .unwrap_or(f64::NAN);
    Error::DomainEscape {
        what,
        im_eigenvalue,
        context: format!("{b:?}"),
    }
}

/// A weighted Hermitian atom of a discrete model.
#[derive(Debug, Clone)]
pub struct Atom {
    pub weight: f64,
    pub matrix: ComplexMatrix,
}

/// Entry of a scalar-block pattern: either a structural zero or `t^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monomial {
    Zero,
    Power(u32),
}

/// Finitely supported `M_n(C)`-valued distribution.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    dim: usize,
    atoms: Vec<Atom>,
}

impl DiscreteModel {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::InvalidModel("discrete model needs at least one atom".into()))?;
        let dim = first.matrix.dim();
        let mut sum = 0.0;
        for (i, atom) in atoms.iter().enumerate() {
            if atom.matrix.dim() != dim {
                return Err(Error::InvalidModel(format!(
                    "atom {i} has dimension {} but atom 0 has {dim}",
                    atom.matrix.dim()
                )));
            }
            if !(atom.weight > 0.0) || !atom.weight.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "atom {i} has non-positive weight {}",
                    atom.weight
                )));
            }
            if !atom.matrix.is_finite() {
                return Err(Error::InvalidModel(format!("atom {i} has non-finite entries")));
            }
            if !atom.matrix.is_hermitian(HERMITIAN_TOL) {
                return Err(Error::InvalidModel(format!("atom {i} is not Hermitian")));
            }
            sum += atom.weight;
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidModel(format!("weights sum {sum} instead of 1")));
        }
        Ok(Self { dim, atoms })
    }

    /// A single atom of weight one.
    pub fn point_mass(matrix: ComplexMatrix) -> Result<Self> {
        Self::new(vec![Atom { weight: 1.0, matrix }])
    }

    /// Scalar (`n = 1`) distribution.
    pub fn scalar(support: &[f64], weights: &[f64]) -> Result<Self> {
        Self::scalar_block(support, weights, &[vec![Monomial::Power(1)]])
    }

    pub fn uniform_scalar(support: &[f64]) -> Result<Self> {
        Self::scalar(support, &uniform_weights(support.len()))
    }

    /// Expands a scalar distribution `t ~ sum_i p_i delta_{t_i}` into the
    /// matrix-valued variable whose `(a, b)` entry is `pattern[a][b]`
    /// evaluated at `t`, e.g. `[[t^2, t^3], [t^3, t^4]]` or `t * I_2`.
    pub fn scalar_block(support: &[f64], weights: &[f64], pattern: &[Vec<Monomial>]) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::InvalidModel(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        let n = pattern.len();
        if n == 0 || pattern.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidModel("block pattern must be a non-empty square array".into()));
        }
        for a in 0..n {
            for b in 0..n {
                if pattern[a][b] != pattern[b][a] {
                    return Err(Error::InvalidModel("block pattern must be symmetric".into()));
                }
            }
        }
        let atoms = support
            .iter()
            .zip(weights)
            .map(|(&t, &w)| {
                let mut m = ComplexMatrix::zeros(n);
                for a in 0..n {
                    for b in 0..n {
                        if let Monomial::Power(k) = pattern[a][b] {
                            m[(a, b)] = Complex64::new(t.powi(k as i32), 0.0);
                        }
                    }
                }
                Atom { weight: w, matrix: m }
            })
            .collect();
        Self::new(atoms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `sum_i p_i (b - M_i)^-1`, valid wherever every resolvent exists.
    fn resolvent_mean(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        let mut acc = ComplexMatrix::zeros(self.dim);
        for atom in &self.atoms {
            let r = (b - &atom.matrix).inverse()?;
            acc = acc + r.scale_real(atom.weight);
        }
        Ok(acc)
    }

    // h(w) = E[(I - x w)^-1 x] E[(I - w x)^-1]^-1 and G(w^-1) = E[(I - w x)^-1] w.
    // Same values as w^-1 - F(w^-1) without forming w^-1, which cancels badly
    // when w is close to singular.
    fn h_transform_direct(&self, w: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
        let identity = ComplexMatrix::identity(self.dim);
        let mut left = ComplexMatrix::zeros(self.dim);
        let mut right = ComplexMatrix::zeros(self.dim);
        for atom in &self.atoms {
            left = left + ((&identity - &(&atom.matrix * w)).inverse()? * &atom.matrix).scale_real(atom.weight);
            right = right + (&identity - &(w * &atom.matrix)).inverse()?.scale_real(atom.weight);
        }
        let g = &right * w;
        Ok((left * right.inverse()?, g))
    }

    fn expectation(&self) -> ComplexMatrix {
        self.atoms
            .iter()
            .fold(ComplexMatrix::zeros(self.dim), |acc, a| acc + a.matrix.scale_real(a.weight))
    }
}

pub fn uniform_weights(count: usize) -> Vec<f64> {
    vec![1.0 / count as f64; count]
}

/// Completely positive map `b -> sum_k A_k b A_k` with Hermitian `A_k`.
#[derive(Debug, Clone)]
pub struct CovarianceMap {
    dim: usize,
    family: Vec<ComplexMatrix>,
}

impl CovarianceMap {
    pub fn new(dim: usize, family: Vec<ComplexMatrix>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("covariance dimension must be positive".into()));
        }
        for (k, a) in family.iter().enumerate() {
            if a.dim() != dim {
                return Err(Error::InvalidModel(format!(
                    "coefficient matrix {k} has dimension {} instead of {dim}",
                    a.dim()
                )));
            }
            if !a.is_finite() || !a.is_hermitian(HERMITIAN_TOL) {
                return Err(Error::InvalidModel(format!("coefficient matrix {k} is not Hermitian")));
            }
        }
        Ok(Self { dim, family })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &[ComplexMatrix] {
        &self.family
    }

    pub fn apply(&self, b: &ComplexMatrix) -> ComplexMatrix {
        self.family
            .iter()
            .fold(ComplexMatrix::zeros(self.dim), |acc, a| acc + a * b * a)
    }

    /// Spectral radius bound `2 sqrt(||eta(1)||)` on the centered semicircular element.
    pub fn norm_bound(&self) -> f64 {
        let eta_one = self.apply(&ComplexMatrix::identity(self.dim));
        let top = eta_one
            .hermitian_eigen()
            .map(|e| *e.eigenvalues.last().unwrap())
            .unwrap_or_else(|_| eta_one.frobenius_norm());
        2.0 * top.max(0.0).sqrt()
    }
}

/// Numerics of the semicircular fixed-point solver.
#[derive(Debug, Clone, Copy)]
pub struct SemicircularSolver {
    /// Relative change (and Newton step) at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Averaging weight of the new iterate; 0.5 is the HRS averaged map.
    pub damping: f64,
    /// Polish with Newton steps once the averaged iteration has settled.
    pub newton_polish: bool,
}

impl Default for SemicircularSolver {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 20_000,
            damping: 0.5,
            newton_polish: true,
        }
    }
}

/// Converged semicircular Cauchy transform value with diagnostics.
#[derive(Debug, Clone)]
pub struct SemicircularSolution {
    pub g: ComplexMatrix,
    pub iterations: usize,
    /// `||(b - eta(G)) G - I||_F`.
    pub residual: f64,
}

/// `gamma * I + S` with `S` centered operator-valued semicircular.
#[derive(Debug, Clone)]
pub struct SemicircularModel {
    covariance: CovarianceMap,
    shift: f64,
    solver: SemicircularSolver,
}

impl SemicircularModel {
    pub fn new(covariance: CovarianceMap, shift: f64) -> Result<Self> {
        if !shift.is_finite() {
            return Err(Error::InvalidModel("semicircular shift must be finite".into()));
        }
        Ok(Self {
            covariance,
            shift,
            solver: SemicircularSolver::default(),
        })
    }

    pub fn from_family(family: Vec<ComplexMatrix>, shift: f64) -> Result<Self> {
        let dim = family
            .first()
            .map(ComplexMatrix::dim)
            .ok_or_else(|| Error::InvalidModel("empty family needs an explicit dimension".into()))?;
        Self::new(CovarianceMap::new(dim, family)?, shift)
    }

    pub fn with_solver(mut self, solver: SemicircularSolver) -> Self {
        self.solver = solver;
        self
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    pub fn covariance(&self) -> &CovarianceMap {
        &self.covariance
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn solver(&self) -> &SemicircularSolver {
        &self.solver
    }

    /// Cauchy transform by the HRS iteration for `Im b > 0`, reflected for
    /// `Im b < 0`. Returns the solution together with its diagnostics.
    pub fn semicircular_cauchy(&self, b: &ComplexMatrix, tol: f64, max_iter: usize) -> Result<SemicircularSolution> {
        let solver = SemicircularSolver {
            tol,
            max_iter,
            ..self.solver
        };
        let u = self.absorb_shift(b);
        match half_plane(&u)? {
            HalfPlane::Upper => self.solve_centered(&u, None, &solver),
            HalfPlane::Lower => {
                let s = self.solve_centered(&u.adjoint(), None, &solver)?;
                Ok(SemicircularSolution { g: s.g.adjoint(), ..s })
            }
            HalfPlane::Neither => Err(domain_escape("semicircular Cauchy transform argument", b)),
        }
    }

    fn absorb_shift(&self, b: &ComplexMatrix) -> ComplexMatrix {
        b - &ComplexMatrix::scalar(b.dim(), Complex64::new(self.shift, 0.0))
    }

    // E[(u - S)^-1] for centered S at any u where the resolvent exists.
    fn centered_resolvent_mean(&self, u: &ComplexMatrix, hint: Option<&ComplexMatrix>) -> Result<ComplexMatrix> {
        match half_plane(u)? {
            HalfPlane::Upper | HalfPlane::Neither => Ok(self.solve_centered(u, hint, &self.solver)?.g),
            HalfPlane::Lower => {
                let hint = hint.map(ComplexMatrix::adjoint);
                Ok(self.solve_centered(&u.adjoint(), hint.as_ref(), &self.solver)?.g.adjoint())
            }
        }
    }

    // Averaged fixed-point iteration G <- (1 - a) G + a (u - eta(G))^-1,
    // followed by an optional Newton polish on (u - eta(G)) G = I.
    //
    // In the W = iG variables this is the HRS map W <- (-iu + eta(W))^-1 and
    // the cold start W0 = iI corresponds to G0 = I. Off the half-planes the
    // same iteration continues the transform analytically; it starts from
    // u^-1, the leading term of the expansion at infinity.
    fn solve_centered(
        &self,
        u: &ComplexMatrix,
        hint: Option<&ComplexMatrix>,
        solver: &SemicircularSolver,
    ) -> Result<SemicircularSolution> {
        let n = u.dim();
        if self.covariance.family().is_empty() {
            let g = u.inverse()?;
            return Ok(SemicircularSolution {
                g,
                iterations: 0,
                residual: 0.0,
            });
        }
        let upper = half_plane(u)? == HalfPlane::Upper;
        let mut g = match hint {
            Some(h) if h.is_finite() => h.clone(),
            _ if upper => ComplexMatrix::identity(n),
            _ => u.inverse()?,
        };
        let alpha = Complex64::new(solver.damping, 0.0);
        let keep = Complex64::new(1.0 - solver.damping, 0.0);
        let switch_tol = if solver.newton_polish { solver.tol.max(1e-8) } else { solver.tol };
        let mut newton_allowed = solver.newton_polish;
        let mut last_change = f64::INFINITY;
        for iteration in 1..=solver.max_iter {
            let next = (u - &self.covariance.apply(&g)).inverse()?;
            let next = g.scale(keep) + next.scale(alpha);
            last_change = (&next - &g).frobenius_norm();
            g = next;
            if !g.is_finite() {
                break;
            }
            let scale = g.frobenius_norm().max(1.0);
            // Slow averaged runs get a Newton attempt every so often.
            if solver.newton_polish && iteration % 256 == 0 && last_change <= 1e-3 * scale {
                if let Some(polished) = self.newton_polish(u, &g, solver.tol) {
                    if self.accept_polish(u, &g, &polished, upper) {
                        let residual = self.residual(u, &polished);
                        return Ok(SemicircularSolution {
                            g: polished,
                            iterations: iteration,
                            residual,
                        });
                    }
                }
            }
            if last_change <= switch_tol * scale {
                if newton_allowed {
                    match self.newton_polish(u, &g, solver.tol) {
                        Some(polished) if self.accept_polish(u, &g, &polished, upper) => {
                            let residual = self.residual(u, &polished);
                            return Ok(SemicircularSolution {
                                g: polished,
                                iterations: iteration,
                                residual,
                            });
                        }
                        _ => newton_allowed = false,
                    }
                }
                if last_change <= solver.tol * scale {
                    let residual = self.residual(u, &g);
                    return Ok(SemicircularSolution {
                        g,
                        iterations: iteration,
                        residual,
                    });
                }
            }
        }
        Err(Error::NoConvergence {
            what: "semicircular fixed-point iteration",
            iterations: solver.max_iter,
            residual: last_change,
        })
    }

    fn residual(&self, u: &ComplexMatrix, g: &ComplexMatrix) -> f64 {
        let n = u.dim();
        ((u - &self.covariance.apply(g)) * g - ComplexMatrix::identity(n)).frobenius_norm()
    }

    fn accept_polish(&self, u: &ComplexMatrix, iterate: &ComplexMatrix, polished: &ComplexMatrix, upper: bool) -> bool {
        if !polished.is_finite() {
            return false;
        }
        // In the half-planes the solution with Im G < 0 is unique, so the
        // sign check below identifies it; elsewhere stay near the iterate.
        let drift = (polished - iterate).frobenius_norm();
        if !upper && drift > 1e-4 * polished.frobenius_norm().max(1.0) {
            return false;
        }
        if upper {
            // Im u > 0 forces Im G < 0.
            match polished.imag_part().hermitian_eigen() {
                Ok(e) if *e.eigenvalues.last().unwrap() < 0.0 => {}
                _ => return false,
            }
        }
        self.residual(u, polished) <= 1e-9 * u.frobenius_norm().max(1.0) * polished.frobenius_norm().max(1.0)
    }

    fn newton_polish(&self, u: &ComplexMatrix, start: &ComplexMatrix, tol: f64) -> Option<ComplexMatrix> {
        let n = u.dim();
        let n2 = n * n;
        let identity = ComplexMatrix::identity(n);
        let mut g = start.clone();
        for _ in 0..30 {
            let lhs = u - &self.covariance.apply(&g);
            let r = &lhs * &g - &identity;
            // Jacobian of G -> (u - eta(G)) G - I applied to each unit matrix.
            let mut jac = ComplexMatrix::zeros(n2);
            for col in 0..n2 {
                let mut e = ComplexMatrix::zeros(n);
                e[(col / n, col % n)] = Complex64::new(1.0, 0.0);
                let d = &lhs * &e - self.covariance.apply(&e) * &g;
                for row in 0..n2 {
                    jac[(row, col)] = d.as_slice()[row];
                }
            }
            let rhs: Vec<Complex64> = r.as_slice().iter().map(|z| -z).collect();
            let step = jac.solve_vec(&rhs).ok()?;
            let step = ComplexMatrix::from_vec(n, step).ok()?;
            g = &g + &step;
            if !g.is_finite() {
                return None;
            }
            if step.frobenius_norm() <= tol.min(1e-14) * g.frobenius_norm().max(1.0) {
                return Some(g);
            }
        }
        // Newton stalls at round-off: accept if the residual is tiny.
        (self.residual(u, &g) <= 1e-13 * u.frobenius_norm().max(1.0) * g.frobenius_norm().max(1.0)).then_some(g)
    }
}

/// A `B = M_n(C)`-valued random variable.
#[derive(Debug, Clone)]
pub enum OperatorModel {
    Discrete(DiscreteModel),
    Semicircular(SemicircularModel),
}

impl From<DiscreteModel> for OperatorModel {
    fn from(m: DiscreteModel) -> Self {
        OperatorModel::Discrete(m)
    }
}

impl From<SemicircularModel> for OperatorModel {
    fn from(m: SemicircularModel) -> Self {
        OperatorModel::Semicircular(m)
    }
}

impl OperatorModel {
    pub fn dim(&self) -> usize {
        match self {
            OperatorModel::Discrete(m) => m.dim(),
            OperatorModel::Semicircular(m) => m.dim(),
        }
    }

    /// `E[x]`.
    pub fn expectation(&self) -> ComplexMatrix {
        match self {
            OperatorModel::Discrete(m) => m.expectation(),
            OperatorModel::Semicircular(m) => ComplexMatrix::scalar(m.dim(), Complex64::new(m.shift, 0.0)),
        }
    }

    /// `G(b) = E[(b - x)^-1]` for `b` in the upper or lower half-plane.
    pub fn cauchy(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_dim(b)?;
        match half_plane(b)? {
            HalfPlane::Neither => Err(domain_escape("Cauchy transform argument", b)),
            _ => self.cauchy_continued(b, None),
        }
    }

    /// `E[(b - x)^-1]` at any `b` where it exists. `hint` warm-starts the
    /// semicircular solver and is ignored by discrete models.
    pub fn cauchy_continued(&self, b: &ComplexMatrix, hint: Option<&ComplexMatrix>) -> Result<ComplexMatrix> {
        self.check_dim(b)?;
        match self {
            OperatorModel::Discrete(m) => m.resolvent_mean(b),
            OperatorModel::Semicircular(m) => m.centered_resolvent_mean(&m.absorb_shift(b), hint),
        }
    }

    /// `F(b) = G(b)^-1`.
    pub fn reciprocal_cauchy(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.cauchy(b)?.inverse()
    }

    /// `h(w) = w^-1 - F(w^-1)`, with `h(0) = E[x]`.
    pub fn h_transform(&self, w: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_dim(w)?;
        if w.frobenius_norm() == 0.0 {
            return Ok(self.expectation());
        }
        match half_plane(w)? {
            HalfPlane::Neither => Err(domain_escape("h transform argument", w)),
            _ => self.h_transform_continued(w, None).map(|(h, _)| h),
        }
    }

    /// `h(w)` at any invertible `w` where the resolvent exists. Also returns
    /// the Cauchy value `G(w^-1)` so callers can reuse it as a warm start.
    pub fn h_transform_continued(
        &self,
        w: &ComplexMatrix,
        hint: Option<&ComplexMatrix>,
    ) -> Result<(ComplexMatrix, ComplexMatrix)> {
        if w.frobenius_norm() == 0.0 {
            return Ok((self.expectation(), ComplexMatrix::zeros(w.dim())));
        }
        match self {
            OperatorModel::Discrete(m) => m.h_transform_direct(w),
            OperatorModel::Semicircular(m) => {
                // F(b) = b - shift - eta(G(b)), so h(w) = shift + eta(G(w^-1)).
                let g = self.cauchy_continued(&w.inverse()?, hint)?;
                let h = m.covariance.apply(&g) + ComplexMatrix::scalar(w.dim(), Complex64::new(m.shift, 0.0));
                Ok((h, g))
            }
        }
    }

    /// `eta(b) = b h(b)`.
    pub fn eta_transform(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        if b.frobenius_norm() == 0.0 {
            return Ok(ComplexMatrix::zeros(b.dim()));
        }
        Ok(b * &self.h_transform(b)?)
    }

    /// `E[(Im(b x))^-1]^-1`, the lower bound on `Im g_b(w)`. `None` when
    /// `Im(b x)` is not strictly positive or the bound is not computable.
    pub fn im_lower_bound(&self, b: &ComplexMatrix) -> Option<ComplexMatrix> {
        match self {
            OperatorModel::Discrete(m) => {
                let mut acc = ComplexMatrix::zeros(m.dim());
                for atom in &m.atoms {
                    let im = (b * &atom.matrix).imag_part();
                    if !im.is_strictly_positive(0.0).ok()? {
                        return None;
                    }
                    acc = acc + im.inverse().ok()?.scale_real(atom.weight);
                }
                // Hermitian up to round-off; drop the skew part.
                acc.inverse().ok().map(|m| m.real_part())
            }
            OperatorModel::Semicircular(m) => {
                // Only scalar b = beta I: Im(beta x) = Im(beta) x.
                let n = m.dim();
                let beta = b[(0, 0)];
                if (b - &ComplexMatrix::scalar(n, beta)).frobenius_norm() > 0.0 || beta.im <= 0.0 {
                    return None;
                }
                if m.shift <= m.covariance.norm_bound() {
                    return None;
                }
                // E[x^-1] = -E[(-shift - S)^-1].
                let u = ComplexMatrix::scalar(n, Complex64::new(-m.shift, 0.0));
                let mean_inverse = -m.centered_resolvent_mean(&u, None).ok()?;
                Some(mean_inverse.inverse().ok()?.real_part().scale_real(beta.im))
            }
        }
    }

    fn check_dim(&self, b: &ComplexMatrix) -> Result<()> {
        if b.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: b.dim(),
            });
        }
        Ok(())
    }

    /// Certified lower bound on the spectrum of the model.
    pub fn spectral_lower_bound(&self) -> Result<f64> {
        match self {
            OperatorModel::Discrete(m) => m
                .atoms
                .iter()
                .map(|a| a.matrix.min_eigenvalue())
                .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v))),
            OperatorModel::Semicircular(m) => Ok(m.shift - m.covariance.norm_bound()),
        }
    }
}

/// Outcome of [`validate_pair`].
#[derive(Debug, Clone, Default)]
pub struct PairReport {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl PairReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.is_ok() {
            Ok(self)
        } else {
            Err(Error::InvalidPair(self.errors.join("; ")))
        }
    }
}

const POSITIVITY_TOL: f64 = 1e-12;

/// Checks the hypotheses of the subordination construction: `x >= 0` (strictly, up to
/// warnings for finite-dimensional `B`) and `y` self-adjoint.
pub fn validate_pair(x: &OperatorModel, y: &OperatorModel) -> PairReport {
    let mut report = PairReport::default();
    if x.dim() != y.dim() {
        report
            .errors
            .push(format!("x has dimension {} but y has dimension {}", x.dim(), y.dim()));
        return report;
    }
    let scale = x.expectation().frobenius_norm().max(1.0);
    match x {
        OperatorModel::Discrete(m) => {
            for (i, atom) in m.atoms().iter().enumerate() {
                match atom.matrix.min_eigenvalue() {
                    Ok(v) if v < -POSITIVITY_TOL * scale => report
                        .errors
                        .push(format!("x not positive: atom {i} has eigenvalue {v:.6e}")),
                    Ok(v) if v <= POSITIVITY_TOL * scale => report.warnings.push(format!(
                        "x has a zero eigenvalue in atom {i}; accepted because B is finite-dimensional"
                    )),
                    Ok(_) => {}
                    Err(e) => report.errors.push(format!("x atom {i}: {e}")),
                }
            }
        }
        OperatorModel::Semicircular(m) => {
            let bound = m.covariance().norm_bound();
            let margin = m.shift() - bound;
            if margin < -POSITIVITY_TOL * scale {
                report.errors.push(format!(
                    "x must be strictly positive: shift {} is below the certified bound {bound:.6} on the semicircular part; swap the factors or increase the shift",
                    m.shift()
                ));
            } else if margin <= POSITIVITY_TOL * scale {
                report.warnings.push(format!(
                    "x is only certified nonnegative (shift {} equals the bound {bound:.6}); accepted because B is finite-dimensional",
                    m.shift()
                ));
            }
        }
    }
    for (name, model) in [("x", x), ("y", y)] {
        if model.expectation().inverse().is_err() {
            report.warnings.push(format!(
                "E[{name}] is singular; accepted because B is finite-dimensional"
            ));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn s1() -> SemicircularModel {
        let a1 = ComplexMatrix::from_real_rows(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let a2 = ComplexMatrix::from_real_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        SemicircularModel::from_family(vec![a1, a2], 0.0).unwrap()
    }

    fn s2(shift: f64) -> SemicircularModel {
        let a3 = ComplexMatrix::identity(2);
        let a4 = ComplexMatrix::from_real_rows(&[vec![1.0, 2.0], vec![2.0, -3.0]]).unwrap();
        SemicircularModel::from_family(vec![a3, a4], shift).unwrap()
    }

    fn bernoulli() -> OperatorModel {
        DiscreteModel::uniform_scalar(&[-1.0, 1.0]).unwrap().into()
    }

    fn scalar(z: Complex64) -> ComplexMatrix {
        ComplexMatrix::scalar(1, z)
    }

    const C_SUPPORT: [f64; 6] = [0.4, 0.7, 1.0, 1.3, 1.5, 1.7];

    fn c_times_identity() -> OperatorModel {
        let pattern = vec![vec![Monomial::Power(1), Monomial::Zero], vec![Monomial::Zero, Monomial::Power(1)]];
        DiscreteModel::scalar_block(&C_SUPPORT, &uniform_weights(6), &pattern)
            .unwrap()
            .into()
    }

    #[test]
    fn discrete_cauchy_examples() {
        let zero: OperatorModel = DiscreteModel::uniform_scalar(&[0.0]).unwrap().into();
        let g = zero.cauchy(&scalar(c(0.0, 1.0))).unwrap();
        assert!((g[(0, 0)] - c(0.0, -1.0)).norm() < 1e-15);

        let g = bernoulli().cauchy(&scalar(c(0.0, 1.0))).unwrap();
        assert!((g[(0, 0)] - c(0.0, -0.5)).norm() < 1e-15);

        let b = ComplexMatrix::scalar(2, c(0.0, 2.0));
        let g = c_times_identity().cauchy(&b).unwrap();
        let gamma: Complex64 = C_SUPPORT.iter().map(|&t| (c(0.0, 2.0) - t).inv()).sum::<Complex64>() / 6.0;
        assert!((&g - &ComplexMatrix::scalar(2, gamma)).frobenius_norm() < 1e-14);
    }

    #[test]
    fn cauchy_rejects_real_axis() {
        let b = ComplexMatrix::from_diagonal(&[c(0.0, 1.0), c(0.0, -1.0)]);
        assert!(matches!(c_times_identity().cauchy(&b), Err(Error::DomainEscape { .. })));
        let m: OperatorModel = s1().into();
        assert!(matches!(m.cauchy(&b), Err(Error::DomainEscape { .. })));
    }

    #[test]
    fn scalar_semicircle_at_i() {
        let m = SemicircularModel::from_family(vec![ComplexMatrix::identity(1)], 0.0).unwrap();
        let s = m.semicircular_cauchy(&scalar(c(0.0, 1.0)), 1e-12, 20_000).unwrap();
        let expected = c(0.0, (1.0 - 5f64.sqrt()) / 2.0);
        assert!((s.g[(0, 0)] - expected).norm() < 1e-12);
    }

    #[test]
    fn empty_family_is_constant() {
        let m = SemicircularModel::new(CovarianceMap::new(2, vec![]).unwrap(), 1.5).unwrap();
        let b = ComplexMatrix::from_rows(&[vec![c(0.2, 1.0), c(0.3, 0.0)], vec![c(0.3, 0.0), c(-1.0, 2.0)]]).unwrap();
        let s = m.semicircular_cauchy(&b, 1e-12, 100).unwrap();
        let expected = (&b - &ComplexMatrix::scalar(2, c(1.5, 0.0))).inverse().unwrap();
        assert!((&s.g - &expected).frobenius_norm() < 1e-14);
        let om: OperatorModel = m.into();
        assert_eq!(om.expectation(), ComplexMatrix::scalar(2, c(1.5, 0.0)));
    }

    #[test]
    fn s1_covariance_matches_explicit_formula() {
        let b = ComplexMatrix::from_rows(&[vec![c(1.0, 2.0), c(3.0, -1.0)], vec![c(0.5, 0.0), c(-2.0, 1.0)]]).unwrap();
        let eta = s1().covariance().apply(&b);
        let (b11, b12, b21, b22) = (b[(0, 0)], b[(0, 1)], b[(1, 0)], b[(1, 1)]);
        let expected = ComplexMatrix::from_rows(&[vec![b11 + b12 + b21 + b22, b11 + b21], vec![b11 + b12, b11 + b22]]).unwrap();
        assert!((&eta - &expected).frobenius_norm() < 1e-14);
    }

    #[test]
    fn s2_covariance_matches_explicit_formula() {
        let b = ComplexMatrix::from_rows(&[vec![c(1.0, 2.0), c(3.0, -1.0)], vec![c(0.5, 0.0), c(-2.0, 1.0)]]).unwrap();
        let eta = s2(0.0).covariance().apply(&b);
        let (b11, b12, b21, b22) = (b[(0, 0)], b[(0, 1)], b[(1, 0)], b[(1, 1)]);
        let expected = ComplexMatrix::from_rows(&[
            vec![b11 * 2.0 + b21 * 2.0 + b12 * 2.0 + b22 * 4.0, b11 * 2.0 - b12 * 2.0 + b21 * 4.0 - b22 * 6.0],
            vec![b11 * 2.0 + b12 * 4.0 - b21 * 2.0 - b22 * 6.0, b11 * 4.0 - b12 * 6.0 - b21 * 6.0 + b22 * 10.0],
        ])
        .unwrap();
        assert!((&eta - &expected).frobenius_norm() < 1e-13);
    }

    #[test]
    fn s1_residual_contract() {
        let b = ComplexMatrix::scalar(2, c(0.0, 2.0));
        let s = s1().semicircular_cauchy(&b, 1e-12, 20_000).unwrap();
        assert!(s.residual <= 1e-10, "residual {}", s.residual);
    }

    #[test]
    fn reciprocal_cauchy_examples() {
        let t = 0.7;
        let atom: OperatorModel = DiscreteModel::uniform_scalar(&[t]).unwrap().into();
        let b = scalar(c(0.3, 1.1));
        assert!((atom.reciprocal_cauchy(&b).unwrap()[(0, 0)] - (c(0.3, 1.1) - t)).norm() < 1e-14);
        let z = c(0.3, 1.1);
        let f = bernoulli().reciprocal_cauchy(&scalar(z)).unwrap()[(0, 0)];
        assert!((f - (z - z.inv())).norm() < 1e-14);
        let m: OperatorModel = s2(8.5).into();
        let b = ComplexMatrix::from_rows(&[vec![c(0.5, 1.0), c(0.2, 0.1)], vec![c(0.2, -0.1), c(-1.0, 0.7)]]).unwrap();
        let up = m.reciprocal_cauchy(&b).unwrap();
        let down = m.reciprocal_cauchy(&b.adjoint()).unwrap();
        assert!((&down - &up.adjoint()).frobenius_norm() < 1e-12);
    }

    #[test]
    fn h_and_eta_examples() {
        let t = 1.7;
        let atom: OperatorModel = DiscreteModel::uniform_scalar(&[t]).unwrap().into();
        let w = scalar(c(0.4, 0.9));
        assert!((atom.h_transform(&w).unwrap()[(0, 0)] - t).norm() < 1e-13);
        assert!((atom.eta_transform(&w).unwrap()[(0, 0)] - c(0.4, 0.9) * t).norm() < 1e-13);
        let h = bernoulli().h_transform(&w).unwrap();
        assert!((h[(0, 0)] - c(0.4, 0.9)).norm() < 1e-13);
        let eta = bernoulli().eta_transform(&w).unwrap();
        assert!((eta[(0, 0)] - c(0.4, 0.9) * c(0.4, 0.9)).norm() < 1e-13);
        assert_eq!(bernoulli().eta_transform(&scalar(c(0.0, 0.0))).unwrap()[(0, 0)], c(0.0, 0.0));
        let zero = ComplexMatrix::zeros(2);
        assert_eq!(c_times_identity().h_transform(&zero).unwrap(), c_times_identity().expectation());
        let m: OperatorModel = s2(8.5).into();
        assert_eq!(m.h_transform(&zero).unwrap(), ComplexMatrix::scalar(2, c(8.5, 0.0)));
    }

    #[test]
    fn h_tends_to_expectation_near_zero() {
        let m: OperatorModel = s2(8.5).into();
        let w = ComplexMatrix::scalar(2, c(0.0, 1e-5));
        let h = m.h_transform(&w).unwrap();
        assert!((&h - &m.expectation()).frobenius_norm() < 1e-3);
    }

    #[test]
    fn expectation_examples() {
        assert!(bernoulli().expectation().frobenius_norm() < 1e-15);
        let mean = C_SUPPORT.iter().sum::<f64>() / 6.0;
        let e = c_times_identity().expectation();
        assert!((&e - &ComplexMatrix::scalar(2, c(mean, 0.0))).frobenius_norm() < 1e-15);
        assert!((mean - 1.1).abs() < 1e-14);
    }

    #[test]
    fn validate_pair_examples() {
        let x: OperatorModel = s2(8.5).into();
        let y: OperatorModel = s1().into();
        let report = validate_pair(&x, &y);
        assert!(report.is_ok(), "{report:?}");

        let bad: OperatorModel = DiscreteModel::point_mass(ComplexMatrix::from_real_diagonal(&[1.0, -1.0]))
            .unwrap()
            .into();
        let report = validate_pair(&bad, &y);
        assert!(report.errors.iter().any(|e| e.contains("x not positive")));

        let projection: OperatorModel = DiscreteModel::uniform_scalar(&[0.0, 1.0]).unwrap().into();
        let report = validate_pair(&projection, &bernoulli());
        assert!(report.is_ok());
        assert!(!report.warnings.is_empty());

        let unshifted: OperatorModel = s2(0.0).into();
        assert!(!validate_pair(&unshifted, &y).is_ok());
    }

    #[test]
    fn weights_must_sum_to_one() {
        let err = DiscreteModel::scalar(&[1.0, 2.0], &[0.5, 0.6]).unwrap_err();
        assert!(err.to_string().contains("weights sum 1.1"), "{err}");
    }

    // Independent weighted-resolvent sum, by explicit 1x1 / 2x2 cofactor formulas.
    fn brute_force_2x2(atoms: &[(f64, [f64; 3])], b: &ComplexMatrix) -> ComplexMatrix {
        let mut acc = [c(0.0, 0.0); 4];
        for (p, [m11, m12, m22]) in atoms {
            let a = b[(0, 0)] - m11;
            let bb = b[(0, 1)] - m12;
            let cc = b[(1, 0)] - m12;
            let d = b[(1, 1)] - m22;
            let det = a * d - bb * cc;
            acc[0] += d / det * p;
            acc[1] += -bb / det * p;
            acc[2] += -cc / det * p;
            acc[3] += a / det * p;
        }
        ComplexMatrix::from_vec(2, acc.to_vec()).unwrap()
    }

    proptest! {
        #[test]
        fn discrete_cauchy_matches_brute_force(
            raw in proptest::collection::vec((0.1f64..1.0, -2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0), 1..6),
            re in -3.0f64..3.0, im in 0.05f64..3.0, off in -1.0f64..1.0,
        ) {
            let total: f64 = raw.iter().map(|r| r.0).sum();
            let atoms: Vec<(f64, [f64; 3])> = raw.iter().map(|&(p, a, b, d)| (p / total, [a, b, d])).collect();
            let model = DiscreteModel::new(atoms.iter().map(|(p, [a, b, d])| Atom {
                weight: *p,
                matrix: ComplexMatrix::from_real_rows(&[vec![*a, *b], vec![*b, *d]]).unwrap(),
            }).collect());
            // Renormalized weights can miss 1 by an ulp or two; skip those draws.
            prop_assume!(model.is_ok());
            let model: OperatorModel = model.unwrap().into();
            let b = ComplexMatrix::from_rows(&[vec![c(re, im), c(off, 0.0)], vec![c(off, 0.0), c(-re, im * 0.5)]]).unwrap();
            let g = model.cauchy(&b).unwrap();
            prop_assert!((&g - &brute_force_2x2(&atoms, &b)).frobenius_norm() <= 1e-13 * g.frobenius_norm().max(1.0));
        }
    }
}
