//! Subordination function of a product `x y` of `B`-free variables.
//!
//! For `x > 0`, `y = y*` and `b` with `Im(b x) > 0`, the map
//!
//! ```text
//! g_b(w) = b h_x(h_y(w) b)
//! ```
//!
//! sends the operator upper half-plane strictly into itself, and its iterates
//! converge to `omega2(b)` from any starting point there. From `omega2` one
//! gets `h_{xy}(b) = b^-1 omega2(b) h_y(omega2(b))` and then the Cauchy
//! transform of the product at scalar points,
//! `G_{xy}(z I) = (z I - h_{xy}(z^-1 I))^-1`.
//!
//! All lower half-plane arguments are served by computing at `b*` and taking
//! the adjoint; see [`reflect`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matcx::ComplexMatrix;
use crate::models::{half_plane, validate_pair, HalfPlane, OperatorModel};

/// Numerics of the `omega2` iteration.
#[derive(Debug, Clone)]
pub struct IterationConfig {
    /// Stop once `||g_b(w) - w|| <= tol * max(1, ||w||)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Averaging weight: `w <- (1 - damping) w + damping g_b(w)`.
    pub damping: f64,
    /// Starting point in the upper half-plane; `None` means `i I`. Lower
    /// half-plane arguments are iterated at `b*`, so the start is used as is.
    pub w0: Option<ComplexMatrix>,
    /// Try Newton steps on `g_b(w) - w` once the plain iteration slows down.
    /// A step is kept only if it stays in the upper half-plane and lowers
    /// the residual, so the fixed point is the same either way.
    pub accelerate: bool,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
            damping: 1.0,
            w0: None,
            accelerate: true,
        }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if let Some(w0) = &self.w0 {
            if half_plane(w0)? != HalfPlane::Upper {
                return Err(Error::InvalidArgument("w0 must have Im w0 > 0".into()));
            }
        }
        Ok(())
    }

    pub fn with_w0(mut self, w0: ComplexMatrix) -> Self {
        self.w0 = Some(w0);
        self
    }
}

/// Converged subordination value.
#[derive(Debug, Clone)]
pub struct SubordinationResult {
    pub omega2: ComplexMatrix,
    pub iterations: usize,
    /// `||omega2 - g_b(omega2)||_F`.
    pub residual: f64,
    /// Whether `Im omega2 >= E[(Im(b x))^-1]^-1 - 10 tol` held; `None` when
    /// the bound was not computable (x not strictly positive, general `b`
    /// with a semicircular `x`).
    pub im_lower_bound_ok: Option<bool>,
}

// Warm starts for the inner Cauchy solves; discrete models ignore them.
#[derive(Default, Clone)]
struct InnerHints {
    gx: Option<ComplexMatrix>,
    gy: Option<ComplexMatrix>,
}

/// Applies `f` at `b` when `Im b > 0` and at `b*` (adjointing the result)
/// when `Im b < 0`. Everything that needs the Schwarz reflection goes
/// through here.
pub fn reflect<T>(
    b: &ComplexMatrix,
    what: &'static str,
    f: impl FnOnce(&ComplexMatrix) -> Result<T>,
    adjoint: impl FnOnce(T) -> T,
) -> Result<T> {
    match half_plane(b)? {
        HalfPlane::Upper => f(b),
        HalfPlane::Lower => f(&b.adjoint()).map(adjoint),
        HalfPlane::Neither => Err(Error::DomainEscape {
            what,
            im_eigenvalue: b.imag_part().min_eigenvalue().unwrap_or(f64::NAN),
            context: format!("{b:?}"),
        }),
    }
}

/// `g_b(w) = b h_x(h_y(w) b)`.
pub fn g_map(x: &OperatorModel, y: &OperatorModel, b: &ComplexMatrix, w: &ComplexMatrix) -> Result<ComplexMatrix> {
    g_map_hinted(x, y, b, w, &mut InnerHints::default())
}

fn g_map_hinted(
    x: &OperatorModel,
    y: &OperatorModel,
    b: &ComplexMatrix,
    w: &ComplexMatrix,
    hints: &mut InnerHints,
) -> Result<ComplexMatrix> {
    let (hy, gy) = y.h_transform_continued(w, hints.gy.as_ref())?;
    hints.gy = Some(gy);
    let inner = &hy * b;
    let (hx, gx) = x.h_transform_continued(&inner, hints.gx.as_ref()).map_err(|e| match e {
        Error::SingularMatrix { .. } | Error::NoConvergence { .. } => Error::DomainEscape {
            what: "h_y(w) b",
            im_eigenvalue: inner.imag_part().min_eigenvalue().unwrap_or(f64::NAN),
            context: format!("{inner:?} ({e})"),
        },
        other => other,
    })?;
    hints.gx = Some(gx);
    Ok(b * &hx)
}

fn check_pair(x: &OperatorModel, y: &OperatorModel) -> Result<()> {
    validate_pair(x, y).into_result().map(|_| ())
}

/// Fixed point `omega2(b)` of `g_b`, for `Im b > 0` or (by reflection) `Im b < 0`.
pub fn omega2(x: &OperatorModel, y: &OperatorModel, b: &ComplexMatrix, cfg: &IterationConfig) -> Result<SubordinationResult> {
    check_pair(x, y)?;
    cfg.validate()?;
    omega2_unchecked(x, y, b, cfg)
}

pub(crate) fn omega2_unchecked(
    x: &OperatorModel,
    y: &OperatorModel,
    b: &ComplexMatrix,
    cfg: &IterationConfig,
) -> Result<SubordinationResult> {
    if b.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: b.dim(),
        });
    }
    b.inverse()?;
    reflect(
        b,
        "omega2 argument",
        |b_up| {
            iterate_upper(x, y, b_up, cfg)
        },
        |mut r| {
            r.omega2 = r.omega2.adjoint();
            r
        },
    )
}

fn iterate_upper(x: &OperatorModel, y: &OperatorModel, b: &ComplexMatrix, cfg: &IterationConfig) -> Result<SubordinationResult> {
    let n = b.dim();
    let mut w = cfg
        .w0
        .clone()
        .unwrap_or_else(|| ComplexMatrix::scalar(n, Complex64::new(0.0, 1.0)));
    let mut hints = InnerHints::default();
    let alpha = Complex64::new(cfg.damping, 0.0);
    let keep = Complex64::new(1.0 - cfg.damping, 0.0);
    let mut residual = f64::INFINITY;
    let mut previous = f64::INFINITY;
    let mut newton_from = NEWTON_WARMUP;
    let mut newton_active = false;
    for iteration in 0..cfg.max_iter {
        let g = g_map_hinted(x, y, b, &w, &mut hints)?;
        residual = (&g - &w).frobenius_norm();
        if residual <= cfg.tol * w.frobenius_norm().max(1.0) {
            let im_lower_bound_ok = x.im_lower_bound(b).map(|bound| {
                (&w.imag_part() - &bound)
                    .real_part()
                    .min_eigenvalue()
                    .map(|v| v >= -10.0 * cfg.tol)
                    .unwrap_or(false)
            });
            return Ok(SubordinationResult {
                omega2: w,
                iterations: iteration,
                residual,
                im_lower_bound_ok,
            });
        }
        let slow = residual > 0.5 * previous;
        previous = residual;
        if cfg.accelerate && (newton_active || (slow && iteration >= newton_from)) {
            match newton_step(x, y, b, &w, &g, residual, &hints) {
                Some(next) => {
                    w = next;
                    newton_active = true;
                    continue;
                }
                None => {
                    newton_active = false;
                    newton_from = iteration + NEWTON_WARMUP;
                }
            }
        }
        w = w.scale(keep) + g.scale(alpha);
        let im_min = w.imag_part().min_eigenvalue()?;
        if !(im_min > 0.0) {
            return Err(Error::DomainEscape {
                what: "omega2 iterate",
                im_eigenvalue: im_min,
                context: format!("iteration {iteration}, w = {w:?}"),
            });
        }
    }
    Err(Error::NoConvergence {
        what: "omega2 iteration",
        iterations: cfg.max_iter,
        residual,
    })
}

const NEWTON_WARMUP: usize = 25;

// One Newton step on F(w) = g_b(w) - w. g_b is holomorphic in w, so its
// derivative is complex linear and central differences along the n^2 unit
// matrices give the full Jacobian.
fn newton_step(
    x: &OperatorModel,
    y: &OperatorModel,
    b: &ComplexMatrix,
    w: &ComplexMatrix,
    g: &ComplexMatrix,
    residual: f64,
    hints: &InnerHints,
) -> Option<ComplexMatrix> {
    let n = w.dim();
    let n2 = n * n;
    let im_min = w.imag_part().min_eigenvalue().ok()?;
    let h = (1e-6 * w.frobenius_norm().max(1e-300)).min(1e-3 * im_min);
    if !(h > 0.0) {
        return None;
    }
    let mut jac = ComplexMatrix::zeros(n2);
    for col in 0..n2 {
        let mut e = ComplexMatrix::zeros(n);
        e[(col / n, col % n)] = Complex64::new(h, 0.0);
        let plus = g_map_hinted(x, y, b, &(w + &e), &mut hints.clone()).ok()?;
        let minus = g_map_hinted(x, y, b, &(w - &e), &mut hints.clone()).ok()?;
        let d = (plus - minus).scale(Complex64::new(0.5 / h, 0.0));
        for row in 0..n2 {
            jac[(row, col)] = d.as_slice()[row];
        }
        jac[(col, col)] -= Complex64::new(1.0, 0.0);
    }
    let rhs: Vec<Complex64> = (w - g).as_slice().to_vec();
    let step = ComplexMatrix::from_vec(n, jac.solve_vec(&rhs).ok()?).ok()?;
    let next = w + &step;
    if !next.is_finite() || !(next.imag_part().min_eigenvalue().ok()? > 0.0) {
        return None;
    }
    let g_next = g_map_hinted(x, y, b, &next, &mut hints.clone()).ok()?;
    ((&g_next - &next).frobenius_norm() < residual).then_some(next)
}

/// `omega1(b) = h_y(omega2(b)) b`.
pub fn omega1(x: &OperatorModel, y: &OperatorModel, b: &ComplexMatrix, cfg: &IterationConfig) -> Result<ComplexMatrix> {
    check_pair(x, y)?;
    cfg.validate()?;
    reflect(
        b,
        "omega1 argument",
        |b_up| {
            let w = omega2_unchecked(x, y, b_up, cfg)?.omega2;
            Ok(y.h_transform_continued(&w, None)?.0 * b_up)
        },
        |m| m.adjoint(),
    )
}

/// `h_{xy}(b) = b^-1 omega2(b) h_y(omega2(b))`.
pub fn h_product(x: &OperatorModel, y: &OperatorModel, b: &ComplexMatrix, cfg: &IterationConfig) -> Result<ComplexMatrix> {
    check_pair(x, y)?;
    cfg.validate()?;
    Ok(h_product_unchecked(x, y, b, cfg)?.0)
}

fn h_product_unchecked(
    x: &OperatorModel,
    y: &OperatorModel,
    b: &ComplexMatrix,
    cfg: &IterationConfig,
) -> Result<(ComplexMatrix, SubordinationResult)> {
    reflect(
        b,
        "h_product argument",
        |b_up| {
            let sub = omega2_unchecked(x, y, b_up, cfg)?;
            let hy = y.h_transform_continued(&sub.omega2, None)?.0;
            let h = b_up.inverse()? * &sub.omega2 * hy;
            Ok((h, sub))
        },
        |(h, mut sub)| {
            sub.omega2 = sub.omega2.adjoint();
            (h.adjoint(), sub)
        },
    )
}

/// `G_{xy}(z I)` together with the subordination diagnostics of the point.
#[derive(Debug, Clone)]
pub struct ProductPoint {
    pub cauchy: ComplexMatrix,
    /// Subordination result at `b = conj(z)^-1 I`, the upper half-plane
    /// reflection of `z^-1 I`.
    pub subordination: SubordinationResult,
}

/// `G_{xy}(z I) = (z I - h_{xy}(z^-1 I))^-1` for `Im z > 0`.
pub fn cauchy_product_scalar_point(
    x: &OperatorModel,
    y: &OperatorModel,
    z: Complex64,
    cfg: &IterationConfig,
) -> Result<ComplexMatrix> {
    check_pair(x, y)?;
    cfg.validate()?;
    Ok(cauchy_product_at(x, y, z, cfg)?.cauchy)
}

/// Unchecked variant used by the density grid, which validates once. The
/// warm start `cfg.w0` refers to the upper half-plane argument `conj(z)^-1 I`.
pub(crate) fn cauchy_product_at(
    x: &OperatorModel,
    y: &OperatorModel,
    z: Complex64,
    cfg: &IterationConfig,
) -> Result<ProductPoint> {
    if !(z.im > 0.0) || !z.re.is_finite() {
        return Err(Error::InvalidArgument(format!("z must satisfy Im z > 0, got {z}")));
    }
    let n = x.dim();
    let b_up = ComplexMatrix::scalar(n, z.conj().inv());
    let (h_up, subordination) = h_product_unchecked(x, y, &b_up, cfg)?;
    // h_{xy}(z^-1 I) = h_{xy}(conj(z)^-1 I)*.
    let h = h_up.adjoint();
    let cauchy = (ComplexMatrix::scalar(n, z) - h).inverse().map_err(|e| match e {
        Error::SingularMatrix { pivot, norm, context } => Error::SingularMatrix {
            pivot,
            norm,
            context: format!("z = {z}: {context}"),
        },
        other => other,
    })?;
    Ok(ProductPoint { cauchy, subordination })
}
