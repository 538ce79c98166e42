//! The iterative projection algorithm
//!
//! ```text
//! x⁰ = 0,   xⁿ⁺¹ = P_A(xⁿ + μ Φ*(y − Φxⁿ))
//! ```
//!
//! together with calculators for its fixed-iteration guarantee. With
//! bi-Lipschitz constants `α ≤ β` of `Φ` on differences of model members,
//! a step satisfying `β ≤ 1/μ < 1.5α` contracts the error by
//! `2/(μα) − 2` per iteration, which gives the iteration count
//! [`compute_n_star`] and the error bound [`recovery_error_bound`].
//!
//! The constant in that bound is `c = 4/(3α − 2/μ)`, the sum of the
//! geometric contraction. The variant `4/(3α − 2μ)` that circulates is
//! inconsistent with the step window and is not used.

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{operator_norm_sq, real_inner, LinearOperator, MeasurementVector, Scalar, SignalVector};
use crate::models::Projection;

/// Tolerance and iteration cap used when estimating `‖Φ‖²` for a default step.
pub const NORM_TOL: f64 = 1e-10;
pub const NORM_MAX_ITERS: usize = 10_000;

/// Default step as a fraction of `1/‖Φ‖²`.
pub const DEFAULT_STEP_FRACTION: f64 = 0.99;

/// Absolute slack on a residual increase before it is reported.
pub const RESIDUAL_INCREASE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct IpaConfig {
    pub step: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
    /// Run exactly this many iterations and ignore the tolerance.
    pub fixed_iterations: Option<usize>,
    pub record_history: bool,
    /// `‖Φ‖²` if known; enables the residual-increase diagnostic whenever
    /// `step <= 1/‖Φ‖²`.
    pub operator_norm_sq: Option<f64>,
}

impl IpaConfig {
    pub fn new(step: f64) -> Self {
        Self {
            step,
            max_iters: 1000,
            residual_tol: 0.0,
            fixed_iterations: None,
            record_history: true,
            operator_norm_sq: None,
        }
    }

    /// `μ = 0.99/‖Φ‖²`, which guarantees monotone residuals.
    pub fn for_operator<S: Scalar, Op: LinearOperator<S> + ?Sized>(op: &Op) -> Result<Self> {
        let norm = operator_norm_sq(op, NORM_TOL, NORM_MAX_ITERS)?.value;
        if !(norm > 0.0) {
            return Err(Error::Precondition("operator is zero; no step size exists".into()));
        }
        Ok(Self {
            operator_norm_sq: Some(norm),
            ..Self::new(DEFAULT_STEP_FRACTION / norm)
        })
    }

    pub fn with_max_iters(self, max_iters: usize) -> Self {
        Self { max_iters, ..self }
    }

    pub fn with_residual_tol(self, residual_tol: f64) -> Self {
        Self {
            residual_tol,
            ..self
        }
    }

    pub fn with_fixed_iterations(self, n: usize) -> Self {
        Self {
            fixed_iterations: Some(n),
            ..self
        }
    }

    pub fn with_history(self, record: bool) -> Self {
        Self {
            record_history: record,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidParameter(format!("step must be > 0, got {}", self.step)));
        }
        if !(self.residual_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "residual tolerance must be >= 0, got {}",
                self.residual_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    FixedCount,
    Tolerance,
    MaxIters,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::FixedCount => "fixed-count",
            StopReason::Tolerance => "tolerance",
            StopReason::MaxIters => "max-iters",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpaResult<S: Scalar = f64> {
    pub estimate: SignalVector<S>,
    pub iterations: usize,
    /// `‖y − Φxⁿ‖` for `n = 0..=iterations` when recorded, else empty.
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub stop_reason: StopReason,
    /// Set when a residual grew although `step <= 1/‖Φ‖²`.
    pub residual_increased: bool,
}

/// One iteration `P_A(xₙ + μ Φ*(y − Φxₙ))`.
pub fn ipa_step<S, Op, M>(
    x: &SignalVector<S>,
    y: &MeasurementVector<S>,
    op: &Op,
    model: &M,
    step: f64,
) -> Result<SignalVector<S>>
where
    S: Scalar,
    Op: LinearOperator<S> + ?Sized,
    M: Projection<S> + ?Sized,
{
    check_dims(x.as_vector(), y, op, model)?;
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {step}")));
    }
    let r = y.as_vector() - op.apply(x);
    SignalVector::new(step_from_residual(x, &r, op, model, step))
}

fn step_from_residual<S, Op, M>(x: &DVector<S>, r: &DVector<S>, op: &Op, model: &M, step: f64) -> DVector<S>
where
    S: Scalar,
    Op: LinearOperator<S> + ?Sized,
    M: Projection<S> + ?Sized,
{
    let mut gradient_point = op.apply_adjoint(r);
    gradient_point *= S::from_real(step);
    gradient_point += x;
    model.project(&gradient_point)
}

fn check_dims<S, Op, M>(x: &DVector<S>, y: &DVector<S>, op: &Op, model: &M) -> Result<()>
where
    S: Scalar,
    Op: LinearOperator<S> + ?Sized,
    M: Projection<S> + ?Sized,
{
    check_dim("operator input", op.input_dim(), x.len())?;
    check_dim("operator output", op.output_dim(), y.len())?;
    check_dim("model dimension", model.ambient_dim(), op.input_dim())
}

/// Runs the recursion from `x0` (zero when `None`).
///
/// Each iteration costs one forward application, one adjoint application
/// and one projection; the residual of the new iterate is reused as the
/// next gradient direction.
pub fn ipa_run<S, Op, M>(
    x0: Option<&SignalVector<S>>,
    y: &MeasurementVector<S>,
    op: &Op,
    model: &M,
    cfg: &IpaConfig,
) -> Result<IpaResult<S>>
where
    S: Scalar,
    Op: LinearOperator<S> + ?Sized,
    M: Projection<S> + ?Sized,
{
    cfg.validate()?;
    let mut x = match x0 {
        Some(x0) => x0.as_vector().clone(),
        None => DVector::zeros(op.input_dim()),
    };
    check_dims(&x, y, op, model)?;

    let watch_increase = cfg
        .operator_norm_sq
        .is_some_and(|norm| cfg.step * norm <= 1.0);

    let mut r = y.as_vector() - op.apply(&x);
    let mut res = r.norm();
    let mut history = Vec::new();
    if cfg.record_history {
        history.push(res);
    }
    let mut increased = false;
    let mut iterations = 0;

    let stop_reason = loop {
        match cfg.fixed_iterations {
            Some(n) if iterations >= n => break StopReason::FixedCount,
            Some(_) => {}
            None if res <= cfg.residual_tol => break StopReason::Tolerance,
            None if iterations >= cfg.max_iters => break StopReason::MaxIters,
            None => {}
        }
        x = step_from_residual(&x, &r, op, model, cfg.step);
        r = y.as_vector() - op.apply(&x);
        let next = r.norm();
        if watch_increase && next > res + RESIDUAL_INCREASE_SLACK {
            increased = true;
        }
        res = next;
        iterations += 1;
        if cfg.record_history {
            history.push(res);
        }
    };

    Ok(IpaResult {
        estimate: SignalVector::new(x)?,
        iterations,
        residual_history: history,
        final_residual: res,
        stop_reason,
        residual_increased: increased,
    })
}

/// Iteration count after which the fixed-iteration guarantee holds:
/// `⌈2 ln(δ‖e_A‖/‖x_A‖) / ln(2/(μα) − 2)⌉`, clamped at zero.
///
/// Requires `2/3 < μα ≤ 1`. At `μα = 1` the contraction factor is zero and
/// a single iteration suffices. A zero `‖e_A‖` has no finite count and
/// returns `max_iters`.
pub fn compute_n_star(
    delta: f64,
    ea_norm: f64,
    xa_norm: f64,
    step: f64,
    alpha: f64,
    max_iters: usize,
) -> Result<usize> {
    if !(delta > 0.0) || !(xa_norm > 0.0) || !(ea_norm >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need delta > 0, ‖x_A‖ > 0, ‖e_A‖ >= 0; got {delta}, {xa_norm}, {ea_norm}"
        )));
    }
    let mu_alpha = step * alpha;
    if !(mu_alpha > 2.0 / 3.0 && mu_alpha <= 1.0 + WINDOW_RTOL) {
        return Err(Error::Precondition(format!(
            "step window β <= 1/μ < 1.5α requires 2/3 < μα <= 1, got μα = {mu_alpha}"
        )));
    }
    if ea_norm == 0.0 {
        return Ok(max_iters);
    }
    let target = delta * ea_norm / xa_norm;
    if target >= 1.0 {
        return Ok(0);
    }
    let rate = 2.0 / mu_alpha - 2.0;
    if rate <= 0.0 {
        return Ok(1);
    }
    let n = (2.0 * target.ln() / rate.ln()).ceil();
    Ok(n.max(0.0) as usize)
}

/// `(√(4/(3α − 2/μ)) + δ)·‖e_A‖ + ‖x_A − x‖`.
pub fn recovery_error_bound(alpha: f64, step: f64, delta: f64, ea_norm: f64, mismatch_norm: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be > 0, got {step}")));
    }
    let denom = 3.0 * alpha - 2.0 / step;
    if !(denom > 0.0) {
        return Err(Error::Precondition(format!(
            "step window 1/μ < 1.5α violated: 3α − 2/μ = {denom}"
        )));
    }
    Ok(((4.0 / denom).sqrt() + delta) * ea_norm + mismatch_norm)
}

/// Both sides of the surrogate inequality
///
/// ```text
/// ‖y − Φxⁿ⁺¹‖² − ‖y − Φxⁿ‖²  ≤  −⟨x_ref − xⁿ, g⟩ + (1/μ)‖x_ref − xⁿ‖²,
/// g = 2Φ*(y − Φxⁿ)
/// ```
///
/// which holds for every model member `x_ref` when `1/μ ≥ β`.
pub fn surrogate_descent_check<S, Op>(
    x_n: &SignalVector<S>,
    x_next: &SignalVector<S>,
    x_ref: &SignalVector<S>,
    y: &MeasurementVector<S>,
    op: &Op,
    step: f64,
) -> Result<(f64, f64)>
where
    S: Scalar,
    Op: LinearOperator<S> + ?Sized,
{
    check_dim("next iterate", x_n.dim(), x_next.dim())?;
    check_dim("reference point", x_n.dim(), x_ref.dim())?;
    let r_n = y.as_vector() - op.apply(x_n);
    let r_next = y.as_vector() - op.apply(x_next);
    let lhs = r_next.norm_squared() - r_n.norm_squared();
    let mut g = op.apply_adjoint(&r_n);
    g *= S::from_real(2.0);
    let d = x_ref.as_vector() - x_n.as_vector();
    let rhs = -real_inner(&d, &g)? + d.norm_squared() / step;
    Ok((lhs, rhs))
}

/// Relative slack on `β ≤ 1/μ` and `μα ≤ 1`, so that isometries with
/// constants computed as `1 ± ε` still admit `μ = 1`.
pub const WINDOW_RTOL: f64 = 1e-12;

/// `true` when `β ≤ 1/μ < 1.5α`, the first inequality up to [`WINDOW_RTOL`].
pub fn step_window_satisfied(alpha: f64, beta: f64, step: f64) -> bool {
    let inv = 1.0 / step;
    beta <= inv * (1.0 + WINDOW_RTOL) && inv < 1.5 * alpha
}

/// Largest admissible step `μ = 1/β`, if the window `β < 1.5α` is non-empty.
pub fn window_step(alpha: f64, beta: f64) -> Option<f64> {
    (beta > 0.0 && beta < 1.5 * alpha).then(|| 1.0 / beta)
}
