//! Bi-Lipschitz constants, optimality oracles and sample-complexity
//! calculators.
//!
//! Constants are always reported for the order that differences of model
//! members occupy: `x1 + x2` with `x1, x2` K-sparse has support `2K`, so a
//! K-sparse recovery problem consumes order-`2K` constants.

use std::fmt;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{LinearOperator, MeasurementVector, Scalar, SignalVector};
use crate::models::UnionModel;
use crate::parallel::{map_indexed, trial_rng, ExecMode};

/// Largest number of supports [`exhaustive_bilipschitz_sparse`] will visit.
pub const EXHAUSTIVE_SUPPORT_LIMIT: u128 = 1_000_000;

/// Largest number of supports [`brute_force_opt`] will visit.
pub const BRUTE_FORCE_SUPPORT_LIMIT: u128 = 100_000;

/// Residual improvement needed to displace an earlier support.
pub const BRUTE_FORCE_TIE_TOL: f64 = 1e-12;

/// Constant of the finite-union sample bound for i.i.d. normal entries.
pub const GAUSSIAN_CONCENTRATION_C: f64 = 7.0 / 18.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimateMethod {
    Exhaustive,
    MonteCarlo,
}

impl fmt::Display for EstimateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimateMethod::Exhaustive => "exhaustive",
            EstimateMethod::MonteCarlo => "monte-carlo",
        })
    }
}

/// Bi-Lipschitz pair `α‖x‖² ≤ ‖Φx‖² ≤ β‖x‖²` over the certified set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiLipschitzEstimate {
    pub alpha: f64,
    pub beta: f64,
    /// Support size (or, for Monte-Carlo, twice the model order) certified.
    pub order: usize,
    pub method: EstimateMethod,
    /// Supports enumerated or pairs sampled.
    pub count: u64,
    pub seed: Option<u64>,
}

impl BiLipschitzEstimate {
    /// Symmetric restricted isometry constant `max(1 − α, β − 1)`.
    pub fn rip_delta(&self) -> f64 {
        (1.0 - self.alpha).max(self.beta - 1.0)
    }
}

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

fn guard(n: usize, k: usize, limit: u128) -> Result<u128> {
    match binomial(n, k) {
        Some(count) if count <= limit => Ok(count),
        Some(count) => Err(Error::EnumerationTooLarge { count, limit }),
        None => Err(Error::EnumerationTooLarge {
            count: u128::MAX,
            limit,
        }),
    }
}

/// Visits every `k`-subset of `0..n` whose smallest element is `first`,
/// in lexicographic order.
fn for_each_support_from(n: usize, k: usize, first: usize, mut f: impl FnMut(&[usize])) {
    let mut support = Vec::with_capacity(k);
    for rest in (first + 1..n).combinations(k - 1) {
        support.clear();
        support.push(first);
        support.extend_from_slice(&rest);
        f(&support);
    }
}

/// Exact constants of `Φ` over all vectors supported on `2K` coordinates:
/// the extreme eigenvalues of `Φ_S*Φ_S` over every support `|S| = 2K`
/// (capped at `N`). Smaller supports are covered by eigenvalue interlacing.
pub fn exhaustive_bilipschitz_sparse<S: Scalar>(
    phi: &DMatrix<S>,
    k: usize,
    mode: ExecMode,
) -> Result<BiLipschitzEstimate> {
    if k == 0 {
        return Err(Error::InvalidParameter("sparsity must be >= 1".into()));
    }
    let n = phi.ncols();
    let order = (2 * k).min(n);
    let count = guard(n, order, EXHAUSTIVE_SUPPORT_LIMIT)?;
    let gram = phi.ad_mul(phi);

    let partial = map_indexed(mode, n + 1 - order, |first| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut sub = DMatrix::<S>::zeros(order, order);
        for_each_support_from(n, order, first, |support| {
            for (a, &i) in support.iter().enumerate() {
                for (b, &j) in support.iter().enumerate() {
                    sub[(a, b)] = gram[(i, j)];
                }
            }
            let (min, max) = extreme_eigenvalues(&sub);
            lo = lo.min(min);
            hi = hi.max(max);
        });
        (lo, hi)
    });
    let (alpha, beta) = partial
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| (lo.min(a), hi.max(b)));

    Ok(BiLipschitzEstimate {
        alpha: alpha.max(0.0),
        beta,
        order,
        method: EstimateMethod::Exhaustive,
        count: count as u64,
        seed: None,
    })
}

fn extreme_eigenvalues<S: Scalar>(hermitian: &DMatrix<S>) -> (f64, f64) {
    if hermitian.nrows() == 1 {
        let v = hermitian[(0, 0)].real();
        return (v, v);
    }
    let eig = hermitian.symmetric_eigenvalues();
    eig.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Inner estimate of the constants from `trials` random pairs of model
/// members: `α` and `β` are the smallest and largest observed
/// `‖Φ(x1 + x2)‖² / ‖x1 + x2‖²`. Degenerate sums are skipped.
pub fn monte_carlo_bilipschitz<S, Op>(
    op: &Op,
    model: &UnionModel,
    trials: usize,
    seed: u64,
    mode: ExecMode,
) -> Result<BiLipschitzEstimate>
where
    S: Scalar,
    Op: LinearOperator<S> + ?Sized,
{
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    check_dim("model dimension", op.input_dim(), model.dim())?;
    let ratios = map_indexed(mode, trials, |t| -> Result<Option<f64>> {
        let mut rng = trial_rng(seed, t as u64);
        let x1 = model.sample::<S, _>(&mut rng, 1.0)?;
        let x2 = model.sample::<S, _>(&mut rng, 1.0)?;
        let sum = x1.as_vector() + x2.as_vector();
        let energy = sum.norm_squared();
        if energy == 0.0 {
            return Ok(None);
        }
        Ok(Some(op.apply(&sum).norm_squared() / energy))
    });
    let mut alpha = f64::INFINITY;
    let mut beta = f64::NEG_INFINITY;
    for ratio in ratios {
        if let Some(r) = ratio? {
            alpha = alpha.min(r);
            beta = beta.max(r);
        }
    }
    if !alpha.is_finite() {
        return Err(Error::Sampling(format!("all {trials} sampled pairs were degenerate")));
    }
    Ok(BiLipschitzEstimate {
        alpha,
        beta,
        order: 2 * model.order(),
        method: EstimateMethod::MonteCarlo,
        count: trials as u64,
        seed: Some(seed),
    })
}

/// Best K-sparse fit `argmin ‖y − Φx‖` by least squares on every support.
/// Ties within [`BRUTE_FORCE_TIE_TOL`] keep the lexicographically first support.
pub fn brute_force_opt<S: Scalar>(
    y: &MeasurementVector<S>,
    phi: &DMatrix<S>,
    k: usize,
    mode: ExecMode,
) -> Result<SignalVector<S>> {
    let n = phi.ncols();
    check_dim("measurements", phi.nrows(), y.dim())?;
    if k > n {
        return Err(Error::InvalidParameter(format!("sparsity {k} exceeds dimension {n}")));
    }
    if k == 0 {
        return SignalVector::zeros(n);
    }
    guard(n, k, BRUTE_FORCE_SUPPORT_LIMIT)?;

    let partial = map_indexed(mode, n + 1 - k, |first| {
        let mut best: Option<(f64, Vec<usize>, DVector<S>)> = None;
        for_each_support_from(n, k, first, |support| {
            let (coef, res) = least_squares_on(phi, y.as_vector(), support);
            if best.as_ref().is_none_or(|(b, _, _)| res < b - BRUTE_FORCE_TIE_TOL) {
                best = Some((res, support.to_vec(), coef));
            }
        });
        best
    });
    let mut best: Option<(f64, Vec<usize>, DVector<S>)> = None;
    for candidate in partial.into_iter().flatten() {
        if best.as_ref().is_none_or(|(b, _, _)| candidate.0 < b - BRUTE_FORCE_TIE_TOL) {
            best = Some(candidate);
        }
    }
    let (_, support, coef) = best.expect("at least one support");
    let mut x = DVector::zeros(n);
    for (c, &i) in coef.iter().zip(&support) {
        x[i] = *c;
    }
    SignalVector::new(x)
}

fn least_squares_on<S: Scalar>(phi: &DMatrix<S>, y: &DVector<S>, support: &[usize]) -> (DVector<S>, f64) {
    let sub = phi.select_columns(support);
    let svd = sub.clone().svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-12 * sub.nrows().max(sub.ncols()) as f64;
    let coef = svd
        .solve(y, cutoff)
        .unwrap_or_else(|_| DVector::zeros(support.len()));
    let res = (y - &sub * &coef).norm();
    (coef, res)
}

/// Error bounds around the optimal model-constrained fit:
/// `upper = (2/√α)‖e_A‖ + ‖x − x_A‖` holds for every instance,
/// `lower = √(0.5/β)‖e_A‖ + ‖x − x_A‖` is attained by some noise.
pub fn optimality_bounds(alpha: f64, beta: f64, ea_norm: f64, mismatch_norm: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::Precondition(format!(
            "operator is not bi-Lipschitz on the model (α = {alpha})"
        )));
    }
    if !(beta >= alpha) {
        return Err(Error::InvalidParameter(format!("need β >= α, got α = {alpha}, β = {beta}")));
    }
    let upper = 2.0 / alpha.sqrt() * ea_norm + mismatch_norm;
    let lower = (0.5 / beta).sqrt() * ea_norm + mismatch_norm;
    Ok((upper, lower))
}

/// Measurements sufficient for a union of `subspaces` subspaces of
/// dimension `dim`: `⌈(2/(cδ))(ln(2L) + 2K ln(12/δ) + t)⌉`.
pub fn sample_complexity_finite_union(subspaces: u64, dim: u64, delta: f64, t: f64, c: f64) -> Result<u64> {
    if subspaces == 0 || dim == 0 {
        return Err(Error::InvalidParameter("need L >= 1 and K >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) || !(t > 0.0) || !(c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < δ < 1, t > 0, c > 0; got δ = {delta}, t = {t}, c = {c}"
        )));
    }
    let bound = 2.0 / (c * delta)
        * ((2.0 * subspaces as f64).ln() + 2.0 * dim as f64 * (12.0 / delta).ln() + t);
    Ok(bound.ceil() as u64)
}

/// Measurements sufficient for rank-`rank` `m x n` matrices:
/// `⌈c₀ K (m + n) ln(mn)⌉` (natural logarithm).
pub fn sample_complexity_lowrank(rank: u64, m: u64, n: u64, c0: f64) -> Result<u64> {
    if m == 0 || n == 0 || !(c0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need m, n >= 1 and c0 > 0; got m = {m}, n = {n}, c0 = {c0}"
        )));
    }
    let bound = c0 * rank as f64 * (m + n) as f64 * ((m * n) as f64).ln();
    Ok(bound.ceil() as u64)
}

/// Output bandwidth sufficient for a spectral support of measure `support`
/// inside `[0, band]`: `c |S| ln(B_N/|S|)`.
pub fn sample_complexity_multiband(support: f64, band: f64, c: f64) -> Result<f64> {
    if !(support > 0.0 && support < band) || !(c >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < |S| < B_N and c >= 0; got |S| = {support}, B_N = {band}, c = {c}"
        )));
    }
    Ok(c * support * (band / support).ln())
}
