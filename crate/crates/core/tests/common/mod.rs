#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use uos_core::linalg::Scalar;
use uos_core::models::Projection;
use uos_core::parallel::trial_rng;
use uos_core::LinearOperator;

/// Every `k`-subset of `0..n`, built by plain recursion.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Restricted constants from singular values of each column submatrix:
/// `(min σ_min², max σ_max², max ‖Φ_S*Φ_S − I‖₂)`.
pub fn support_svd_constants<S: Scalar>(phi: &DMatrix<S>, order: usize) -> (f64, f64, f64) {
    let mut alpha = f64::INFINITY;
    let mut beta = 0.0_f64;
    let mut delta = 0.0_f64;
    for support in subsets(phi.ncols(), order) {
        let sub = phi.select_columns(&support);
        let sv = sub.clone().svd(false, false).singular_values;
        // a tall-or-square submatrix has `order` singular values; a wide one
        // has a nontrivial kernel
        let smin = if sub.nrows() < order { 0.0 } else { sv.min() };
        alpha = alpha.min(smin * smin);
        beta = beta.max(sv.max() * sv.max());
        let shifted = sub.ad_mul(&sub) - DMatrix::<S>::identity(order, order);
        delta = delta.max(shifted.svd(false, false).singular_values.max());
    }
    (alpha, beta, delta)
}

/// `M x N` matrix with orthonormal columns (`M >= N`) plus `eps` times a
/// Gaussian perturbation scaled by `1/√M`.
pub fn perturbed_orthonormal(m: usize, n: usize, eps: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    assert!(m >= n);
    let g = gaussian(m, n, rng);
    let q = g.qr().q();
    let p = gaussian(m, n, rng) / (m as f64).sqrt();
    q.columns(0, n).into_owned() + p * eps
}

pub fn gaussian(m: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| {
        let v: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        v
    })
}

pub fn gaussian_vec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    gaussian(n, 1, rng).column(0).into_owned()
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    trial_rng(seed, 0)
}

/// Operator wrapper counting forward and adjoint applications.
pub struct Counting<Op> {
    pub inner: Op,
    pub forward: AtomicUsize,
    pub adjoint: AtomicUsize,
}

impl<Op> Counting<Op> {
    pub fn new(inner: Op) -> Self {
        Counting {
            inner,
            forward: AtomicUsize::new(0),
            adjoint: AtomicUsize::new(0),
        }
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.forward.load(Ordering::SeqCst), self.adjoint.load(Ordering::SeqCst))
    }
}

impl<S: Scalar, Op: LinearOperator<S>> LinearOperator<S> for Counting<Op> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn apply(&self, x: &DVector<S>) -> DVector<S> {
        self.forward.fetch_add(1, Ordering::SeqCst);
        self.inner.apply(x)
    }

    fn apply_adjoint(&self, y: &DVector<S>) -> DVector<S> {
        self.adjoint.fetch_add(1, Ordering::SeqCst);
        self.inner.apply_adjoint(y)
    }
}

/// Projection wrapper counting calls.
pub struct CountingProjection<P> {
    pub inner: P,
    pub calls: AtomicUsize,
}

impl<P> CountingProjection<P> {
    pub fn new(inner: P) -> Self {
        CountingProjection {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<S: Scalar, P: Projection<S>> Projection<S> for CountingProjection<P> {
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    fn project(&self, x: &DVector<S>) -> DVector<S> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.project(x)
    }

    fn contains(&self, x: &DVector<S>, tol: f64) -> bool {
        self.inner.contains(x, tol)
    }
}
