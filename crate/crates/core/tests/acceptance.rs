//! Acceptance gates. Runs as a plain binary so every criterion prints a
//! PASS/FAIL line; exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{gaussian, gaussian_vec, perturbed_orthonormal, support_svd_constants, uniform};
use nalgebra::DVector;
use rand::Rng;
use uos_core::analysis::{
    brute_force_opt, exhaustive_bilipschitz_sparse, monte_carlo_bilipschitz, optimality_bounds,
    sample_complexity_finite_union, sample_complexity_lowrank, sample_complexity_multiband,
    GAUSSIAN_CONCENTRATION_C,
};
use uos_core::linalg::operator_norm_sq;
use uos_core::models::{block_matrix_to_vec, sample_from_model, vec_to_block_matrix, Projection};
use uos_core::operators::{
    make_gaussian, make_matrix_sensing, stacking_norm_identity_check, EnsembleSpec, SpectralMixingOperator,
};
use uos_core::parallel::{map_indexed, trial_rng};
use uos_core::solver::{compute_n_star, recovery_error_bound};
use uos_core::{
    ipa_run, Complex64, DenseOperator, ExecMode, IpaConfig, LinearOperator, MeasurementVector, Scalar,
    SignalVector, UnionModel,
};

const MODE: ExecMode = ExecMode::Parallel;
const TWO_MIN: Duration = Duration::from_secs(120);
const FIVE_MIN: Duration = Duration::from_secs(300);

struct Outcome {
    pass: bool,
    detail: String,
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 fixed-iteration error bound", fixed_iteration_bound),
        ("2 residual descent", residual_descent),
        ("3 optimal-fit upper bound", optimal_fit_bound),
        ("4 restricted isometry cross-check", isometry_cross_check),
        ("5 multiband stacking identity", multiband_stacking),
        ("6 recovery regression floors", recovery_floors),
        ("7 sample-complexity trend", sample_complexity_trend),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let out = run();
        let status = if out.pass { "PASS" } else { "FAIL" };
        println!("{status} criterion {name}: {} [{:.1?}]", out.detail, start.elapsed());
        failed += usize::from(!out.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

enum BoundTrial {
    Excluded,
    Checked { ok: bool },
}

fn fixed_iteration_bound() -> Outcome {
    const TARGET: usize = 200;
    const SEED: u64 = 0x7e02;
    let start = Instant::now();
    let trial = |t: usize| -> BoundTrial {
        let mut r = trial_rng(SEED, t as u64);
        let n = r.random_range(6..=16);
        let k = r.random_range(1..=2);
        let phi = if t % 2 == 0 {
            let m = r.random_range(n..=n + 8);
            perturbed_orthonormal(m, n, uniform(&mut r, 0.0, 0.25), &mut r)
        } else {
            let m = r.random_range(3 * n..=4 * n);
            gaussian(m, n, &mut r) / (m as f64).sqrt()
        };
        let est = exhaustive_bilipschitz_sparse(&phi, k, ExecMode::Sequential).unwrap();
        if !(est.beta < 1.5 * est.alpha) {
            return BoundTrial::Excluded;
        }
        // 1/μ anywhere in [β, 1.5α)
        let inv_step = uniform(&mut r, est.beta, 1.5 * est.alpha);
        let step = 1.0 / inv_step;
        let model = UnionModel::k_sparse(n, k).unwrap();
        let member: SignalVector = model.sample(&mut r, 1.0).unwrap();
        let tail = gaussian_vec(n, &mut r) * uniform(&mut r, 0.0, 0.1);
        let x = member.as_vector() + tail;
        let op = DenseOperator::new(phi).unwrap();
        let noise = gaussian_vec(op.output_dim(), &mut r) * uniform(&mut r, 0.001, 0.1);
        let y = MeasurementVector::new(op.apply(&x) + noise).unwrap();
        let x_a = model.project(&x);
        if x_a.norm() == 0.0 {
            return BoundTrial::Excluded;
        }
        let e_a = (y.as_vector() - op.apply(&x_a)).norm();
        let mismatch = (&x - &x_a).norm();
        let n_star = compute_n_star(0.1, e_a, x_a.norm(), step, est.alpha, 100_000).unwrap();
        let cfg = IpaConfig::new(step).with_fixed_iterations(n_star);
        let res = ipa_run(None, &y, &op, &model, &cfg).unwrap();
        let err = (&x - res.estimate.as_vector()).norm();
        let bound = recovery_error_bound(est.alpha, step, 0.1, e_a, mismatch).unwrap();
        BoundTrial::Checked { ok: err <= bound }
    };

    let (mut accepted, mut excluded, mut violations, mut next) = (0, 0, 0, 0);
    while accepted < TARGET && next < 20 * TARGET {
        let batch = map_indexed(MODE, TARGET, |i| trial(next + i));
        next += TARGET;
        for outcome in batch {
            if accepted == TARGET {
                break;
            }
            match outcome {
                BoundTrial::Excluded => excluded += 1,
                BoundTrial::Checked { ok } => {
                    accepted += 1;
                    violations += usize::from(!ok);
                }
            }
        }
    }
    Outcome {
        pass: accepted >= TARGET && violations == 0 && start.elapsed() < TWO_MIN,
        detail: format!(
            "{}/{accepted} accepted instances within bound, {excluded} excluded (no admissible step)",
            accepted - violations
        ),
    }
}

fn descent_trial<S: Scalar, Op: LinearOperator<S>>(op: &Op, model: &UnionModel, seed: u64) -> bool {
    let mut r = trial_rng(seed, 1);
    let x: SignalVector<S> = model.sample(&mut r, 1.0).unwrap();
    let sigma = S::from_real(uniform(&mut r, 0.0, 0.2));
    let noise = DVector::from_fn(op.output_dim(), |_, _| S::sample_normal(&mut r) * sigma);
    let y = MeasurementVector::new(op.apply(&x) + noise).unwrap();
    let cfg = IpaConfig::for_operator(op).unwrap().with_max_iters(100).with_history(true);
    let res = ipa_run(None, &y, op, model, &cfg).unwrap();
    !res.residual_increased && res.residual_history.windows(2).all(|w| w[1] <= w[0] + 1e-10)
}

fn residual_descent() -> Outcome {
    const SEED: u64 = 0x7e03;
    let start = Instant::now();
    let results = map_indexed(MODE, 1000, |t| {
        let seed = SEED.wrapping_mul(1000) + t as u64;
        let mut r = trial_rng(seed, 0);
        match t % 4 {
            0 => {
                let (n, k) = (r.random_range(16..=64), r.random_range(1..=5));
                let m = r.random_range(k + 1..=n);
                let model = UnionModel::k_sparse(n, k).unwrap();
                descent_trial(&make_gaussian(m, n, seed).unwrap(), &model, seed)
            }
            1 => {
                let (blocks, len) = (r.random_range(4..=12), r.random_range(2..=4));
                let model = UnionModel::contiguous_blocks(blocks, len, r.random_range(1..=3)).unwrap();
                let m = r.random_range(len..=blocks * len);
                let op = EnsembleSpec::rademacher(m, blocks * len, seed).build::<f64>().unwrap();
                descent_trial(&op, &model, seed)
            }
            2 => {
                let (rows, cols) = (r.random_range(3..=8), r.random_range(3..=8));
                let model = UnionModel::low_rank(rows, cols, r.random_range(1..=2)).unwrap();
                let meas = r.random_range(rows + cols..=rows * cols);
                descent_trial(&make_matrix_sensing(rows, cols, meas, seed).unwrap(), &model, seed)
            }
            _ => {
                let (blocks, grid) = (r.random_range(6..=16), r.random_range(1..=8));
                let model = UnionModel::multiband(blocks, grid, r.random_range(1..=3)).unwrap();
                let mix = EnsembleSpec::gaussian(r.random_range(2..=blocks), blocks, seed).matrix().unwrap();
                descent_trial(&SpectralMixingOperator::<Complex64>::new(mix, grid).unwrap(), &model, seed)
            }
        }
    });
    let passed = results.iter().filter(|ok| **ok).count();
    Outcome {
        pass: passed == 1000 && start.elapsed() < TWO_MIN,
        detail: format!("{passed}/1000 trials non-increasing over sparse, block, low-rank and multiband models"),
    }
}

fn optimal_fit_bound() -> Outcome {
    const SEED: u64 = 0x7e04;
    let start = Instant::now();
    let trial = |t: usize| -> Option<bool> {
        let mut r = trial_rng(SEED, t as u64);
        let n = r.random_range(4..=12);
        let k = r.random_range(1..=2);
        let m = r.random_range(2 * k..=n);
        let phi = gaussian(m, n, &mut r) / (m as f64).sqrt();
        let est = exhaustive_bilipschitz_sparse(&phi, k, ExecMode::Sequential).unwrap();
        if !(est.alpha > 0.0) {
            return None;
        }
        let model = UnionModel::k_sparse(n, k).unwrap();
        let member: SignalVector = model.sample(&mut r, 1.0).unwrap();
        let x = member.as_vector() + gaussian_vec(n, &mut r) * uniform(&mut r, 0.0, 0.2);
        let noise = gaussian_vec(m, &mut r) * uniform(&mut r, 0.001, 0.2);
        let y = MeasurementVector::new(&phi * &x + noise).unwrap();
        let x_a = model.project(&x);
        let e_a = (y.as_vector() - &phi * &x_a).norm();
        let opt = brute_force_opt(&y, &phi, k, ExecMode::Sequential).unwrap();
        let (upper, _) = optimality_bounds(est.alpha, est.beta, e_a, (&x - &x_a).norm()).unwrap();
        Some((&x - opt.as_vector()).norm() <= upper)
    };
    let (mut checked, mut ok, mut skipped, mut next) = (0, 0, 0, 0);
    while checked < 200 && next < 4000 {
        for res in map_indexed(MODE, 200, |i| trial(next + i)) {
            match res {
                _ if checked == 200 => break,
                None => skipped += 1,
                Some(pass) => {
                    checked += 1;
                    ok += usize::from(pass);
                }
            }
        }
        next += 200;
    }
    Outcome {
        pass: checked == 200 && ok == 200 && start.elapsed() < TWO_MIN,
        detail: format!("{ok}/{checked} noisy instances within upper bound, {skipped} skipped (α = 0)"),
    }
}

fn isometry_cross_check() -> Outcome {
    const SEED: u64 = 0x7e05;
    let rows = map_indexed(MODE, 50, |t| {
        let mut r = trial_rng(SEED, t as u64);
        let n = r.random_range(3..=12);
        let m = r.random_range(2..=12);
        let k = r.random_range(1..=2);
        let phi = gaussian(m, n, &mut r) / (m as f64).sqrt();
        let exact = exhaustive_bilipschitz_sparse(&phi, k, ExecMode::Sequential).unwrap();
        let (alpha, beta, delta) = support_svd_constants(&phi, exact.order);
        let constants_match = (exact.alpha - alpha).abs() <= 1e-10
            && (exact.beta - beta).abs() <= 1e-10
            && (exact.rip_delta() - delta).abs() <= 1e-10;
        let symmetric = (exact.alpha - (1.0 - delta)).abs() <= 1e-10 && (exact.beta - (1.0 + delta)).abs() <= 1e-10;
        let op = DenseOperator::new(phi).unwrap();
        let model = UnionModel::k_sparse(n, k).unwrap();
        let mc = monte_carlo_bilipschitz(&op, &model, 500, SEED + t as u64, ExecMode::Sequential).unwrap();
        let inner = exact.alpha <= mc.alpha && mc.beta <= exact.beta;
        (constants_match, inner, symmetric)
    });
    let matched = rows.iter().filter(|r| r.0).count();
    let inner = rows.iter().filter(|r| r.1).count();
    let symmetric = rows.iter().filter(|r| r.2).count();
    Outcome {
        pass: matched == 50 && inner == 50,
        detail: format!(
            "{matched}/50 matrices with (α, β, δ) equal to the per-support spectral computation within 1e-10, \
             {inner}/50 Monte-Carlo inner brackets ({symmetric}/50 have α = 1 − δ and β = 1 + δ exactly)"
        ),
    }
}

fn multiband_stacking() -> Outcome {
    const SEED: u64 = 0x7e06;
    let start = Instant::now();
    let rows = map_indexed(MODE, 500, |t| {
        let mut r = trial_rng(SEED, t as u64);
        let n = r.random_range(2..=16);
        let m = r.random_range(1..=n);
        let grid = r.random_range(1..=32);
        let k = r.random_range(1..=(n / 2).max(1));
        let mix = EnsembleSpec::gaussian(m, n, SEED + t as u64).matrix().unwrap();
        let op = SpectralMixingOperator::<Complex64>::new(mix.clone(), grid).unwrap();
        let model = UnionModel::multiband(n, grid, k).unwrap();
        let (n1, n2) = (uniform(&mut r, 0.5, 2.0), uniform(&mut r, 0.5, 2.0));
        let x1: SignalVector<Complex64> = model.sample(&mut r, n1).unwrap();
        let x2: SignalVector<Complex64> = model.sample(&mut r, n2).unwrap();
        let b1 = vec_to_block_matrix(x1.as_vector(), n, grid).unwrap();
        let b2 = vec_to_block_matrix(x2.as_vector(), n, grid).unwrap();
        let (lhs, rhs) = stacking_norm_identity_check(&op, &b1, &b2).unwrap();
        let identity = (lhs - rhs).abs() <= 1e-12 * rhs.max(f64::MIN_POSITIVE);

        let est = exhaustive_bilipschitz_sparse(&mix, k, ExecMode::Sequential).unwrap();
        let diff = block_matrix_to_vec(&(b1 - b2));
        let energy = diff.norm_squared();
        let mixed = op.apply(&diff).norm_squared();
        let tol = 1e-12 * energy;
        let inequality = est.alpha * energy - tol <= mixed && mixed <= est.beta * energy + tol;
        (identity, inequality)
    });
    let identity = rows.iter().filter(|r| r.0).count();
    let inequality = rows.iter().filter(|r| r.1).count();
    Outcome {
        pass: identity == 500 && inequality == 500 && start.elapsed() < TWO_MIN,
        detail: format!(
            "{identity}/500 instances with stacking identity to relative 1e-12, \
             {inequality}/500 pairs inside the order-2K constants of the mixing matrix"
        ),
    }
}

fn success_count<F: Fn(u64) -> f64 + Sync>(trials: usize, rel_err: F) -> usize {
    map_indexed(MODE, trials, |t| rel_err(t as u64) <= 1e-4)
        .into_iter()
        .filter(|ok| *ok)
        .count()
}

fn recover<S: Scalar, Op: LinearOperator<S>>(op: &Op, model: &UnionModel, x: &SignalVector<S>) -> f64 {
    let y = MeasurementVector::new(op.apply(x)).unwrap();
    let norm = operator_norm_sq(op, 1e-10, 10_000).unwrap().value;
    let cfg = IpaConfig::new(1.0 / norm).with_max_iters(500).with_residual_tol(1e-14);
    let res = ipa_run(None, &y, op, model, &cfg).unwrap();
    (res.estimate.as_vector() - x.as_vector()).norm() / x.norm()
}

fn recovery_floors() -> Outcome {
    // Floors recorded from a reference run on these seeds (measured 48, 22
    // and 100 successes out of 100), with a small margin for platform drift.
    const FLOORS: [usize; 3] = [45, 20, 97];
    let mut counts = [0; 3];
    let mut slow = false;

    let start = Instant::now();
    let sparse = UnionModel::k_sparse(64, 4).unwrap();
    counts[0] = success_count(100, |t| {
        let op = make_gaussian(32, 64, 1000 + t).unwrap();
        recover(&op, &sparse, &sample_from_model::<f64>(&sparse, 5000 + t, 1.0).unwrap())
    });
    slow |= start.elapsed() >= FIVE_MIN;

    let start = Instant::now();
    let multiband = UnionModel::multiband(32, 16, 3).unwrap();
    counts[1] = success_count(100, |t| {
        let mix = EnsembleSpec::gaussian(12, 32, 2000 + t).matrix().unwrap();
        let op = SpectralMixingOperator::<Complex64>::new(mix, 16).unwrap();
        recover(&op, &multiband, &sample_from_model::<Complex64>(&multiband, 6000 + t, 1.0).unwrap())
    });
    slow |= start.elapsed() >= FIVE_MIN;

    let start = Instant::now();
    let lowrank = UnionModel::low_rank(8, 8, 1).unwrap();
    counts[2] = success_count(100, |t| {
        let op = make_matrix_sensing(8, 8, 40, 3000 + t).unwrap();
        recover(&op, &lowrank, &sample_from_model::<f64>(&lowrank, 7000 + t, 1.0).unwrap())
    });
    slow |= start.elapsed() >= FIVE_MIN;

    let pass = counts.iter().zip(FLOORS).all(|(c, f)| *c >= f) && !slow;
    let below_ninety = counts.iter().filter(|c| **c < 90).count();
    Outcome {
        pass,
        detail: format!(
            "successes at rel. error 1e-4 out of 100: sparse N=64 M=32 K=4 {} (floor {}), \
             multiband N=32 M=12 K=3 F=16 {} (floor {}), low-rank 8x8 r=1 M=40 {} (floor {}); \
             {below_ninety}/3 suites below 90",
            counts[0], FLOORS[0], counts[1], FLOORS[1], counts[2], FLOORS[2]
        ),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn sample_complexity_trend() -> Outcome {
    const SEED: u64 = 0x7e07;
    const GRID: [usize; 5] = [8, 16, 24, 32, 48];
    let model = UnionModel::k_sparse(64, 2).unwrap();
    let medians: Vec<f64> = GRID
        .iter()
        .map(|&m| {
            let deltas = map_indexed(MODE, 20, |s| {
                let op = make_gaussian(m, 64, SEED + 100 * m as u64 + s as u64).unwrap();
                monte_carlo_bilipschitz(&op, &model, 2000, SEED + s as u64, ExecMode::Sequential)
                    .unwrap()
                    .rip_delta()
            });
            median(deltas)
        })
        .collect();
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);

    let c = GAUSSIAN_CONCENTRATION_C;
    let calculators = sample_complexity_finite_union(1, 1, 0.5, 1.0, c).unwrap() == 83
        && sample_complexity_lowrank(1, 2, 2, 1.0).unwrap() == 6
        && sample_complexity_lowrank(0, 8, 8, 1.0).unwrap() == 0
        && (sample_complexity_multiband(2.0, 32.0, 1.0).unwrap() - 2.0 * 16.0_f64.ln()).abs() <= 1e-12
        && sample_complexity_multiband(2.0, 32.0, 0.0).unwrap() == 0.0;

    let shown: Vec<String> = GRID.iter().zip(&medians).map(|(m, d)| format!("M={m}: {d:.4}")).collect();
    Outcome {
        pass: monotone && calculators,
        detail: format!(
            "median δ̂ {} ({}), calculators {}",
            shown.join(", "),
            if monotone { "non-increasing" } else { "not monotone" },
            if calculators { "exact" } else { "mismatch" }
        ),
    }
}
