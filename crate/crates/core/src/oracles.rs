//! Brute-force reference computations checked against the library's fast
//! paths. These run from the `oracle` CLI subcommand and from the acceptance
//! suite; each check prints what it computed and whether the fast path
//! agreed.
//!
//! The oracles deliberately avoid the code paths they verify: counting uses
//! explicit double loops, psi enumeration walks bitmask subsets, and nuclear
//! norms come from a different SVD backend than the estimator's.

use crate::estimator::{solve_nuclear_norm, svt_shrink, LambdaRule, SolverConfig};
use crate::matrix::{
    expected_g_uniform, near_optimal_count, subsampling_cost, Arm, PsiMode, RewardMatrix,
    SubmatrixIndex,
};
use crate::rng::stream_from;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Result of one oracle comparison.
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub name: String,
    pub passed: bool,
    pub details: String,
}

impl std::fmt::Display for OracleOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{status}] {}: {}", self.name, self.details)
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, d_r: usize, d_c: usize) -> RewardMatrix {
    let entries = DMatrix::from_fn(d_r, d_c, |_, _| rng.random_range(-1.0..1.0));
    RewardMatrix::from_matrix(entries).expect("finite entries")
}

/// Double-loop enumeration of the near-optimal count, compared with the
/// library count on random 6x5 matrices.
pub fn check_g_enumeration(cases: usize, seed: u64) -> OracleOutcome {
    let mut rng = stream_from(seed);
    let mut mismatches = 0usize;
    for _ in 0..cases {
        let b = random_matrix(&mut rng, 6, 5);
        let h: f64 = rng.random_range(0.0..2.0);
        // first pass: maximum
        let mut max = f64::NEG_INFINITY;
        for r in 0..6 {
            for c in 0..5 {
                if b.get(Arm::new(r, c)) > max {
                    max = b.get(Arm::new(r, c));
                }
            }
        }
        // second pass: count within h of the maximum
        let mut count = 0usize;
        for r in 0..6 {
            for c in 0..5 {
                if b.get(Arm::new(r, c)) >= max - h {
                    count += 1;
                }
            }
        }
        let fast = near_optimal_count(&b, h, &SubmatrixIndex::full(6, 5));
        if fast != count {
            mismatches += 1;
        }
    }
    OracleOutcome {
        name: "g enumeration".into(),
        passed: mismatches == 0,
        details: format!("{cases} random 6x5 matrices, {mismatches} mismatches"),
    }
}

/// Bitmask enumeration of every 2x2 index-set pair of a 5x5 matrix, compared
/// with the exact psi path, plus the Monte-Carlo gap.
pub fn check_psi_enumeration(seed: u64) -> OracleOutcome {
    let mut rng = stream_from(seed);
    let b = random_matrix(&mut rng, 5, 5);
    let global_max = b.max_entry();
    let mut total = 0.0;
    let mut pairs = 0u32;
    for row_mask in 0u32..32 {
        if row_mask.count_ones() != 2 {
            continue;
        }
        for col_mask in 0u32..32 {
            if col_mask.count_ones() != 2 {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for r in 0..5 {
                if row_mask & (1 << r) == 0 {
                    continue;
                }
                for c in 0..5 {
                    if col_mask & (1 << c) == 0 {
                        continue;
                    }
                    best = best.max(b.get(Arm::new(r, c)));
                }
            }
            total += best;
            pairs += 1;
        }
    }
    let reference = global_max - total / pairs as f64;
    let exact = subsampling_cost(&b, 2, 2, PsiMode::Exact).expect("within budget").value;
    let gap = (exact - reference).abs();
    let mc = subsampling_cost(&b, 2, 2, PsiMode::MonteCarlo { n_samples: 100_000, seed: seed ^ 1 })
        .expect("sampling mode");
    let mc_gap = (mc.value - exact).abs();
    let mc_se = mc.std_error.expect("monte carlo reports a standard error");
    let passed = gap <= 1e-12 && mc_gap <= 4.0 * mc_se;
    OracleOutcome {
        name: "psi enumeration".into(),
        passed,
        details: format!(
            "bitmask {reference:.12} vs exact {exact:.12} (|gap| {gap:.2e}); mc {:.6} within {:.2} se",
            mc.value,
            mc_gap / mc_se.max(f64::MIN_POSITIVE)
        ),
    }
}

fn nuclear_norm_reference(m: &DMatrix<f64>) -> f64 {
    // nalgebra's SVD: a different backend than the library's shrink path
    m.clone().svd(false, false).singular_values.iter().sum()
}

fn prox_objective(candidate: &DMatrix<f64>, m: &DMatrix<f64>, tau: f64) -> f64 {
    0.5 * (candidate - m).norm_squared() + tau * nuclear_norm_reference(candidate)
}

/// Verifies the singular-value shrink is the proximal map: the output must
/// beat random perturbation candidates on 0.5 ||X - M||^2 + tau ||X||_*.
pub fn check_prox_optimality(candidates: usize, seed: u64) -> OracleOutcome {
    let mut rng = stream_from(seed);
    let mut worst_margin = f64::INFINITY;
    for _ in 0..5 {
        let m = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let tau: f64 = rng.random_range(0.05..1.5);
        let shrunk = svt_shrink(&m, tau);
        let base = prox_objective(&shrunk, &m, tau);
        for _ in 0..candidates {
            let scale: f64 = 10f64.powf(rng.random_range(-4.0..0.0));
            let noise = DMatrix::from_fn(6, 6, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            });
            let margin = prox_objective(&(&shrunk + noise), &m, tau) - base;
            worst_margin = worst_margin.min(margin);
        }
    }
    OracleOutcome {
        name: "prox optimality".into(),
        passed: worst_margin >= -1e-9,
        details: format!(
            "worst candidate margin {worst_margin:.3e} over {candidates} perturbations x 5 instances"
        ),
    }
}

/// Computes the zero-solution threshold on a 5x5 instance via the operator
/// norm of the gradient at zero, then verifies the solver's behavior on both
/// sides of it.
pub fn check_lambda_max(seed: u64) -> OracleOutcome {
    let b = crate::matrix::generate_low_rank(5, 5, 2, crate::matrix::FactorDist::Uniform01, seed)
        .expect("valid dims");
    let mut obs = crate::estimator::ObservationSet::new(5, 5);
    let mut t = 1;
    for r in 0..5 {
        for c in 0..5 {
            obs.push(Arm::new(r, c), b.get(Arm::new(r, c)), t).expect("valid observation");
            t += 1;
        }
    }
    let mut sums: DMatrix<f64> = DMatrix::zeros(5, 5);
    for o in obs.items() {
        sums[(o.arm.row, o.arm.col)] += o.value;
    }
    // subgradient check: zero is optimal iff lambda >= ||(2/n) S||_op
    let lambda_max: f64 = 2.0 / obs.len() as f64 * sums.svd(false, false).singular_values.max();
    let above = SolverConfig { lambda: LambdaRule::Fixed(lambda_max * 1.001), ..Default::default() };
    let below = SolverConfig { lambda: LambdaRule::Fixed(lambda_max * 0.9), ..Default::default() };
    let at = solve_nuclear_norm(&obs, 5, 5, &above).expect("nonempty").matrix.norm();
    let under = solve_nuclear_norm(&obs, 5, 5, &below).expect("nonempty").matrix.norm();
    let passed = at <= 1e-8 && under > 1e-6;
    OracleOutcome {
        name: "lambda max".into(),
        passed,
        details: format!("lambda_max {lambda_max:.6}; ||B|| above = {at:.2e}, below = {under:.2e}"),
    }
}

/// Monte-Carlo E[g(h)] over fresh uniform matrices against the closed form.
pub fn check_uniform_g_closed_form(matrices: usize, h: f64, seed: u64) -> OracleOutcome {
    let mut rng = stream_from(seed);
    let expected = expected_g_uniform(h, 10, 10).expect("h in range");
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..matrices {
        let entries = DMatrix::from_fn(10, 10, |_, _| rng.random_range(0.0..1.0));
        let b = RewardMatrix::from_matrix(entries).expect("finite");
        let count = near_optimal_count(&b, h, &SubmatrixIndex::full(10, 10)) as f64;
        sum += count;
        sum_sq += count * count;
    }
    let n = matrices as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    let se = (var / n).sqrt();
    let deviation = (mean - expected).abs() / se.max(f64::MIN_POSITIVE);
    OracleOutcome {
        name: "uniform E[g] closed form".into(),
        passed: deviation <= 3.0,
        details: format!(
            "mc {mean:.4} vs closed form {expected:.4} ({deviation:.2} se over {matrices} matrices)"
        ),
    }
}

/// Monte-Carlo psi for unit-rate exponential entries at half subsampling,
/// against the -2 ln(eta) closed form. Fresh matrices are drawn so the
/// reported standard error covers instance-to-instance variation.
pub fn check_exponential_psi_closed_form(
    matrices: usize,
    draws_per_matrix: usize,
    seed: u64,
) -> OracleOutcome {
    let expected = -2.0 * 0.5f64.ln();
    let mut rng = stream_from(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for i in 0..matrices {
        let entries = DMatrix::from_fn(100, 100, |_, _| {
            let e: f64 = Exp1.sample(&mut rng);
            e
        });
        let b = RewardMatrix::from_matrix(entries).expect("finite");
        let mode = PsiMode::MonteCarlo { n_samples: draws_per_matrix, seed: seed ^ (i as u64 + 1) };
        let psi = subsampling_cost(&b, 50, 50, mode).expect("valid sizes").value;
        sum += psi;
        sum_sq += psi * psi;
    }
    let n = matrices as f64;
    let mean = sum / n;
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    let se = (var / n).sqrt();
    let deviation = (mean - expected).abs() / se.max(f64::MIN_POSITIVE);
    OracleOutcome {
        name: "exponential psi closed form".into(),
        passed: deviation <= 3.0,
        details: format!(
            "mc {mean:.4} vs -2 ln(1/2) = {expected:.4} ({deviation:.2} se over {matrices} matrices)"
        ),
    }
}

/// SVT on diag(3, 1) with tau = 1 must equal diag(2, 0) exactly.
pub fn check_svt_diag() -> OracleOutcome {
    let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0]));
    let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.0]));
    let err = (svt_shrink(&m, 1.0) - expect).norm();
    OracleOutcome {
        name: "svt diag(3,1)".into(),
        passed: err <= 1e-12,
        details: format!("|shrink - diag(2,0)| = {err:.2e}"),
    }
}

/// Every oracle with default sizes, in a stable order.
pub fn run_all(seed: u64) -> Vec<OracleOutcome> {
    vec![
        check_g_enumeration(50, seed),
        check_psi_enumeration(seed.wrapping_add(1)),
        check_svt_diag(),
        check_prox_optimality(200, seed.wrapping_add(2)),
        check_lambda_max(seed.wrapping_add(3)),
        check_uniform_g_closed_form(10_000, 0.1, seed.wrapping_add(4)),
        check_exponential_psi_closed_form(200, 50, seed.wrapping_add(5)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_oracles_pass() {
        for outcome in [
            check_g_enumeration(50, 3),
            check_psi_enumeration(4),
            check_svt_diag(),
            check_prox_optimality(200, 5),
            check_lambda_max(6),
        ] {
            assert!(outcome.passed, "{outcome}");
        }
    }

    #[test]
    fn closed_form_oracles_pass() {
        let g = check_uniform_g_closed_form(10_000, 0.1, 7);
        assert!(g.passed, "{g}");
        let psi = check_exponential_psi_closed_form(120, 40, 8);
        assert!(psi.passed, "{psi}");
    }
}
