//! Low-rank estimation from sparse entry observations.
//!
//! The estimator is nuclear-norm penalized least squares,
//!
//! ```text
//!   argmin_B (1/n) ||Y - X(B)||^2 + lambda ||B||_*
//! ```
//!
//! solved by accelerated proximal gradient with singular-value
//! soft-thresholding and a monotone restart (accepted iterates never
//! increase the objective). A row-enhancement pass then re-fits each row
//! inside the span of the estimate's first `rank` right singular vectors
//! using held-out observations, which sharpens row-wise error.

use crate::matrix::{Arm, SvdFactors, RANK_TOL_RATIO};
use nalgebra::{DMatrix, DVector};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("observation set is empty")]
    EmptyObservations,
    #[error("need at least 2 forced samples to split, got {got}")]
    TooFewSamples { got: usize },
    #[error("estimate has {available} singular values above tolerance, need {needed}")]
    RankDeficient { needed: usize, available: usize },
    #[error("observation times must be strictly increasing: {prev} then {next}")]
    NonIncreasingTime { prev: u64, next: u64 },
    #[error("observation arm ({row}, {col}) out of range for {d_r} x {d_c}")]
    ArmOutOfRange { row: usize, col: usize, d_r: usize, d_c: usize },
    #[error("observation value at time {time} is not finite")]
    NonFiniteValue { time: u64 },
    #[error("could not parse observation CSV line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One logged pull: which cell, what it paid, when.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub arm: Arm,
    pub value: f64,
    pub time: u64,
}

/// Ordered log of (arm, value, time) triples for a declared matrix shape.
/// Duplicate arms are allowed (repeated pulls); times strictly increase.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    d_r: usize,
    d_c: usize,
    items: Vec<Observation>,
}

impl ObservationSet {
    pub fn new(d_r: usize, d_c: usize) -> Self {
        Self { d_r, d_c, items: Vec::new() }
    }

    pub fn push(&mut self, arm: Arm, value: f64, time: u64) -> Result<(), EstimatorError> {
        if arm.row >= self.d_r || arm.col >= self.d_c {
            return Err(EstimatorError::ArmOutOfRange {
                row: arm.row,
                col: arm.col,
                d_r: self.d_r,
                d_c: self.d_c,
            });
        }
        if !value.is_finite() {
            return Err(EstimatorError::NonFiniteValue { time });
        }
        if let Some(last) = self.items.last() {
            if time <= last.time {
                return Err(EstimatorError::NonIncreasingTime { prev: last.time, next: time });
            }
        }
        self.items.push(Observation { arm, value, time });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn d_r(&self) -> usize {
        self.d_r
    }

    pub fn d_c(&self) -> usize {
        self.d_c
    }

    pub fn items(&self) -> &[Observation] {
        &self.items
    }

    /// Chronological split into halves; odd sizes give the extra item to the
    /// first half.
    pub fn split_halves(&self) -> (ObservationSet, ObservationSet) {
        let cut = self.items.len().div_ceil(2);
        let mut first = ObservationSet::new(self.d_r, self.d_c);
        let mut second = ObservationSet::new(self.d_r, self.d_c);
        first.items.extend_from_slice(&self.items[..cut]);
        second.items.extend_from_slice(&self.items[cut..]);
        (first, second)
    }

    /// CSV with header `t,row,col,y`, 1-based indices.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writeln!(writer, "t,row,col,y")?;
        for o in &self.items {
            writeln!(writer, "{},{},{},{}", o.time, o.arm.row + 1, o.arm.col + 1, o.value)?;
        }
        Ok(())
    }

    pub fn load_csv<R: BufRead>(d_r: usize, d_c: usize, reader: R) -> Result<Self, EstimatorError> {
        let mut set = ObservationSet::new(d_r, d_c);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line.trim() != "t,row,col,y" {
                    return Err(EstimatorError::Parse { line: 1, message: "expected header t,row,col,y".into() });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(EstimatorError::Parse {
                    line: i + 1,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64, EstimatorError> {
                s.trim().parse().map_err(|e| EstimatorError::Parse { line: i + 1, message: format!("{e}") })
            };
            let t = parse(fields[0])? as u64;
            let row = parse(fields[1])? as usize;
            let col = parse(fields[2])? as usize;
            if row == 0 || col == 0 {
                return Err(EstimatorError::Parse { line: i + 1, message: "indices are 1-based".into() });
            }
            set.push(Arm::new(row - 1, col - 1), parse(fields[3])?, t)?;
        }
        Ok(set)
    }
}

/// Regularization schedule for the nuclear-norm penalty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    Fixed(f64),
    /// lambda = sqrt(1/n) with n the number of observations fed in.
    InverseSqrtN,
    /// lambda = noise_sd * sqrt(1/n); keeps the penalty below the
    /// zero-solution threshold when observations are sparse.
    NoiseScaled { noise_sd: f64 },
}

/// Proximal-gradient solver knobs. The step size is always the inverse
/// Lipschitz constant of the smooth part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub lambda: LambdaRule,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub acceleration: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { lambda: LambdaRule::InverseSqrtN, rel_tol: 1e-6, max_iters: 500, acceleration: true }
    }
}

/// Solver or enhancement output.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankEstimate {
    pub matrix: DMatrix<f64>,
    pub rank_used: usize,
    /// Objective at accepted iterates; nonincreasing by construction.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// Proximal operator of `tau * ||.||_*`: soft-thresholds the singular values.
pub fn svt_shrink(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    assert!(tau >= 0.0, "threshold must be nonnegative");
    svt_shrink_with_norm(m, tau).0
}

/// Shrink plus the nuclear norm of the result (free by-product of the SVD).
fn svt_shrink_with_norm(m: &DMatrix<f64>, tau: f64) -> (DMatrix<f64>, f64) {
    let svd = crate::svd::thin_svd(m);
    let shrunk: Vec<f64> = svd.s.iter().map(|&s| (s - tau).max(0.0)).collect();
    let nuclear: f64 = shrunk.iter().sum();
    // only components surviving the shrink contribute to the reconstruction
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, &s) in shrunk.iter().enumerate().filter(|(_, &s)| s > 0.0) {
        out += svd.u.column(i) * svd.v.column(i).transpose() * s;
    }
    (out, nuclear)
}

/// Per-cell sufficient statistics of an observation set.
struct CellStats {
    count: DMatrix<f64>,
    sum: DMatrix<f64>,
    sum_sq: f64,
    n: f64,
    max_count: f64,
}

impl CellStats {
    fn build(obs: &ObservationSet) -> Self {
        let mut count = DMatrix::zeros(obs.d_r, obs.d_c);
        let mut sum = DMatrix::zeros(obs.d_r, obs.d_c);
        let mut sum_sq = 0.0;
        for o in obs.items() {
            count[(o.arm.row, o.arm.col)] += 1.0;
            sum[(o.arm.row, o.arm.col)] += o.value;
            sum_sq += o.value * o.value;
        }
        let max_count = count.iter().copied().fold(0.0, f64::max);
        Self { count, sum, sum_sq, n: obs.len() as f64, max_count }
    }

    /// Smooth part (1/n) sum_i (y_i - B_cell_i)^2.
    fn smooth_objective(&self, b: &DMatrix<f64>) -> f64 {
        let mut acc = self.sum_sq;
        for r in 0..self.count.nrows() {
            for c in 0..self.count.ncols() {
                let cnt = self.count[(r, c)];
                if cnt > 0.0 {
                    let x = b[(r, c)];
                    acc += cnt * x * x - 2.0 * x * self.sum[(r, c)];
                }
            }
        }
        acc / self.n
    }

    /// Gradient of the smooth part: (2/n)(count .* B - sum) on observed
    /// cells, zero elsewhere.
    fn gradient(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(b.nrows(), b.ncols());
        for r in 0..b.nrows() {
            for c in 0..b.ncols() {
                let cnt = self.count[(r, c)];
                if cnt > 0.0 {
                    g[(r, c)] = 2.0 / self.n * (cnt * b[(r, c)] - self.sum[(r, c)]);
                }
            }
        }
        g
    }
}

/// Nuclear-norm penalized least squares (cold start from zero).
pub fn solve_nuclear_norm(
    obs: &ObservationSet,
    d_r: usize,
    d_c: usize,
    cfg: &SolverConfig,
) -> Result<LowRankEstimate, EstimatorError> {
    solve_nuclear_norm_from(obs, d_r, d_c, cfg, None)
}

/// Same solver with an optional warm-start iterate.
pub fn solve_nuclear_norm_from(
    obs: &ObservationSet,
    d_r: usize,
    d_c: usize,
    cfg: &SolverConfig,
    init: Option<&DMatrix<f64>>,
) -> Result<LowRankEstimate, EstimatorError> {
    if obs.is_empty() {
        return Err(EstimatorError::EmptyObservations);
    }
    assert_eq!((obs.d_r, obs.d_c), (d_r, d_c), "observation set shape mismatch");
    let stats = CellStats::build(obs);
    let lambda = match cfg.lambda {
        LambdaRule::Fixed(l) => l,
        LambdaRule::InverseSqrtN => (1.0 / stats.n).sqrt(),
        LambdaRule::NoiseScaled { noise_sd } => noise_sd * (1.0 / stats.n).sqrt(),
    };
    // inverse Lipschitz constant of the smooth part
    let step = stats.n / (2.0 * stats.max_count);

    let mut x = match init {
        Some(m) => {
            assert_eq!((m.nrows(), m.ncols()), (d_r, d_c), "warm start shape mismatch");
            m.clone()
        }
        None => DMatrix::zeros(d_r, d_c),
    };
    let x_init_nuclear: f64 = if init.is_some() {
        crate::svd::singular_values(&x).iter().sum()
    } else {
        0.0
    };
    let objective = |b: &DMatrix<f64>, nuc: f64| stats.smooth_objective(b) + lambda * nuc;

    let mut f_x = objective(&x, x_init_nuclear);
    let mut trace = vec![f_x];
    let mut y = x.clone();
    let mut theta = 1.0f64;
    let mut converged = false;

    for _ in 0..cfg.max_iters {
        let f_prev = f_x;
        let (z, z_nuc) = svt_shrink_with_norm(&(&y - stats.gradient(&y) * step), step * lambda);
        let f_z = objective(&z, z_nuc);
        if cfg.acceleration && f_z <= f_x {
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let beta = (theta - 1.0) / theta_next;
            y = &z + (&z - &x) * beta;
            theta = theta_next;
            x = z;
            f_x = f_z;
        } else {
            // restart: plain proximal step from x, which cannot increase the
            // objective at step <= 1/L
            let (z2, z2_nuc) = svt_shrink_with_norm(&(&x - stats.gradient(&x) * step), step * lambda);
            let f_z2 = objective(&z2, z2_nuc);
            if f_z2 <= f_x {
                x = z2;
                f_x = f_z2;
            }
            y = x.clone();
            theta = 1.0;
        }
        trace.push(f_x);
        let denom = f_prev.abs().max(f64::MIN_POSITIVE);
        if (f_prev - f_x) / denom < cfg.rel_tol {
            converged = true;
            break;
        }
    }

    let rank_used = {
        let sv = crate::svd::singular_values(&x);
        let sigma1 = sv.first().copied().unwrap_or(0.0);
        sv.iter().filter(|&&s| s > RANK_TOL_RATIO * sigma1.max(f64::MIN_POSITIVE)).count()
    };
    Ok(LowRankEstimate { matrix: x, rank_used, objective_trace: trace, converged })
}

/// A row is re-fit only when it has at least this many held-out observations
/// per fitted coefficient; with fewer, the fit interpolates raw noise and can
/// inflate the row by orders of magnitude.
pub const ROW_FIT_MIN_OBS_PER_COEF: usize = 2;

/// Singular values of a row design below this are treated as zero
/// (minimum-norm fallback).
pub const ROW_FIT_SV_FLOOR: f64 = 1e-8;

/// Additional relative truncation: design directions below this fraction of
/// the largest singular value are dropped, capping noise amplification.
pub const ROW_FIT_SV_REL: f64 = 0.05;

/// Re-fits each sufficiently observed row inside the span of the estimate's
/// first `rank` right singular vectors.
///
/// Rows with fewer than `2 * rank` held-out observations keep the input row
/// unchanged (the zero-observation fallback, extended to under-determined
/// fits). Ill-conditioned row systems solve via the truncated minimum-norm
/// pseudoinverse.
pub fn row_enhance(
    estimate: &LowRankEstimate,
    second_half: &ObservationSet,
    rank: usize,
) -> Result<LowRankEstimate, EstimatorError> {
    let (d_r, d_c) = (estimate.matrix.nrows(), estimate.matrix.ncols());
    assert_eq!((second_half.d_r, second_half.d_c), (d_r, d_c), "observation set shape mismatch");
    let svd = SvdFactors::of_matrix(&estimate.matrix);
    let available = svd.numerical_rank();
    if available < rank {
        return Err(EstimatorError::RankDeficient { needed: rank, available });
    }
    let v_r = svd.v.columns(0, rank).into_owned();

    // held-out observations grouped by row
    let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d_r];
    for o in second_half.items() {
        by_row[o.arm.row].push((o.arm.col, o.value));
    }

    let mut enhanced = estimate.matrix.clone();
    for (j, obs) in by_row.iter().enumerate() {
        if obs.len() < ROW_FIT_MIN_OBS_PER_COEF * rank {
            continue;
        }
        let design = DMatrix::from_fn(obs.len(), rank, |i, l| v_r[(obs[i].0, l)]);
        let rhs = DVector::from_fn(obs.len(), |i, _| obs[i].1);
        let theta = min_norm_least_squares(&design, &rhs, ROW_FIT_SV_FLOOR);
        let row = &v_r * theta;
        for k in 0..d_c {
            enhanced[(j, k)] = row[k];
        }
    }
    Ok(LowRankEstimate {
        matrix: enhanced,
        rank_used: rank,
        objective_trace: estimate.objective_trace.clone(),
        converged: estimate.converged,
    })
}

/// Least squares via SVD with a singular-value cutoff; below the cutoff the
/// solution is the minimum-norm one over the retained directions.
fn min_norm_least_squares(a: &DMatrix<f64>, rhs: &DVector<f64>, sv_floor: f64) -> DVector<f64> {
    let svd = crate::svd::thin_svd(a);
    let s_max = svd.s.first().copied().unwrap_or(0.0);
    let cutoff = sv_floor.max(ROW_FIT_SV_REL * s_max);
    let mut coef = DVector::zeros(a.ncols());
    for i in 0..svd.s.len() {
        let s = svd.s[i];
        if s > cutoff {
            let proj = svd.u.column(i).dot(rhs) / s;
            coef += svd.v.column(i) * proj;
        }
    }
    coef
}

/// Forced-sample estimator: chronological half split, nuclear-norm solve on
/// the first half, row enhancement with the second half.
pub fn forced_sample_estimate(
    forced: &ObservationSet,
    d_r: usize,
    d_c: usize,
    rank: usize,
    cfg: &SolverConfig,
) -> Result<LowRankEstimate, EstimatorError> {
    forced_sample_estimate_from(forced, d_r, d_c, rank, cfg, None)
}

/// Warm-started variant; `init` seeds the nuclear-norm solve.
pub fn forced_sample_estimate_from(
    forced: &ObservationSet,
    d_r: usize,
    d_c: usize,
    rank: usize,
    cfg: &SolverConfig,
    init: Option<&DMatrix<f64>>,
) -> Result<LowRankEstimate, EstimatorError> {
    if forced.len() < 2 {
        return Err(EstimatorError::TooFewSamples { got: forced.len() });
    }
    let (first, second) = forced.split_halves();
    let base = solve_nuclear_norm_from(&first, d_r, d_c, cfg, init)?;
    row_enhance(&base, &second, rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{generate_low_rank, FactorDist};
    use crate::rng::stream_from;
    use rand::Rng;

    fn observe_all_once(b: &DMatrix<f64>) -> ObservationSet {
        let mut obs = ObservationSet::new(b.nrows(), b.ncols());
        let mut t = 1;
        for r in 0..b.nrows() {
            for c in 0..b.ncols() {
                obs.push(Arm::new(r, c), b[(r, c)], t).unwrap();
                t += 1;
            }
        }
        obs
    }

    #[test]
    fn observation_set_validation() {
        let mut obs = ObservationSet::new(2, 2);
        obs.push(Arm::new(0, 0), 1.0, 1).unwrap();
        assert!(matches!(
            obs.push(Arm::new(0, 0), 1.0, 1),
            Err(EstimatorError::NonIncreasingTime { .. })
        ));
        assert!(matches!(
            obs.push(Arm::new(2, 0), 1.0, 2),
            Err(EstimatorError::ArmOutOfRange { .. })
        ));
        assert!(matches!(
            obs.push(Arm::new(0, 1), f64::NAN, 2),
            Err(EstimatorError::NonFiniteValue { .. })
        ));
        // duplicates at later times are fine
        obs.push(Arm::new(0, 0), 2.0, 3).unwrap();
        assert_eq!(obs.len(), 2);
    }

    #[test]
    fn observation_csv_round_trip() {
        let mut obs = ObservationSet::new(3, 4);
        obs.push(Arm::new(0, 3), 1.25, 2).unwrap();
        obs.push(Arm::new(2, 0), -0.5, 7).unwrap();
        let mut buf = Vec::new();
        obs.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,row,col,y\n2,1,4,1.25\n"));
        let back = ObservationSet::load_csv(3, 4, &buf[..]).unwrap();
        assert_eq!(obs, back);
    }

    #[test]
    fn split_rule_gives_extra_to_first_half() {
        let mut obs = ObservationSet::new(2, 2);
        for t in 1..=5u64 {
            obs.push(Arm::new(0, 0), t as f64, t).unwrap();
        }
        let (a, b) = obs.split_halves();
        assert_eq!(a.len(), 3);
        assert_eq!(b.len(), 2);
        assert_eq!(b.items()[0].time, 4);

        let mut four = ObservationSet::new(2, 2);
        for t in 1..=4u64 {
            four.push(Arm::new(0, 0), 0.0, t).unwrap();
        }
        let (a, b) = four.split_halves();
        assert_eq!((a.len(), b.len()), (2, 2));
    }

    #[test]
    fn svt_diag_example() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let shrunk = svt_shrink(&m, 1.0);
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]));
        assert!((shrunk - expect).norm() <= 1e-12);
    }

    #[test]
    fn svt_zero_tau_is_identity() {
        let mut rng = stream_from(2);
        let m = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        assert!((svt_shrink(&m, 0.0) - &m).norm() <= 1e-12);
    }

    #[test]
    fn svt_full_shrink_zeroes() {
        let mut rng = stream_from(4);
        let m = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
        let sigma1 = m.clone().svd(false, false).singular_values.max();
        assert!(svt_shrink(&m, sigma1 + 1e-9).norm() <= 1e-12);
    }

    #[test]
    fn solver_recovers_fully_observed_rank_one() {
        let b = generate_low_rank(4, 4, 1, FactorDist::Uniform01, 3).unwrap();
        let obs = observe_all_once(b.as_matrix());
        let cfg = SolverConfig { lambda: LambdaRule::Fixed(1e-8), ..Default::default() };
        let est = solve_nuclear_norm(&obs, 4, 4, &cfg).unwrap();
        let rel = (&est.matrix - b.as_matrix()).norm() / b.as_matrix().norm();
        assert!(rel <= 1e-4, "relative error {rel}");
    }

    #[test]
    fn large_lambda_gives_zero_solution() {
        // zero is optimal iff lambda >= operator norm of the gradient at zero
        let b = generate_low_rank(5, 5, 2, FactorDist::StdNormal, 9).unwrap();
        let obs = observe_all_once(b.as_matrix());
        let stats_sum = {
            let mut s: DMatrix<f64> = DMatrix::zeros(5, 5);
            for o in obs.items() {
                s[(o.arm.row, o.arm.col)] += o.value;
            }
            s
        };
        let lambda_max: f64 = 2.0 / obs.len() as f64 * stats_sum.svd(false, false).singular_values.max();
        let cfg = SolverConfig { lambda: LambdaRule::Fixed(lambda_max * 1.0001), ..Default::default() };
        let est = solve_nuclear_norm(&obs, 5, 5, &cfg).unwrap();
        assert!(est.matrix.norm() <= 1e-8, "norm {}", est.matrix.norm());

        // strictly below lambda_max the solution must be nonzero
        let cfg = SolverConfig { lambda: LambdaRule::Fixed(lambda_max * 0.9), ..Default::default() };
        let est = solve_nuclear_norm(&obs, 5, 5, &cfg).unwrap();
        assert!(est.matrix.norm() > 1e-6);
    }

    #[test]
    fn objective_trace_is_nonincreasing() {
        let b = generate_low_rank(10, 8, 2, FactorDist::StdNormal, 21).unwrap();
        let mut rng = stream_from(22);
        let mut obs = ObservationSet::new(10, 8);
        for t in 1..=60u64 {
            let arm = Arm::new(rng.random_range(0..10), rng.random_range(0..8));
            obs.push(arm, b.get(arm) + 0.05 * rng.random_range(-1.0..1.0), t).unwrap();
        }
        let est = solve_nuclear_norm(&obs, 10, 8, &SolverConfig::default()).unwrap();
        assert!(est.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(est.converged);
    }

    #[test]
    fn penalized_solution_has_smaller_nuclear_norm_than_exact_fit() {
        // on fully observed data the zero-residual unpenalized fit is the
        // observation matrix itself; the penalty can only shrink it
        let b = generate_low_rank(6, 6, 3, FactorDist::StdNormal, 25).unwrap();
        let obs = observe_all_once(b.as_matrix());
        let cfg = SolverConfig { lambda: LambdaRule::Fixed(0.05), ..Default::default() };
        let est = solve_nuclear_norm(&obs, 6, 6, &cfg).unwrap();
        let nuclear = |m: &DMatrix<f64>| -> f64 { m.clone().svd(false, false).singular_values.iter().sum() };
        assert!(nuclear(&est.matrix) <= nuclear(b.as_matrix()) + 1e-9);
    }

    #[test]
    fn solver_is_deterministic() {
        let b = generate_low_rank(6, 6, 2, FactorDist::Uniform01, 30).unwrap();
        let obs = observe_all_once(b.as_matrix());
        let cfg = SolverConfig::default();
        let e1 = solve_nuclear_norm(&obs, 6, 6, &cfg).unwrap();
        let e2 = solve_nuclear_norm(&obs, 6, 6, &cfg).unwrap();
        assert_eq!(e1.matrix, e2.matrix);
        assert_eq!(e1.objective_trace, e2.objective_trace);
    }

    #[test]
    fn empty_observations_error() {
        let obs = ObservationSet::new(3, 3);
        assert!(matches!(
            solve_nuclear_norm(&obs, 3, 3, &SolverConfig::default()),
            Err(EstimatorError::EmptyObservations)
        ));
    }

    #[test]
    fn row_enhance_exact_estimate_noiseless() {
        let b = generate_low_rank(6, 8, 2, FactorDist::StdNormal, 40).unwrap();
        let est = LowRankEstimate {
            matrix: b.as_matrix().clone(),
            rank_used: 2,
            objective_trace: vec![0.0],
            converged: true,
        };
        // five generic observations per row, noiseless
        let mut second = ObservationSet::new(6, 8);
        let mut rng = stream_from(41);
        let mut t = 1;
        for j in 0..6 {
            let cols = crate::rng::sample_without_replacement(&mut rng, 8, 5);
            for k in cols {
                let arm = Arm::new(j, k);
                second.push(arm, b.get(arm), t).unwrap();
                t += 1;
            }
        }
        let enhanced = row_enhance(&est, &second, 2).unwrap();
        let err = (enhanced.matrix - b.as_matrix()).norm();
        assert!(err <= 1e-8, "row enhancement drift {err}");
    }

    #[test]
    fn row_without_observations_keeps_input_row() {
        let b = generate_low_rank(4, 4, 2, FactorDist::StdNormal, 50).unwrap();
        let est = LowRankEstimate {
            matrix: b.as_matrix().clone(),
            rank_used: 2,
            objective_trace: vec![0.0],
            converged: true,
        };
        let mut second = ObservationSet::new(4, 4);
        second.push(Arm::new(0, 1), b.get(Arm::new(0, 1)), 1).unwrap();
        let enhanced = row_enhance(&est, &second, 2).unwrap();
        for j in 1..4 {
            for k in 0..4 {
                assert_eq!(enhanced.matrix[(j, k)], b.as_matrix()[(j, k)], "row {j} changed");
            }
        }
    }

    #[test]
    fn row_enhance_rank_deficient_errors() {
        let est = LowRankEstimate {
            matrix: DMatrix::from_fn(3, 3, |i, j| (i == 0 && j == 0) as u8 as f64),
            rank_used: 1,
            objective_trace: vec![0.0],
            converged: true,
        };
        let second = ObservationSet::new(3, 3);
        assert!(matches!(
            row_enhance(&est, &second, 2),
            Err(EstimatorError::RankDeficient { needed: 2, available: 1 })
        ));
    }

    #[test]
    fn enhanced_rows_lie_in_right_singular_span() {
        let b = generate_low_rank(8, 10, 3, FactorDist::StdNormal, 60).unwrap();
        let mut rng = stream_from(61);
        let mut obs = ObservationSet::new(8, 10);
        for t in 1..=160u64 {
            let arm = Arm::new(rng.random_range(0..8), rng.random_range(0..10));
            obs.push(arm, b.get(arm) + 0.1 * rng.random_range(-1.0..1.0), t).unwrap();
        }
        let est = forced_sample_estimate(&obs, 8, 10, 3, &SolverConfig::default()).unwrap();
        // project each enhanced row back onto the enhancement basis
        let (first, second) = obs.split_halves();
        let base = solve_nuclear_norm(&first, 8, 10, &SolverConfig::default()).unwrap();
        let v_r = SvdFactors::of_matrix(&base.matrix).v.columns(0, 3).into_owned();
        for j in 0..8 {
            if second.items().iter().any(|o| o.arm.row == j) {
                let row = est.matrix.row(j).transpose();
                let resid = (&row - &v_r * (v_r.transpose() * &row)).norm();
                assert!(resid <= 1e-9, "row {j} off-span by {resid}");
            }
        }
    }

    #[test]
    fn forced_sample_estimate_too_few() {
        let mut obs = ObservationSet::new(2, 2);
        obs.push(Arm::new(0, 0), 1.0, 1).unwrap();
        assert!(matches!(
            forced_sample_estimate(&obs, 2, 2, 1, &SolverConfig::default()),
            Err(EstimatorError::TooFewSamples { got: 1 })
        ));
    }

    #[test]
    fn forced_sample_estimate_recovers_rank_one_full_coverage() {
        let b = generate_low_rank(5, 5, 1, FactorDist::Uniform01, 70).unwrap();
        // two full passes: each half covers every cell
        let mut obs = ObservationSet::new(5, 5);
        let mut t = 1;
        for _ in 0..2 {
            for r in 0..5 {
                for c in 0..5 {
                    let arm = Arm::new(r, c);
                    obs.push(arm, b.get(arm), t).unwrap();
                    t += 1;
                }
            }
        }
        let cfg = SolverConfig { lambda: LambdaRule::Fixed(1e-9), ..Default::default() };
        let est = forced_sample_estimate(&obs, 5, 5, 1, &cfg).unwrap();
        let rel = (&est.matrix - b.as_matrix()).norm() / b.as_matrix().norm();
        assert!(rel <= 1e-6, "relative error {rel}");
    }
}
