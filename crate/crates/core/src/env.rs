//! Simulation environments and regret accounting.
//!
//! An [`Environment`] wraps a ground-truth reward matrix with a seeded
//! Gaussian noise stream. [`ContextualInstance`] builds the linear-reward
//! reduction: the same rewards viewed either as a low-rank matrix or as
//! sparse arm feature vectors against a flattened parameter vector.

use crate::matrix::{Arm, RewardMatrix};
use crate::rng::stream_from;
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("arm ({row}, {col}) out of range for {d_r} x {d_c}")]
    OutOfRange { row: usize, col: usize, d_r: usize, d_c: usize },
}

/// Noisy reward oracle over a fixed reward matrix. Rewards are
/// `B[arm] + noise_sd * z` with `z` standard normal from the environment's
/// own stream; deterministic given the seed and the pull sequence.
#[derive(Debug, Clone)]
pub struct Environment {
    truth: RewardMatrix,
    noise_sd: f64,
    rng: ChaCha8Rng,
}

impl Environment {
    pub fn new(truth: RewardMatrix, noise_sd: f64, seed: u64) -> Self {
        assert!(noise_sd >= 0.0, "noise sd must be nonnegative");
        Self { truth, noise_sd, rng: stream_from(seed) }
    }

    pub fn truth(&self) -> &RewardMatrix {
        &self.truth
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    /// Observes a noisy reward for `arm` at round `t`. The round index only
    /// documents the call site; the noise stream is sequential in call order.
    pub fn pull(&mut self, arm: Arm, _t: u64) -> Result<f64, EnvError> {
        if arm.row >= self.truth.rows() || arm.col >= self.truth.cols() {
            return Err(EnvError::OutOfRange {
                row: arm.row,
                col: arm.col,
                d_r: self.truth.rows(),
                d_c: self.truth.cols(),
            });
        }
        let z: f64 = StandardNormal.sample(&mut self.rng);
        Ok(self.truth.get(arm) + self.noise_sd * z)
    }
}

/// All argmax arms of the matrix plus the gap between the best and the
/// second-best entry value; the gap is `None` when every entry is equal.
pub fn oracle_gap_and_best(truth: &RewardMatrix) -> (Vec<Arm>, Option<f64>) {
    let max = truth.max_entry();
    let mut best = Vec::new();
    let mut gap: Option<f64> = None;
    for row in 0..truth.rows() {
        for col in 0..truth.cols() {
            let v = truth.get(Arm::new(row, col));
            if v == max {
                best.push(Arm::new(row, col));
            } else {
                let d = max - v;
                gap = Some(match gap {
                    Some(g) => g.min(d),
                    None => d,
                });
            }
        }
    }
    (best, gap)
}

/// Contextual reduction instance: rewards `B[j][k] = <A*_jk, X>` where
/// A*_jk = row j of U V_k^T, giving a rank-r reward matrix and an
/// equivalent flattened linear-bandit view with parameter Theta and sparse
/// arm features.
#[derive(Debug, Clone)]
pub struct ContextualInstance {
    pub d_r: usize,
    pub d_c: usize,
    pub rank: usize,
    pub p: usize,
    pub truth: RewardMatrix,
    /// d_r x p feature block per column k: A*_k = U V_k^T.
    pub arm_features: Vec<DMatrix<f64>>,
    /// Known context, length p.
    pub context: DVector<f64>,
    /// Flattened parameter, length d_r * d_c * p, blocks in row-major
    /// (j, k) order.
    pub theta: DVector<f64>,
}

impl ContextualInstance {
    /// Ambient dimension of the flattened view.
    pub fn dim(&self) -> usize {
        self.d_r * self.d_c * self.p
    }

    /// Offset of arm (j, k)'s nonzero block inside the flattened vectors.
    pub fn block_offset(&self, arm: Arm) -> usize {
        (arm.row * self.d_c + arm.col) * self.p
    }

    /// Dense flattened feature vector for one arm (p nonzeros).
    pub fn feature_vector(&self, arm: Arm) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        let off = self.block_offset(arm);
        for i in 0..self.p {
            v[off + i] = self.context[i];
        }
        v
    }

    /// Reward of an arm through the flattened linear view.
    pub fn linear_reward(&self, arm: Arm) -> f64 {
        let off = self.block_offset(arm);
        (0..self.p).map(|i| self.context[i] * self.theta[off + i]).sum()
    }
}

/// Draws U, V_k, X with i.i.d. standard normal entries and assembles both
/// the matrix view and the flattened linear view.
pub fn generate_contextual(
    d_r: usize,
    d_c: usize,
    rank: usize,
    p: usize,
    seed: u64,
) -> ContextualInstance {
    let mut rng = stream_from(seed);
    fn normal(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }
    let u = DMatrix::from_fn(d_r, rank, |_, _| normal(&mut rng));
    let v_k: Vec<DMatrix<f64>> =
        (0..d_c).map(|_| DMatrix::from_fn(p, rank, |_, _| normal(&mut rng))).collect();
    let context = DVector::from_fn(p, |_, _| normal(&mut rng));

    let arm_features: Vec<DMatrix<f64>> = v_k.iter().map(|vk| &u * vk.transpose()).collect();
    let mut entries = DMatrix::zeros(d_r, d_c);
    let mut theta = DVector::zeros(d_r * d_c * p);
    for j in 0..d_r {
        for k in 0..d_c {
            let a_jk = arm_features[k].row(j).transpose();
            entries[(j, k)] = a_jk.dot(&context);
            let off = (j * d_c + k) * p;
            for i in 0..p {
                theta[off + i] = a_jk[i];
            }
        }
    }
    ContextualInstance {
        d_r,
        d_c,
        rank,
        p,
        truth: RewardMatrix::from_matrix(entries).expect("finite entries"),
        arm_features,
        context,
        theta,
    }
}

/// One round of one replicate of one policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub t: u64,
    pub arm: Arm,
    pub reward: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
    pub forced: bool,
}

/// Per-round expected-regret log for one (replicate, policy) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub replicate: usize,
    pub policy: String,
    pub rounds: Vec<RoundRecord>,
}

impl RegretTrace {
    pub fn final_cum_regret(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cum_regret)
    }

    /// (forced-round regret, unforced-round regret); the two parts sum to
    /// the final cumulative regret.
    pub fn decompose(&self) -> (f64, f64) {
        let mut forced = 0.0;
        let mut unforced = 0.0;
        for r in &self.rounds {
            if r.forced {
                forced += r.inst_regret;
            } else {
                unforced += r.inst_regret;
            }
        }
        (forced, unforced)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{generate_low_rank, FactorDist, SvdFactors};
    use approx::assert_relative_eq;

    #[test]
    fn noiseless_pull_is_exact() {
        let b = RewardMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let mut env = Environment::new(b, 0.0, 5);
        assert_eq!(env.pull(Arm::new(1, 0), 1).unwrap(), 3.0);
        assert!(matches!(env.pull(Arm::new(2, 0), 2), Err(EnvError::OutOfRange { .. })));
    }

    #[test]
    fn pull_mean_concentrates() {
        let b = RewardMatrix::from_rows(&[vec![0.7]]).unwrap();
        let mut env = Environment::new(b, 0.1, 9);
        let n = 100_000;
        let mean: f64 = (0..n).map(|t| env.pull(Arm::new(0, 0), t).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 0.7).abs() <= 3.0 * 0.1 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn same_seed_same_rewards() {
        let b = generate_low_rank(4, 4, 2, FactorDist::Uniform01, 3).unwrap();
        let mut e1 = Environment::new(b.clone(), 0.3, 17);
        let mut e2 = Environment::new(b, 0.3, 17);
        for t in 0..50 {
            let arm = Arm::new((t % 4) as usize, (t % 3) as usize);
            assert_eq!(e1.pull(arm, t).unwrap(), e2.pull(arm, t).unwrap());
        }
    }

    #[test]
    fn noise_stream_is_uncorrelated() {
        let b = RewardMatrix::from_rows(&[vec![0.0]]).unwrap();
        let mut env = Environment::new(b, 1.0, 23);
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|t| env.pull(Arm::new(0, 0), t).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let lag1: f64 = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>()
            / ((n - 1) as f64 * var);
        assert!(lag1.abs() <= 3.0 / (n as f64).sqrt(), "lag-1 autocorrelation {lag1}");
    }

    #[test]
    fn oracle_gap_basic() {
        let b = RewardMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let (best, gap) = oracle_gap_and_best(&b);
        assert_eq!(best, vec![Arm::new(1, 1)]);
        assert_relative_eq!(gap.unwrap(), 1.0);
    }

    #[test]
    fn oracle_gap_constant_matrix() {
        let b = RewardMatrix::from_rows(&[vec![2.0; 3], vec![2.0; 3]]).unwrap();
        let (best, gap) = oracle_gap_and_best(&b);
        assert_eq!(best.len(), 6);
        assert!(gap.is_none());
    }

    #[test]
    fn oracle_gap_matches_enumeration() {
        for seed in 0..10 {
            let b = generate_low_rank(6, 6, 3, FactorDist::StdNormal, seed).unwrap();
            let (best, gap) = oracle_gap_and_best(&b);
            // independent enumeration
            let mut values: Vec<(Arm, f64)> = Vec::new();
            for r in 0..6 {
                for c in 0..6 {
                    values.push((Arm::new(r, c), b.get(Arm::new(r, c))));
                }
            }
            values.sort_by(|a, c| c.1.partial_cmp(&a.1).unwrap());
            assert_eq!(best[0], values[0].0);
            let expected_gap = values[0].1 - values.iter().find(|(_, v)| *v < values[0].1).unwrap().1;
            assert_relative_eq!(gap.unwrap(), expected_gap, epsilon = 1e-12);
        }
    }

    #[test]
    fn contextual_dimensions_and_rank() {
        let inst = generate_contextual(8, 10, 3, 7, 31);
        assert_eq!(inst.truth.rows(), 8);
        assert_eq!(inst.truth.cols(), 10);
        assert_eq!(inst.theta.len(), 560);
        assert!(SvdFactors::compute(&inst.truth).numerical_rank() <= 3);

        let tiny = generate_contextual(5, 4, 1, 1, 32);
        assert_eq!(SvdFactors::compute(&tiny.truth).numerical_rank(), 1);
    }

    #[test]
    fn contextual_views_agree() {
        let inst = generate_contextual(8, 10, 3, 7, 33);
        let mut rng = stream_from(34);
        use rand::Rng;
        for _ in 0..50 {
            let arm = Arm::new(rng.random_range(0..8), rng.random_range(0..10));
            let via_matrix = inst.truth.get(arm);
            let via_linear = inst.linear_reward(arm);
            assert!((via_matrix - via_linear).abs() <= 1e-10);
            // dense feature route too
            let dense = inst.feature_vector(arm).dot(&inst.theta);
            assert!((via_matrix - dense).abs() <= 1e-10);
        }
    }

    #[test]
    fn feature_vectors_have_p_nonzeros_in_their_block() {
        let inst = generate_contextual(4, 5, 2, 3, 35);
        for j in 0..4 {
            for k in 0..5 {
                let v = inst.feature_vector(Arm::new(j, k));
                let nonzeros: Vec<usize> = (0..v.len()).filter(|&i| v[i] != 0.0).collect();
                assert_eq!(nonzeros.len(), 3);
                let off = inst.block_offset(Arm::new(j, k));
                assert!(nonzeros.iter().all(|&i| i >= off && i < off + 3));
            }
        }
    }

    #[test]
    fn decompose_sums_to_total() {
        let rounds = vec![
            RoundRecord { t: 1, arm: Arm::new(0, 0), reward: 0.0, inst_regret: 0.5, cum_regret: 0.5, forced: true },
            RoundRecord { t: 2, arm: Arm::new(0, 0), reward: 0.0, inst_regret: 0.25, cum_regret: 0.75, forced: false },
        ];
        let trace = RegretTrace { replicate: 0, policy: "x".into(), rounds };
        let (f, u) = trace.decompose();
        assert_relative_eq!(f + u, trace.final_cum_regret());
    }
}
