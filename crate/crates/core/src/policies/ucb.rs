//! UCB index, shared selection helper, and the UCB / subsampled-UCB
//! baselines.

use super::{Policy, Selection};
use crate::matrix::Arm;
use crate::rng::{derive_seed, sample_without_replacement, stream_from};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Exploration-bonus clock w(t).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WRule {
    /// w(t) = 1 + t ln^2(t).
    Empirical,
    /// w(t) = t.
    Analysis,
}

/// ln(w(t)).
pub fn log_w(rule: WRule, t: u64) -> f64 {
    let tf = t as f64;
    match rule {
        WRule::Empirical => {
            let l = tf.ln();
            (1.0 + tf * l * l).ln()
        }
        WRule::Analysis => tf.ln(),
    }
}

/// UCB index: mean plus sqrt(2 ln w(t) / n); unpulled arms get +infinity so
/// every candidate is tried once.
pub fn ucb_index(count: u64, sum: f64, t: u64, rule: WRule) -> f64 {
    if count == 0 {
        return f64::INFINITY;
    }
    let n = count as f64;
    sum / n + (2.0 * log_w(rule, t) / n).sqrt()
}

/// Per-arm pull counts and reward sums over a d_r x d_c grid.
#[derive(Debug, Clone)]
pub struct ArmStats {
    d_c: usize,
    counts: Vec<u64>,
    sums: Vec<f64>,
}

impl ArmStats {
    pub fn new(d_r: usize, d_c: usize) -> Self {
        Self { d_c, counts: vec![0; d_r * d_c], sums: vec![0.0; d_r * d_c] }
    }

    fn idx(&self, arm: Arm) -> usize {
        arm.row * self.d_c + arm.col
    }

    pub fn add(&mut self, arm: Arm, reward: f64) {
        let i = self.idx(arm);
        self.counts[i] += 1;
        self.sums[i] += reward;
    }

    pub fn count(&self, arm: Arm) -> u64 {
        self.counts[self.idx(arm)]
    }

    pub fn sum(&self, arm: Arm) -> f64 {
        self.sums[self.idx(arm)]
    }

    pub fn total_pulls(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Argmax of the UCB index over `candidates`, ties broken uniformly at
/// random. Randomness is consumed only when there is an actual tie, so two
/// policies scanning identical candidate lists stay in lockstep.
pub fn select_ucb(
    stats: &ArmStats,
    candidates: &[Arm],
    t: u64,
    rule: WRule,
    rng: &mut ChaCha8Rng,
) -> Arm {
    assert!(!candidates.is_empty(), "candidate set must be nonempty");
    let mut best = f64::NEG_INFINITY;
    let mut ties: Vec<Arm> = Vec::new();
    for &arm in candidates {
        let idx = ucb_index(stats.count(arm), stats.sum(arm), t, rule);
        if idx > best {
            best = idx;
            ties.clear();
            ties.push(arm);
        } else if idx == best {
            ties.push(arm);
        }
    }
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

/// Plain UCB over every cell of the grid.
#[derive(Debug, Clone)]
pub struct UcbPolicy {
    stats: ArmStats,
    arms: Vec<Arm>,
    rule: WRule,
    rng: ChaCha8Rng,
}

impl UcbPolicy {
    pub fn new(d_r: usize, d_c: usize, rule: WRule, seed: u64) -> Self {
        let arms = (0..d_r).flat_map(|r| (0..d_c).map(move |c| Arm::new(r, c))).collect();
        Self { stats: ArmStats::new(d_r, d_c), arms, rule, rng: stream_from(seed) }
    }

    fn with_arms(d_r: usize, d_c: usize, arms: Vec<Arm>, rule: WRule, seed: u64) -> Self {
        Self { stats: ArmStats::new(d_r, d_c), arms, rule, rng: stream_from(seed) }
    }
}

impl Policy for UcbPolicy {
    fn select(&mut self, t: u64) -> Selection {
        Selection { arm: select_ucb(&self.stats, &self.arms, t, self.rule, &mut self.rng), forced: false }
    }

    fn update(&mut self, _t: u64, arm: Arm, reward: f64, _forced: bool) {
        self.stats.add(arm, reward);
    }
}

/// UCB restricted to a uniformly subsampled arm set.
#[derive(Debug, Clone)]
pub struct SsUcbPolicy {
    inner: UcbPolicy,
}

impl SsUcbPolicy {
    /// Samples `n_arms` distinct arms. The subsample uses its own derived
    /// stream, so `n_arms == d_r * d_c` reproduces plain UCB built from the
    /// same seed exactly.
    pub fn new(d_r: usize, d_c: usize, n_arms: usize, rule: WRule, seed: u64) -> Self {
        assert!(n_arms >= 1 && n_arms <= d_r * d_c, "arm budget out of range");
        let mut sub_rng = stream_from(derive_seed(seed, &[0x5353_5543]));
        let picked = sample_without_replacement(&mut sub_rng, d_r * d_c, n_arms);
        let arms: Vec<Arm> = picked.iter().map(|&i| Arm::new(i / d_c, i % d_c)).collect();
        Self { inner: UcbPolicy::with_arms(d_r, d_c, arms, rule, seed) }
    }

    /// The subsampling-size rule from the benchmark: floor(4 sqrt(T)),
    /// capped at the grid size.
    pub fn auto_arm_count(horizon: u64, d_r: usize, d_c: usize) -> usize {
        (((4.0 * (horizon as f64).sqrt()).floor() as usize).max(1)).min(d_r * d_c)
    }

    pub fn arms(&self) -> &[Arm] {
        &self.inner.arms
    }
}

impl Policy for SsUcbPolicy {
    fn select(&mut self, t: u64) -> Selection {
        self.inner.select(t)
    }

    fn update(&mut self, t: u64, arm: Arm, reward: f64, forced: bool) {
        self.inner.update(t, arm, reward, forced);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn index_conventions() {
        assert_eq!(ucb_index(0, 0.0, 10, WRule::Analysis), f64::INFINITY);
        // n=4, s=2, t=100, analysis rule: 0.5 + sqrt(2 ln 100 / 4)
        let expect = 0.5 + (2.0 * 100f64.ln() / 4.0).sqrt();
        assert_relative_eq!(ucb_index(4, 2.0, 100, WRule::Analysis), expect, epsilon = 1e-12);
        assert_relative_eq!(expect, 2.01743, epsilon = 1e-5);
        // bonus vanishes as n grows
        let big = ucb_index(1_000_000_000, 0.5e9, 100, WRule::Empirical);
        assert_relative_eq!(big, 0.5, epsilon = 1e-3);
    }

    #[test]
    fn first_rounds_pull_distinct_arms() {
        let mut p = UcbPolicy::new(3, 4, WRule::Empirical, 7);
        let mut seen = std::collections::HashSet::new();
        for t in 1..=12 {
            let sel = p.select(t);
            assert!(seen.insert(sel.arm), "arm {:?} repeated at t={t}", sel.arm);
            p.update(t, sel.arm, 0.0, false);
        }
    }

    #[test]
    fn ucb_concentrates_on_better_arm() {
        // deterministic rewards 1 and 0
        let mut p = UcbPolicy::new(1, 2, WRule::Empirical, 9);
        let mut pulls_of_best = 0;
        let horizon = 2000;
        for t in 1..=horizon {
            let sel = p.select(t);
            let reward = if sel.arm == Arm::new(0, 0) { 1.0 } else { 0.0 };
            if sel.arm == Arm::new(0, 0) {
                pulls_of_best += 1;
            }
            p.update(t, sel.arm, reward, false);
        }
        assert!(pulls_of_best as f64 / horizon as f64 > 0.9, "best pulled {pulls_of_best}");
    }

    #[test]
    fn ssucb_full_sample_matches_plain_ucb() {
        let mut plain = UcbPolicy::new(4, 5, WRule::Empirical, 11);
        let mut sub = SsUcbPolicy::new(4, 5, 20, WRule::Empirical, 11);
        let mut rng = stream_from(12);
        for t in 1..=300 {
            let a = plain.select(t);
            let b = sub.select(t);
            assert_eq!(a, b, "diverged at t={t}");
            let reward: f64 = rng.random_range(0.0..1.0);
            plain.update(t, a.arm, reward, false);
            sub.update(t, b.arm, reward, false);
        }
    }

    #[test]
    fn ssucb_single_arm_is_constant() {
        let mut p = SsUcbPolicy::new(6, 6, 1, WRule::Empirical, 13);
        let only = p.arms()[0];
        for t in 1..=50 {
            let sel = p.select(t);
            assert_eq!(sel.arm, only);
            p.update(t, sel.arm, 0.0, false);
        }
    }

    #[test]
    fn auto_arm_count_examples() {
        assert_eq!(SsUcbPolicy::auto_arm_count(1000, 100, 100), 126);
        assert_eq!(SsUcbPolicy::auto_arm_count(2000, 100, 100), 178);
        assert_eq!(SsUcbPolicy::auto_arm_count(1000, 5, 5), 25);
    }
}
