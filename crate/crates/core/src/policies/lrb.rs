//! The low-rank bandit: forced sampling feeds a low-rank estimate, the
//! estimate filters arms into a targeted set, and a UCB subroutine plays the
//! survivors. The submatrix-sampled variant runs the same policy on a
//! uniformly drawn row/column subgrid.

use super::forced::{ForcedMode, ForcedSampling};
use super::ucb::{select_ucb, ArmStats, WRule};
use super::{Policy, Selection};
use crate::estimator::{
    row_enhance, solve_nuclear_norm_from, LowRankEstimate, ObservationSet, SolverConfig,
};
use crate::matrix::Arm;
use crate::rng::{derive_seed, sample_without_replacement, stream_from};
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

/// When the forced-sample estimate is recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecomputeRule {
    /// Recompute whenever the forced log has grown (default). The estimate
    /// depends only on the forced log, so this reproduces a per-round
    /// recomputation exactly, at a fraction of the cost.
    OnNewForcedSample,
    /// Recompute at most every k rounds (and whenever no estimate exists
    /// yet), still only when the forced log has grown.
    EveryK(u64),
}

#[derive(Debug, Clone)]
pub struct LrbConfig {
    /// Filtering resolution h; the targeted set keeps arms within h/2 of the
    /// estimated maximum.
    pub h: f64,
    pub forced: ForcedMode,
    pub rank: usize,
    pub solver: SolverConfig,
    pub w_rule: WRule,
    pub recompute: RecomputeRule,
}

impl LrbConfig {
    pub fn new(h: f64, forced: ForcedMode, rank: usize) -> Self {
        assert!(h > 0.0, "filtering resolution must be positive");
        Self {
            h,
            forced,
            rank,
            solver: SolverConfig::default(),
            w_rule: WRule::Empirical,
            recompute: RecomputeRule::OnNewForcedSample,
        }
    }
}

/// Low-rank bandit runtime state.
pub struct LrbPolicy {
    cfg: LrbConfig,
    d_r: usize,
    d_c: usize,
    forced_rule: ForcedSampling,
    stats: ArmStats,
    forced_log: ObservationSet,
    /// Enhanced forced-sample estimate, when computable.
    cached: Option<LowRankEstimate>,
    /// Targeted set derived from `cached`; `None` means all arms.
    targeted: Option<Vec<Arm>>,
    /// Last solver solution, used to warm-start the next recompute.
    warm: Option<DMatrix<f64>>,
    /// Forced-log length the cached estimate was built from.
    computed_at_len: usize,
    all_arms: Vec<Arm>,
    rng: ChaCha8Rng,
}

impl LrbPolicy {
    pub fn new(d_r: usize, d_c: usize, cfg: LrbConfig, seed: u64) -> Self {
        let all_arms = (0..d_r).flat_map(|r| (0..d_c).map(move |c| Arm::new(r, c))).collect();
        Self {
            forced_rule: ForcedSampling::new(cfg.forced),
            stats: ArmStats::new(d_r, d_c),
            forced_log: ObservationSet::new(d_r, d_c),
            cached: None,
            targeted: None,
            warm: None,
            computed_at_len: 0,
            all_arms,
            rng: stream_from(seed),
            cfg,
            d_r,
            d_c,
        }
    }

    pub fn forced_count(&self) -> usize {
        self.forced_log.len()
    }

    pub fn estimate(&self) -> Option<&LowRankEstimate> {
        self.cached.as_ref()
    }

    /// Current targeted set; all arms when no estimate is available.
    pub fn targeted_set(&self) -> Vec<Arm> {
        self.targeted.clone().unwrap_or_else(|| self.all_arms.clone())
    }

    /// Installs an externally supplied estimate (testing hook for targeted-set
    /// properties); the policy treats it as current until the forced log grows.
    pub fn inject_estimate(&mut self, estimate: LowRankEstimate) {
        assert_eq!(
            (estimate.matrix.nrows(), estimate.matrix.ncols()),
            (self.d_r, self.d_c),
            "estimate shape mismatch"
        );
        self.targeted = Some(targeted_set_of(&estimate.matrix, self.cfg.h, &self.all_arms));
        self.cached = Some(estimate);
        self.computed_at_len = self.forced_log.len();
    }

    fn estimate_is_stale(&self, t: u64) -> bool {
        if self.forced_log.len() < 2 || self.forced_log.len() == self.computed_at_len {
            return false;
        }
        match self.cfg.recompute {
            RecomputeRule::OnNewForcedSample => true,
            RecomputeRule::EveryK(k) => self.cached.is_none() || t.is_multiple_of(k.max(1)),
        }
    }

    fn refresh_estimate(&mut self, t: u64) {
        if !self.estimate_is_stale(t) {
            return;
        }
        // same pipeline as the forced-sample estimator, but warm-started
        // from the previous solver solution
        let (first, second) = self.forced_log.split_halves();
        let solved = solve_nuclear_norm_from(&first, self.d_r, self.d_c, &self.cfg.solver, self.warm.as_ref());
        let outcome = solved.and_then(|bar| {
            self.warm = Some(bar.matrix.clone());
            row_enhance(&bar, &second, self.cfg.rank)
        });
        match outcome {
            Ok(est) => {
                self.targeted = Some(targeted_set_of(&est.matrix, self.cfg.h, &self.all_arms));
                self.cached = Some(est);
            }
            Err(_) => {
                // degrade to the full arm set rather than interrupting the run
                self.cached = None;
                self.targeted = None;
            }
        }
        self.computed_at_len = self.forced_log.len();
    }
}

/// Arms whose estimated reward is within h/2 of the estimated maximum.
fn targeted_set_of(estimate: &DMatrix<f64>, h: f64, all_arms: &[Arm]) -> Vec<Arm> {
    let max = estimate.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cutoff = max - h / 2.0;
    all_arms.iter().copied().filter(|a| estimate[(a.row, a.col)] >= cutoff).collect()
}

impl Policy for LrbPolicy {
    fn select(&mut self, t: u64) -> Selection {
        if let Some(arm) = self.forced_rule.draw(t, self.d_r, self.d_c, &mut self.rng) {
            return Selection { arm, forced: true };
        }
        self.refresh_estimate(t);
        let arm = match &self.targeted {
            Some(set) => select_ucb(&self.stats, set, t, self.cfg.w_rule, &mut self.rng),
            None => select_ucb(&self.stats, &self.all_arms, t, self.cfg.w_rule, &mut self.rng),
        };
        Selection { arm, forced: false }
    }

    fn update(&mut self, t: u64, arm: Arm, reward: f64, forced: bool) {
        // forced and unforced rounds both feed the UCB statistics
        self.stats.add(arm, reward);
        if forced {
            self.forced_log.push(arm, reward, t).expect("forced log rejects a valid round");
        }
    }
}

/// Submatrix-sampled low-rank bandit: draws row/column index sets uniformly
/// without replacement, then delegates to an inner LRB over the subgrid,
/// translating arms back to the full grid.
pub struct SsLrbPolicy {
    inner: LrbPolicy,
    row_map: Vec<usize>,
    col_map: Vec<usize>,
}

impl SsLrbPolicy {
    pub fn new(d_r: usize, d_c: usize, m_r: usize, m_c: usize, cfg: LrbConfig, seed: u64) -> Self {
        assert!(m_r >= 1 && m_r <= d_r && m_c >= 1 && m_c <= d_c, "submatrix size out of range");
        // the subsample uses its own derived stream so the inner policy sees
        // the same stream a plain LRB would; with m == d the sorted sample is
        // the identity and the two policies coincide
        let mut sub_rng = stream_from(derive_seed(seed, &[0x5353_4c52_4221]));
        let row_map = sample_without_replacement(&mut sub_rng, d_r, m_r);
        let col_map = sample_without_replacement(&mut sub_rng, d_c, m_c);
        Self { inner: LrbPolicy::new(m_r, m_c, cfg, seed), row_map, col_map }
    }

    pub fn rows(&self) -> &[usize] {
        &self.row_map
    }

    pub fn cols(&self) -> &[usize] {
        &self.col_map
    }

    fn to_full(&self, arm: Arm) -> Arm {
        Arm::new(self.row_map[arm.row], self.col_map[arm.col])
    }

    fn to_sub(&self, arm: Arm) -> Arm {
        let row = self.row_map.binary_search(&arm.row).expect("arm row outside the sampled subgrid");
        let col = self.col_map.binary_search(&arm.col).expect("arm col outside the sampled subgrid");
        Arm::new(row, col)
    }
}

impl Policy for SsLrbPolicy {
    fn select(&mut self, t: u64) -> Selection {
        let sel = self.inner.select(t);
        Selection { arm: self.to_full(sel.arm), forced: sel.forced }
    }

    fn update(&mut self, t: u64, arm: Arm, reward: f64, forced: bool) {
        self.inner.update(t, self.to_sub(arm), reward, forced);
    }
}
