//! Sequential decision rules: the low-rank bandit, its submatrix-sampled
//! variant, and the UCB / subsampled-UCB / OFUL baselines, all behind one
//! select/update interface.
//!
//! Every policy owns its random stream and is a deterministic function of
//! (config, seed); replayed runs produce identical arm sequences.

mod forced;
mod lrb;
mod oful;
mod spec;
mod ucb;

pub use forced::{ForcedMode, ForcedSampling};
pub use lrb::{LrbConfig, LrbPolicy, RecomputeRule, SsLrbPolicy};
pub use oful::{OfulConfig, OfulPolicy};
pub use spec::{BuildContext, PolicySpec, SpecParseError};
pub use ucb::{log_w, select_ucb, ucb_index, ArmStats, SsUcbPolicy, UcbPolicy, WRule};

use crate::matrix::Arm;

/// What a policy decided for one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub arm: Arm,
    /// True when the round was a forced-sampling round.
    pub forced: bool,
}

/// Uniform interface for all sequential decision rules.
pub trait Policy {
    /// Chooses the arm for round `t` (1-based).
    fn select(&mut self, t: u64) -> Selection;

    /// Feeds back the observed reward for the arm played at round `t`.
    fn update(&mut self, t: u64, arm: Arm, reward: f64, forced: bool);
}

/// Plays a fixed arm every round; the zero-regret reference when handed the
/// true best arm.
#[derive(Debug, Clone)]
pub struct OraclePolicy {
    best: Arm,
}

impl OraclePolicy {
    pub fn new(best: Arm) -> Self {
        Self { best }
    }
}

impl Policy for OraclePolicy {
    fn select(&mut self, _t: u64) -> Selection {
        Selection { arm: self.best, forced: false }
    }

    fn update(&mut self, _t: u64, _arm: Arm, _reward: f64, _forced: bool) {}
}
