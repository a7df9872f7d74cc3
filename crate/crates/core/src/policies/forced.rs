//! The forced-sampling rule: decides per round whether to force a uniformly
//! random arm or hand control back to the exploit path.

use crate::matrix::Arm;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// How forced rounds are scheduled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcedMode {
    /// All rounds `t <= f` are forced (the experiments' "total number of
    /// forced samples" parameterization).
    Budget(u64),
    /// Randomized schedule: force with probability 1 while
    /// `t <= 2 rho ln(rho)`, then with probability
    /// `min(1, rho / (t - rho ln(rho) + 1))`.
    Schedule { rho: f64 },
}

/// A forced-sampling rule over a d_r x d_c arm grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcedSampling {
    mode: ForcedMode,
}

impl ForcedSampling {
    pub fn new(mode: ForcedMode) -> Self {
        if let ForcedMode::Schedule { rho } = mode {
            assert!(rho >= 1.0, "schedule mode requires rho >= 1");
        }
        Self { mode }
    }

    pub fn mode(&self) -> ForcedMode {
        self.mode
    }

    /// Probability that round `t` is forced. The per-arm probability of the
    /// schedule rule is this divided by the number of arms.
    pub fn force_probability(&self, t: u64) -> f64 {
        match self.mode {
            ForcedMode::Budget(f) => {
                if t <= f {
                    1.0
                } else {
                    0.0
                }
            }
            ForcedMode::Schedule { rho } => {
                let tf = t as f64;
                if tf <= 2.0 * rho * rho.ln() {
                    1.0
                } else {
                    (rho / (tf - rho * rho.ln() + 1.0)).min(1.0)
                }
            }
        }
    }

    /// Two-stage draw: decide whether to force, then pick an arm uniformly.
    /// Consumes randomness only when a decision actually requires it, so a
    /// zero-budget rule leaves the stream untouched.
    pub fn draw(&self, t: u64, d_r: usize, d_c: usize, rng: &mut ChaCha8Rng) -> Option<Arm> {
        let fire = match self.mode {
            ForcedMode::Budget(f) => t <= f,
            ForcedMode::Schedule { .. } => {
                let p = self.force_probability(t);
                if p >= 1.0 {
                    true
                } else if p <= 0.0 {
                    false
                } else {
                    rng.random_range(0.0..1.0) < p
                }
            }
        };
        fire.then(|| Arm::new(rng.random_range(0..d_r), rng.random_range(0..d_c)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_from;

    #[test]
    fn schedule_initial_phase_always_fires() {
        // 2 * 4 * ln(4) = 11.09, so t = 5 is inside the initial phase
        let rule = ForcedSampling::new(ForcedMode::Schedule { rho: 4.0 });
        assert_eq!(rule.force_probability(5), 1.0);
        let mut rng = stream_from(1);
        for _ in 0..100 {
            assert!(rule.draw(5, 10, 10, &mut rng).is_some());
        }
    }

    #[test]
    fn schedule_tail_probability_matches_formula() {
        let rule = ForcedSampling::new(ForcedMode::Schedule { rho: 4.0 });
        // per-arm probability 4 / (100 * (20 - 4 ln 4 + 1))
        let expect = 4.0 / (20.0 - 4.0 * 4.0f64.ln() + 1.0);
        assert!((rule.force_probability(20) - expect).abs() < 1e-12);

        // empirical frequency of firing over many draws
        let mut rng = stream_from(2);
        let n = 1_000_000;
        let fired = (0..n).filter(|_| rule.draw(20, 10, 10, &mut rng).is_some()).count();
        let p_hat = fired as f64 / n as f64;
        let sigma = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((p_hat - expect).abs() <= 3.0 * sigma, "p_hat {p_hat} vs {expect}");
    }

    #[test]
    fn schedule_arm_draw_is_uniform() {
        let rule = ForcedSampling::new(ForcedMode::Schedule { rho: 4.0 });
        let mut rng = stream_from(3);
        let n = 200_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            if let Some(arm) = rule.draw(1, 2, 2, &mut rng) {
                counts[arm.row * 2 + arm.col] += 1;
            }
        }
        let sigma = (0.25 * 0.75 * n as f64).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * 0.25).abs() <= 4.0 * sigma, "counts {counts:?}");
        }
    }

    #[test]
    fn zero_budget_never_fires_and_consumes_no_randomness() {
        let rule = ForcedSampling::new(ForcedMode::Budget(0));
        let mut rng = stream_from(4);
        for t in 1..=100 {
            assert!(rule.draw(t, 5, 5, &mut rng).is_none());
        }
        let mut fresh = stream_from(4);
        use rand::Rng;
        assert_eq!(rng.random::<u64>(), fresh.random::<u64>());
    }

    #[test]
    fn budget_fires_exactly_first_f_rounds() {
        let rule = ForcedSampling::new(ForcedMode::Budget(7));
        let mut rng = stream_from(5);
        for t in 1..=7 {
            assert!(rule.draw(t, 3, 3, &mut rng).is_some());
        }
        for t in 8..=20 {
            assert!(rule.draw(t, 3, 3, &mut rng).is_none());
        }
    }
}
