//! OFUL baseline on the flattened contextual view: ridge regression over
//! sparse arm features with a self-normalized confidence radius.

use super::{Policy, Selection};
use crate::env::ContextualInstance;
use crate::matrix::Arm;
use crate::rng::stream_from;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfulConfig {
    /// Ridge regularizer on the Gram matrix.
    pub ridge: f64,
    /// Confidence level delta in the radius formula.
    pub delta: f64,
    /// Bound S on the parameter norm.
    pub reward_bound: f64,
    /// Bound L on the arm feature norms.
    pub feature_bound: f64,
    /// Noise scale sigma in the radius formula.
    pub noise_sd: f64,
}

impl OfulConfig {
    /// Radius beta_t = sqrt(ridge) S + sigma sqrt(2 ln(1/delta)
    /// + dim ln(1 + t L^2 / (ridge dim))).
    pub fn beta(&self, t: u64, dim: usize) -> f64 {
        let d = dim as f64;
        let inside = 2.0 * (1.0 / self.delta).ln()
            + d * (1.0 + t as f64 * self.feature_bound * self.feature_bound / (self.ridge * d)).ln();
        self.ridge.sqrt() * self.reward_bound + self.noise_sd * inside.max(0.0).sqrt()
    }
}

/// OFUL over the d_r x d_c arm grid of a contextual instance. Exploits that
/// each flattened feature has only p nonzeros: per-arm widths read a p x p
/// block of the inverse Gram, and updates are rank-one Sherman-Morrison.
pub struct OfulPolicy {
    cfg: OfulConfig,
    p: usize,
    d_c: usize,
    dim: usize,
    context: DVector<f64>,
    arms: Vec<Arm>,
    v_inv: DMatrix<f64>,
    response: DVector<f64>,
    rng: ChaCha8Rng,
}

impl OfulPolicy {
    pub fn new(
        d_r: usize,
        d_c: usize,
        p: usize,
        context: DVector<f64>,
        cfg: OfulConfig,
        seed: u64,
    ) -> Self {
        assert_eq!(context.len(), p, "context length must equal p");
        assert!(cfg.ridge > 0.0 && cfg.delta > 0.0 && cfg.delta < 1.0);
        let dim = d_r * d_c * p;
        let arms = (0..d_r).flat_map(|r| (0..d_c).map(move |c| Arm::new(r, c))).collect();
        Self {
            cfg,
            p,
            d_c,
            dim,
            context,
            arms,
            v_inv: DMatrix::identity(dim, dim) / cfg.ridge,
            response: DVector::zeros(dim),
            rng: stream_from(seed),
        }
    }

    /// Builds from a contextual instance, deriving S from the true parameter
    /// norm and L from the shared feature norm.
    pub fn for_instance(inst: &ContextualInstance, ridge: f64, delta: f64, noise_sd: f64, seed: u64) -> Self {
        let cfg = OfulConfig {
            ridge,
            delta,
            reward_bound: inst.theta.norm(),
            feature_bound: inst.context.norm(),
            noise_sd,
        };
        Self::new(inst.d_r, inst.d_c, inst.p, inst.context.clone(), cfg, seed)
    }

    /// Zeroes the confidence radius (greedy ridge); testing hook.
    pub fn zero_radius(&mut self) {
        self.cfg.reward_bound = 0.0;
        self.cfg.noise_sd = 0.0;
    }

    fn offset(&self, arm: Arm) -> usize {
        (arm.row * self.d_c + arm.col) * self.p
    }
}

impl Policy for OfulPolicy {
    fn select(&mut self, t: u64) -> Selection {
        let theta_hat = &self.v_inv * &self.response;
        let beta = self.cfg.beta(t, self.dim);
        let mut best = f64::NEG_INFINITY;
        let mut ties: Vec<Arm> = Vec::new();
        for &arm in &self.arms {
            let off = self.offset(arm);
            let mut mean = 0.0;
            let mut quad = 0.0;
            for i in 0..self.p {
                mean += self.context[i] * theta_hat[off + i];
                for j in 0..self.p {
                    quad += self.context[i] * self.context[j] * self.v_inv[(off + i, off + j)];
                }
            }
            let index = mean + beta * quad.max(0.0).sqrt();
            if index > best {
                best = index;
                ties.clear();
                ties.push(arm);
            } else if index == best {
                ties.push(arm);
            }
        }
        let arm = if ties.len() == 1 { ties[0] } else { ties[self.rng.random_range(0..ties.len())] };
        Selection { arm, forced: false }
    }

    fn update(&mut self, _t: u64, arm: Arm, reward: f64, _forced: bool) {
        let off = self.offset(arm);
        // u = V^-1 a, built from the p nonzero feature coordinates
        let mut u = DVector::zeros(self.dim);
        for r in 0..self.dim {
            let mut acc = 0.0;
            for i in 0..self.p {
                acc += self.v_inv[(r, off + i)] * self.context[i];
            }
            u[r] = acc;
        }
        let mut denom = 1.0;
        for i in 0..self.p {
            denom += self.context[i] * u[off + i];
        }
        // V^-1 <- V^-1 - u u^T / denom
        for r in 0..self.dim {
            let ur = u[r] / denom;
            if ur != 0.0 {
                for c in 0..self.dim {
                    self.v_inv[(r, c)] -= ur * u[c];
                }
            }
        }
        for i in 0..self.p {
            self.response[off + i] += reward * self.context[i];
        }
    }
}
