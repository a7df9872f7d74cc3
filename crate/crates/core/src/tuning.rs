//! Parameter-selection machinery: the phi1/phi2 regret-bound curves, the
//! filtering-resolution lower bound and selection rule, submatrix-size
//! selection, the horizon threshold for switching away from subsampling,
//! and empirical fits of the near-optimal function g and the subsampling
//! cost psi.
//!
//! The theory constants that the analysis never instantiates are collapsed
//! into tunable scale factors: omega1 and omega2 scale phi1 and phi2, and
//! (c1, c2) replace the constants inside the h lower bound. All default to 1.

use crate::matrix::{
    near_optimal_count, psi_closed_form, subsampling_cost, EntryDist, PsiMode, RewardMatrix,
    SubmatrixIndex,
};
use crate::rng::{derive_seed, sample_without_replacement, stream_from};
use std::cell::RefCell;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TuningError {
    #[error("need at least {needed} sample points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("g samples must be positive to fit log g; got {0}")]
    NonPositiveG(f64),
    #[error("empty candidate grid")]
    EmptyGrid,
}

/// Scale constants and matrix statistics entering the bound curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    /// Scale on phi1 (absorbs C1, alpha2 and b*).
    pub omega1: f64,
    /// Scale on phi2 (absorbs 4 sigma sqrt(2)).
    pub omega2: f64,
    /// Reward range bound b*.
    pub b_star: f64,
    /// Row incoherence mu*.
    pub mu_star: f64,
    pub rank: usize,
    /// Effective dimensions (m_r, m_c) the bandit runs on.
    pub dims: (usize, usize),
    /// (c1, c2) inside the h lower bound.
    pub lowh_constants: (f64, f64),
}

impl CostModel {
    pub fn new(rank: usize, dims: (usize, usize)) -> Self {
        Self {
            omega1: 1.0,
            omega2: 1.0,
            b_star: 1.0,
            mu_star: 1.0,
            rank,
            dims,
            lowh_constants: (1.0, 1.0),
        }
    }

    pub fn with_dims(&self, dims: (usize, usize)) -> Self {
        Self { dims, ..*self }
    }

    /// gamma(h) = sqrt(m_r / rank) * h / (64 mu*).
    pub fn gamma(&self, h: f64) -> f64 {
        (self.dims.0 as f64 / self.rank as f64).sqrt() * h / (64.0 * self.mu_star)
    }
}

/// Near-optimal-function model used by the bound curves.
pub enum GEval {
    /// g(h) = exp(a1 h + b1), treated as independent of submatrix size.
    Fitted { a1: f64, b1: f64 },
    /// Monotone (h, g) table, interpolated piecewise-linearly and clamped at
    /// the ends; size-independent.
    Table(Vec<(f64, f64)>),
    /// Backed by a concrete matrix: exact counts at full size, Monte-Carlo
    /// over random index sets below it.
    Empirical(EmpiricalG),
}

impl GEval {
    pub fn fitted(a1: f64, b1: f64) -> Self {
        GEval::Fitted { a1, b1 }
    }

    pub fn table(points: Vec<(f64, f64)>) -> Self {
        assert!(!points.is_empty(), "table must not be empty");
        assert!(points.windows(2).all(|w| w[0].0 < w[1].0), "table h values must increase");
        assert!(points.windows(2).all(|w| w[0].1 <= w[1].1), "g table must be nondecreasing");
        GEval::Table(points)
    }

    pub fn empirical(matrix: RewardMatrix, mc_draws: usize, seed: u64) -> Self {
        GEval::Empirical(EmpiricalG::new(matrix, mc_draws, seed))
    }

    /// g(h) at full size.
    pub fn g_full(&self, h: f64) -> f64 {
        match self {
            GEval::Fitted { a1, b1 } => (a1 * h + b1).exp(),
            GEval::Table(points) => interp_table(points, h),
            GEval::Empirical(e) => e.g_full(h),
        }
    }

    /// E[sqrt(g(h; I_r, I_c))] over uniform (m_r, m_c) index sets.
    pub fn expected_sqrt_g(&self, h: f64, m_r: usize, m_c: usize) -> f64 {
        match self {
            GEval::Fitted { a1, b1 } => (0.5 * (a1 * h + b1)).exp(),
            GEval::Table(points) => interp_table(points, h).sqrt(),
            GEval::Empirical(e) => e.expected_sqrt_g(h, m_r, m_c),
        }
    }
}

fn interp_table(points: &[(f64, f64)], h: f64) -> f64 {
    if h <= points[0].0 {
        return points[0].1;
    }
    if h >= points[points.len() - 1].0 {
        return points[points.len() - 1].1;
    }
    let i = points.partition_point(|&(x, _)| x <= h);
    let (x0, y0) = points[i - 1];
    let (x1, y1) = points[i];
    y0 + (y1 - y0) * (h - x0) / (x1 - x0)
}

/// Sorted submatrix values for one index-set draw: g(h; I) becomes a binary
/// search for `max - h`.
struct SortedDraw {
    values: Vec<f64>,
    max: f64,
}

impl SortedDraw {
    fn of(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite entries"));
        let max = *values.last().expect("nonempty submatrix");
        Self { values, max }
    }

    fn g(&self, h: f64) -> f64 {
        let cutoff = self.max - h;
        (self.values.len() - self.values.partition_point(|&v| v < cutoff)) as f64
    }
}

/// Matrix-backed g with per-size Monte-Carlo draw caches. The cache makes
/// this type single-threaded; tuning scans are cheap enough sequentially.
pub struct EmpiricalG {
    matrix: RewardMatrix,
    mc_draws: usize,
    seed: u64,
    full: SortedDraw,
    cache: RefCell<HashMap<(usize, usize), Vec<SortedDraw>>>,
}

impl EmpiricalG {
    pub fn new(matrix: RewardMatrix, mc_draws: usize, seed: u64) -> Self {
        assert!(mc_draws >= 1);
        let full = SortedDraw::of(matrix.as_matrix().iter().copied().collect());
        Self { matrix, mc_draws, seed, full, cache: RefCell::new(HashMap::new()) }
    }

    fn g_full(&self, h: f64) -> f64 {
        self.full.g(h)
    }

    fn expected_sqrt_g(&self, h: f64, m_r: usize, m_c: usize) -> f64 {
        let (d_r, d_c) = (self.matrix.rows(), self.matrix.cols());
        if (m_r, m_c) == (d_r, d_c) {
            return self.full.g(h).sqrt();
        }
        let mut cache = self.cache.borrow_mut();
        let draws = cache.entry((m_r, m_c)).or_insert_with(|| {
            let mut rng = stream_from(derive_seed(self.seed, &[m_r as u64, m_c as u64]));
            (0..self.mc_draws)
                .map(|_| {
                    let rows = sample_without_replacement(&mut rng, d_r, m_r);
                    let cols = sample_without_replacement(&mut rng, d_c, m_c);
                    let mut vals = Vec::with_capacity(m_r * m_c);
                    for &r in &rows {
                        for &c in &cols {
                            vals.push(self.matrix.as_matrix()[(r, c)]);
                        }
                    }
                    SortedDraw::of(vals)
                })
                .collect()
        });
        draws.iter().map(|d| d.g(h).sqrt()).sum::<f64>() / draws.len() as f64
    }
}

/// Subsampling-cost model used by the bound curves; always exactly zero at
/// full size.
pub enum PsiEval {
    /// psi(eta) = max(0, a2 ln(eta) + b2) with eta^2 = (m_r m_c)/(d_r d_c).
    Fitted { a2: f64, b2: f64 },
    /// Closed form for i.i.d. entries from a common distribution.
    ClosedForm { dist: EntryDist },
    /// Fixed value at every proper submatrix (testing).
    Constant { value: f64 },
    /// Backed by a concrete matrix via Monte-Carlo subsampling cost.
    Empirical { matrix: RewardMatrix, mc_draws: usize, seed: u64 },
}

impl PsiEval {
    pub fn eval(&self, m_r: usize, m_c: usize, d_r: usize, d_c: usize) -> f64 {
        if (m_r, m_c) == (d_r, d_c) {
            return 0.0;
        }
        let eta = ((m_r * m_c) as f64 / (d_r * d_c) as f64).sqrt();
        match self {
            PsiEval::Fitted { a2, b2 } => (a2 * eta.ln() + b2).max(0.0),
            PsiEval::ClosedForm { dist } => {
                psi_closed_form(*dist, d_r, d_c, eta).unwrap_or(f64::INFINITY)
            }
            PsiEval::Constant { value } => *value,
            PsiEval::Empirical { matrix, mc_draws, seed } => {
                let mode = PsiMode::MonteCarlo {
                    n_samples: *mc_draws,
                    seed: derive_seed(*seed, &[m_r as u64, m_c as u64]),
                };
                subsampling_cost(matrix, m_r, m_c, mode).map(|e| e.value).unwrap_or(f64::INFINITY)
            }
        }
    }
}

/// Bound on the pure-exploration regret part:
/// omega1 (1 + gamma(h)^-2) rank (m_r + m_c) ln t. Strictly decreasing in h.
pub fn phi1(h: f64, t: u64, model: &CostModel) -> f64 {
    assert!(h > 0.0 && t >= 2);
    let gamma = model.gamma(h);
    model.omega1
        * (1.0 + 1.0 / (gamma * gamma))
        * model.rank as f64
        * (model.dims.0 + model.dims.1) as f64
        * (t as f64).ln()
}

/// Bound on the targeted-phase regret part:
/// omega2 sqrt(2 t ln t) E[sqrt(g(h))]. Nondecreasing in h.
pub fn phi2(h: f64, t: u64, model: &CostModel, g: &GEval) -> f64 {
    assert!(h > 0.0 && t >= 2);
    model.omega2
        * (2.0 * t as f64 * (t as f64).ln()).sqrt()
        * g.expected_sqrt_g(h, model.dims.0, model.dims.1)
}

/// Gap-dependent regret bound, reporting only (never a tuning objective):
/// phi1 + 8 g(h) ln T / gap + (1 + pi^2/3) h g(h) + 100 b*.
pub fn gap_dependent_bound(h: f64, t: u64, model: &CostModel, g: &GEval, gap: f64) -> f64 {
    assert!(gap > 0.0, "gap must be positive");
    let g_h = g.g_full(h);
    phi1(h, t, model)
        + 8.0 * g_h * (t as f64).ln() / gap
        + (1.0 + std::f64::consts::PI.powi(2) / 3.0) * h * g_h
        + 100.0 * model.b_star
}

/// Smallest admissible filtering resolution:
/// max(64 mu* sqrt(2 c1 rank / (T m_r)), 2 c2 / T).
pub fn h_lower_bound(t_horizon: u64, model: &CostModel) -> f64 {
    let (c1, c2) = model.lowh_constants;
    let first = 64.0
        * model.mu_star
        * (2.0 * c1 * model.rank as f64 / (t_horizon as f64 * model.dims.0 as f64)).sqrt();
    first.max(2.0 * c2 / t_horizon as f64)
}

/// Which regime the filtering-resolution selection landed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HCase {
    /// phi1 < phi2 over the whole range: finest resolution h = lowh(T).
    LowH,
    /// Curves cross: h is the root of phi1 = phi2.
    Crossing,
    /// phi1 > phi2 over the whole range: h = 2 b* and forced sampling is
    /// disabled (the policy degenerates to UCB on the full arm set).
    TwoBStar,
    /// lowh(T) already exceeds 2 b*: no admissible range.
    Degenerate,
}

impl std::fmt::Display for HCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HCase::LowH => write!(f, "lowh"),
            HCase::Crossing => write!(f, "crossing"),
            HCase::TwoBStar => write!(f, "2bstar"),
            HCase::Degenerate => write!(f, "degenerate"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HSelection {
    pub h: f64,
    pub case: HCase,
    /// True in the regime where forced sampling is pointless (rho = 0).
    pub forced_disabled: bool,
}

/// Picks the filtering resolution for horizon `t_horizon`; optimal up to a
/// factor of 2 by the endpoint monotonicity of phi1 and phi2.
pub fn select_h(model: &CostModel, t_horizon: u64, g: &GEval) -> HSelection {
    let lo = h_lower_bound(t_horizon, model);
    let hi = 2.0 * model.b_star;
    if lo >= hi {
        return HSelection { h: hi, case: HCase::Degenerate, forced_disabled: true };
    }
    let diff = |h: f64| phi1(h, t_horizon, model) - phi2(h, t_horizon, model, g);
    if diff(lo) < 0.0 {
        return HSelection { h: lo, case: HCase::LowH, forced_disabled: false };
    }
    if diff(hi) > 0.0 {
        return HSelection { h: hi, case: HCase::TwoBStar, forced_disabled: true };
    }
    // bisection to relative width 1e-6; diff decreases in h
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo) <= 1e-6 * mid {
            break;
        }
        if diff(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    HSelection { h: 0.5 * (lo + hi), case: HCase::Crossing, forced_disabled: false }
}

/// Regret-bound value of running on a `size = (m_r, m_c)` subgrid of a
/// `full = (d_r, d_c)` matrix with the h picked by [`select_h`]:
/// psi T + phi1 + phi2.
pub fn submatrix_bound(
    model: &CostModel,
    size: (usize, usize),
    full: (usize, usize),
    psi: &PsiEval,
    t_horizon: u64,
    g: &GEval,
) -> (HSelection, f64) {
    let local = model.with_dims(size);
    let sel = select_h(&local, t_horizon, g);
    let bound = psi.eval(size.0, size.1, full.0, full.1) * t_horizon as f64
        + phi1(sel.h, t_horizon, &local)
        + phi2(sel.h, t_horizon, &local, g);
    (sel, bound)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubmatrixChoice {
    pub m_r: usize,
    pub m_c: usize,
    pub h: f64,
    pub case: HCase,
    pub bound: f64,
}

/// Square-fraction default grid: eta in {0.1, ..., 1.0}.
pub fn default_size_grid(d_r: usize, d_c: usize) -> Vec<(usize, usize)> {
    let mut grid: Vec<(usize, usize)> = (1..=10)
        .map(|i| {
            let eta = i as f64 / 10.0;
            (
                ((eta * d_r as f64).round() as usize).clamp(1, d_r),
                ((eta * d_c as f64).round() as usize).clamp(1, d_c),
            )
        })
        .collect();
    grid.dedup();
    grid
}

/// Exhaustive scan of the candidate grid; ties (to within 1e-9 relative)
/// break toward the larger m_r + m_c.
pub fn select_submatrix(
    model: &CostModel,
    d_r: usize,
    d_c: usize,
    grid: &[(usize, usize)],
    psi: &PsiEval,
    t_horizon: u64,
    g: &GEval,
) -> Result<SubmatrixChoice, TuningError> {
    if grid.is_empty() {
        return Err(TuningError::EmptyGrid);
    }
    let mut best: Option<SubmatrixChoice> = None;
    for &(m_r, m_c) in grid {
        let (sel, bound) = submatrix_bound(model, (m_r, m_c), (d_r, d_c), psi, t_horizon, g);
        let candidate = SubmatrixChoice { m_r, m_c, h: sel.h, case: sel.case, bound };
        best = Some(match best {
            None => candidate,
            Some(cur) => {
                let tie = (bound - cur.bound).abs() <= 1e-9 * cur.bound.abs().max(1.0);
                if (tie && m_r + m_c > cur.m_r + cur.m_c) || (!tie && bound < cur.bound) {
                    candidate
                } else {
                    cur
                }
            }
        });
    }
    Ok(best.expect("grid nonempty"))
}

/// Geometric horizon grid for the switching-threshold scan.
pub fn geometric_grid(t_min: u64, t_max: u64, ratio: f64) -> Vec<u64> {
    assert!(t_min >= 2 && t_max >= t_min && ratio > 1.0);
    let mut grid = Vec::new();
    let mut t = t_min as f64;
    while (t as u64) < t_max {
        grid.push(t as u64);
        t *= ratio;
    }
    grid.push(t_max);
    grid.dedup();
    grid
}

/// Smallest grid horizon from which the full matrix is chosen at every later
/// grid point; `None` when subsampling stays preferable through the grid.
pub fn estimate_t_ss(
    model: &CostModel,
    d_r: usize,
    d_c: usize,
    size_grid: &[(usize, usize)],
    psi: &PsiEval,
    g: &GEval,
    t_grid: &[u64],
) -> Result<Option<u64>, TuningError> {
    let mut chooses_full = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let choice = select_submatrix(model, d_r, d_c, size_grid, psi, t, g)?;
        chooses_full.push((choice.m_r, choice.m_c) == (d_r, d_c));
    }
    let mut threshold = None;
    for i in (0..t_grid.len()).rev() {
        if chooses_full[i] {
            threshold = Some(t_grid[i]);
        } else {
            break;
        }
    }
    Ok(threshold)
}

/// Log-linear fit of g and log fit of psi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitCoefficients {
    pub a1: f64,
    pub b1: f64,
    pub r_squared_g: f64,
    pub a2: f64,
    pub b2: f64,
    pub r_squared_psi: f64,
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let syy: f64 = ys.iter().map(|y| (y - mean_y) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let fit = intercept + slope * x;
            (y - fit) * (y - fit)
        })
        .sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    (slope, intercept, r2)
}

/// OLS of ln(g) on h giving (a1, b1), and of psi on ln(eta) giving (a2, b2).
pub fn fit_g_and_psi(
    g_samples: &[(f64, f64)],
    psi_samples: &[(f64, f64)],
) -> Result<FitCoefficients, TuningError> {
    if g_samples.len() < 3 {
        return Err(TuningError::TooFewPoints { needed: 3, got: g_samples.len() });
    }
    if psi_samples.len() < 3 {
        return Err(TuningError::TooFewPoints { needed: 3, got: psi_samples.len() });
    }
    for &(_, g) in g_samples {
        if g <= 0.0 {
            return Err(TuningError::NonPositiveG(g));
        }
    }
    let hs: Vec<f64> = g_samples.iter().map(|&(h, _)| h).collect();
    let log_gs: Vec<f64> = g_samples.iter().map(|&(_, g)| g.ln()).collect();
    let (a1, b1, r2_g) = ols(&hs, &log_gs);

    let log_etas: Vec<f64> = psi_samples.iter().map(|&(eta, _)| eta.ln()).collect();
    let psis: Vec<f64> = psi_samples.iter().map(|&(_, p)| p).collect();
    let (a2, b2, r2_psi) = ols(&log_etas, &psis);
    Ok(FitCoefficients { a1, b1, r_squared_g: r2_g, a2, b2, r_squared_psi: r2_psi })
}

/// Monte-Carlo sample points of a fitted quantity: (abscissa, estimate).
pub type FitSamples = Vec<(f64, f64)>;

/// Monte-Carlo estimates of g(h) and psi(eta) over a generator family,
/// ready for [`fit_g_and_psi`].
pub fn sample_g_and_psi(
    generate: impl Fn(u64) -> RewardMatrix,
    h_grid: &[f64],
    eta_grid: &[f64],
    runs_g: usize,
    runs_psi: usize,
    seed: u64,
) -> (FitSamples, FitSamples) {
    let mut g_samples = Vec::with_capacity(h_grid.len());
    for (i, &h) in h_grid.iter().enumerate() {
        let mut acc = 0.0;
        for run in 0..runs_g {
            let b = generate(derive_seed(seed, &[1, i as u64, run as u64]));
            let idx = SubmatrixIndex::full(b.rows(), b.cols());
            acc += near_optimal_count(&b, h, &idx) as f64;
        }
        g_samples.push((h, acc / runs_g as f64));
    }
    let mut psi_samples = Vec::with_capacity(eta_grid.len());
    for (i, &eta) in eta_grid.iter().enumerate() {
        let mut acc = 0.0;
        let mut draws = 0usize;
        for run in 0..runs_psi {
            let b = generate(derive_seed(seed, &[2, i as u64, run as u64]));
            let m_r = ((eta * b.rows() as f64).round() as usize).clamp(1, b.rows());
            let m_c = ((eta * b.cols() as f64).round() as usize).clamp(1, b.cols());
            let mode = PsiMode::MonteCarlo {
                n_samples: 8,
                seed: derive_seed(seed, &[3, i as u64, run as u64]),
            };
            if let Ok(est) = subsampling_cost(&b, m_r, m_c, mode) {
                acc += est.value;
                draws += 1;
            }
        }
        psi_samples.push((eta, acc / draws.max(1) as f64));
    }
    (g_samples, psi_samples)
}
