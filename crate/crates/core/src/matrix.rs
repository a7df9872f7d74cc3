//! Ground-truth reward matrices and their structural statistics.
//!
//! Houses the reward matrix type, near-optimal sets and the near-optimal
//! function `g`, the subsampling cost `psi` (exact enumeration and
//! Monte-Carlo), row incoherence, closed forms for common entry
//! distributions, and seeded low-rank generators.

use crate::rng::{sample_without_replacement, stream_from};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::{BufRead, Write};
use thiserror::Error;

/// Budget on `C(d_r, m_r) * C(d_c, m_c)` index-set pairs for exact psi
/// enumeration; above it the operation refuses rather than silently sampling.
pub const PSI_ENUMERATION_BUDGET: u128 = 1_000_000;

/// Singular values below `RANK_TOL_RATIO * sigma_1` count as zero.
pub const RANK_TOL_RATIO: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix must have at least one row and one column")]
    Empty,
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("could not parse entry at row {row}, field {col}: {source}")]
    Parse { row: usize, col: usize, source: std::num::ParseFloatError },
    #[error("rank {rank} exceeds min dimension {max_rank}")]
    RankTooLarge { rank: usize, max_rank: usize },
    #[error("singular value {index} is below tolerance; incoherence undefined")]
    RankDeficient { index: usize },
    #[error("exact enumeration needs {required} index-set pairs, budget is {budget}")]
    EnumerationTooLarge { required: u128, budget: u128 },
    #[error("closed form undefined: {0}")]
    DomainError(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One (row, column) cell of the reward matrix. 0-based internally;
/// human-facing output is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Arm {
    pub row: usize,
    pub col: usize,
}

impl Arm {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.row + 1, self.col + 1)
    }
}

/// Dense grid of ground-truth mean rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMatrix {
    entries: DMatrix<f64>,
}

/// Factor entry distribution for the low-rank generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorDist {
    Uniform01,
    StdNormal,
}

impl RewardMatrix {
    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self, MatrixError> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(MatrixError::Empty);
        }
        for row in 0..entries.nrows() {
            for col in 0..entries.ncols() {
                if !entries[(row, col)].is_finite() {
                    return Err(MatrixError::NonFinite { row, col });
                }
            }
        }
        Ok(Self { entries })
    }

    /// Builds from a row-major slice of rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(MatrixError::Empty);
        }
        let d_c = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d_c {
                return Err(MatrixError::RaggedRow { row: i, got: r.len(), expected: d_c });
            }
        }
        let entries = DMatrix::from_fn(rows.len(), d_c, |i, j| rows[i][j]);
        Self::from_matrix(entries)
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, arm: Arm) -> f64 {
        self.entries[(arm.row, arm.col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Largest l2 norm among the rows.
    pub fn max_row_l2_norm(&self) -> f64 {
        (0..self.rows())
            .map(|j| self.entries.row(j).iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest entry of the matrix.
    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Row incoherence mu(B) = sqrt(d_r / rank) * max_row_norm / D_rr.
    ///
    /// Errors with `RankDeficient` when the rank-th singular value is below
    /// tolerance, where mu is undefined.
    pub fn row_incoherence(&self, rank: usize) -> Result<f64, MatrixError> {
        let max_rank = self.rows().min(self.cols());
        if rank == 0 || rank > max_rank {
            return Err(MatrixError::RankTooLarge { rank, max_rank });
        }
        let svd = SvdFactors::compute(self);
        let d_rr = svd.singular_values[rank - 1];
        if d_rr <= 1e-10 {
            return Err(MatrixError::RankDeficient { index: rank });
        }
        let d_r = self.rows() as f64;
        Ok((d_r / rank as f64).sqrt() * self.max_row_l2_norm() / d_rr)
    }

    /// Loads a headerless CSV of decimal entries; rejects ragged rows.
    pub fn load_csv<R: BufRead>(reader: R) -> Result<Self, MatrixError> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut row = Vec::new();
            for (j, field) in line.split(',').enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|source| MatrixError::Parse { row: i, col: j, source })?;
                row.push(v);
            }
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(MatrixError::RaggedRow { row: i, got: row.len(), expected: first.len() });
                }
            }
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for j in 0..self.rows() {
            let fields: Vec<String> = (0..self.cols()).map(|k| format!("{}", self.entries[(j, k)])).collect();
            writeln!(writer, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Generates B = U V^T with factor entries drawn i.i.d. from `dist`;
/// deterministic given the seed.
pub fn generate_low_rank(
    d_r: usize,
    d_c: usize,
    rank: usize,
    dist: FactorDist,
    seed: u64,
) -> Result<RewardMatrix, MatrixError> {
    let max_rank = d_r.min(d_c);
    if rank == 0 || rank > max_rank {
        return Err(MatrixError::RankTooLarge { rank, max_rank });
    }
    let mut rng = stream_from(seed);
    fn draw(dist: FactorDist, rng: &mut ChaCha8Rng) -> f64 {
        match dist {
            FactorDist::Uniform01 => rng.random_range(0.0..1.0),
            FactorDist::StdNormal => StandardNormal.sample(rng),
        }
    }
    let u = DMatrix::from_fn(d_r, rank, |_, _| draw(dist, &mut rng));
    let v = DMatrix::from_fn(d_c, rank, |_, _| draw(dist, &mut rng));
    RewardMatrix::from_matrix(&u * v.transpose())
}

/// Singular value decomposition with nonincreasing singular values.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// d_r x q, orthonormal columns.
    pub u: DMatrix<f64>,
    /// Length q, sorted nonincreasing, all >= 0.
    pub singular_values: Vec<f64>,
    /// d_c x q, orthonormal columns.
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn compute(matrix: &RewardMatrix) -> Self {
        Self::of_matrix(matrix.as_matrix())
    }

    pub fn of_matrix(m: &DMatrix<f64>) -> Self {
        let svd = crate::svd::thin_svd(m);
        Self { u: svd.u, singular_values: svd.s, v: svd.v }
    }

    /// Number of singular values above `RANK_TOL_RATIO * sigma_1`.
    pub fn numerical_rank(&self) -> usize {
        self.rank_at_ratio(RANK_TOL_RATIO)
    }

    /// Largest rank whose singular value is at least `ratio * sigma_1`; the
    /// estimate mode for callers without a ground-truth rank uses 0.05.
    pub fn rank_at_ratio(&self, ratio: f64) -> usize {
        let sigma1 = self.singular_values.first().copied().unwrap_or(0.0);
        if sigma1 <= 0.0 {
            return 0;
        }
        self.singular_values.iter().filter(|&&s| s >= ratio * sigma1).count()
    }

    /// U diag(D) V^T.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.singular_values.clone()));
        &self.u * d * self.v.transpose()
    }
}

/// Row/column index sets selecting a submatrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubmatrixIndex {
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl SubmatrixIndex {
    /// Sorted, deduplicated, range-checked index sets.
    pub fn new(mut rows: Vec<usize>, mut cols: Vec<usize>, d_r: usize, d_c: usize) -> Result<Self, MatrixError> {
        rows.sort_unstable();
        cols.sort_unstable();
        rows.dedup();
        cols.dedup();
        if rows.is_empty() || cols.is_empty() {
            return Err(MatrixError::IndexOutOfRange("index sets must be nonempty".into()));
        }
        if rows.last().is_some_and(|&r| r >= d_r) {
            return Err(MatrixError::IndexOutOfRange(format!("row index >= {d_r}")));
        }
        if cols.last().is_some_and(|&c| c >= d_c) {
            return Err(MatrixError::IndexOutOfRange(format!("col index >= {d_c}")));
        }
        Ok(Self { rows, cols })
    }

    pub fn full(d_r: usize, d_c: usize) -> Self {
        Self { rows: (0..d_r).collect(), cols: (0..d_c).collect() }
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn m_r(&self) -> usize {
        self.rows.len()
    }

    pub fn m_c(&self) -> usize {
        self.cols.len()
    }

    pub fn arms(&self) -> impl Iterator<Item = Arm> + '_ {
        self.rows.iter().flat_map(move |&j| self.cols.iter().map(move |&k| Arm::new(j, k)))
    }
}

fn max_over(matrix: &RewardMatrix, idx: &SubmatrixIndex) -> f64 {
    idx.arms().map(|a| matrix.get(a)).fold(f64::NEG_INFINITY, f64::max)
}

/// Arms within `h` of the best arm in the submatrix. Boundary ties at
/// exactly `max - h` are included.
pub fn near_optimal_set(matrix: &RewardMatrix, h: f64, idx: &SubmatrixIndex) -> Vec<Arm> {
    assert!(h >= 0.0, "resolution h must be nonnegative");
    let cutoff = max_over(matrix, idx) - h;
    idx.arms().filter(|&a| matrix.get(a) >= cutoff).collect()
}

/// The complementary sub-optimal set: arms strictly more than `h` below the
/// submatrix maximum.
pub fn sub_optimal_set(matrix: &RewardMatrix, h: f64, idx: &SubmatrixIndex) -> Vec<Arm> {
    assert!(h >= 0.0, "resolution h must be nonnegative");
    let cutoff = max_over(matrix, idx) - h;
    idx.arms().filter(|&a| matrix.get(a) < cutoff).collect()
}

/// Near-optimal function g(h) = |near_optimal_set|.
pub fn near_optimal_count(matrix: &RewardMatrix, h: f64, idx: &SubmatrixIndex) -> usize {
    let cutoff = max_over(matrix, idx) - h;
    idx.arms().filter(|&a| matrix.get(a) >= cutoff).count()
}

/// Closed-form `E[g(h)] = 1 + h d_r d_c - h^(d_r d_c)` for i.i.d. entries
/// uniform on the unit interval.
pub fn expected_g_uniform(h: f64, d_r: usize, d_c: usize) -> Result<f64, MatrixError> {
    if !(0.0..=1.0).contains(&h) {
        return Err(MatrixError::DomainError(format!("h = {h} outside [0, 1]")));
    }
    let n = (d_r * d_c) as f64;
    Ok(1.0 + h * n - h.powf(n))
}

/// How the subsampling cost is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum PsiMode {
    /// Enumerate every (row-set, column-set) pair; refuses above
    /// [`PSI_ENUMERATION_BUDGET`].
    Exact,
    /// Average over uniformly drawn index-set pairs, reporting a standard
    /// error alongside the estimate.
    MonteCarlo { n_samples: usize, seed: u64 },
}

/// Subsampling cost estimate; `std_error` is `None` in exact mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiEstimate {
    pub value: f64,
    pub std_error: Option<f64>,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        f(&combo);
        // advance to the next k-combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if combo[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        combo[i] += 1;
        for j in i + 1..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

/// Subsampling cost psi(m_r, m_c) = max(B) - E[max over a random m_r x m_c
/// submatrix], rows and columns drawn uniformly without replacement,
/// independently.
pub fn subsampling_cost(
    matrix: &RewardMatrix,
    m_r: usize,
    m_c: usize,
    mode: PsiMode,
) -> Result<PsiEstimate, MatrixError> {
    let (d_r, d_c) = (matrix.rows(), matrix.cols());
    if m_r == 0 || m_r > d_r || m_c == 0 || m_c > d_c {
        return Err(MatrixError::IndexOutOfRange(format!(
            "submatrix size ({m_r}, {m_c}) outside 1..=({d_r}, {d_c})"
        )));
    }
    let global_max = matrix.max_entry();
    match mode {
        PsiMode::Exact => {
            let required = binomial(d_r, m_r).saturating_mul(binomial(d_c, m_c));
            if required > PSI_ENUMERATION_BUDGET {
                return Err(MatrixError::EnumerationTooLarge { required, budget: PSI_ENUMERATION_BUDGET });
            }
            // max over column subset, cached per row subset via row-wise maxima
            let mut total = 0.0;
            let mut count = 0u64;
            for_each_combination(d_r, m_r, |rows| {
                for_each_combination(d_c, m_c, |cols| {
                    let mut best = f64::NEG_INFINITY;
                    for &j in rows {
                        for &k in cols {
                            best = best.max(matrix.get(Arm::new(j, k)));
                        }
                    }
                    total += best;
                    count += 1;
                });
            });
            Ok(PsiEstimate { value: global_max - total / count as f64, std_error: None })
        }
        PsiMode::MonteCarlo { n_samples, seed } => {
            assert!(n_samples >= 2, "need at least 2 samples for a standard error");
            let mut rng = stream_from(seed);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n_samples {
                let rows = sample_without_replacement(&mut rng, d_r, m_r);
                let cols = sample_without_replacement(&mut rng, d_c, m_c);
                let mut best = f64::NEG_INFINITY;
                for &j in &rows {
                    for &k in &cols {
                        best = best.max(matrix.get(Arm::new(j, k)));
                    }
                }
                sum += best;
                sum_sq += best * best;
            }
            let n = n_samples as f64;
            let mean = sum / n;
            let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            Ok(PsiEstimate { value: global_max - mean, std_error: Some((var / n).sqrt()) })
        }
    }
}

/// Entry distributions with closed-form subsampling cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryDist {
    Uniform,
    Gaussian,
    Exponential,
}

/// Closed-form psi for eta-proportion subsampling of a d_r x d_c matrix with
/// i.i.d. entries from `dist`.
pub fn psi_closed_form(dist: EntryDist, d_r: usize, d_c: usize, eta: f64) -> Result<f64, MatrixError> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(MatrixError::DomainError(format!("eta = {eta} outside (0, 1]")));
    }
    let n = (d_r * d_c) as f64;
    match dist {
        EntryDist::Uniform => Ok(n / (1.0 + n) - eta * eta * n / (1.0 + eta * eta * n)),
        EntryDist::Gaussian => {
            let arg = eta * eta * n;
            if arg <= 1.0 {
                return Err(MatrixError::DomainError(format!(
                    "gaussian form needs eta^2 d_r d_c > 1, got {arg}"
                )));
            }
            Ok(n.ln().sqrt() - arg.ln().sqrt())
        }
        EntryDist::Exponential => Ok(-2.0 * eta.ln()),
    }
}
