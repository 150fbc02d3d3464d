//! Pairwise comparison matrices and the eigenvector method.
//!
//! Every judgment or weight level of the hierarchy is expressed as a positive
//! reciprocal matrix. Priorities are the normalized principal eigenvector,
//! obtained by power iteration from the uniform vector, and each matrix is
//! checked with the consistency index / consistency ratio pair.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported matrix dimension (the random-index table stops here).
pub const MAX_DIM: usize = 10;

/// Relative tolerance for `a_ji * a_ij == 1`.
pub const RECIPROCITY_TOL: f64 = 1e-12;

/// Consistency ratio threshold for accepting a judgment matrix.
pub const CR_THRESHOLD: f64 = 0.1;

/// Default floor applied to scheme-layer scores before taking ratios.
pub const DEFAULT_SCORE_FLOOR: f64 = 1e-9;

/// Saaty random consistency indices, indexed by `n - 1`.
const RANDOM_INDEX: [f64; MAX_DIM] = [0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AhpError {
    #[error("matrix dimension {got} outside supported range {min}..={max}")]
    DimensionOutOfRange { got: usize, min: usize, max: usize },
    #[error("weight at position {index} is not strictly positive ({value})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("score at position {index} is negative or not finite ({value})")]
    InvalidScore { index: usize, value: f64 },
    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("diagonal entry ({index},{index}) is {value}, expected 1")]
    DiagonalNotOne { index: usize, value: f64 },
    #[error("entry ({row},{col}) = {value} is not on the 1-9 judgment scale")]
    NotSaatyValue { row: usize, col: usize, value: f64 },
    #[error("entries ({row},{col}) = {upper} and ({col},{row}) = {lower} are not reciprocal")]
    NotReciprocal { row: usize, col: usize, upper: f64, lower: f64 },
    #[error("length mismatch: {weights} weights vs {values} values")]
    LengthMismatch { weights: usize, values: usize },
    #[error("power iteration did not converge after {} iterations", best.iterations)]
    NotConverged { best: EigenResult },
}

/// How a matrix came to be.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixOrigin {
    UserJudgment,
    FromWeights,
    FromScores,
}

/// A square positive reciprocal matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseMatrix {
    n: usize,
    entries: Vec<f64>,
    origin: MatrixOrigin,
}

impl PairwiseMatrix {
    /// `a_ij = w_i / w_j`. Perfectly consistent by construction.
    pub fn from_weights(weights: &[f64]) -> Result<Self, AhpError> {
        check_dim(weights.len(), 2)?;
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(AhpError::NonPositiveWeight { index, value });
            }
        }
        Ok(Self::ratio_matrix(weights, MatrixOrigin::FromWeights))
    }

    /// Scheme-layer matrix from indicator scores: scores are floored at
    /// `epsilon`, then `a_ij = s_i / s_j`. Entries are not clamped to the
    /// judgment scale, so the matrix stays consistent.
    ///
    /// A single alternative is allowed; it yields the 1×1 matrix `[1]`.
    pub fn from_scores(scores: &[f64], epsilon: f64) -> Result<Self, AhpError> {
        check_dim(scores.len(), 1)?;
        let mut floored = Vec::with_capacity(scores.len());
        for (index, &value) in scores.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(AhpError::InvalidScore { index, value });
            }
            floored.push(value.max(epsilon));
        }
        Ok(Self::ratio_matrix(&floored, MatrixOrigin::FromScores))
    }

    /// Human judgments on the 1-9 scale. Entries within 1e-9 (relative) of a
    /// scale value are snapped onto it, so `0.3333333333` reads as `1/3`.
    pub fn from_judgments(rows: &[Vec<f64>]) -> Result<Self, AhpError> {
        let n = rows.len();
        check_dim(n, 2)?;
        let mut entries = Vec::with_capacity(n * n);
        for (row, values) in rows.iter().enumerate() {
            if values.len() != n {
                return Err(AhpError::NotSquare { row, len: values.len(), expected: n });
            }
            for (col, &value) in values.iter().enumerate() {
                let snapped = snap_to_scale(value).ok_or(AhpError::NotSaatyValue { row, col, value })?;
                entries.push(snapped);
            }
        }
        let m = Self { n, entries, origin: MatrixOrigin::UserJudgment };
        m.check_reciprocal()?;
        Ok(m)
    }

    fn ratio_matrix(values: &[f64], origin: MatrixOrigin) -> Self {
        let n = values.len();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(if i == j { 1.0 } else { values[i] / values[j] });
            }
        }
        Self { n, entries, origin }
    }

    fn check_reciprocal(&self) -> Result<(), AhpError> {
        for i in 0..self.n {
            let d = self.get(i, i);
            if d != 1.0 {
                return Err(AhpError::DiagonalNotOne { index: i, value: d });
            }
            for j in (i + 1)..self.n {
                let (upper, lower) = (self.get(i, j), self.get(j, i));
                if (upper * lower - 1.0).abs() > RECIPROCITY_TOL {
                    return Err(AhpError::NotReciprocal { row: i, col: j, upper, lower });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn origin(&self) -> MatrixOrigin {
        self.origin
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    /// `M · v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.entries.chunks(self.n).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// The matrix with rows and columns reordered so that new index `k`
    /// holds old index `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n, "permutation length");
        let mut entries = Vec::with_capacity(self.entries.len());
        for &pi in perm {
            for &pj in perm {
                entries.push(self.get(pi, pj));
            }
        }
        Self { n: self.n, entries, origin: self.origin }
    }
}

fn check_dim(n: usize, min: usize) -> Result<(), AhpError> {
    if n < min || n > MAX_DIM {
        return Err(AhpError::DimensionOutOfRange { got: n, min, max: MAX_DIM });
    }
    Ok(())
}

/// Maps a value onto `{1..9} ∪ {1/9..1/2}` if it is within 1e-9 (relative)
/// of one of them.
pub fn snap_to_scale(value: f64) -> Option<f64> {
    if !(value > 0.0 && value.is_finite()) {
        return None;
    }
    let (magnitude, invert) = if value >= 1.0 { (value, false) } else { (1.0 / value, true) };
    let k = magnitude.round();
    if !(1.0..=9.0).contains(&k) || ((magnitude - k) / k).abs() > 1e-9 {
        return None;
    }
    Some(if invert { 1.0 / k } else { k })
}

/// Whether `value` lies exactly on the 1-9 judgment scale.
pub fn is_saaty_value(value: f64) -> bool {
    snap_to_scale(value) == Some(value)
}

/// Power-iteration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub lambda_max: f64,
    /// Principal eigenvector normalized to unit sum.
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Principal eigenpair by power iteration from the uniform vector.
///
/// Iteration stops once successive unit-sum vectors differ by less than
/// `tol` in max-norm. `lambda_max` is the mean of `(M·w)_i / w_i`.
pub fn principal_eigen(m: &PairwiseMatrix, tol: f64, max_iter: usize) -> Result<EigenResult, AhpError> {
    let n = m.dim();
    let mut w = vec![1.0 / n as f64; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut next = m.apply(&w);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let delta = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        w = next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    let mw = m.apply(&w);
    let lambda_max = mw.iter().zip(&w).map(|(a, b)| a / b).sum::<f64>() / n as f64;
    let result = EigenResult { lambda_max, weights: w, iterations, converged };
    if converged {
        Ok(result)
    } else {
        Err(AhpError::NotConverged { best: result })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub n: usize,
    pub ci: f64,
    pub ri: f64,
    pub cr: f64,
    pub pass: bool,
}

/// Random consistency index for an `n × n` matrix.
pub fn random_index(n: usize) -> f64 {
    assert!((1..=MAX_DIM).contains(&n), "no random index for n = {n}");
    RANDOM_INDEX[n - 1]
}

/// CI = (λ_max − n)/(n − 1), CR = CI/RI. Matrices with n ≤ 2 are always
/// consistent and report zeros.
pub fn consistency(m: &PairwiseMatrix, eig: &EigenResult) -> ConsistencyReport {
    let n = m.dim();
    let ri = random_index(n);
    if n <= 2 {
        return ConsistencyReport { n, ci: 0.0, ri, cr: 0.0, pass: true };
    }
    let ci = (eig.lambda_max - n as f64) / (n as f64 - 1.0);
    let cr = ci / ri;
    ConsistencyReport { n, ci, ri, cr, pass: cr < CR_THRESHOLD }
}

/// Eigen weights plus consistency check in one call.
pub fn analyze(m: &PairwiseMatrix, settings: EigenSettings) -> Result<(EigenResult, ConsistencyReport), AhpError> {
    let eig = principal_eigen(m, settings.tol, settings.max_iter)?;
    let report = consistency(m, &eig);
    Ok((eig, report))
}

/// Per-row residual `|(M·w)_i − λ_max·w_i|`. The largest entries point at
/// the judgments that drive inconsistency.
pub fn row_residuals(m: &PairwiseMatrix, eig: &EigenResult) -> Vec<f64> {
    m.apply(&eig.weights).iter().zip(&eig.weights).map(|(mw, w)| (mw - eig.lambda_max * w).abs()).collect()
}

/// `c_i = Σ_j w_ij · x_ij`.
pub fn compose_level(indicator_weights: &[f64], indicator_scores: &[f64]) -> Result<f64, AhpError> {
    weighted_sum(indicator_weights, indicator_scores)
}

/// `score = Σ_i w_i · c_i` over the configured criteria.
pub fn final_score(criterion_weights: &[f64], criterion_scores: &[f64]) -> Result<f64, AhpError> {
    weighted_sum(criterion_weights, criterion_scores)
}

fn weighted_sum(weights: &[f64], values: &[f64]) -> Result<f64, AhpError> {
    if weights.len() != values.len() {
        return Err(AhpError::LengthMismatch { weights: weights.len(), values: values.len() });
    }
    Ok(weights.iter().zip(values).map(|(w, x)| w * x).sum())
}

/// Weights of a two-level hierarchy: criteria, then indicators per criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hierarchy {
    pub criterion_weights: Vec<f64>,
    pub indicator_weights: Vec<Vec<f64>>,
}

impl Hierarchy {
    pub fn new(criterion_weights: Vec<f64>, indicator_weights: Vec<Vec<f64>>) -> Result<Self, AhpError> {
        if criterion_weights.len() != indicator_weights.len() {
            return Err(AhpError::LengthMismatch { weights: criterion_weights.len(), values: indicator_weights.len() });
        }
        Ok(Self { criterion_weights, indicator_weights })
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.indicator_weights.iter().map(Vec::len).collect()
    }

    /// Drops absent indicators and renormalizes the surviving weights within
    /// each criterion; a criterion with nothing present loses its weight to
    /// the others. Returns `None` when nothing at all is present.
    pub fn restricted(&self, present: &[Vec<bool>]) -> Option<Self> {
        let mut indicator_weights = Vec::with_capacity(self.indicator_weights.len());
        let mut criterion_weights = Vec::with_capacity(self.criterion_weights.len());
        for ((weights, mask), &cw) in self.indicator_weights.iter().zip(present).zip(&self.criterion_weights) {
            let kept: Vec<f64> = weights.iter().zip(mask).map(|(&w, &p)| if p { w } else { 0.0 }).collect();
            let total: f64 = kept.iter().sum();
            if total > 0.0 {
                indicator_weights.push(kept.iter().map(|w| w / total).collect());
                criterion_weights.push(cw);
            } else {
                indicator_weights.push(vec![0.0; kept.len()]);
                criterion_weights.push(0.0);
            }
        }
        let total: f64 = criterion_weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        criterion_weights.iter_mut().for_each(|w| *w /= total);
        Some(Self { criterion_weights, indicator_weights })
    }

    /// Criterion scores and the final score for one alternative. Missing
    /// indicator scores contribute zero.
    pub fn score(&self, x: &[Vec<Option<f64>>]) -> Result<(Vec<f64>, f64), AhpError> {
        if x.len() != self.indicator_weights.len() {
            return Err(AhpError::LengthMismatch { weights: self.indicator_weights.len(), values: x.len() });
        }
        let mut levels = Vec::with_capacity(x.len());
        for (weights, scores) in self.indicator_weights.iter().zip(x) {
            let dense: Vec<f64> = scores.iter().map(|s| s.unwrap_or(0.0)).collect();
            levels.push(compose_level(weights, &dense)?);
        }
        let total = final_score(&self.criterion_weights, &levels)?;
        Ok((levels, total))
    }
}
