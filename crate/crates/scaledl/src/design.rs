//! D-optimal benchmark subset selection via Fedorov exchange.
//!
//! Given m candidate configurations featurized as rows `a_i`, pick k of them
//! maximizing `det(M)` with `M = sum_{selected} a_i a_i^T`, so the selected
//! benchmarks pin down regression coefficients with minimal variance. The
//! exchange heuristic repeatedly swaps one selected row against one
//! unselected row, taking the swap with the largest determinant gain
//!
//! ```text
//! delta = d(j) - d(i) - [d(i) d(j) - d(i,j)^2],   d(x) = a_x^T M^-1 a_x
//! ```
//!
//! which satisfies `det(M') = det(M) * (1 + delta)`.
//!
//! [`fedorov_exchange`] works on the rows exactly as given. Real
//! configuration features mix units, so callers selecting from raw
//! hyperparameter grids should use [`fedorov_exchange_standardized`], which
//! first centers and scales each column and drops constant ones. When the
//! downstream regressor is a tree ensemble, featurize through
//! [`indicator_rows`] first.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("candidate row {row} has {got} values, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("candidate row {row} contains a non-finite value")]
    NonFinite { row: usize },
    #[error("budget must be >= 1")]
    BudgetZero,
    #[error("budget {budget} exceeds candidate count {candidates}")]
    BudgetExceedsCandidates { budget: usize, candidates: usize },
    #[error("ridge must be >= 0 and finite, got {0}")]
    BadRidge(f64),
    #[error("restarts must be >= 1")]
    NoRestarts,
    #[error("matrix is not symmetric within 1e-12")]
    NotSymmetric,
    #[error("information matrix is singular at zero ridge")]
    Singular,
    #[error("every feature column is constant; the design is degenerate")]
    DegenerateDesign,
    #[error("lambda has {got} entries, expected {expected}")]
    LambdaLength { got: usize, expected: usize },
    #[error("dimension mismatch: matrix is {matrix}x{matrix}, vector has {vector}")]
    DimensionMismatch { matrix: usize, vector: usize },
    #[error("initial selection must hold {budget} distinct indices below {candidates}")]
    BadInitialSelection { budget: usize, candidates: usize },
    #[error("C({m},{k}) exceeds the exhaustive enumeration bound of 1e6")]
    TooManyCombinations { m: usize, k: usize },
    #[error("incremental determinant drifted from the factorization by {rel:.3e} (relative)")]
    DeterminantDrift { rel: f64 },
    #[error("bin count must be >= 2, got {0}")]
    BadBinCount(usize),
    #[error("interaction pair ({0}, {1}) names a column outside the descriptor row")]
    BadInteractionPair(usize, usize),
    #[error("malformed candidate file: {0}")]
    Csv(#[from] csv::Error),
    #[error("candidate file row {row}, column {col:?}: {value:?} is not a number")]
    BadNumber { row: usize, col: String, value: String },
}

/// Candidate rows, budget, and an optional explicit ridge. `ridge = 0`
/// selects the automatic policy: stay unridged unless the information matrix
/// is singular, then fall back to `1e-3 * mean squared row norm / d` and
/// report it in [`DesignSelection::ridge_used`].
#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    pub candidates: Vec<Vec<f64>>,
    pub budget: usize,
    pub ridge: f64,
}

impl DesignProblem {
    pub fn new(candidates: Vec<Vec<f64>>, budget: usize) -> DesignProblem {
        DesignProblem { candidates, budget, ridge: 0.0 }
    }

    fn validate(&self) -> Result<(), DesignError> {
        if self.candidates.is_empty() {
            return Err(DesignError::EmptyCandidates);
        }
        let d = self.candidates[0].len();
        for (row, a) in self.candidates.iter().enumerate() {
            if a.len() != d {
                return Err(DesignError::RaggedRow { row, got: a.len(), expected: d });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(DesignError::NonFinite { row });
            }
        }
        if self.budget < 1 {
            return Err(DesignError::BudgetZero);
        }
        if self.budget > self.candidates.len() {
            return Err(DesignError::BudgetExceedsCandidates {
                budget: self.budget,
                candidates: self.candidates.len(),
            });
        }
        if !self.ridge.is_finite() || self.ridge < 0.0 {
            return Err(DesignError::BadRidge(self.ridge));
        }
        Ok(())
    }
}

/// Mean and scale of one retained column after standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub index: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSelection {
    /// 0/1 indicator per candidate; exactly `budget` ones.
    pub lambda: Vec<u8>,
    /// Selected candidate indices, ascending.
    pub selected: Vec<usize>,
    /// log det of the (possibly ridged) information matrix of the selection.
    pub log_det: f64,
    /// Ridge actually applied; 0 when the unridged matrix was usable.
    pub ridge_used: f64,
    /// Exchange swaps performed by the winning restart.
    pub iterations: usize,
    /// log_det after the initial selection and after every accepted swap.
    pub log_det_trace: Vec<f64>,
    /// Standardization map (empty when the rows were used as given).
    pub columns: Vec<ColumnStats>,
}

/// `M = sum_i lambda_i a_i a_i^T` over the rows exactly as given.
pub fn information_matrix(candidates: &[Vec<f64>], lambda: &[bool]) -> Result<DMatrix<f64>, DesignError> {
    if candidates.is_empty() {
        return Err(DesignError::EmptyCandidates);
    }
    if lambda.len() != candidates.len() {
        return Err(DesignError::LambdaLength { got: lambda.len(), expected: candidates.len() });
    }
    let d = candidates[0].len();
    let mut m = DMatrix::zeros(d, d);
    for (row, (a, &sel)) in candidates.iter().zip(lambda).enumerate() {
        if a.len() != d {
            return Err(DesignError::RaggedRow { row, got: a.len(), expected: d });
        }
        if sel {
            let v = DVector::from_column_slice(a);
            m.ger(1.0, &v, &v, 1.0);
        }
    }
    Ok(m)
}

/// `log det(M + ridge I)` via Cholesky factorization.
pub fn log_det(m: &DMatrix<f64>, ridge: f64) -> Result<f64, DesignError> {
    if m.nrows() != m.ncols() {
        return Err(DesignError::NotSymmetric);
    }
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let scale = m[(i, j)].abs().max(m[(j, i)].abs()).max(1.0);
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(DesignError::NotSymmetric);
            }
        }
    }
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(DesignError::BadRidge(ridge));
    }
    let mut work = m.clone();
    for i in 0..work.nrows() {
        work[(i, i)] += ridge;
    }
    let chol = Cholesky::new(work).ok_or(DesignError::Singular)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Quadratic form `a^T M_inv a` (the leverage of `a` under the design).
pub fn leverage(m_inv: &DMatrix<f64>, a: &DVector<f64>) -> Result<f64, DesignError> {
    if m_inv.nrows() != m_inv.ncols() || m_inv.ncols() != a.len() {
        return Err(DesignError::DimensionMismatch { matrix: m_inv.nrows(), vector: a.len() });
    }
    Ok(a.dot(&(m_inv * a)))
}

/// Drops constant columns and scales the rest to zero mean, unit variance.
/// Errors when every column is constant.
pub fn standardize_candidates(candidates: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<ColumnStats>), DesignError> {
    if candidates.is_empty() {
        return Err(DesignError::EmptyCandidates);
    }
    let m = candidates.len() as f64;
    let d = candidates[0].len();
    let mut columns = Vec::new();
    for c in 0..d {
        let mean = candidates.iter().map(|a| a[c]).sum::<f64>() / m;
        let var = candidates.iter().map(|a| (a[c] - mean).powi(2)).sum::<f64>() / m;
        let std = var.sqrt();
        if std > 1e-12 * mean.abs().max(1.0) {
            columns.push(ColumnStats { index: c, mean, std });
        }
    }
    if columns.is_empty() {
        return Err(DesignError::DegenerateDesign);
    }
    let rows = candidates
        .iter()
        .map(|a| columns.iter().map(|c| (a[c.index] - c.mean) / c.std).collect())
        .collect();
    Ok((rows, columns))
}

/// Expands raw descriptor rows into an intercept plus drop-first bin
/// indicators, one group per input column, plus joint indicators for the
/// requested column `pairs`. A column with at most `max_bins` distinct
/// values keeps one bin per value; denser columns are cut at evenly spaced
/// sample quantiles. Constant columns contribute nothing.
///
/// Tree ensembles are piecewise constant along each feature axis, so
/// indicators are the honest linear basis when the downstream regressor is a
/// forest: a D-optimal subset under this basis spreads the budget across
/// level combinations, where a polynomial basis would pile it onto numeric
/// extremes and starve interior levels. The pair terms put joint cells into
/// the objective; without them many selections tie on the determinant while
/// differing badly in two-way coverage.
pub fn indicator_rows(
    raw: &[Vec<f64>],
    max_bins: usize,
    pairs: &[(usize, usize)],
) -> Result<Vec<Vec<f64>>, DesignError> {
    if raw.is_empty() {
        return Err(DesignError::EmptyCandidates);
    }
    if max_bins < 2 {
        return Err(DesignError::BadBinCount(max_bins));
    }
    let d = raw[0].len();
    for (row, a) in raw.iter().enumerate() {
        if a.len() != d {
            return Err(DesignError::RaggedRow { row, got: a.len(), expected: d });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(DesignError::NonFinite { row });
        }
    }
    for &(a, b) in pairs {
        if a >= d || b >= d {
            return Err(DesignError::BadInteractionPair(a, b));
        }
    }
    // Per column, ascending cut points; bin(x) = number of cuts <= x.
    let mut column_cuts: Vec<Vec<f64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut values: Vec<f64> = raw.iter().map(|r| r[j]).collect();
        values.sort_by(f64::total_cmp);
        let cuts = {
            let mut distinct = values.clone();
            distinct.dedup();
            if distinct.len() <= max_bins {
                distinct[1..].to_vec()
            } else {
                let n = values.len();
                let mut cuts: Vec<f64> =
                    (1..max_bins).map(|b| values[n * b / max_bins]).collect();
                cuts.dedup();
                cuts
            }
        };
        column_cuts.push(cuts);
    }
    let bin_of = |cuts: &[f64], x: f64| cuts.partition_point(|c| *c <= x);
    let mut out = Vec::with_capacity(raw.len());
    for r in raw {
        let mut row = vec![1.0];
        for (j, cuts) in column_cuts.iter().enumerate() {
            let bin = bin_of(cuts, r[j]);
            for b in 1..=cuts.len() {
                row.push(if bin == b { 1.0 } else { 0.0 });
            }
        }
        for &(a, b) in pairs {
            let bin_a = bin_of(&column_cuts[a], r[a]);
            let bin_b = bin_of(&column_cuts[b], r[b]);
            for i in 1..=column_cuts[a].len() {
                for j in 1..=column_cuts[b].len() {
                    row.push(if bin_a == i && bin_b == j { 1.0 } else { 0.0 });
                }
            }
        }
        out.push(row);
    }
    Ok(out)
}

const EXCHANGE_TOLERANCE: f64 = 1e-10;
const DRIFT_CHECK_EVERY: usize = 10;
const DRIFT_TOLERANCE: f64 = 1e-8;

fn auto_ridge(rows: &[DVector<f64>]) -> f64 {
    let d = rows[0].len().max(1) as f64;
    let mean_norm_sq = rows.iter().map(|a| a.norm_squared()).sum::<f64>() / rows.len() as f64;
    // Large enough that the ridged matrix stays well-conditioned; the
    // rank-one exchange updates would otherwise drift from the true
    // determinant on rank-deficient selections.
    1e-3 * (mean_norm_sq / d).max(f64::MIN_POSITIVE)
}

struct ExchangeState {
    inv: DMatrix<f64>,
    log_det: f64,
}

impl ExchangeState {
    fn build(rows: &[DVector<f64>], selected: &[usize], ridge: f64) -> Option<ExchangeState> {
        let d = rows[0].len();
        let mut info = DMatrix::from_diagonal_element(d, d, ridge);
        for &i in selected {
            info.ger(1.0, &rows[i], &rows[i], 1.0);
        }
        let chol = Cholesky::new(info)?;
        let pivots = chol.l().diagonal();
        // An unridged matrix this close to rank deficiency makes the
        // rank-one exchange gains unreliable; report it as singular so the
        // caller switches to the ridged path instead of drifting.
        if ridge == 0.0 {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for p in pivots.iter() {
                lo = lo.min(*p);
                hi = hi.max(*p);
            }
            if lo < 1e-3 * hi {
                return None;
            }
        }
        let log_det = 2.0 * pivots.iter().map(|v| v.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return None;
        }
        Some(ExchangeState { inv: chol.inverse(), log_det })
    }
}

struct RestartOutcome {
    selected: Vec<usize>,
    log_det: f64,
    ridge_used: f64,
    iterations: usize,
    trace: Vec<f64>,
}

/// Greedy forward selection from the ridged empty matrix: repeatedly add the
/// candidate with the largest leverage (equivalently, determinant gain).
fn greedy_init(rows: &[DVector<f64>], k: usize, ridge: f64) -> Vec<usize> {
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut in_sel = vec![false; rows.len()];
    let mut state = ExchangeState::build(rows, &[], ridge)
        .expect("ridged empty matrix is positive definite");
    for _ in 0..k {
        let mut best: Option<(f64, usize)> = None;
        for (j, a) in rows.iter().enumerate() {
            if in_sel[j] {
                continue;
            }
            let gain = a.dot(&(&state.inv * a));
            if best.map_or(true, |(g, _)| gain > g) {
                best = Some((gain, j));
            }
        }
        let (_, j) = best.expect("k <= m leaves an unselected candidate");
        selected.push(j);
        in_sel[j] = true;
        state = ExchangeState::build(rows, &selected, ridge)
            .expect("adding a rank-one term keeps the ridged matrix positive definite");
    }
    selected.sort_unstable();
    selected
}

/// One exchange descent from an explicit initial selection.
fn run_exchange(
    rows: &[DVector<f64>],
    k: usize,
    initial: &[usize],
    user_ridge: f64,
) -> Result<RestartOutcome, DesignError> {
    let m = rows.len();
    let mut selected = initial.to_vec();
    selected.sort_unstable();
    let mut ridge_used = user_ridge;
    let mut state = ExchangeState::build(rows, &selected, ridge_used);
    if state.is_none() && user_ridge == 0.0 {
        // Singular start: rebuild the selection greedily from the ridged
        // empty matrix, then keep the ridge only if still needed.
        let fallback = auto_ridge(rows);
        selected = greedy_init(rows, k, fallback);
        state = ExchangeState::build(rows, &selected, 0.0);
        if state.is_none() {
            ridge_used = fallback;
            state = ExchangeState::build(rows, &selected, ridge_used);
        }
    }
    let mut state = state.ok_or(DesignError::Singular)?;

    let mut in_sel = vec![false; m];
    for &i in &selected {
        in_sel[i] = true;
    }
    let mut trace = vec![state.log_det];
    let mut incremental = state.log_det;
    let mut iterations = 0usize;
    let cap = 10 * m * k;
    while iterations < cap {
        // Leverages of selected rows under the current inverse.
        let sel_lev: Vec<(usize, f64)> = selected
            .iter()
            .map(|&i| (i, rows[i].dot(&(&state.inv * &rows[i]))))
            .collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for j in 0..m {
            if in_sel[j] {
                continue;
            }
            let w = &state.inv * &rows[j];
            let dj = rows[j].dot(&w);
            for (i, di) in &sel_lev {
                let dij = rows[*i].dot(&w);
                let delta = dj - di - (di * dj - dij * dij);
                if best.map_or(true, |(b, _, _)| delta > b) {
                    best = Some((delta, *i, j));
                }
            }
        }
        let Some((delta, out, inn)) = best else { break };
        if delta <= EXCHANGE_TOLERANCE {
            break;
        }
        in_sel[out] = false;
        in_sel[inn] = true;
        let pos = selected.iter().position(|&i| i == out).expect("in selection");
        selected[pos] = inn;
        selected.sort_unstable();
        incremental += delta.ln_1p();
        iterations += 1;
        state = match ExchangeState::build(rows, &selected, ridge_used) {
            Some(s) => s,
            None if ridge_used == 0.0 => {
                // A swap can push a borderline selection past numerical rank;
                // keep descending on the ridged objective instead of aborting.
                ridge_used = auto_ridge(rows);
                let s = ExchangeState::build(rows, &selected, ridge_used)
                    .ok_or(DesignError::Singular)?;
                incremental = s.log_det;
                s
            }
            None => return Err(DesignError::Singular),
        };
        if iterations % DRIFT_CHECK_EVERY == 0 {
            let rel = (incremental - state.log_det).abs() / state.log_det.abs().max(1.0);
            if rel > DRIFT_TOLERANCE {
                return Err(DesignError::DeterminantDrift { rel });
            }
            incremental = state.log_det;
        }
        trace.push(state.log_det);
    }
    Ok(RestartOutcome { selected, log_det: state.log_det, ridge_used, iterations, trace })
}

fn to_vectors(candidates: &[Vec<f64>]) -> Vec<DVector<f64>> {
    candidates.iter().map(|a| DVector::from_column_slice(a)).collect()
}

fn selection_from(outcome: RestartOutcome, m: usize, columns: Vec<ColumnStats>) -> DesignSelection {
    let mut lambda = vec![0u8; m];
    for &i in &outcome.selected {
        lambda[i] = 1;
    }
    DesignSelection {
        lambda,
        selected: outcome.selected,
        log_det: outcome.log_det,
        ridge_used: outcome.ridge_used,
        iterations: outcome.iterations,
        log_det_trace: outcome.trace,
        columns,
    }
}

/// Best-of-`restarts` Fedorov exchange over the rows exactly as given.
/// Deterministic for fixed (problem, restarts, seed): restart r draws its
/// initial k-subset from the stream ("design-init", r).
pub fn fedorov_exchange(problem: &DesignProblem, restarts: usize, seed: u64) -> Result<DesignSelection, DesignError> {
    problem.validate()?;
    if restarts < 1 {
        return Err(DesignError::NoRestarts);
    }
    let rows = to_vectors(&problem.candidates);
    let m = rows.len();
    let k = problem.budget;
    let mut best: Option<RestartOutcome> = None;
    for r in 0..restarts {
        let mut rng = crate::rng::indexed_stream(seed, "design-init", r as u64);
        let mut indices: Vec<usize> = (0..m).collect();
        indices.shuffle(&mut rng);
        indices.truncate(k);
        let outcome = run_exchange(&rows, k, &indices, problem.ridge)?;
        if best.as_ref().map_or(true, |b| outcome.log_det > b.log_det) {
            best = Some(outcome);
        }
    }
    Ok(selection_from(best.expect("restarts >= 1"), m, Vec::new()))
}

/// Exchange descent from a caller-supplied initial selection (no restarts,
/// no randomness). The permutation-equivariance tests build on this.
pub fn exchange_from_initial(problem: &DesignProblem, initial: &[usize]) -> Result<DesignSelection, DesignError> {
    problem.validate()?;
    let m = problem.candidates.len();
    let k = problem.budget;
    let distinct: std::collections::BTreeSet<usize> = initial.iter().copied().collect();
    if initial.len() != k || distinct.len() != k || initial.iter().any(|&i| i >= m) {
        return Err(DesignError::BadInitialSelection { budget: k, candidates: m });
    }
    let rows = to_vectors(&problem.candidates);
    let outcome = run_exchange(&rows, k, initial, problem.ridge)?;
    Ok(selection_from(outcome, m, Vec::new()))
}

/// Standardizes the candidate columns (dropping constants), then runs
/// [`fedorov_exchange`] in the standardized space. The returned selection
/// carries the column map; its `log_det` refers to standardized rows.
pub fn fedorov_exchange_standardized(
    problem: &DesignProblem,
    restarts: usize,
    seed: u64,
) -> Result<DesignSelection, DesignError> {
    let (rows, columns) = standardize_candidates(&problem.candidates)?;
    let std_problem = DesignProblem { candidates: rows, budget: problem.budget, ridge: problem.ridge };
    let mut selection = fedorov_exchange(&std_problem, restarts, seed)?;
    selection.columns = columns;
    Ok(selection)
}

fn binomial(m: usize, k: usize) -> Option<u128> {
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((m - i) as u128)?;
        acc /= (i + 1) as u128;
        if acc > 10_000_000 {
            return None;
        }
    }
    Some(acc)
}

/// Globally optimal selection by full enumeration; requires C(m,k) <= 1e6.
/// Ties keep the lexicographically smallest index set.
pub fn exhaustive_optimum(problem: &DesignProblem) -> Result<DesignSelection, DesignError> {
    problem.validate()?;
    let m = problem.candidates.len();
    let k = problem.budget;
    match binomial(m, k) {
        Some(count) if count <= 1_000_000 => {}
        _ => return Err(DesignError::TooManyCombinations { m, k }),
    }
    let rows = to_vectors(&problem.candidates);
    // Match the exchange ridge policy: honor an explicit ridge, otherwise
    // evaluate unridged and skip singular subsets, falling back to the
    // automatic ridge only when every subset is singular.
    let ridges: Vec<f64> = if problem.ridge > 0.0 {
        vec![problem.ridge]
    } else {
        vec![0.0, auto_ridge(&rows)]
    };
    for (pass, &ridge) in ridges.iter().enumerate() {
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            if let Some(state) = ExchangeState::build(&rows, &combo, ridge) {
                if best.as_ref().map_or(true, |(b, _)| state.log_det > *b) {
                    best = Some((state.log_det, combo.clone()));
                }
            }
            // Advance to the next k-combination in lexicographic order.
            let mut i = k;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if combo[i] != i + m - k {
                    combo[i] += 1;
                    for j in (i + 1)..k {
                        combo[j] = combo[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    combo.clear();
                    break;
                }
            }
            if combo.is_empty() {
                break;
            }
        }
        if let Some((log_det, selected)) = best {
            let outcome = RestartOutcome {
                selected,
                log_det,
                ridge_used: ridge,
                iterations: 0,
                trace: vec![log_det],
            };
            return Ok(selection_from(outcome, m, Vec::new()));
        }
        if pass + 1 == ridges.len() {
            break;
        }
    }
    Err(DesignError::Singular)
}

/// Reads a candidate matrix from CSV text with a header row.
pub fn load_candidates_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), DesignError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(headers.len());
        for (c, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| DesignError::BadNumber {
                row: r + 2,
                col: headers.get(c).cloned().unwrap_or_else(|| format!("#{c}")),
                value: field.to_string(),
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DesignError::EmptyCandidates);
    }
    Ok((headers, rows))
}
