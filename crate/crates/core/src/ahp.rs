//! Analytic hierarchy process over benchmark measurements.
//!
//! The goal graph is fixed at one level: a goal, a flat list of criteria and
//! a flat list of alternatives. Pairwise comparison matrices are built
//! directly from measured values (ratio comparisons clamped to the 1/9..9
//! scale), priorities come from the principal eigenvector, and criteria are
//! weighted equally unless the caller overrides the weights.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Saaty scale upper bound for a pairwise preference.
pub const SCALE_MAX: f64 = 9.0;
/// Saaty scale lower bound.
pub const SCALE_MIN: f64 = 1.0 / 9.0;

/// Relative tolerance used when validating reciprocity and weight sums.
pub const RECIPROCITY_TOL: f64 = 1e-9;

const POWER_ITERATION_TOL: f64 = 1e-10;
const POWER_ITERATION_LIMIT: usize = 1000;

/// Saaty random index for n = 1..=10, used by [`consistency_ratio`].
const RANDOM_INDEX: [f64; 10] = [0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45, 1.49];

/// Whether a larger measured value makes an alternative more preferable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LowerIsBetter,
    HigherIsBetter,
}

/// A selection criterion: a name plus the preference direction of its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub direction: Direction,
}

impl Criterion {
    pub fn new(name: impl Into<String>, direction: Direction) -> Self {
        Self {
            name: name.into(),
            direction,
        }
    }
}

/// The six web-framework selection criteria, in report order. The three
/// time-based criteria prefer smaller values; throughput, transfer rate and
/// total transfer prefer larger ones.
pub fn benchmark_criteria() -> Vec<Criterion> {
    vec![
        Criterion::new("time_per_concurrent_request", Direction::LowerIsBetter),
        Criterion::new("requests_per_second", Direction::HigherIsBetter),
        Criterion::new("time_per_request", Direction::LowerIsBetter),
        Criterion::new("transfer_rate", Direction::HigherIsBetter),
        Criterion::new("total_transferred", Direction::HigherIsBetter),
        Criterion::new("time_taken_for_tests", Direction::LowerIsBetter),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub enum AhpError {
    /// A measured value was zero or negative; ratio comparisons are undefined.
    NonPositiveValue { criterion: String, index: usize },
    /// Fewer than two items to compare.
    TooFewItems,
    /// Power iteration failed to converge within the iteration limit.
    NoConvergence,
    /// Consistency ratio is only tabulated up to 10 items.
    DimensionTooLarge { n: usize },
    /// Matrix entries do not satisfy entries[i][j] * entries[j][i] = 1.
    NotReciprocal { i: usize, j: usize },
    /// A diagonal entry differs from 1.
    BadDiagonal { i: usize },
    /// An entry lies outside the [1/9, 9] scale.
    OutOfScale { i: usize, j: usize },
    /// Entry count does not match the declared dimension.
    ShapeMismatch,
    /// The measurement table has no row for a requested criterion.
    MissingCriterion(String),
    /// Two rows of a measurement table share a criterion name.
    DuplicateCriterion(String),
    /// The measurement table has no alternatives.
    EmptyTable,
}

impl core::fmt::Display for AhpError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AhpError::NonPositiveValue { criterion, index } => {
                write!(
                    f,
                    "non-positive value for criterion {criterion:?} at index {index}"
                )
            }
            AhpError::TooFewItems => write!(f, "need at least two items to compare"),
            AhpError::NoConvergence => write!(f, "power iteration did not converge"),
            AhpError::DimensionTooLarge { n } => {
                write!(f, "consistency ratio undefined for n = {n} (max 10)")
            }
            AhpError::NotReciprocal { i, j } => {
                write!(f, "matrix is not reciprocal at ({i}, {j})")
            }
            AhpError::BadDiagonal { i } => write!(f, "diagonal entry at {i} is not 1"),
            AhpError::OutOfScale { i, j } => {
                write!(f, "entry at ({i}, {j}) outside the [1/9, 9] scale")
            }
            AhpError::ShapeMismatch => write!(f, "entry count does not match dimension"),
            AhpError::MissingCriterion(name) => {
                write!(f, "measurement table has no criterion {name:?}")
            }
            AhpError::DuplicateCriterion(name) => {
                write!(f, "measurement table has two rows named {name:?}")
            }
            AhpError::EmptyTable => write!(f, "measurement table has no alternatives"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AhpError {}

/// Measured values for every (alternative, criterion) pair.
///
/// `values[a][c]` is the value of criterion `c` for alternative `a`; all
/// values must be strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementTable {
    alternatives: Vec<String>,
    criteria: Vec<Criterion>,
    values: Vec<Vec<f64>>,
}

impl MeasurementTable {
    pub fn new(
        alternatives: Vec<String>,
        criteria: Vec<Criterion>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self, AhpError> {
        if alternatives.is_empty() {
            return Err(AhpError::EmptyTable);
        }
        if values.len() != alternatives.len() {
            return Err(AhpError::ShapeMismatch);
        }
        let mut names = alloc::collections::BTreeSet::new();
        for criterion in &criteria {
            if !names.insert(criterion.name.as_str()) {
                return Err(AhpError::DuplicateCriterion(criterion.name.clone()));
            }
        }
        for (a, row) in values.iter().enumerate() {
            if row.len() != criteria.len() {
                return Err(AhpError::ShapeMismatch);
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 {
                    return Err(AhpError::NonPositiveValue {
                        criterion: criteria[c].name.clone(),
                        index: a,
                    });
                }
            }
        }
        Ok(Self {
            alternatives,
            criteria,
            values,
        })
    }

    pub fn alternatives(&self) -> &[String] {
        &self.alternatives
    }

    pub fn criteria(&self) -> &[Criterion] {
        &self.criteria
    }

    pub fn value(&self, alternative: usize, criterion: usize) -> f64 {
        self.values[alternative][criterion]
    }

    /// All alternatives' values for one criterion, by criterion name.
    pub fn column(&self, criterion: &str) -> Option<Vec<f64>> {
        let c = self.criteria.iter().position(|k| k.name == criterion)?;
        Some(self.values.iter().map(|row| row[c]).collect())
    }
}

/// A reciprocal pairwise comparison matrix on the Saaty scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl PairwiseMatrix {
    /// Validates and wraps a row-major n*n entry vector.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self, AhpError> {
        if entries.len() != n * n {
            return Err(AhpError::ShapeMismatch);
        }
        let m = Self { n, entries };
        for i in 0..n {
            if libm::fabs(m.get(i, i) - 1.0) > RECIPROCITY_TOL {
                return Err(AhpError::BadDiagonal { i });
            }
            for j in (i + 1)..n {
                let a = m.get(i, j);
                let b = m.get(j, i);
                if libm::fabs(a * b - 1.0) > RECIPROCITY_TOL * a.max(1.0) {
                    return Err(AhpError::NotReciprocal { i, j });
                }
                // A touch of slack so mirrored clamp bounds pass exactly.
                let lo = SCALE_MIN * (1.0 - 1e-12);
                let hi = SCALE_MAX * (1.0 + 1e-12);
                if !(lo..=hi).contains(&a) {
                    return Err(AhpError::OutOfScale { i, j });
                }
                if !(lo..=hi).contains(&b) {
                    return Err(AhpError::OutOfScale { i: j, j: i });
                }
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// The transposed matrix (also reciprocal).
    pub fn transposed(&self) -> Self {
        let mut entries = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                entries[j * self.n + i] = self.get(i, j);
            }
        }
        Self { n: self.n, entries }
    }
}

/// Normalized non-negative weights over compared items (sum = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityVector {
    weights: Vec<f64>,
}

impl PriorityVector {
    /// Normalizes arbitrary non-negative weights to sum to 1.
    pub fn normalized(raw: Vec<f64>) -> Result<Self, AhpError> {
        if raw.is_empty() {
            return Err(AhpError::TooFewItems);
        }
        let sum: f64 = raw.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(AhpError::NonPositiveValue {
                criterion: String::new(),
                index: 0,
            });
        }
        Ok(Self {
            weights: raw.into_iter().map(|w| w / sum).collect(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Builds the pairwise comparison matrix for one criterion from its measured
/// values. Only the upper triangle is computed with the clamp formula
/// min(9, max(1/9, ratio)); the lower triangle mirrors it exactly so the
/// matrix stays reciprocal even when clamping engages.
pub fn build_pairwise_matrix(
    values: &[f64],
    direction: Direction,
) -> Result<PairwiseMatrix, AhpError> {
    if values.len() < 2 {
        return Err(AhpError::TooFewItems);
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || v <= 0.0 {
            return Err(AhpError::NonPositiveValue {
                criterion: String::new(),
                index: i,
            });
        }
    }
    let n = values.len();
    let mut entries = vec![1.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let ratio = match direction {
                Direction::HigherIsBetter => values[i] / values[j],
                Direction::LowerIsBetter => values[j] / values[i],
            };
            let pref = ratio.clamp(SCALE_MIN, SCALE_MAX);
            entries[i * n + j] = pref;
            entries[j * n + i] = 1.0 / pref;
        }
    }
    PairwiseMatrix::new(n, entries)
}

/// Power iteration on a positive matrix: returns the L1-normalized principal
/// eigenvector and the dominant eigenvalue estimate.
fn power_iterate(matrix: &PairwiseMatrix) -> Result<(Vec<f64>, f64), AhpError> {
    let n = matrix.n;
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..POWER_ITERATION_LIMIT {
        let mut y = vec![0.0; n];
        for (i, slot) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate() {
                acc += matrix.get(i, j) * xj;
            }
            *slot = acc;
        }
        // x has L1 norm 1, so the norm of y estimates the eigenvalue.
        let norm: f64 = y.iter().sum();
        let mut max_rel = 0.0f64;
        for i in 0..n {
            y[i] /= norm;
            let rel = libm::fabs(y[i] - x[i]) / x[i].max(f64::MIN_POSITIVE);
            max_rel = max_rel.max(rel);
        }
        x = y;
        if max_rel <= POWER_ITERATION_TOL {
            return Ok((x, norm));
        }
    }
    Err(AhpError::NoConvergence)
}

/// Derives the priority vector of a pairwise matrix as its normalized
/// principal right eigenvector (power iteration, relative tolerance 1e-10,
/// at most 1000 iterations).
pub fn derive_priorities(matrix: &PairwiseMatrix) -> Result<PriorityVector, AhpError> {
    let (weights, _) = power_iterate(matrix)?;
    PriorityVector::normalized(weights)
}

/// Saaty consistency ratio (lambda_max - n) / (n - 1) / RI(n).
///
/// Returns 0 for n <= 2 (such matrices are always consistent) and an error
/// for n > 10, past the tabulated random index.
pub fn consistency_ratio(matrix: &PairwiseMatrix) -> Result<f64, AhpError> {
    let n = matrix.n;
    if n > 10 {
        return Err(AhpError::DimensionTooLarge { n });
    }
    if n <= 2 {
        return Ok(0.0);
    }
    let (_, lambda) = power_iterate(matrix)?;
    let ci = (lambda - n as f64) / (n as f64 - 1.0);
    Ok((ci / RANDOM_INDEX[n - 1]).max(0.0))
}

/// Uniform criteria weights 1/k, matching a pairwise preference of 1 between
/// every pair of criteria.
pub fn equal_criteria_weights(k: usize) -> Result<PriorityVector, AhpError> {
    if k < 1 {
        return Err(AhpError::TooFewItems);
    }
    PriorityVector::normalized(vec![1.0; k])
}

/// Full evaluation output: per-criterion local priorities, the weighted
/// contribution grid and the overall ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhpResult {
    pub alternatives: Vec<String>,
    pub criteria: Vec<String>,
    pub criterion_weights: PriorityVector,
    /// One priority vector over alternatives per criterion.
    pub local_priorities: Vec<PriorityVector>,
    /// contributions[c][a] = criterion_weights[c] * local_priorities[c][a].
    pub contributions: Vec<Vec<f64>>,
    /// Per-alternative sum of contributions.
    pub totals: Vec<f64>,
    /// Alternatives sorted by total, descending (ties keep table order).
    pub ranking: Vec<String>,
}

/// Evaluates the criteria against a measurement table with equal criteria
/// weights.
pub fn evaluate(table: &MeasurementTable, criteria: &[Criterion]) -> Result<AhpResult, AhpError> {
    let weights = equal_criteria_weights(criteria.len())?;
    evaluate_weighted(table, criteria, weights)
}

/// Evaluates with explicit criteria weights (must match the criteria count).
pub fn evaluate_weighted(
    table: &MeasurementTable,
    criteria: &[Criterion],
    criterion_weights: PriorityVector,
) -> Result<AhpResult, AhpError> {
    if criterion_weights.len() != criteria.len() {
        return Err(AhpError::ShapeMismatch);
    }
    let n_alt = table.alternatives().len();
    if n_alt == 0 {
        return Err(AhpError::EmptyTable);
    }

    let mut local_priorities = Vec::with_capacity(criteria.len());
    for criterion in criteria {
        let values = table
            .column(&criterion.name)
            .ok_or_else(|| AhpError::MissingCriterion(criterion.name.clone()))?;
        let local = if n_alt == 1 {
            // A lone alternative needs no comparison.
            PriorityVector::normalized(vec![1.0])?
        } else {
            let matrix = build_pairwise_matrix(&values, criterion.direction)?;
            derive_priorities(&matrix)?
        };
        local_priorities.push(local);
    }

    let mut contributions = Vec::with_capacity(criteria.len());
    let mut totals = vec![0.0; n_alt];
    for (c, local) in local_priorities.iter().enumerate() {
        let w = criterion_weights.weights()[c];
        let row: Vec<f64> = local.weights().iter().map(|p| w * p).collect();
        for (a, v) in row.iter().enumerate() {
            totals[a] += v;
        }
        contributions.push(row);
    }

    let mut order: Vec<usize> = (0..n_alt).collect();
    order.sort_by(|&a, &b| {
        totals[b]
            .partial_cmp(&totals[a])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let ranking = order
        .iter()
        .map(|&a| table.alternatives()[a].clone())
        .collect();

    Ok(AhpResult {
        alternatives: table.alternatives().to_vec(),
        criteria: criteria.iter().map(|c| c.name.clone()).collect(),
        criterion_weights,
        local_priorities,
        contributions,
        totals,
        ranking,
    })
}

impl AhpResult {
    /// Percentage share per alternative, in table order.
    pub fn total_percentages(&self) -> Vec<f64> {
        self.totals.iter().map(|t| t * 100.0).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Row geometric mean priority oracle, independent of power iteration.
    fn row_geometric_mean(matrix: &PairwiseMatrix) -> Vec<f64> {
        let n = matrix.n();
        let mut raw = Vec::with_capacity(n);
        for i in 0..n {
            let mut log_sum = 0.0;
            for j in 0..n {
                log_sum += matrix.get(i, j).ln();
            }
            raw.push((log_sum / n as f64).exp());
        }
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / sum).collect()
    }

    fn hello_world_table() -> MeasurementTable {
        MeasurementTable::new(
            vec!["Falcon".into(), "FastApi".into(), "Flask".into()],
            benchmark_criteria(),
            vec![
                vec![23.0, 4274.0, 4.0, 680.0, 1_630_000.0, 2.0],
                vec![37.0, 2650.0, 7.0, 357.0, 1_380_000.0, 3.0],
                vec![84.0, 1180.0, 16.0, 190.0, 1_650_000.0, 8.0],
            ],
        )
        .unwrap()
    }

    #[test]
    fn pairwise_from_throughput_column() {
        let m =
            build_pairwise_matrix(&[4274.0, 2650.0, 1180.0], Direction::HigherIsBetter).unwrap();
        assert!(approx(m.get(0, 1), 1.6128, 1e-3));
        assert!(approx(m.get(0, 2), 3.6220, 1e-3));
        assert!(approx(m.get(1, 2), 2.2458, 1e-3));
        assert!(approx(m.get(1, 0), 1.0 / 1.6128, 1e-3));
    }

    #[test]
    fn pairwise_equal_values_give_unit_matrix() {
        let m = build_pairwise_matrix(&[5.0, 5.0], Direction::LowerIsBetter).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(m.get(i, j), 1.0);
            }
        }
    }

    #[test]
    fn pairwise_clamps_extreme_ratios() {
        let m = build_pairwise_matrix(&[100.0, 1.0], Direction::HigherIsBetter).unwrap();
        assert_eq!(m.get(0, 1), 9.0);
        assert_eq!(m.get(1, 0), 1.0 / 9.0);
    }

    #[test]
    fn pairwise_rejects_bad_input() {
        assert_eq!(
            build_pairwise_matrix(&[1.0], Direction::HigherIsBetter),
            Err(AhpError::TooFewItems)
        );
        assert!(matches!(
            build_pairwise_matrix(&[1.0, 0.0], Direction::HigherIsBetter),
            Err(AhpError::NonPositiveValue { .. })
        ));
    }

    #[test]
    fn priorities_of_all_ones_matrix_are_uniform() {
        let m = PairwiseMatrix::new(3, vec![1.0; 9]).unwrap();
        let p = derive_priorities(&m).unwrap();
        for &w in p.weights() {
            assert!(approx(w, 1.0 / 3.0, 1e-12));
        }
    }

    #[test]
    fn priorities_of_consistent_2x2() {
        let m = PairwiseMatrix::new(2, vec![1.0, 2.0, 0.5, 1.0]).unwrap();
        let p = derive_priorities(&m).unwrap();
        assert!(approx(p.weights()[0], 2.0 / 3.0, 1e-12));
        assert!(approx(p.weights()[1], 1.0 / 3.0, 1e-12));
    }

    #[test]
    fn priorities_match_row_geometric_mean_oracle() {
        let m =
            build_pairwise_matrix(&[4274.0, 2650.0, 1180.0], Direction::HigherIsBetter).unwrap();
        let p = derive_priorities(&m).unwrap();
        let oracle = row_geometric_mean(&m);
        for (a, b) in p.weights().iter().zip(&oracle) {
            assert!(
                approx(*a, *b, 1e-3),
                "eigenvector {a} vs geometric mean {b}"
            );
        }
        assert!(approx(p.weights()[0], 0.527, 1.5e-3));
        assert!(approx(p.weights()[1], 0.327, 1.5e-3));
        assert!(approx(p.weights()[2], 0.146, 1.5e-3));
    }

    #[test]
    fn eigenvalue_matches_nalgebra_oracle() {
        // Perturbed reciprocal matrix; dominant eigenvalue from a dense
        // eigensolver must agree with the power-iteration estimate.
        let entries = vec![1.0, 4.0, 4.0, 0.25, 1.0, 2.0, 0.25, 0.5, 1.0];
        let m = PairwiseMatrix::new(3, entries.clone()).unwrap();
        let (_, lambda) = power_iterate(&m).unwrap();
        let dm = nalgebra::DMatrix::from_row_slice(3, 3, &entries);
        let eig = dm.complex_eigenvalues();
        let oracle = eig.iter().map(|c| c.re).fold(f64::MIN, f64::max);
        assert!(
            approx(lambda, oracle, 1e-8),
            "power {lambda} vs oracle {oracle}"
        );
    }

    #[test]
    fn consistent_matrix_has_zero_cr() {
        let m = build_pairwise_matrix(&[3.0, 2.0, 1.0, 0.5], Direction::HigherIsBetter).unwrap();
        let cr = consistency_ratio(&m).unwrap();
        assert!(cr.abs() < 1e-6, "cr = {cr}");
    }

    #[test]
    fn cr_is_zero_for_2x2_and_errors_past_10() {
        let m = PairwiseMatrix::new(2, vec![1.0, 5.0, 0.2, 1.0]).unwrap();
        assert_eq!(consistency_ratio(&m).unwrap(), 0.0);

        let n = 11;
        let m = PairwiseMatrix::new(n, vec![1.0; n * n]).unwrap();
        assert!(matches!(
            consistency_ratio(&m),
            Err(AhpError::DimensionTooLarge { .. })
        ));
    }

    #[test]
    fn perturbed_matrix_has_positive_cr() {
        // Start consistent ([1,2,4] ratios), then double one entry.
        let entries = vec![1.0, 4.0, 4.0, 0.25, 1.0, 2.0, 0.25, 0.5, 1.0];
        let m = PairwiseMatrix::new(3, entries).unwrap();
        let cr = consistency_ratio(&m).unwrap();
        assert!(cr > 1e-4, "cr = {cr}");
    }

    #[test]
    fn equal_weights() {
        let w = equal_criteria_weights(6).unwrap();
        for &x in w.weights() {
            assert!(approx(x, 1.0 / 6.0, 1e-12));
            assert!(approx(x * 100.0, 16.7, 0.05));
        }
        assert_eq!(equal_criteria_weights(1).unwrap().weights(), &[1.0]);
        assert_eq!(equal_criteria_weights(4).unwrap().weights(), &[0.25; 4]);
        assert!(equal_criteria_weights(0).is_err());
    }

    #[test]
    fn evaluate_hello_world_scenario() {
        let table = hello_world_table();
        let result = evaluate(&table, &benchmark_criteria()).unwrap();
        assert_eq!(result.ranking, vec!["Falcon", "FastApi", "Flask"]);
        // Frozen from the normalized-value oracle over the rounded inputs.
        assert!(
            approx(result.totals[0], 0.50495, 1e-4),
            "{:?}",
            result.totals
        );
        assert!(approx(result.totals[1], 0.31727, 1e-4));
        assert!(approx(result.totals[2], 0.17778, 1e-4));

        let sum: f64 = result.totals.iter().sum();
        assert!(approx(sum, 1.0, 1e-9));
        for (c, row) in result.contributions.iter().enumerate() {
            let row_sum: f64 = row.iter().sum();
            assert!(approx(row_sum, result.criterion_weights.weights()[c], 1e-9));
        }
    }

    #[test]
    fn evaluate_io_scenario_reorders_runners_up() {
        let table = MeasurementTable::new(
            vec!["Falcon".into(), "FastApi".into(), "Flask".into()],
            benchmark_criteria(),
            vec![
                vec![701.0, 142.0, 140.0, 22.0, 1_600_000.0, 70.0],
                vec![693.0, 144.0, 138.0, 19.0, 1_360_000.0, 69.0],
                vec![729.0, 137.0, 145.0, 21.0, 1_620_000.0, 72.0],
            ],
        )
        .unwrap();
        let result = evaluate(&table, &benchmark_criteria()).unwrap();
        assert_eq!(result.ranking, vec!["Falcon", "Flask", "FastApi"]);
    }

    #[test]
    fn evaluate_single_alternative() {
        let table = MeasurementTable::new(
            vec!["Only".into()],
            benchmark_criteria(),
            vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]],
        )
        .unwrap();
        let result = evaluate(&table, &benchmark_criteria()).unwrap();
        assert!(approx(result.totals[0], 1.0, 1e-12));
        assert_eq!(result.ranking, vec!["Only"]);
    }

    #[test]
    fn scale_invariance_of_pairwise_matrices() {
        let values = [23.0, 37.0, 84.0];
        for &scale in &[0.001, 3.0, 1e6] {
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let a = build_pairwise_matrix(&values, Direction::LowerIsBetter).unwrap();
            let b = build_pairwise_matrix(&scaled, Direction::LowerIsBetter).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert!(approx(a.get(i, j), b.get(i, j), 1e-12));
                }
            }
        }
    }

    #[test]
    fn direction_duality_is_transposition() {
        let values = [4.0, 7.0, 16.0, 2.5];
        let lower = build_pairwise_matrix(&values, Direction::LowerIsBetter).unwrap();
        let higher = build_pairwise_matrix(&values, Direction::HigherIsBetter).unwrap();
        let t = higher.transposed();
        for i in 0..4 {
            for j in 0..4 {
                assert!(approx(lower.get(i, j), t.get(i, j), 1e-12));
            }
        }
    }

    #[test]
    fn consistent_priorities_equal_normalized_values() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.random_range(2..6);
            // Bounded spread keeps all ratios inside the clamp window.
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..8.0)).collect();
            let m = build_pairwise_matrix(&values, Direction::HigherIsBetter).unwrap();
            let p = derive_priorities(&m).unwrap();
            let sum: f64 = values.iter().sum();
            for (w, v) in p.weights().iter().zip(&values) {
                assert!(approx(*w, v / sum, 1e-6), "{w} vs {}", v / sum);
            }
        }
    }

    #[test]
    fn priorities_are_permutation_equivariant() {
        use rand::seq::SliceRandom;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let n = rng.random_range(2..6);
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..50.0)).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);

            let base = derive_priorities(
                &build_pairwise_matrix(&values, Direction::HigherIsBetter).unwrap(),
            )
            .unwrap();
            let permuted_values: Vec<f64> = perm.iter().map(|&i| values[i]).collect();
            let permuted = derive_priorities(
                &build_pairwise_matrix(&permuted_values, Direction::HigherIsBetter).unwrap(),
            )
            .unwrap();
            for (slot, &src) in perm.iter().enumerate() {
                assert!(approx(permuted.weights()[slot], base.weights()[src], 1e-9));
            }
        }
    }

    #[test]
    fn ranking_invariant_under_criteria_reorder() {
        let table = hello_world_table();
        let mut criteria = benchmark_criteria();
        criteria.reverse();
        let reordered = evaluate(&table, &criteria).unwrap();
        let straight = evaluate(&table, &benchmark_criteria()).unwrap();
        assert_eq!(reordered.ranking, straight.ranking);
        for (a, b) in reordered.totals.iter().zip(&straight.totals) {
            assert!(approx(*a, *b, 1e-12));
        }
    }

    #[test]
    fn duplicate_criterion_rows_are_rejected() {
        let criteria = vec![
            Criterion::new("rps", Direction::HigherIsBetter),
            Criterion::new("rps", Direction::LowerIsBetter),
        ];
        let err = MeasurementTable::new(
            vec!["A".into(), "B".into()],
            criteria,
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        )
        .unwrap_err();
        assert_eq!(err, AhpError::DuplicateCriterion("rps".into()));
    }

    #[test]
    fn missing_criterion_is_reported() {
        let table = hello_world_table();
        let bogus = vec![Criterion::new("latency_p99", Direction::LowerIsBetter)];
        assert_eq!(
            evaluate(&table, &bogus),
            Err(AhpError::MissingCriterion("latency_p99".into()))
        );
    }
}
