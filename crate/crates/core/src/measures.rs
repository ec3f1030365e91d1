//! Discrete measures, ground-cost matrices and sparse transport plans.
//!
//! A [`WeightedPointSet`] is an empirical measure `sum_i a_i * delta(z_i)`.
//! Transport plans are stored as sparse triplets because every plan produced
//! by the exact solver or by greedy matching has at most `m + n - 1`
//! non-zero entries.

use std::collections::HashSet;

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Absolute tolerance on plan marginals.
pub const MARGINAL_TOL: f64 = 1e-8;
/// Tolerance used when a stored distance is checked against recomputation.
pub const RECOMPUTE_TOL: f64 = 1e-12;
/// Weight vectors whose sum is off by at most this much are renormalized.
pub const RENORMALIZE_TOL: f64 = 1e-6;
/// After renormalization weights must sum to one within this tolerance.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Checks that `weights` lie on the probability simplex, renormalizing small
/// drift. Returns the (possibly rescaled) weights.
pub fn normalize_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::Empty("weight vector"));
    }
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() {
            return Err(Error::InvalidWeights(format!("weight {i} is not finite")));
        }
        if w < 0.0 {
            return Err(Error::InvalidWeights(format!(
                "weight {i} is negative ({w})"
            )));
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > RENORMALIZE_TOL {
        return Err(Error::InvalidWeights(format!(
            "weights sum to {sum}, expected 1"
        )));
    }
    // already a simplex up to summation rounding: keep as is, so that
    // normalizing twice is a no-op
    if (sum - 1.0).abs() <= weights.len() as f64 * f64::EPSILON {
        return Ok(weights.to_vec());
    }
    let out: Vec<f64> = weights.iter().map(|w| w / sum).collect();
    debug_assert!((out.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL);
    Ok(out)
}

pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// An empirical measure: `n` points in `d` dimensions with simplex weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPointSet {
    points: Array2<f64>,
    weights: Array1<f64>,
}

impl WeightedPointSet {
    pub fn new(points: Array2<f64>, weights: Vec<f64>) -> Result<Self> {
        let (n, d) = points.dim();
        if n == 0 {
            return Err(Error::Empty("point set has no points"));
        }
        if d == 0 {
            return Err(Error::Empty("point set has zero dimensions"));
        }
        if weights.len() != n {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {n} points",
                weights.len()
            )));
        }
        check_finite(&points)?;
        let weights = normalize_weights(&weights)?;
        Ok(Self {
            points,
            weights: Array1::from(weights),
        })
    }

    /// Point set with uniform weights `1/n`.
    pub fn uniform(points: Array2<f64>) -> Result<Self> {
        let n = points.nrows();
        Self::new(
            points,
            uniform_weights(n.max(1)).into_iter().take(n).collect(),
        )
    }

    /// Builds a set from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], weights: Option<Vec<f64>>) -> Result<Self> {
        let points = rows_to_array(rows)?;
        match weights {
            Some(w) => Self::new(points, w),
            None => Self::uniform(points),
        }
    }

    /// One-dimensional point set.
    pub fn from_1d(values: &[f64], weights: Option<Vec<f64>>) -> Result<Self> {
        let points = Array2::from_shape_vec((values.len(), 1), values.to_vec())
            .map_err(|e| Error::Parse(e.to_string()))?;
        match weights {
            Some(w) => Self::new(points, w),
            None => Self::uniform(points),
        }
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    /// Weighted mean of the points.
    pub fn mean(&self) -> Array1<f64> {
        let mut mean = Array1::zeros(self.dim());
        for (row, &w) in self.points.axis_iter(Axis(0)).zip(self.weights.iter()) {
            mean.scaled_add(w, &row);
        }
        mean
    }

    /// True when every weight equals `1/n` within [`SIMPLEX_TOL`].
    pub fn has_uniform_weights(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.weights.iter().all(|w| (w - u).abs() <= SIMPLEX_TOL)
    }

    /// Same points projected onto `direction` (a `d`-vector), keeping weights.
    pub fn project(&self, direction: &[f64]) -> Result<WeightedPointSet> {
        if direction.len() != self.dim() {
            return Err(Error::DimensionMismatch(direction.len(), self.dim()));
        }
        let dir = ArrayView1::from(direction);
        let proj: Vec<f64> = self
            .points
            .axis_iter(Axis(0))
            .map(|r| r.dot(&dir))
            .collect();
        Ok(WeightedPointSet {
            points: Array2::from_shape_vec((proj.len(), 1), proj)
                .expect("projection has one column"),
            weights: self.weights.clone(),
        })
    }

    /// Concatenates the points of `self` and `other` (weights are dropped).
    pub fn stack_points(&self, other: &WeightedPointSet) -> Result<Array2<f64>> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        ndarray::concatenate(Axis(0), &[self.points.view(), other.points.view()])
            .map_err(|e| Error::Parse(e.to_string()))
    }
}

pub(crate) fn rows_to_array(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(n * d);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != d {
            return Err(Error::Parse(format!(
                "row {i} has {} columns, expected {d}",
                r.len()
            )));
        }
        flat.extend_from_slice(r);
    }
    Array2::from_shape_vec((n, d), flat).map_err(|e| Error::Parse(e.to_string()))
}

fn check_finite(points: &Array2<f64>) -> Result<()> {
    for ((row, col), v) in points.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}

#[inline]
pub(crate) fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub(crate) fn euclidean_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundMetric {
    Euclidean,
    /// Entries supplied by the caller, e.g. tree distances.
    Precomputed,
}

/// Dense `m x n` matrix of pairwise ground distances.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Array2<f64>,
    metric: GroundMetric,
}

impl CostMatrix {
    /// Wraps caller-supplied distances; entries must be finite and non-negative.
    pub fn precomputed(entries: Array2<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("cost matrix"));
        }
        for ((row, col), &x) in entries.indexed_iter() {
            if !x.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            if x < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "cost entry ({row}, {col}) is negative ({x})"
                )));
            }
        }
        Ok(Self {
            entries,
            metric: GroundMetric::Precomputed,
        })
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn metric(&self) -> GroundMetric {
        self.metric
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[[i, j]]
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// Median entry (lower median for an even count).
    pub fn median(&self) -> f64 {
        let mut v: Vec<f64> = self.entries.iter().copied().collect();
        let mid = (v.len() - 1) / 2;
        let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
        *m
    }

    pub fn transpose(&self) -> CostMatrix {
        CostMatrix {
            entries: self.entries.t().to_owned(),
            metric: self.metric,
        }
    }
}

/// Pairwise Euclidean distances between the points of `a` and `b`.
pub fn cost_matrix(a: &WeightedPointSet, b: &WeightedPointSet) -> Result<CostMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(CostMatrix {
        entries: pairwise_distances(a.points(), b.points()),
        metric: GroundMetric::Euclidean,
    })
}

pub(crate) fn pairwise_distances(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (m, n) = (a.nrows(), b.nrows());
    let mut out = Array2::zeros((m, n));
    for i in 0..m {
        let ai = a.row(i);
        let ai = ai.as_slice();
        for j in 0..n {
            let bj = b.row(j);
            out[[i, j]] = match (ai, bj.as_slice()) {
                (Some(x), Some(y)) => euclidean_slices(x, y),
                _ => euclidean(a.row(i), b.row(j)),
            };
        }
    }
    out
}

/// Sparse transport plan: `(row, column, mass)` triplets with positive mass.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPlan {
    shape: (usize, usize),
    entries: Vec<(usize, usize, f64)>,
}

impl FlowPlan {
    /// Validates bounds, positivity and uniqueness of `(i, j)` pairs.
    pub fn new(shape: (usize, usize), entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for &(i, j, mass) in &entries {
            if i >= shape.0 || j >= shape.1 {
                return Err(Error::IndexOutOfBounds(i, j));
            }
            if !mass.is_finite() || mass <= 0.0 {
                return Err(Error::InvalidPlan(format!(
                    "entry ({i}, {j}) has non-positive mass {mass}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidPlan(format!("duplicate entry ({i}, {j})")));
            }
        }
        Ok(Self { shape, entries })
    }

    /// Construction for solver output that is correct by construction.
    pub(crate) fn from_trusted(shape: (usize, usize), entries: Vec<(usize, usize, f64)>) -> Self {
        debug_assert!(Self::new(shape, entries.clone()).is_ok());
        Self { shape, entries }
    }

    /// Keeps the strictly positive entries of a dense plan.
    pub fn from_dense(dense: &Array2<f64>) -> Self {
        let entries = dense
            .indexed_iter()
            .filter(|(_, &v)| v > 0.0)
            .map(|((i, j), &v)| (i, j, v))
            .collect();
        Self {
            shape: dense.dim(),
            entries,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut r = vec![0.0; self.shape.0];
        for &(i, _, m) in &self.entries {
            r[i] += m;
        }
        r
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.shape.1];
        for &(_, j, m) in &self.entries {
            c[j] += m;
        }
        c
    }

    pub fn transpose(&self) -> FlowPlan {
        FlowPlan {
            shape: (self.shape.1, self.shape.0),
            entries: self.entries.iter().map(|&(i, j, m)| (j, i, m)).collect(),
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros(self.shape);
        for &(i, j, m) in &self.entries {
            d[[i, j]] += m;
        }
        d
    }

    /// Entries sorted by `(row, column)`; useful for comparing plans.
    pub fn sorted_entries(&self) -> Vec<(usize, usize, f64)> {
        let mut e = self.entries.clone();
        e.sort_by_key(|x| (x.0, x.1));
        e
    }
}

/// Frobenius inner product `<P, D>` over the sparse entries of `plan`.
pub fn transport_cost(plan: &FlowPlan, cost: &CostMatrix) -> Result<f64> {
    if plan.shape() != cost.shape() {
        return Err(Error::ShapeMismatch {
            expected: cost.shape(),
            got: plan.shape(),
        });
    }
    let d = cost.entries();
    let mut total = 0.0;
    for &(i, j, mass) in plan.entries() {
        let c = d.get((i, j)).ok_or(Error::IndexOutOfBounds(i, j))?;
        total += mass * c;
    }
    Ok(total)
}

/// Which marginal a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marginal {
    Row,
    Column,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub marginal: Marginal,
    pub index: usize,
    pub expected: f64,
    pub actual: f64,
}

impl Violation {
    pub fn magnitude(&self) -> f64 {
        (self.expected - self.actual).abs()
    }
}

/// Outcome of [`validate_plan`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlanDiagnostics {
    pub valid: bool,
    pub tolerance: f64,
    pub worst_row: Option<Violation>,
    pub worst_column: Option<Violation>,
    pub message: Option<String>,
}

impl PlanDiagnostics {
    /// Largest marginal deviation seen in either direction.
    pub fn max_violation(&self) -> f64 {
        let r = self.worst_row.as_ref().map_or(0.0, Violation::magnitude);
        let c = self.worst_column.as_ref().map_or(0.0, Violation::magnitude);
        r.max(c)
    }
}

/// Checks `P 1 = a` and `P^T 1 = b` within [`MARGINAL_TOL`].
///
/// Diagnostics always name the worst row and column, even for valid plans.
pub fn validate_plan(plan: &FlowPlan, a: &[f64], b: &[f64]) -> PlanDiagnostics {
    let tolerance = MARGINAL_TOL;
    if plan.shape() != (a.len(), b.len()) {
        return PlanDiagnostics {
            valid: false,
            tolerance,
            worst_row: None,
            worst_column: None,
            message: Some(format!(
                "plan shape {:?} does not match marginals ({}, {})",
                plan.shape(),
                a.len(),
                b.len()
            )),
        };
    }
    let worst = |sums: Vec<f64>, target: &[f64], marginal| {
        sums.into_iter()
            .zip(target)
            .enumerate()
            .map(|(index, (actual, &expected))| Violation {
                marginal,
                index,
                expected,
                actual,
            })
            .max_by(|x, y| x.magnitude().total_cmp(&y.magnitude()))
    };
    let worst_row = worst(plan.row_sums(), a, Marginal::Row);
    let worst_column = worst(plan.col_sums(), b, Marginal::Column);
    let row_ok = worst_row
        .as_ref()
        .is_none_or(|v| v.magnitude() <= tolerance);
    let col_ok = worst_column
        .as_ref()
        .is_none_or(|v| v.magnitude() <= tolerance);
    let message = match (row_ok, col_ok) {
        (true, true) => None,
        (false, _) => worst_row.as_ref().map(|v| {
            format!(
                "row {} carries {} but should carry {}",
                v.index, v.actual, v.expected
            )
        }),
        (true, false) => worst_column.as_ref().map(|v| {
            format!(
                "column {} carries {} but should carry {}",
                v.index, v.actual, v.expected
            )
        }),
    };
    PlanDiagnostics {
        valid: row_ok && col_ok,
        tolerance,
        worst_row,
        worst_column,
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn set(rows: &[&[f64]]) -> WeightedPointSet {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        WeightedPointSet::from_rows(&rows, None).unwrap()
    }

    #[test]
    fn cost_matrix_examples() {
        let o = set(&[&[0.0, 0.0]]);
        assert_eq!(cost_matrix(&o, &o).unwrap().entries(), &array![[0.0]]);

        let p = set(&[&[3.0, 4.0]]);
        assert_eq!(cost_matrix(&o, &p).unwrap().entries(), &array![[5.0]]);

        let a = set(&[&[0.0], &[1.0]]);
        let b = set(&[&[2.0], &[3.0]]);
        assert_eq!(
            cost_matrix(&a, &b).unwrap().entries(),
            &array![[2.0, 3.0], [1.0, 2.0]]
        );
    }

    #[test]
    fn cost_matrix_rejects_dimension_mismatch() {
        let a = set(&[&[0.0]]);
        let b = set(&[&[0.0, 1.0]]);
        assert!(matches!(
            cost_matrix(&a, &b),
            Err(Error::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn non_finite_coordinates_rejected() {
        let err = WeightedPointSet::from_rows(&[vec![0.0, f64::NAN]], None).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
        let err = WeightedPointSet::from_rows(&[vec![f64::INFINITY]], None).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn weights_renormalized_or_rejected() {
        let pts = array![[0.0], [1.0]];
        let s = WeightedPointSet::new(pts.clone(), vec![0.5, 0.5 + 4e-7]).unwrap();
        assert!((s.weights().sum() - 1.0).abs() < 1e-15);
        assert!(WeightedPointSet::new(pts.clone(), vec![0.5, 0.6]).is_err());
        assert!(WeightedPointSet::new(pts.clone(), vec![1.5, -0.5]).is_err());
        assert!(WeightedPointSet::new(pts, vec![1.0]).is_err());
    }

    #[test]
    fn transport_cost_examples() {
        let p = FlowPlan::new((1, 1), vec![(0, 0, 1.0)]).unwrap();
        let o = set(&[&[0.0, 0.0]]);
        let q = set(&[&[3.0, 4.0]]);
        assert_eq!(
            transport_cost(&p, &cost_matrix(&o, &q).unwrap()).unwrap(),
            5.0
        );

        let a = set(&[&[0.0], &[1.0], &[7.0]]);
        let diag = FlowPlan::new((3, 3), (0..3).map(|i| (i, i, 1.0 / 3.0)).collect()).unwrap();
        assert_eq!(
            transport_cost(&diag, &cost_matrix(&a, &a).unwrap()).unwrap(),
            0.0
        );

        let plan = FlowPlan::new(
            (2, 3),
            vec![
                (0, 0, 1.0 / 3.0),
                (0, 1, 1.0 / 6.0),
                (1, 1, 1.0 / 6.0),
                (1, 2, 1.0 / 3.0),
            ],
        )
        .unwrap();
        let a = set(&[&[0.0], &[1.0]]);
        let b = set(&[&[2.0], &[3.0], &[4.0]]);
        let c = transport_cost(&plan, &cost_matrix(&a, &b).unwrap()).unwrap();
        assert!((c - 2.5).abs() < 1e-15);
    }

    #[test]
    fn transport_cost_shape_mismatch() {
        let p = FlowPlan::new((2, 2), vec![(1, 1, 1.0)]).unwrap();
        let a = set(&[&[0.0]]);
        assert!(transport_cost(&p, &cost_matrix(&a, &a).unwrap()).is_err());
    }

    #[test]
    fn plan_construction_checks() {
        assert!(FlowPlan::new((1, 1), vec![(0, 1, 1.0)]).is_err());
        assert!(FlowPlan::new((2, 2), vec![(0, 0, 0.0)]).is_err());
        assert!(FlowPlan::new((2, 2), vec![(0, 0, 0.5), (0, 0, 0.5)]).is_err());
    }

    #[test]
    fn validate_plan_diagonal_and_violation() {
        let u = vec![0.5, 0.5];
        let diag = FlowPlan::new((2, 2), vec![(0, 0, 0.5), (1, 1, 0.5)]).unwrap();
        assert!(validate_plan(&diag, &u, &u).valid);

        let short = FlowPlan::new((2, 2), vec![(0, 0, 0.4), (1, 1, 0.5)]).unwrap();
        let diag = validate_plan(&short, &u, &u);
        assert!(!diag.valid);
        let row = diag.worst_row.unwrap();
        assert_eq!(row.index, 0);
        assert_eq!(row.marginal, Marginal::Row);
        assert!(diag.message.unwrap().contains("row 0"));
    }

    #[test]
    fn median_and_transpose() {
        let a = set(&[&[0.0], &[1.0]]);
        let b = set(&[&[2.0], &[3.0], &[5.0]]);
        let c = cost_matrix(&a, &b).unwrap();
        assert_eq!(c.median(), 2.0);
        assert_eq!(
            c.transpose().entries(),
            cost_matrix(&b, &a).unwrap().entries()
        );
    }
}
