//! Exact earth mover's distance: min-cost flow, one-dimensional closed
//! forms and greedy north-west-corner flow matching.

mod network_simplex;

use crate::error::{Error, Result};
use crate::measures::{
    cost_matrix, normalize_weights, transport_cost, FlowPlan, WeightedPointSet, SIMPLEX_TOL,
};

pub use network_simplex::PIVOT_TOL;

/// Remaining masses at or below this value count as exhausted during greedy
/// matching, so rounding residue never produces extra plan entries.
pub const ZERO_MASS: f64 = 1e-15;

/// Optimal value and a basic optimal plan of the transport problem.
#[derive(Debug, Clone)]
pub struct EmdSolution {
    pub value: f64,
    pub plan: FlowPlan,
    pub pivots: usize,
}

/// Exact EMD between two weighted point sets with Euclidean ground cost.
///
/// The plan is a vertex of the transport polytope and so has at most
/// `m + n - 1` non-zero entries. When several plans are optimal any one of
/// them may be returned.
pub fn emd_exact(a: &WeightedPointSet, b: &WeightedPointSet) -> Result<EmdSolution> {
    let cost = cost_matrix(a, b)?;
    let wa = a.weights().to_vec();
    let wb = b.weights().to_vec();
    let sol = network_simplex::solve_transport(&wa, &wb, cost.entries())?;
    let plan = FlowPlan::from_trusted(cost.shape(), sol.entries);
    let value = transport_cost(&plan, &cost)?;
    Ok(EmdSolution {
        value,
        plan,
        pivots: sol.iterations,
    })
}

/// Exact transport between two weight vectors for an arbitrary cost matrix.
pub fn emd_with_cost(
    a: &[f64],
    b: &[f64],
    cost: &crate::measures::CostMatrix,
) -> Result<EmdSolution> {
    let wa = normalize_weights(a)?;
    let wb = normalize_weights(b)?;
    let sol = network_simplex::solve_transport(&wa, &wb, cost.entries())?;
    let plan = FlowPlan::from_trusted(cost.shape(), sol.entries);
    let value = transport_cost(&plan, cost)?;
    Ok(EmdSolution {
        value,
        plan,
        pivots: sol.iterations,
    })
}

/// One-dimensional EMD between equal-size uniform samples:
/// `(1/n) * sum_i |x_(i) - y_(i)|` over order statistics.
///
/// Inputs need not be pre-sorted.
pub fn emd_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("one-dimensional sample"));
    }
    if a.len() != b.len() {
        return Err(Error::Unsupported(format!(
            "closed-form 1d EMD needs equal sample counts ({} vs {}); use emd_1d_general or greedy_flow_matching",
            a.len(),
            b.len()
        )));
    }
    if let Some(bad) = a.iter().chain(b).position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { row: bad, col: 0 });
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let total: f64 = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum();
    Ok(total / x.len() as f64)
}

/// [`emd_1d`] on one-dimensional point sets, which must carry uniform weights.
pub fn emd_1d_measures(a: &WeightedPointSet, b: &WeightedPointSet) -> Result<f64> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(Error::Unsupported(
            "emd_1d needs one-dimensional inputs".into(),
        ));
    }
    if !a.has_uniform_weights() || !b.has_uniform_weights() {
        return Err(Error::Unsupported(
            "closed-form 1d EMD needs uniform weights; use emd_1d_general or greedy_flow_matching"
                .into(),
        ));
    }
    let xa: Vec<f64> = a.points().column(0).to_vec();
    let xb: Vec<f64> = b.points().column(0).to_vec();
    emd_1d(&xa, &xb)
}

/// Greedy flow matching (north-west-corner rule) between two simplex
/// weight vectors taken in the given order.
///
/// Each step moves `min(a_i, b_j)` from `i` to `j` and advances whichever
/// side is exhausted, so the plan is feasible, has at most `m + n - 1`
/// entries and is produced in at most `m + n - 1` steps.
pub fn greedy_flow_matching(a: &[f64], b: &[f64]) -> Result<FlowPlan> {
    let a = normalize_weights(a)?;
    let b = normalize_weights(b)?;
    Ok(greedy_unchecked(&a, &b))
}

pub(crate) fn greedy_unchecked(a: &[f64], b: &[f64]) -> FlowPlan {
    let (m, n) = (a.len(), b.len());
    let mut entries = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0], b[0]);
    loop {
        while ra <= ZERO_MASS {
            i += 1;
            if i == m {
                break;
            }
            ra = a[i];
        }
        while rb <= ZERO_MASS {
            j += 1;
            if j == n {
                break;
            }
            rb = b[j];
        }
        if i == m || j == n {
            break;
        }
        let eta = ra.min(rb);
        entries.push((i, j, eta));
        ra -= eta;
        rb -= eta;
    }
    FlowPlan::from_trusted((m, n), entries)
}

/// Value and plan of one-dimensional EMD with arbitrary sizes and weights.
#[derive(Debug, Clone)]
pub struct Emd1dSolution {
    pub value: f64,
    pub plan: FlowPlan,
}

/// Sorts both sides by coordinate (stable, ties by original index), matches
/// the sorted weights greedily and prices the plan with `|x - y|`.
///
/// The returned plan is indexed by the original point order.
pub fn emd_1d_general(a: &WeightedPointSet, b: &WeightedPointSet) -> Result<Emd1dSolution> {
    if a.dim() != 1 || b.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "emd_1d_general needs one-dimensional inputs, got d = {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let xa = a.points().column(0);
    let xb = b.points().column(0);
    let oa = sorted_order(
        xa.as_slice_memory_order()
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| xa.to_vec()),
    );
    let ob = sorted_order(xb.to_vec());
    let wa: Vec<f64> = oa.iter().map(|&i| a.weights()[i]).collect();
    let wb: Vec<f64> = ob.iter().map(|&j| b.weights()[j]).collect();
    let sorted_plan = greedy_unchecked(&wa, &wb);
    let mut value = 0.0;
    let entries: Vec<(usize, usize, f64)> = sorted_plan
        .entries()
        .iter()
        .map(|&(si, sj, mass)| {
            let (i, j) = (oa[si], ob[sj]);
            value += mass * (xa[i] - xb[j]).abs();
            (i, j, mass)
        })
        .collect();
    Ok(Emd1dSolution {
        value,
        plan: FlowPlan::from_trusted((a.len(), b.len()), entries),
    })
}

/// Indices that sort `x` ascending; stable, so ties keep index order.
pub(crate) fn sorted_order(x: Vec<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&p, &q| x[p].total_cmp(&x[q]));
    idx
}

/// Closed-form 2-Wasserstein distance between Gaussians with diagonal
/// covariances: `sqrt(|m1 - m2|^2 + sum_i (sqrt(v1_i) - sqrt(v2_i))^2)`.
///
/// `var1` and `var2` hold variances. Used as a reference value in tests.
pub fn gaussian_w2_oracle(mean1: &[f64], var1: &[f64], mean2: &[f64], var2: &[f64]) -> Result<f64> {
    let d = mean1.len();
    for len in [var1.len(), mean2.len(), var2.len()] {
        if len != d {
            return Err(Error::DimensionMismatch(d, len));
        }
    }
    if let Some(v) = var1.iter().chain(var2).find(|v| v.is_nan() || **v < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variances must be non-negative, got {v}"
        )));
    }
    let mean_term: f64 = mean1.iter().zip(mean2).map(|(x, y)| (x - y).powi(2)).sum();
    let cov_term: f64 = var1
        .iter()
        .zip(var2)
        .map(|(p, q)| (p.sqrt() - q.sqrt()).powi(2))
        .sum();
    Ok((mean_term + cov_term).sqrt())
}

/// True when `w` is a simplex vector within [`SIMPLEX_TOL`].
pub fn is_simplex(w: &[f64]) -> bool {
    !w.is_empty()
        && w.iter().all(|x| *x >= 0.0 && x.is_finite())
        && (w.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::validate_plan;

    fn pts(rows: &[&[f64]]) -> WeightedPointSet {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        WeightedPointSet::from_rows(&rows, None).unwrap()
    }

    #[test]
    fn emd_identical_is_zero() {
        let a = pts(&[&[0.0, 1.0], &[2.0, -1.0], &[3.0, 3.0]]);
        assert!(emd_exact(&a, &a).unwrap().value.abs() <= 1e-12);
    }

    #[test]
    fn emd_small_examples() {
        let a = pts(&[&[0.0], &[1.0]]);
        let b = pts(&[&[2.0], &[3.0]]);
        assert!((emd_exact(&a, &b).unwrap().value - 2.0).abs() < 1e-12);

        let a = pts(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let b = pts(&[&[0.0, 1.0], &[1.0, 1.0]]);
        let sol = emd_exact(&a, &b).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
        assert!(sol.plan.nnz() <= 3);
    }

    #[test]
    fn emd_1d_examples() {
        assert_eq!(emd_1d(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(emd_1d(&[0.0, 1.0], &[2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(emd_1d(&[1.0, 0.0], &[3.0, 2.0]).unwrap(), 2.0);
        assert!(matches!(
            emd_1d(&[0.0], &[1.0, 2.0]),
            Err(Error::Unsupported(msg)) if msg.contains("greedy")
        ));
        let a = WeightedPointSet::from_1d(&[0.0, 1.0], Some(vec![0.3, 0.7])).unwrap();
        let b = WeightedPointSet::from_1d(&[0.0, 1.0], None).unwrap();
        assert!(emd_1d_measures(&a, &b).is_err());
    }

    #[test]
    fn greedy_examples() {
        let p = greedy_flow_matching(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(p.entries(), &[(0, 0, 0.5), (1, 1, 0.5)]);

        let third = 1.0 / 3.0;
        let p = greedy_flow_matching(&[1.0], &[third, third, third]).unwrap();
        assert_eq!(p.entries(), &[(0, 0, third), (0, 1, third), (0, 2, third)]);

        let p = greedy_flow_matching(&[0.5, 0.5], &[third, third, third]).unwrap();
        let e = p.entries();
        assert_eq!(e.len(), 4);
        let expected = [
            (0, 0, third),
            (0, 1, 1.0 / 6.0),
            (1, 1, 1.0 / 6.0),
            (1, 2, third),
        ];
        for (got, want) in e.iter().zip(expected) {
            assert_eq!((got.0, got.1), (want.0, want.1));
            assert!((got.2 - want.2).abs() < 1e-15);
        }
        assert!(validate_plan(&p, &[0.5, 0.5], &[third; 3]).valid);
    }

    #[test]
    fn greedy_skips_zero_weights() {
        let p = greedy_flow_matching(&[0.0, 1.0, 0.0], &[0.5, 0.0, 0.5]).unwrap();
        assert_eq!(p.entries(), &[(1, 0, 0.5), (1, 2, 0.5)]);
    }

    #[test]
    fn emd_1d_general_examples() {
        let a = WeightedPointSet::from_1d(&[0.0, 4.0, 1.0], None).unwrap();
        assert_eq!(emd_1d_general(&a, &a).unwrap().value, 0.0);

        let a = WeightedPointSet::from_1d(&[0.0], None).unwrap();
        let b = WeightedPointSet::from_1d(&[1.0, 3.0], None).unwrap();
        let s = emd_1d_general(&a, &b).unwrap();
        assert_eq!(s.value, 2.0);
        assert!(emd_1d_general(&pts(&[&[0.0, 1.0]]), &pts(&[&[0.0, 1.0]])).is_err());
    }

    #[test]
    fn gaussian_oracle_examples() {
        assert_eq!(
            gaussian_w2_oracle(&[1.0], &[2.0], &[1.0], &[2.0]).unwrap(),
            0.0
        );
        assert_eq!(
            gaussian_w2_oracle(&[0.0], &[1.0], &[3.0], &[1.0]).unwrap(),
            3.0
        );
        assert_eq!(
            gaussian_w2_oracle(&[0.0], &[1.0], &[0.0], &[4.0]).unwrap(),
            1.0
        );
        assert!(gaussian_w2_oracle(&[0.0], &[-1.0], &[0.0], &[1.0]).is_err());
    }
}
