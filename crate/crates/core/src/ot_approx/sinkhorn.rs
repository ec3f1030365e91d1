use ndarray::Array2;

use crate::error::{Error, Result};
use crate::measures::{cost_matrix, CostMatrix, FlowPlan, WeightedPointSet};

/// The log-domain iteration is used when `epsilon` falls below this fraction
/// of the median ground cost.
pub const LOG_DOMAIN_RATIO: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornParams {
    pub epsilon: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self {
            epsilon: 10.0,
            max_iters: 200,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    /// `<P, D>` of the returned plan; the entropy term is not included.
    pub value: f64,
    pub plan: FlowPlan,
    pub converged: bool,
    pub iterations: usize,
    /// L1 row-marginal error of the scaled plan before rounding.
    pub marginal_error: f64,
    pub log_domain: bool,
}

/// Entropic OT between two point sets with Euclidean ground cost.
pub fn sinkhorn(
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    params: SinkhornParams,
) -> Result<SinkhornResult> {
    let cost = cost_matrix(a, b)?;
    sinkhorn_with_cost(
        a.weights().as_slice().unwrap(),
        b.weights().as_slice().unwrap(),
        &cost,
        params,
    )
}

/// Sinkhorn scaling on an explicit cost matrix.
///
/// The scaled plan is projected onto the transport polytope with the
/// rounding step of Altschuler, Weed and Rigollet (2017), so the returned
/// plan satisfies both marginals up to floating-point error regardless of
/// convergence. `converged` reports whether the scaled plan itself reached
/// `tol` before rounding.
pub fn sinkhorn_with_cost(
    a: &[f64],
    b: &[f64],
    cost: &CostMatrix,
    params: SinkhornParams,
) -> Result<SinkhornResult> {
    if !params.epsilon.is_finite() || params.epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {}",
            params.epsilon
        )));
    }
    if params.tol.is_nan() || params.tol < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tol must be non-negative, got {}",
            params.tol
        )));
    }
    let d = cost.entries();
    if (a.len(), b.len()) != d.dim() {
        return Err(Error::ShapeMismatch {
            expected: d.dim(),
            got: (a.len(), b.len()),
        });
    }
    let log_domain = params.epsilon < LOG_DOMAIN_RATIO * cost.median();
    let scaled = if log_domain {
        None
    } else {
        scaling_iterations(a, b, d, params).filter(|s| s.plan.iter().all(|x| x.is_finite()))
    };
    let (scaled, log_domain) = match scaled {
        Some(s) => (s, false),
        // kernel underflow: retry with stabilized potentials
        None => (log_iterations(a, b, d, params), true),
    };
    let plan = round_to_polytope(scaled.plan, a, b);
    let plan = FlowPlan::from_dense(&plan);
    let value = plan.entries().iter().map(|&(i, j, m)| m * d[[i, j]]).sum();
    Ok(SinkhornResult {
        value,
        plan,
        converged: scaled.error < params.tol,
        iterations: scaled.iterations,
        marginal_error: scaled.error,
        log_domain,
    })
}

struct Scaled {
    plan: Array2<f64>,
    iterations: usize,
    error: f64,
}

fn scaling_iterations(a: &[f64], b: &[f64], d: &Array2<f64>, p: SinkhornParams) -> Option<Scaled> {
    let (m, n) = d.dim();
    let k = d.mapv(|c| (-c / p.epsilon).exp());
    let mut u = vec![1.0; m];
    let mut v = vec![1.0; n];
    let mut iterations = 0;
    let mut error = f64::INFINITY;
    while iterations < p.max_iters {
        for i in 0..m {
            let kv: f64 = k.row(i).iter().zip(&v).map(|(x, y)| x * y).sum();
            u[i] = if a[i] == 0.0 { 0.0 } else { a[i] / kv };
        }
        for j in 0..n {
            let ku: f64 = k.column(j).iter().zip(&u).map(|(x, y)| x * y).sum();
            v[j] = if b[j] == 0.0 { 0.0 } else { b[j] / ku };
        }
        iterations += 1;
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return None;
        }
        // columns are exact after the v update; rows carry the error
        error = (0..m)
            .map(|i| {
                let r: f64 = k.row(i).iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() * u[i];
                (r - a[i]).abs()
            })
            .sum();
        if error < p.tol {
            break;
        }
    }
    let plan = Array2::from_shape_fn((m, n), |(i, j)| u[i] * k[[i, j]] * v[j]);
    Some(Scaled {
        plan,
        iterations,
        error,
    })
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn log_iterations(a: &[f64], b: &[f64], d: &Array2<f64>, p: SinkhornParams) -> Scaled {
    let (m, n) = d.dim();
    let eps = p.epsilon;
    let log_a: Vec<f64> = a.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = b.iter().map(|x| x.ln()).collect();
    let mut f = vec![0.0; m];
    let mut g = vec![0.0; n];
    let mut iterations = 0;
    let mut error = f64::INFINITY;
    let log_plan = |f: &[f64], g: &[f64], i: usize, j: usize| (f[i] + g[j] - d[[i, j]]) / eps;
    while iterations < p.max_iters {
        for i in 0..m {
            f[i] = if a[i] == 0.0 {
                f64::NEG_INFINITY
            } else {
                eps * (log_a[i] - log_sum_exp((0..n).map(|j| (g[j] - d[[i, j]]) / eps)))
            };
        }
        for j in 0..n {
            g[j] = if b[j] == 0.0 {
                f64::NEG_INFINITY
            } else {
                eps * (log_b[j] - log_sum_exp((0..m).map(|i| (f[i] - d[[i, j]]) / eps)))
            };
        }
        iterations += 1;
        error = (0..m)
            .map(|i| {
                let r = log_sum_exp((0..n).map(|j| log_plan(&f, &g, i, j))).exp();
                (r - a[i]).abs()
            })
            .sum();
        if error < p.tol {
            break;
        }
    }
    let plan = Array2::from_shape_fn((m, n), |(i, j)| log_plan(&f, &g, i, j).exp());
    Scaled {
        plan,
        iterations,
        error,
    }
}

/// Moves an approximately feasible non-negative plan onto
/// `{P >= 0 : P 1 = a, P^T 1 = b}`, changing it by at most twice its
/// marginal error in L1.
pub fn round_to_polytope(mut plan: Array2<f64>, a: &[f64], b: &[f64]) -> Array2<f64> {
    for (mut row, &ai) in plan.rows_mut().into_iter().zip(a) {
        let r = row.sum();
        if r > ai {
            row.mapv_inplace(|x| x * (ai / r));
        }
    }
    for (mut col, &bj) in plan.columns_mut().into_iter().zip(b) {
        let c = col.sum();
        if c > bj {
            col.mapv_inplace(|x| x * (bj / c));
        }
    }
    let err_r: Vec<f64> = plan
        .rows()
        .into_iter()
        .zip(a)
        .map(|(r, ai)| (ai - r.sum()).max(0.0))
        .collect();
    let err_c: Vec<f64> = plan
        .columns()
        .into_iter()
        .zip(b)
        .map(|(c, bj)| (bj - c.sum()).max(0.0))
        .collect();
    let total: f64 = err_c.iter().sum();
    if total > 0.0 {
        for (i, er) in err_r.iter().enumerate() {
            if *er == 0.0 {
                continue;
            }
            for (j, ec) in err_c.iter().enumerate() {
                plan[[i, j]] += er * ec / total;
            }
        }
    }
    plan
}
