//! Cophenetic correlation between a label-tree metric and class distances
//! in feature space, with analytic subgradients.

mod batch;
mod cache;
mod gradcheck;
mod rho;

use std::collections::BTreeMap;

use ndarray::Array2;

pub use batch::{flow_weights, ClassBatch, ClassData, FlowWeightScheme};
pub use cache::{plan_cache_lookup, PlanCache};
pub use gradcheck::{
    gradcheck_batch, gradcheck_tree, gradient_check, GradCheckConfig, GradCheckReport,
    GRADCHECK_TOL,
};
pub use rho::{
    pairwise_rho, pairwise_rho_with_cache, plan_gradient, point_set_distance, Backend, ClassPair,
    Distance, RhoParams,
};

use crate::error::{Error, Result};
use crate::trees::LabelTree;
use rho::PairEvaluator;

/// A list counts as constant when its centered sum of squares is below this
/// fraction of its raw sum of squares.
pub const DEGENERATE_RTOL: f64 = 1e-24;

/// Correlation value; `degenerate` marks a constant input list, in which
/// case `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpccValue {
    pub value: f64,
    pub degenerate: bool,
}

struct Centered {
    x: Vec<f64>,
    y: Vec<f64>,
    sxx: f64,
    syy: f64,
    sxy: f64,
    degenerate: bool,
}

fn center(x: &[f64], y: &[f64]) -> Centered {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let xc: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let yc: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sxx: f64 = xc.iter().map(|v| v * v).sum();
    let syy: f64 = yc.iter().map(|v| v * v).sum();
    let sxy: f64 = xc.iter().zip(&yc).map(|(a, b)| a * b).sum();
    let flat = |s: f64, raw: &[f64]| {
        let scale: f64 = raw.iter().map(|v| v * v).sum();
        s <= DEGENERATE_RTOL * scale
    };
    let degenerate = flat(sxx, x) || flat(syy, y);
    Centered {
        x: xc,
        y: yc,
        sxx,
        syy,
        sxy,
        degenerate,
    }
}

/// Pearson correlation of two equally long lists.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CpccValue> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "correlation needs at least two pairs, got {}",
            x.len()
        )));
    }
    if let Some(i) = x.iter().chain(y).position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i % x.len(),
            col: i / x.len(),
        });
    }
    let c = center(x, y);
    if c.degenerate {
        return Ok(CpccValue {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(CpccValue {
        value: (c.sxy / (c.sxx * c.syy).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// `d r / d y_k` of the Pearson correlation `r(x, y)`; zero when degenerate.
fn pearson_gradient_y(x: &[f64], y: &[f64]) -> Vec<f64> {
    let c = center(x, y);
    if c.degenerate {
        return vec![0.0; y.len()];
    }
    let denom = (c.sxx * c.syy).sqrt();
    let r = c.sxy / denom;
    c.x.iter()
        .zip(&c.y)
        .map(|(xt, yt)| xt / denom - r * yt / c.syy)
        .collect()
}

/// CPCC of tree distances `t` against feature distances `rho` over the
/// same set of class pairs.
pub fn cpcc(t: &BTreeMap<ClassPair, f64>, rho: &BTreeMap<ClassPair, f64>) -> Result<CpccValue> {
    if t.len() != rho.len() || t.keys().zip(rho.keys()).any(|(a, b)| a != b) {
        return Err(Error::InvalidParameter(
            "tree and feature distances must cover the same class pairs".into(),
        ));
    }
    let x: Vec<f64> = t.values().copied().collect();
    let y: Vec<f64> = rho.values().copied().collect();
    pearson(&x, &y)
}

/// `t(u, v)` for every class pair of `batch`.
pub fn tree_distances(batch: &ClassBatch, tree: &LabelTree) -> Result<BTreeMap<ClassPair, f64>> {
    batch
        .pairs()
        .into_iter()
        .map(|(u, v)| {
            let d = tree.distance(&u, &v)?;
            Ok(((u, v), d))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub u: String,
    pub v: String,
    pub t: f64,
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub struct CpccResult {
    pub value: f64,
    pub degenerate: bool,
    pub backend: Backend,
    pub pairs: Vec<PairRecord>,
    /// `d CPCC / d Z_c` per class, when requested.
    pub gradients: Option<BTreeMap<String, Array2<f64>>>,
}

/// CPCC of `batch` under `backend`, optionally with its subgradient.
///
/// Plans are treated as constants when differentiating.
pub fn evaluate_cpcc(
    batch: &ClassBatch,
    tree: &LabelTree,
    backend: Backend,
    params: &RhoParams,
    with_gradient: bool,
) -> Result<CpccResult> {
    let cache = PlanCache::new();
    evaluate_cpcc_with_cache(batch, tree, backend, params, with_gradient, &cache)
}

pub fn evaluate_cpcc_with_cache(
    batch: &ClassBatch,
    tree: &LabelTree,
    backend: Backend,
    params: &RhoParams,
    with_gradient: bool,
    cache: &PlanCache,
) -> Result<CpccResult> {
    use rayon::prelude::*;

    let t = tree_distances(batch, tree)?;
    let eval = PairEvaluator::new(batch, backend, Some(tree), *params, cache)?;
    let pairs: Vec<ClassPair> = t.keys().cloned().collect();
    let terms = pairs
        .par_iter()
        .map(|(u, v)| eval.evaluate(u, v, with_gradient))
        .collect::<Result<Vec<_>>>()?;

    let tv: Vec<f64> = t.values().copied().collect();
    let rv: Vec<f64> = terms.iter().map(|p| p.rho).collect();
    let value = pearson(&tv, &rv)?;

    let gradients = with_gradient.then(|| {
        let dr = pearson_gradient_y(&tv, &rv);
        let mut grads: BTreeMap<String, Array2<f64>> = batch
            .classes()
            .map(|(l, c)| (l.to_string(), Array2::zeros(c.features().dim())))
            .collect();
        for (((u, v), term), w) in pairs.iter().zip(&terms).zip(&dr) {
            let (gu, gv) = term.grad.as_ref().expect("requested");
            grads.get_mut(u).expect("batch class").scaled_add(*w, gu);
            grads.get_mut(v).expect("batch class").scaled_add(*w, gv);
        }
        grads
    });

    let records = pairs
        .into_iter()
        .zip(tv.iter().zip(&rv))
        .map(|((u, v), (&t, &rho))| PairRecord { u, v, t, rho })
        .collect();
    Ok(CpccResult {
        value: value.value,
        degenerate: value.degenerate,
        backend,
        pairs: records,
        gradients,
    })
}

/// `ce_loss + lambda * (-CPCC)`: a positive `lambda` rewards feature
/// geometry that follows the hierarchy.
pub fn cpcc_regularized_loss(
    batch: &ClassBatch,
    tree: &LabelTree,
    backend: Backend,
    params: &RhoParams,
    lambda: f64,
    ce_loss: f64,
) -> Result<f64> {
    if lambda == 0.0 {
        return Ok(ce_loss);
    }
    let r = evaluate_cpcc(batch, tree, backend, params, false)?;
    Ok(regularized_loss(ce_loss, lambda, r.value))
}

/// The arithmetic of [`cpcc_regularized_loss`] for a known CPCC value.
pub fn regularized_loss(ce_loss: f64, lambda: f64, cpcc: f64) -> f64 {
    ce_loss + lambda * (-cpcc)
}

/// `d CPCC / d Z_c` for every class, with transport plans held fixed.
pub fn emd_cpcc_subgradient(
    batch: &ClassBatch,
    tree: &LabelTree,
    backend: Backend,
    params: &RhoParams,
) -> Result<BTreeMap<String, Array2<f64>>> {
    let r = evaluate_cpcc(batch, tree, backend, params, true)?;
    Ok(r.gradients.expect("requested"))
}
