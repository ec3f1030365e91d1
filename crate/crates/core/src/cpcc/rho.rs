use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;

use super::batch::ClassBatch;
use super::cache::PlanCache;
use crate::error::{Error, Result};
use crate::measures::{euclidean, FlowPlan, WeightedPointSet};
use crate::ot_approx::{
    fast_flowtree, fast_flowtree_sets, flowtree, projection_direction, sinkhorn, support_cost, twd,
    twd_classes, SinkhornParams, DEFAULT_PROJECTIONS,
};
use crate::ot_exact::{emd_1d_general, emd_exact};
use crate::trees::{AugmentedTree, LabelTree};

/// An unordered class pair stored as `(u, v)` with `u < v`.
pub type ClassPair = (String, String);

/// Class-distance backends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Backend {
    /// Distance between weighted class centroids.
    L2,
    Emd,
    Sinkhorn,
    Swd,
    Twd,
    FlowTree,
    FastFt,
}

impl Backend {
    pub const ALL: [Backend; 7] = [
        Backend::L2,
        Backend::Emd,
        Backend::Sinkhorn,
        Backend::Swd,
        Backend::Twd,
        Backend::FlowTree,
        Backend::FastFt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Backend::L2 => "l2",
            Backend::Emd => "emd",
            Backend::Sinkhorn => "sinkhorn",
            Backend::Swd => "swd",
            Backend::Twd => "twd",
            Backend::FlowTree => "flowtree",
            Backend::FastFt => "fastft",
        }
    }

    /// Backends that need the label tree to compare classes.
    pub fn requires_tree(self) -> bool {
        matches!(self, Backend::Twd | Backend::FastFt)
    }

    /// Backends whose value is `<P, D>` for some transport plan `P`.
    pub fn produces_plan(self) -> bool {
        matches!(
            self,
            Backend::Emd | Backend::Sinkhorn | Backend::FlowTree | Backend::FastFt
        )
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Backend::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown method `{s}` (expected one of l2, emd, sinkhorn, swd, twd, flowtree, fastft)"
                ))
            })
    }
}

/// Tuning knobs shared by the backends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoParams {
    pub sinkhorn: SinkhornParams,
    pub projections: usize,
    /// Seed for SWD directions and FlowTree / TWD quadtree shifts.
    pub seed: u64,
}

impl Default for RhoParams {
    fn default() -> Self {
        Self {
            sinkhorn: SinkhornParams::default(),
            projections: DEFAULT_PROJECTIONS,
            seed: 0,
        }
    }
}

/// A distance between two point sets, with the plan when there is one.
#[derive(Debug, Clone)]
pub struct Distance {
    pub value: f64,
    pub plan: Option<FlowPlan>,
}

/// Distance between two point sets under `backend`.
///
/// Without a label tree, `twd` runs on a random-shift quadtree over both
/// sets and `fastft` matches the stored weights greedily in sample order.
pub fn point_set_distance(
    backend: Backend,
    a: &WeightedPointSet,
    b: &WeightedPointSet,
    params: &RhoParams,
) -> Result<Distance> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let with_plan = |value, plan| {
        Ok(Distance {
            value,
            plan: Some(plan),
        })
    };
    match backend {
        Backend::L2 => Ok(Distance {
            value: euclidean(a.mean().view(), b.mean().view()),
            plan: None,
        }),
        Backend::Emd => {
            let s = emd_exact(a, b)?;
            with_plan(s.value, s.plan)
        }
        Backend::Sinkhorn => {
            let s = sinkhorn(a, b, params.sinkhorn)?;
            with_plan(s.value, s.plan)
        }
        Backend::Swd => Ok(Distance {
            value: crate::ot_approx::swd(a, b, params.projections, params.seed)?,
            plan: None,
        }),
        Backend::Twd => Ok(Distance {
            value: twd(a, b, params.seed)?,
            plan: None,
        }),
        Backend::FlowTree => {
            let s = flowtree(a, b, params.seed)?;
            with_plan(s.value, s.plan)
        }
        Backend::FastFt => {
            let s = fast_flowtree_sets(a, b)?;
            with_plan(s.value, s.plan)
        }
    }
}

/// Value of one class pair and, on request, `d rho / d Z_u` and `d rho / d Z_v`.
pub(crate) struct PairTerm {
    pub rho: f64,
    pub grad: Option<(Array2<f64>, Array2<f64>)>,
}

/// Shared state for evaluating many class pairs.
pub(crate) struct PairEvaluator<'a> {
    batch: &'a ClassBatch,
    backend: Backend,
    params: RhoParams,
    augmented: Option<AugmentedTree>,
    cache: &'a PlanCache,
}

impl<'a> PairEvaluator<'a> {
    pub fn new(
        batch: &'a ClassBatch,
        backend: Backend,
        tree: Option<&LabelTree>,
        params: RhoParams,
        cache: &'a PlanCache,
    ) -> Result<Self> {
        if batch.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least two classes, got {}",
                batch.len()
            )));
        }
        let augmented = match (backend.requires_tree(), tree) {
            (true, None) => {
                return Err(Error::InvalidParameter(format!(
                    "the {backend} backend needs a label tree"
                )))
            }
            (true, Some(t)) => {
                let samples: BTreeMap<String, Vec<f64>> = batch
                    .classes()
                    .map(|(l, c)| (l.to_string(), c.weights().to_vec()))
                    .collect();
                Some(AugmentedTree::new(t, &samples)?)
            }
            (false, _) => None,
        };
        Ok(Self {
            batch,
            backend,
            params,
            augmented,
            cache,
        })
    }

    pub fn evaluate(&self, u: &str, v: &str, want_grad: bool) -> Result<PairTerm> {
        let cu = self.batch.class(u)?;
        let cv = self.batch.class(v)?;
        let (zu, zv) = (cu.features().view(), cv.features().view());
        let plan_term = |value: f64, plan: &FlowPlan| PairTerm {
            rho: value,
            grad: want_grad.then(|| plan_gradient(plan, zu, zv)),
        };
        match self.backend {
            Backend::L2 => {
                let (mu, mv) = (cu.centroid(), cv.centroid());
                let rho = euclidean(mu.view(), mv.view());
                let grad = want_grad.then(|| {
                    let dir = unit_or_zero(&mu - &mv, rho);
                    (
                        outer(cu.weights(), &dir, 1.0),
                        outer(cv.weights(), &dir, -1.0),
                    )
                });
                Ok(PairTerm { rho, grad })
            }
            Backend::Emd => {
                let s = emd_exact(&cu.measure(), &cv.measure())?;
                Ok(plan_term(s.value, &s.plan))
            }
            Backend::Sinkhorn => {
                let s = sinkhorn(&cu.measure(), &cv.measure(), self.params.sinkhorn)?;
                Ok(plan_term(s.value, &s.plan))
            }
            Backend::FlowTree => {
                let s = flowtree(&cu.measure(), &cv.measure(), self.params.seed)?;
                Ok(plan_term(s.value, &s.plan))
            }
            Backend::FastFt => {
                let tree = self.augmented.as_ref().expect("checked in new");
                if cu.has_uniform_weights() && cv.has_uniform_weights() {
                    let plan = self.cache.lookup(cu.len(), cv.len());
                    Ok(plan_term(support_cost(&plan, zu, zv), &plan))
                } else {
                    let s = fast_flowtree(tree, u, v, zu, zv)?;
                    Ok(plan_term(s.value, &s.plan))
                }
            }
            Backend::Twd => {
                if want_grad {
                    return Err(Error::Unsupported(
                        "twd on the augmented label tree does not depend on the features; no subgradient is defined".into(),
                    ));
                }
                let tree = self.augmented.as_ref().expect("checked in new");
                Ok(PairTerm {
                    rho: twd_classes(tree, u, v)?,
                    grad: None,
                })
            }
            Backend::Swd => self.swd_term(cu.measure(), cv.measure(), want_grad),
        }
    }

    fn swd_term(
        &self,
        a: WeightedPointSet,
        b: WeightedPointSet,
        want_grad: bool,
    ) -> Result<PairTerm> {
        let p = self.params.projections;
        if p == 0 {
            return Err(Error::InvalidParameter(
                "num_projections must be at least 1".into(),
            ));
        }
        let d = a.dim();
        let mut total = 0.0;
        let mut grad =
            want_grad.then(|| (Array2::zeros((a.len(), d)), Array2::zeros((b.len(), d))));
        for k in 0..p {
            let dir = projection_direction(d, self.params.seed, k);
            let (pa, pb) = (a.project(&dir)?, b.project(&dir)?);
            let s = emd_1d_general(&pa, &pb)?;
            total += s.value;
            if let Some((gu, gv)) = grad.as_mut() {
                let theta = Array1::from(dir);
                for &(i, j, m) in s.plan.entries() {
                    let diff = pa.points()[[i, 0]] - pb.points()[[j, 0]];
                    let sign = if diff > 0.0 {
                        1.0
                    } else if diff < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    let scale = m * sign / p as f64;
                    gu.row_mut(i).scaled_add(scale, &theta);
                    gv.row_mut(j).scaled_add(-scale, &theta);
                }
            }
        }
        Ok(PairTerm {
            rho: total / p as f64,
            grad,
        })
    }
}

fn unit_or_zero(v: Array1<f64>, norm: f64) -> Array1<f64> {
    if norm > 0.0 {
        v / norm
    } else {
        v * 0.0
    }
}

fn outer(weights: &[f64], dir: &Array1<f64>, sign: f64) -> Array2<f64> {
    let mut g = Array2::zeros((weights.len(), dir.len()));
    for (mut row, &w) in g.rows_mut().into_iter().zip(weights) {
        row.scaled_add(sign * w, dir);
    }
    g
}

/// `d <P, D> / d Z_u` and `d <P, D> / d Z_v` with the plan held fixed.
/// Pairs of coincident points contribute zero.
pub fn plan_gradient(
    plan: &FlowPlan,
    zu: ArrayView2<'_, f64>,
    zv: ArrayView2<'_, f64>,
) -> (Array2<f64>, Array2<f64>) {
    let mut gu = Array2::zeros(zu.dim());
    let mut gv = Array2::zeros(zv.dim());
    for &(i, j, m) in plan.entries() {
        let diff = &zu.row(i) - &zv.row(j);
        let norm = diff.dot(&diff).sqrt();
        if norm > 0.0 {
            gu.row_mut(i).scaled_add(m / norm, &diff);
            gv.row_mut(j).scaled_add(-m / norm, &diff);
        }
    }
    (gu, gv)
}

/// `rho(u, v)` for every unordered class pair of `batch`.
pub fn pairwise_rho(
    batch: &ClassBatch,
    backend: Backend,
    tree: Option<&LabelTree>,
    params: &RhoParams,
) -> Result<BTreeMap<ClassPair, f64>> {
    let cache = PlanCache::new();
    pairwise_rho_with_cache(batch, backend, tree, params, &cache)
}

/// [`pairwise_rho`] reusing a caller-owned plan cache for `fastft`.
pub fn pairwise_rho_with_cache(
    batch: &ClassBatch,
    backend: Backend,
    tree: Option<&LabelTree>,
    params: &RhoParams,
    cache: &PlanCache,
) -> Result<BTreeMap<ClassPair, f64>> {
    let eval = PairEvaluator::new(batch, backend, tree, *params, cache)?;
    batch
        .pairs()
        .into_par_iter()
        .map(|(u, v)| {
            let rho = eval.evaluate(&u, &v, false)?.rho;
            Ok(((u, v), rho))
        })
        .collect()
}
