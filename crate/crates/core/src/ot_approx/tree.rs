use std::collections::VecDeque;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::measures::{euclidean, FlowPlan, WeightedPointSet};
use crate::ot_exact::{greedy_unchecked, ZERO_MASS};
use crate::trees::{AugmentedTree, QuadTree, RootedTree};

/// A plan together with its Euclidean transport cost.
#[derive(Debug, Clone)]
pub struct TreeFlow {
    pub value: f64,
    pub plan: FlowPlan,
}

/// Sparse 0-1 ancestor matrix: for each leaf, the nodes on its path to the
/// root (itself included, root excluded since its edge weight is zero).
pub fn ancestor_columns<T: RootedTree + ?Sized>(tree: &T) -> Vec<(usize, Vec<usize>)> {
    (0..tree.node_count())
        .filter(|&v| tree.is_leaf(v))
        .map(|leaf| {
            let mut path = Vec::new();
            let mut v = leaf;
            while let Some(p) = tree.parent(v) {
                path.push(v);
                v = p;
            }
            (leaf, path)
        })
        .collect()
}

/// Dense ancestor matrix `B` with `B[v, leaf] = 1` when `v` lies on the path
/// from `leaf` to the root (root row included).
pub fn ancestor_matrix<T: RootedTree + ?Sized>(tree: &T) -> (Array2<f64>, Vec<usize>) {
    let cols = ancestor_columns(tree);
    let mut b = Array2::zeros((tree.node_count(), cols.len()));
    let mut leaves = Vec::with_capacity(cols.len());
    for (c, (leaf, path)) in cols.iter().enumerate() {
        leaves.push(*leaf);
        b[[0, c]] = 1.0;
        for &v in path {
            b[[v, c]] = 1.0;
        }
    }
    (b, leaves)
}

/// Tree Wasserstein distance `|| diag(w) B (a - b) ||_1`.
///
/// `a` and `b` are indexed by node id and may only put mass on leaves.
pub fn twd_closed_form<T: RootedTree + ?Sized>(tree: &T, a: &[f64], b: &[f64]) -> Result<f64> {
    let nodes = tree.node_count();
    if a.len() != nodes || b.len() != nodes {
        return Err(Error::DimensionMismatch(nodes, a.len().max(b.len())));
    }
    for v in 0..nodes {
        if (a[v] != 0.0 || b[v] != 0.0) && !tree.is_leaf(v) {
            return Err(Error::NotALeaf(v));
        }
    }
    // B (a - b), one sparse column per leaf
    let mut subtree = vec![0.0; nodes];
    for (leaf, path) in ancestor_columns(tree) {
        let diff = a[leaf] - b[leaf];
        if diff != 0.0 {
            for v in path {
                subtree[v] += diff;
            }
        }
    }
    Ok((0..nodes)
        .map(|v| tree.edge_weight(v) * subtree[v].abs())
        .sum())
}

/// TWD between point sets on a random-shift quadtree over their union.
pub fn twd(a: &WeightedPointSet, b: &WeightedPointSet, seed: u64) -> Result<f64> {
    let tree = QuadTree::new(&a.stack_points(b)?, seed);
    let mut wa = vec![0.0; tree.node_count()];
    let mut wb = vec![0.0; tree.node_count()];
    for (i, w) in a.weights().iter().enumerate() {
        wa[tree.point_node(i)] += w;
    }
    for (j, w) in b.weights().iter().enumerate() {
        wb[tree.point_node(a.len() + j)] += w;
    }
    twd_closed_form(&tree, &wa, &wb)
}

/// TWD between two classes on an augmented label tree: every unit of mass
/// travels between sample leaves of different classes, so the value is
/// `t(u, v) + 2` for `u != v`.
pub fn twd_classes(tree: &AugmentedTree, u: &str, v: &str) -> Result<f64> {
    let mut wa = vec![0.0; tree.node_count()];
    let mut wb = vec![0.0; tree.node_count()];
    for (&node, &w) in tree.sample_nodes(u)?.iter().zip(tree.sample_weights(u)?) {
        wa[node] += w;
    }
    for (&node, &w) in tree.sample_nodes(v)?.iter().zip(tree.sample_weights(v)?) {
        wb[node] += w;
    }
    twd_closed_form(tree, &wa, &wb)
}

/// Front-to-front greedy matching of two queues of `(item, remaining mass)`.
fn match_queues(
    qa: &mut VecDeque<(usize, f64)>,
    qb: &mut VecDeque<(usize, f64)>,
    out: &mut Vec<(usize, usize, f64)>,
) {
    loop {
        while qa.front().is_some_and(|x| x.1 <= ZERO_MASS) {
            qa.pop_front();
        }
        while qb.front().is_some_and(|x| x.1 <= ZERO_MASS) {
            qb.pop_front();
        }
        let (Some(fa), Some(fb)) = (qa.front_mut(), qb.front_mut()) else {
            return;
        };
        let eta = fa.1.min(fb.1);
        out.push((fa.0, fb.0, eta));
        fa.1 -= eta;
        fb.1 -= eta;
    }
}

/// Bottom-up tree flow matching.
///
/// Item `i` of the first measure sits at leaf `a_nodes[i]` with mass `a[i]`,
/// and likewise for the second measure. Nodes are visited by increasing
/// height; each node concatenates the unmatched items of its children in
/// child order, matches them greedily and passes the remainder up. The plan
/// is optimal for the tree metric.
pub fn bottom_up_tree_matching<T: RootedTree + ?Sized>(
    tree: &T,
    a_nodes: &[usize],
    a: &[f64],
    b_nodes: &[usize],
    b: &[f64],
) -> Result<FlowPlan> {
    if a_nodes.len() != a.len() {
        return Err(Error::DimensionMismatch(a_nodes.len(), a.len()));
    }
    if b_nodes.len() != b.len() {
        return Err(Error::DimensionMismatch(b_nodes.len(), b.len()));
    }
    let nodes = tree.node_count();
    for &v in a_nodes.iter().chain(b_nodes) {
        if v >= nodes || !tree.is_leaf(v) {
            return Err(Error::NotALeaf(v));
        }
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for v in 1..nodes {
        if let Some(p) = tree.parent(v) {
            children[p].push(v);
        }
    }
    let mut pending_a: Vec<VecDeque<(usize, f64)>> = vec![VecDeque::new(); nodes];
    let mut pending_b: Vec<VecDeque<(usize, f64)>> = vec![VecDeque::new(); nodes];
    for (i, (&v, &w)) in a_nodes.iter().zip(a).enumerate() {
        pending_a[v].push_back((i, w));
    }
    for (j, (&v, &w)) in b_nodes.iter().zip(b).enumerate() {
        pending_b[v].push_back((j, w));
    }

    let heights = tree.heights();
    let mut order: Vec<usize> = (0..nodes).collect();
    order.sort_by_key(|&v| (heights[v], v));

    let mut entries = Vec::with_capacity(a.len() + b.len());
    for v in order {
        let mut qa = std::mem::take(&mut pending_a[v]);
        let mut qb = std::mem::take(&mut pending_b[v]);
        for &c in &children[v] {
            qa.append(&mut pending_a[c]);
            qb.append(&mut pending_b[c]);
        }
        match_queues(&mut qa, &mut qb, &mut entries);
        pending_a[v] = qa;
        pending_b[v] = qb;
    }
    Ok(FlowPlan::from_trusted((a.len(), b.len()), entries))
}

/// Bottom-up matching between two classes of an augmented label tree.
pub fn augmented_tree_matching(tree: &AugmentedTree, u: &str, v: &str) -> Result<FlowPlan> {
    bottom_up_tree_matching(
        tree,
        tree.sample_nodes(u)?,
        tree.sample_weights(u)?,
        tree.sample_nodes(v)?,
        tree.sample_weights(v)?,
    )
}

/// `<P, D>` evaluating only the distances on the support of `plan`.
pub fn support_cost(plan: &FlowPlan, za: ArrayView2<'_, f64>, zb: ArrayView2<'_, f64>) -> f64 {
    plan.entries()
        .iter()
        .map(|&(i, j, m)| m * euclidean(za.row(i), zb.row(j)))
        .sum()
}

/// FlowTree: quadtree plan over the union of both sets, priced with the
/// Euclidean ground cost.
pub fn flowtree(a: &WeightedPointSet, b: &WeightedPointSet, seed: u64) -> Result<TreeFlow> {
    let tree = QuadTree::new(&a.stack_points(b)?, seed);
    let a_nodes: Vec<usize> = (0..a.len()).map(|i| tree.point_node(i)).collect();
    let b_nodes: Vec<usize> = (0..b.len()).map(|j| tree.point_node(a.len() + j)).collect();
    let plan = bottom_up_tree_matching(
        &tree,
        &a_nodes,
        a.weights().as_slice().unwrap(),
        &b_nodes,
        b.weights().as_slice().unwrap(),
    )?;
    let value = support_cost(&plan, a.points().view(), b.points().view());
    Ok(TreeFlow { value, plan })
}

/// Fast FlowTree between classes `u` and `v` of an augmented tree.
///
/// Greedy matching of the stored per-class weights in sample order gives
/// the same plan as bottom-up matching on the augmented tree; only the
/// distances on the plan support are evaluated.
pub fn fast_flowtree(
    tree: &AugmentedTree,
    u: &str,
    v: &str,
    zu: ArrayView2<'_, f64>,
    zv: ArrayView2<'_, f64>,
) -> Result<TreeFlow> {
    let wu = tree.sample_weights(u)?;
    let wv = tree.sample_weights(v)?;
    if zu.nrows() != wu.len() {
        return Err(Error::DimensionMismatch(wu.len(), zu.nrows()));
    }
    if zv.nrows() != wv.len() {
        return Err(Error::DimensionMismatch(wv.len(), zv.nrows()));
    }
    if zu.ncols() != zv.ncols() {
        return Err(Error::DimensionMismatch(zu.ncols(), zv.ncols()));
    }
    let plan = greedy_unchecked(wu, wv);
    let value = support_cost(&plan, zu, zv);
    Ok(TreeFlow { value, plan })
}

/// Fast FlowTree on two point sets taken as two classes of any label tree:
/// greedy matching of their weights in stored order.
pub fn fast_flowtree_sets(a: &WeightedPointSet, b: &WeightedPointSet) -> Result<TreeFlow> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let plan = greedy_unchecked(
        a.weights().as_slice().unwrap(),
        b.weights().as_slice().unwrap(),
    );
    let value = support_cost(&plan, a.points().view(), b.points().view());
    Ok(TreeFlow { value, plan })
}
