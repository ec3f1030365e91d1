//! Random instances and reference implementations shared by the
//! integration suites. Nothing here calls into the solvers under test.

#![allow(dead_code)]

use std::collections::BTreeMap;

use ndarray::Array2;
use otcpcc::measures::{FlowPlan, WeightedPointSet};
use otcpcc::trees::LabelTree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| {
        scale * Distribution::<f64>::sample(&StandardNormal, rng)
    })
}

/// Positive weights summing to one; a few entries may be zero.
pub fn simplex(rng: &mut ChaCha8Rng, n: usize, allow_zeros: bool) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                if allow_zeros && rng.random_bool(0.1) {
                    0.0
                } else {
                    rng.random_range(0.05..1.0)
                }
            })
            .collect();
        let s: f64 = raw.iter().sum();
        if s > 0.0 {
            return raw.iter().map(|x| x / s).collect();
        }
    }
}

/// Random measure in `R^d`; uniform or random weights by coin flip.
pub fn random_set(rng: &mut ChaCha8Rng, n: usize, d: usize) -> WeightedPointSet {
    let shift: f64 = rng.random_range(-3.0..3.0);
    let z = gaussian_matrix(rng, n, d, 1.0) + shift;
    if rng.random_bool(0.5) {
        WeightedPointSet::uniform(z).unwrap()
    } else {
        let w = simplex(rng, n, false);
        WeightedPointSet::new(z, w).unwrap()
    }
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

pub fn cost(a: &WeightedPointSet, b: &WeightedPointSet) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| {
        dist(&a.point(i).to_vec(), &b.point(j).to_vec())
    })
}

pub fn plan_cost(plan: &FlowPlan, c: &Array2<f64>) -> f64 {
    plan.entries().iter().map(|&(i, j, m)| m * c[[i, j]]).sum()
}

pub fn mean_gap(a: &WeightedPointSet, b: &WeightedPointSet) -> f64 {
    let ma: Vec<f64> = (0..a.dim())
        .map(|k| {
            (0..a.len())
                .map(|i| a.weights()[i] * a.points()[[i, k]])
                .sum()
        })
        .collect();
    let mb: Vec<f64> = (0..b.dim())
        .map(|k| {
            (0..b.len())
                .map(|j| b.weights()[j] * b.points()[[j, k]])
                .sum()
        })
        .collect();
    dist(&ma, &mb)
}

/// Optimality certificate for a transport plan: no negative-cost cycle in
/// the residual network (forward arcs `i -> j` at cost `c_ij`, backward arcs
/// `j -> i` at `-c_ij` wherever the plan carries mass). Bellman-Ford from a
/// virtual source connected to every node.
pub fn has_negative_cycle(plan: &FlowPlan, c: &Array2<f64>, tol: f64) -> bool {
    let (m, n) = c.dim();
    let mut arcs: Vec<(usize, usize, f64)> = Vec::with_capacity(m * n + plan.nnz());
    for i in 0..m {
        for j in 0..n {
            arcs.push((i, m + j, c[[i, j]]));
        }
    }
    for &(i, j, mass) in plan.entries() {
        if mass > 1e-14 {
            arcs.push((m + j, i, -c[[i, j]]));
        }
    }
    let mut dist = vec![0.0f64; m + n];
    for _ in 0..(m + n) {
        let mut changed = false;
        for &(u, v, w) in &arcs {
            if dist[u] + w < dist[v] - tol {
                dist[v] = dist[u] + w;
                changed = true;
            }
        }
        if !changed {
            return false;
        }
    }
    true
}

/// Exact EMD of equal-size uniform measures by enumerating permutations.
pub fn brute_force_uniform(c: &Array2<f64>) -> f64 {
    let n = c.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, c, &mut best);
    best / n as f64
}

fn permute(perm: &mut Vec<usize>, k: usize, c: &Array2<f64>, best: &mut f64) {
    if k == perm.len() {
        let v: f64 = perm.iter().enumerate().map(|(i, &j)| c[[i, j]]).sum();
        *best = best.min(v);
        return;
    }
    for s in k..perm.len() {
        perm.swap(k, s);
        permute(perm, k + 1, c, best);
        perm.swap(k, s);
    }
}

/// `int |F_a(t) - F_b(t)| dt` for weighted points on the line.
pub fn cdf_emd(x: &[f64], a: &[f64], y: &[f64], b: &[f64]) -> f64 {
    let mut events: Vec<(f64, f64)> = x
        .iter()
        .zip(a)
        .map(|(&p, &w)| (p, w))
        .chain(y.iter().zip(b).map(|(&q, &w)| (q, -w)))
        .collect();
    events.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut total = 0.0;
    let mut diff = 0.0;
    for pair in events.windows(2) {
        diff += pair[0].1;
        total += diff.abs() * (pair[1].0 - pair[0].0);
    }
    total
}

/// Pearson correlation from the covariance / standard-deviation definition.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov = x
        .iter()
        .zip(y)
        .map(|(p, q)| (p - mx) * (q - my))
        .sum::<f64>()
        / n;
    let sx = (x.iter().map(|p| (p - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|q| (q - my).powi(2)).sum::<f64>() / n).sqrt();
    cov / (sx * sy)
}

/// Random label tree whose childless nodes are the classes `c0, c1, ...`.
/// Returns the tree and its class labels; between `2` and `max_classes`
/// classes.
pub fn random_label_tree(rng: &mut ChaCha8Rng, max_classes: usize) -> (LabelTree, Vec<String>) {
    loop {
        let nodes = rng.random_range(3..=2 * max_classes);
        let mut parents = vec![None];
        for v in 1..nodes {
            parents.push(Some(rng.random_range(0..v)));
        }
        let mut has_child = vec![false; nodes];
        for p in parents.iter().flatten() {
            has_child[*p] = true;
        }
        let leaves = has_child.iter().filter(|h| !**h).count();
        if leaves < 2 || leaves > max_classes {
            continue;
        }
        let mut labels = Vec::new();
        let mut node_labels = vec![None; nodes];
        for v in 0..nodes {
            if !has_child[v] {
                let l = format!("c{}", labels.len());
                node_labels[v] = Some(l.clone());
                labels.push(l);
            }
        }
        let weights: Vec<f64> = (0..nodes).map(|_| rng.random_range(0.5..2.0)).collect();
        let tree = LabelTree::from_parents(&parents, &weights, &node_labels).unwrap();
        return (tree, labels);
    }
}

/// Per-class sample weights (uniform or random) and features.
pub fn random_classes(
    rng: &mut ChaCha8Rng,
    labels: &[String],
    max_n: usize,
    d: usize,
) -> (BTreeMap<String, Vec<f64>>, BTreeMap<String, Array2<f64>>) {
    let mut weights = BTreeMap::new();
    let mut features = BTreeMap::new();
    for l in labels {
        let n = rng.random_range(1..=max_n);
        let w = if rng.random_bool(0.5) {
            vec![1.0 / n as f64; n]
        } else {
            simplex(rng, n, true)
        };
        weights.insert(l.clone(), w);
        features.insert(l.clone(), gaussian_matrix(rng, n, d, 2.0));
    }
    (weights, features)
}
