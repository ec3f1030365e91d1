//! Label hierarchies, leaf tree metrics, augmented trees and quadtrees.
//!
//! Every tree in this module stores its nodes so that a parent always has a
//! smaller index than its children, with the root at index 0. Bottom-up passes
//! therefore run over indices in descending order.

mod augmented;
mod label;
mod quadtree;

pub use augmented::{AugmentedTree, SAMPLE_EDGE_WEIGHT};
pub use label::{tree_metric, LabelTree, TreeDocument, TreeMetric, TreeNode};
pub use quadtree::{build_quadtree, QuadNode, QuadTree, QUADTREE_RESOLUTION};

/// Minimal view of a rooted, edge-weighted tree.
pub trait RootedTree {
    fn node_count(&self) -> usize;

    /// Parent of `node`, `None` for the root. Parents precede children.
    fn parent(&self, node: usize) -> Option<usize>;

    /// Weight of the edge from `node` to its parent (0 at the root).
    fn edge_weight(&self, node: usize) -> f64;

    fn child_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.node_count()];
        for v in 0..self.node_count() {
            if let Some(p) = self.parent(v) {
                counts[p] += 1;
            }
        }
        counts
    }

    fn is_leaf(&self, node: usize) -> bool {
        !(0..self.node_count()).any(|v| self.parent(v) == Some(node))
    }

    /// Number of edges on the path from the root.
    fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.node_count()];
        for v in 0..self.node_count() {
            if let Some(p) = self.parent(v) {
                depth[v] = depth[p] + 1;
            }
        }
        depth
    }

    /// Sum of edge weights on the path from the root.
    fn weighted_depths(&self) -> Vec<f64> {
        let mut depth = vec![0.0; self.node_count()];
        for v in 0..self.node_count() {
            if let Some(p) = self.parent(v) {
                depth[v] = depth[p] + self.edge_weight(v);
            }
        }
        depth
    }

    /// Height of each node: 0 for leaves, 1 + max child height otherwise.
    fn heights(&self) -> Vec<usize> {
        let mut height = vec![0; self.node_count()];
        for v in (0..self.node_count()).rev() {
            if let Some(p) = self.parent(v) {
                height[p] = height[p].max(height[v] + 1);
            }
        }
        height
    }

    /// Lowest common ancestor by parent-pointer walking.
    fn lca(&self, mut u: usize, mut v: usize) -> usize {
        // parent index < child index, so the larger index is never an ancestor
        // of the smaller one unless they coincide
        while u != v {
            if u > v {
                u = self.parent(u).expect("non-root node has a parent");
            } else {
                v = self.parent(v).expect("non-root node has a parent");
            }
        }
        u
    }

    /// Weighted shortest-path distance between two nodes.
    fn path_distance(&self, u: usize, v: usize) -> f64 {
        let l = self.lca(u, v);
        let climb = |mut x: usize| {
            let mut s = 0.0;
            while x != l {
                s += self.edge_weight(x);
                x = self.parent(x).expect("below the lca");
            }
            s
        };
        climb(u) + climb(v)
    }
}

/// Checks the parent-before-child ordering required by [`RootedTree`].
#[cfg(test)]
pub(crate) fn check_topological<T: RootedTree + ?Sized>(tree: &T) -> bool {
    (0..tree.node_count()).all(|v| match tree.parent(v) {
        None => v == 0,
        Some(p) => p < v,
    })
}
