use std::collections::{BTreeMap, VecDeque};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RootedTree;
use crate::measures::WeightedPointSet;

/// Leaf cells are split until their side shrinks below this fraction of the
/// root cell; gives a maximum depth of `ceil(log2(1 / resolution))`.
pub const QUADTREE_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum QuadNode {
    /// A grid cell at `depth` with integer grid coordinates at that depth.
    Cell {
        parent: Option<usize>,
        depth: usize,
        coords: Vec<u32>,
    },
    /// An input point hanging under the leaf cell that contains it.
    Point { parent: usize, index: usize },
}

/// Randomly shifted 2^d-ary grid hierarchy over a point cloud.
///
/// The root cell has side `2 * s` where `s` is the widest extent of the
/// bounding box; points are translated by a uniform shift in `[0, s)^d` so
/// they stay strictly inside the root. Only occupied children are created.
/// The edge above a depth-`l` cell weighs that cell's diameter
/// `root_width * 2^-l * sqrt(d)`; a point hangs below its leaf cell with the
/// weight of the next level, which makes tree distances dominate Euclidean
/// ones.
#[derive(Debug, Clone)]
pub struct QuadTree {
    dim: usize,
    origin: Vec<f64>,
    shift: Vec<f64>,
    root_width: f64,
    max_depth: usize,
    nodes: Vec<QuadNode>,
    point_nodes: Vec<usize>,
}

impl QuadTree {
    pub fn new(points: &Array2<f64>, seed: u64) -> Self {
        let (n, dim) = points.dim();
        assert!(n >= 1 && dim >= 1, "quadtree needs at least one point");
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for row in points.rows() {
            for (c, &x) in row.iter().enumerate() {
                lo[c] = lo[c].min(x);
                hi[c] = hi[c].max(x);
            }
        }
        let side = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| h - l)
            .fold(0.0_f64, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift: Vec<f64> = (0..dim)
            .map(|_| {
                if side > 0.0 {
                    rng.random_range(0.0..side)
                } else {
                    0.0
                }
            })
            .collect();
        let origin: Vec<f64> = lo.iter().zip(&shift).map(|(l, s)| l - s).collect();
        let root_width = 2.0 * side;
        let max_depth = if side > 0.0 {
            (1.0 / QUADTREE_RESOLUTION).log2().ceil() as usize
        } else {
            0
        };

        // grid coordinates of every point at the finest level
        let cells_per_side = 1u64 << max_depth;
        let fine: Vec<Vec<u32>> = points
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .zip(&origin)
                    .map(|(&x, &o)| {
                        if root_width == 0.0 {
                            0
                        } else {
                            let q = ((x - o) / root_width * cells_per_side as f64).floor();
                            (q.max(0.0) as u64).min(cells_per_side - 1) as u32
                        }
                    })
                    .collect()
            })
            .collect();

        let mut nodes = vec![QuadNode::Cell {
            parent: None,
            depth: 0,
            coords: vec![0; dim],
        }];
        let mut point_nodes = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        queue.push_back((0usize, 0usize, (0..n).collect::<Vec<_>>()));
        while let Some((cell, depth, members)) = queue.pop_front() {
            if members.len() <= 1 || depth == max_depth {
                for i in members {
                    point_nodes[i] = nodes.len();
                    nodes.push(QuadNode::Point {
                        parent: cell,
                        index: i,
                    });
                }
                continue;
            }
            let shift_bits = (max_depth - depth - 1) as u32;
            let mut groups: BTreeMap<Vec<u32>, Vec<usize>> = BTreeMap::new();
            for i in members {
                let key: Vec<u32> = fine[i].iter().map(|&q| q >> shift_bits).collect();
                groups.entry(key).or_default().push(i);
            }
            for (coords, members) in groups {
                let id = nodes.len();
                nodes.push(QuadNode::Cell {
                    parent: Some(cell),
                    depth: depth + 1,
                    coords,
                });
                queue.push_back((id, depth + 1, members));
            }
        }
        Self {
            dim,
            origin,
            shift,
            root_width,
            max_depth,
            nodes,
            point_nodes,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn root_width(&self) -> f64 {
        self.root_width
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn nodes(&self) -> &[QuadNode] {
        &self.nodes
    }

    /// Node id of the leaf holding input point `i`.
    pub fn point_node(&self, i: usize) -> usize {
        self.point_nodes[i]
    }

    pub fn point_count(&self) -> usize {
        self.point_nodes.len()
    }

    /// Leaf cell that contains point `i`.
    pub fn leaf_cell(&self, i: usize) -> usize {
        match self.nodes[self.point_nodes[i]] {
            QuadNode::Point { parent, .. } => parent,
            QuadNode::Cell { .. } => unreachable!("point nodes are never cells"),
        }
    }

    /// Depth of the deepest cell.
    pub fn depth(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                QuadNode::Cell { depth, .. } => Some(*depth),
                QuadNode::Point { .. } => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn cell_width(&self, depth: usize) -> f64 {
        self.root_width * 0.5f64.powi(depth as i32)
    }

    /// Center and half side of a cell, in input coordinates.
    pub fn cell_bounds(&self, node: usize) -> Option<(Vec<f64>, f64)> {
        match &self.nodes[node] {
            QuadNode::Cell { depth, coords, .. } => {
                let w = self.cell_width(*depth);
                let center = coords
                    .iter()
                    .zip(&self.origin)
                    .map(|(&k, &o)| o + (k as f64 + 0.5) * w)
                    .collect();
                Some((center, 0.5 * w))
            }
            QuadNode::Point { .. } => None,
        }
    }

    fn node_depth(&self, node: usize) -> usize {
        match &self.nodes[node] {
            QuadNode::Cell { depth, .. } => *depth,
            QuadNode::Point { parent, .. } => self.node_depth(*parent) + 1,
        }
    }
}

impl RootedTree for QuadTree {
    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn parent(&self, node: usize) -> Option<usize> {
        match &self.nodes[node] {
            QuadNode::Cell { parent, .. } => *parent,
            QuadNode::Point { parent, .. } => Some(*parent),
        }
    }

    fn edge_weight(&self, node: usize) -> f64 {
        if node == 0 {
            return 0.0;
        }
        self.cell_width(self.node_depth(node)) * (self.dim as f64).sqrt()
    }

    fn is_leaf(&self, node: usize) -> bool {
        matches!(self.nodes[node], QuadNode::Point { .. })
    }
}

/// Quadtree over the points of `points` with a seed-determined shift.
pub fn build_quadtree(points: &WeightedPointSet, seed: u64) -> QuadTree {
    QuadTree::new(points.points(), seed)
}
