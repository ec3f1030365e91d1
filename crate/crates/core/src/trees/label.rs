use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::RootedTree;
use crate::error::{Error, Result};

/// JSON form of a label tree node.
///
/// ```json
/// {"name": "root", "children": [
///     {"name": "animal", "weight": 1, "children": [{"label": "cat"}, {"label": "dog"}]},
///     {"label": "truck", "weight": 2}
/// ]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TreeDocument>,
}

impl TreeDocument {
    pub fn leaf(label: &str) -> Self {
        Self {
            name: None,
            weight: None,
            label: Some(label.to_string()),
            children: Vec::new(),
        }
    }

    pub fn internal(name: &str, children: Vec<TreeDocument>) -> Self {
        Self {
            name: Some(name.to_string()),
            weight: None,
            label: None,
            children,
        }
    }

    pub fn with_weight(mut self, w: f64) -> Self {
        self.weight = Some(w);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub name: Option<String>,
    pub label: Option<String>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Weight of the edge to the parent; 0 at the root.
    pub weight: f64,
}

/// A weighted class hierarchy whose leaves are class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTree {
    nodes: Vec<TreeNode>,
    leaf_index: BTreeMap<String, usize>,
}

impl LabelTree {
    pub fn from_document(doc: &TreeDocument) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut stack = vec![(doc, None::<usize>, node_path(None, doc, 0))];
        // preorder so that parents precede children
        while let Some((d, parent, path)) = stack.pop() {
            let id = nodes.len();
            let weight = match parent {
                None => 0.0,
                Some(_) => d.weight.unwrap_or(1.0),
            };
            if parent.is_some() && !(weight > 0.0 && weight.is_finite()) {
                return Err(Error::Tree {
                    path,
                    reason: format!("edge weight must be positive and finite, got {weight}"),
                });
            }
            if !d.children.is_empty() && d.label.is_some() {
                return Err(Error::Tree {
                    path,
                    reason: "only leaves may carry a class label".into(),
                });
            }
            if d.children.is_empty() && d.label.is_none() {
                return Err(Error::Tree {
                    path,
                    reason: "leaf without a class label".into(),
                });
            }
            nodes.push(TreeNode {
                name: d.name.clone(),
                label: d.label.clone(),
                parent,
                children: Vec::new(),
                weight,
            });
            if let Some(p) = parent {
                nodes[p].children.push(id);
            }
            for (k, child) in d.children.iter().enumerate().rev() {
                stack.push((child, Some(id), node_path(Some(&path), child, k)));
            }
        }
        let mut leaf_index = BTreeMap::new();
        for (id, n) in nodes.iter().enumerate() {
            if let Some(label) = &n.label {
                if leaf_index.insert(label.clone(), id).is_some() {
                    return Err(Error::Tree {
                        path: path_of(&nodes, id),
                        reason: format!("duplicate class label `{label}`"),
                    });
                }
            }
        }
        Ok(Self { nodes, leaf_index })
    }

    /// Builds a tree from parent links; detects cycles and multiple roots.
    ///
    /// `labels[v]` must be set exactly for the leaves.
    pub fn from_parents(
        parents: &[Option<usize>],
        weights: &[f64],
        labels: &[Option<String>],
    ) -> Result<Self> {
        let n = parents.len();
        if n == 0 || weights.len() != n || labels.len() != n {
            return Err(Error::Tree {
                path: "<root>".into(),
                reason: "parents, weights and labels must have the same nonzero length".into(),
            });
        }
        let roots: Vec<usize> = (0..n).filter(|&v| parents[v].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::Tree {
                path: "<root>".into(),
                reason: format!("expected exactly one root, found {}", roots.len()),
            });
        }
        let mut children = vec![Vec::new(); n];
        for (v, p) in parents.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n {
                    return Err(Error::Tree {
                        path: format!("node {v}"),
                        reason: format!("parent {p} does not exist"),
                    });
                }
                children[p].push(v);
            }
        }
        // walking from the root must reach every node, otherwise a cycle hides
        // part of the graph
        let mut seen = vec![false; n];
        let mut stack = vec![roots[0]];
        while let Some(v) = stack.pop() {
            seen[v] = true;
            stack.extend(children[v].iter().copied());
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(Error::Tree {
                path: format!("node {v}"),
                reason: "node lies on a cycle".into(),
            });
        }
        fn build(
            v: usize,
            children: &[Vec<usize>],
            weights: &[f64],
            labels: &[Option<String>],
            is_root: bool,
        ) -> TreeDocument {
            TreeDocument {
                name: Some(format!("n{v}")),
                weight: (!is_root).then_some(weights[v]),
                label: labels[v].clone(),
                children: children[v]
                    .iter()
                    .map(|&c| build(c, children, weights, labels, false))
                    .collect(),
            }
        }
        Self::from_document(&build(roots[0], &children, weights, labels, true))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: TreeDocument = serde_json::from_str(s)?;
        Self::from_document(&doc)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_document(&self) -> TreeDocument {
        fn build(tree: &LabelTree, v: usize) -> TreeDocument {
            let n = &tree.nodes[v];
            TreeDocument {
                name: n.name.clone(),
                weight: n.parent.map(|_| n.weight),
                label: n.label.clone(),
                children: n.children.iter().map(|&c| build(tree, c)).collect(),
            }
        }
        build(self, 0)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("tree serializes")
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Class labels in sorted order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.leaf_index.keys().map(String::as_str)
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_index.len()
    }

    pub fn leaf_node(&self, label: &str) -> Result<usize> {
        self.leaf_index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownClass(label.to_string()))
    }

    pub fn contains_label(&self, label: &str) -> bool {
        self.leaf_index.contains_key(label)
    }

    /// Shortest-path distance between two class leaves.
    pub fn distance(&self, u: &str, v: &str) -> Result<f64> {
        let (a, b) = (self.leaf_node(u)?, self.leaf_node(v)?);
        Ok(self.path_distance(a, b))
    }

    /// Multiplies the weights of every edge inside the subtree rooted at
    /// `node` (including the edge above it) by `factor`.
    pub fn scale_subtree(&mut self, node: usize, factor: f64) -> Result<()> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            if self.nodes[v].parent.is_some() {
                self.nodes[v].weight *= factor;
            }
            stack.extend(self.nodes[v].children.iter().copied());
        }
        Ok(())
    }
}

impl RootedTree for LabelTree {
    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn parent(&self, node: usize) -> Option<usize> {
        self.nodes[node].parent
    }

    fn edge_weight(&self, node: usize) -> f64 {
        self.nodes[node].weight
    }

    fn is_leaf(&self, node: usize) -> bool {
        self.nodes[node].children.is_empty()
    }
}

fn node_path(parent: Option<&str>, d: &TreeDocument, index: usize) -> String {
    let own = d
        .name
        .clone()
        .or_else(|| d.label.clone())
        .unwrap_or_else(|| format!("[{index}]"));
    match parent {
        None => own,
        Some(p) => format!("{p}/{own}"),
    }
}

fn path_of(nodes: &[TreeNode], mut v: usize) -> String {
    let mut parts = Vec::new();
    loop {
        let n = &nodes[v];
        parts.push(
            n.name
                .clone()
                .or_else(|| n.label.clone())
                .unwrap_or_else(|| format!("#{v}")),
        );
        match n.parent {
            Some(p) => v = p,
            None => break,
        }
    }
    parts.reverse();
    parts.join("/")
}

/// Dense leaf-to-leaf shortest path distances of a [`LabelTree`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeMetric {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Array2<f64>,
}

impl TreeMetric {
    /// Distances via LCA: `depth(u) + depth(v) - 2 depth(lca(u, v))`.
    pub fn new(tree: &LabelTree) -> Self {
        let labels: Vec<String> = tree.labels().map(str::to_string).collect();
        let leaves: Vec<usize> = labels
            .iter()
            .map(|l| tree.leaf_node(l).expect("label comes from the tree"))
            .collect();
        let depth = tree.weighted_depths();
        let k = leaves.len();
        let mut matrix = Array2::zeros((k, k));
        for a in 0..k {
            for b in (a + 1)..k {
                let l = tree.lca(leaves[a], leaves[b]);
                let d = depth[leaves[a]] + depth[leaves[b]] - 2.0 * depth[l];
                matrix[[a, b]] = d;
                matrix[[b, a]] = d;
            }
        }
        let index = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Self {
            labels,
            index,
            matrix,
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownClass(label.to_string()))
    }

    pub fn distance(&self, u: &str, v: &str) -> Result<f64> {
        Ok(self.matrix[[self.index_of(u)?, self.index_of(v)?]])
    }
}

/// Shorthand used by [`tree_metric`](crate::tree_metric).
pub fn tree_metric(tree: &LabelTree) -> TreeMetric {
    TreeMetric::new(tree)
}
