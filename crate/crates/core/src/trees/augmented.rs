use std::collections::BTreeMap;

use super::{LabelTree, RootedTree};
use crate::error::{Error, Result};
use crate::measures::normalize_weights;

/// Edge weight of every sample leaf hung under its class leaf.
pub const SAMPLE_EDGE_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
struct ClassSamples {
    nodes: Vec<usize>,
    weights: Vec<f64>,
}

/// A label tree whose class leaves are extended with one leaf per sample.
///
/// Sample leaves are appended after the label-tree nodes, so ids of the
/// original nodes are unchanged and parents still precede children.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTree {
    base: LabelTree,
    parents: Vec<Option<usize>>,
    weights: Vec<f64>,
    classes: BTreeMap<String, ClassSamples>,
}

impl AugmentedTree {
    /// `samples` maps a class label to the flow weights of its samples.
    pub fn new(tree: &LabelTree, samples: &BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let mut parents: Vec<Option<usize>> = (0..tree.len()).map(|v| tree.parent(v)).collect();
        let mut weights: Vec<f64> = (0..tree.len()).map(|v| tree.edge_weight(v)).collect();
        let mut classes = BTreeMap::new();
        for (label, w) in samples {
            let leaf = tree.leaf_node(label)?;
            let w = normalize_weights(w)
                .map_err(|e| Error::InvalidWeights(format!("class `{label}`: {e}")))?;
            let mut nodes = Vec::with_capacity(w.len());
            for _ in 0..w.len() {
                nodes.push(parents.len());
                parents.push(Some(leaf));
                weights.push(SAMPLE_EDGE_WEIGHT);
            }
            classes.insert(label.clone(), ClassSamples { nodes, weights: w });
        }
        Ok(Self {
            base: tree.clone(),
            parents,
            weights,
            classes,
        })
    }

    /// Uniform `1/n_c` sample weights for every class in `counts`.
    pub fn uniform(tree: &LabelTree, counts: &BTreeMap<String, usize>) -> Result<Self> {
        let samples = counts
            .iter()
            .map(|(l, &n)| {
                if n == 0 {
                    Err(Error::InvalidWeights(format!("class `{l}` has no samples")))
                } else {
                    Ok((l.clone(), vec![1.0 / n as f64; n]))
                }
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Self::new(tree, &samples)
    }

    pub fn base(&self) -> &LabelTree {
        &self.base
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }

    pub fn sample_weights(&self, class: &str) -> Result<&[f64]> {
        self.class(class).map(|c| c.weights.as_slice())
    }

    /// Node ids of the sample leaves of `class`, in sample order.
    pub fn sample_nodes(&self, class: &str) -> Result<&[usize]> {
        self.class(class).map(|c| c.nodes.as_slice())
    }

    pub fn sample_count(&self, class: &str) -> Result<usize> {
        self.class(class).map(|c| c.nodes.len())
    }

    pub fn sample_node(&self, class: &str, index: usize) -> Result<usize> {
        let c = self.class(class)?;
        c.nodes.get(index).copied().ok_or_else(|| {
            Error::InvalidParameter(format!(
                "class `{class}` has {} samples, index {index} requested",
                c.nodes.len()
            ))
        })
    }

    fn class(&self, class: &str) -> Result<&ClassSamples> {
        self.classes
            .get(class)
            .ok_or_else(|| Error::UnknownClass(class.to_string()))
    }
}

impl RootedTree for AugmentedTree {
    fn node_count(&self) -> usize {
        self.parents.len()
    }

    fn parent(&self, node: usize) -> Option<usize> {
        self.parents[node]
    }

    fn edge_weight(&self, node: usize) -> f64 {
        self.weights[node]
    }

    fn is_leaf(&self, node: usize) -> bool {
        if node >= self.base.len() {
            return true;
        }
        let n = &self.base.nodes()[node];
        match &n.label {
            Some(l) => !self.classes.contains_key(l),
            None => n.children.is_empty(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig3() -> LabelTree {
        LabelTree::from_json_str(
            r#"{"name": "H", "children": [
                {"name": "F", "children": [{"label": "A"}, {"label": "B"}]},
                {"name": "G", "children": [{"label": "C"}, {"label": "D"}]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn one_sample_per_class_adds_one_level() {
        let t = fig3();
        let counts: BTreeMap<String, usize> = ["A", "B", "C", "D"]
            .iter()
            .map(|l| (l.to_string(), 1))
            .collect();
        let aug = AugmentedTree::uniform(&t, &counts).unwrap();
        assert_eq!(aug.node_count(), t.len() + 4);
        assert_eq!(aug.heights()[0], t.heights()[0] + 1);
        for l in ["A", "B", "C", "D"] {
            assert_eq!(aug.sample_weights(l).unwrap(), &[1.0]);
            let s = aug.sample_node(l, 0).unwrap();
            assert_eq!(aug.parent(s), Some(t.leaf_node(l).unwrap()));
            assert_eq!(aug.edge_weight(s), 1.0);
        }
    }

    #[test]
    fn three_uniform_samples() {
        let t = fig3();
        let mut samples = BTreeMap::new();
        samples.insert("A".to_string(), vec![1.0 / 3.0; 3]);
        let aug = AugmentedTree::new(&t, &samples).unwrap();
        let nodes = aug.sample_nodes("A").unwrap();
        assert_eq!(nodes.len(), 3);
        let a = t.leaf_node("A").unwrap();
        assert!(nodes
            .iter()
            .all(|&s| aug.parent(s) == Some(a) && aug.is_leaf(s)));
        assert!(!aug.is_leaf(a));
        assert!(aug.is_leaf(t.leaf_node("B").unwrap()));
    }

    #[test]
    fn non_uniform_weights_round_trip() {
        let t = fig3();
        let mut samples = BTreeMap::new();
        samples.insert("A".to_string(), vec![0.7, 0.3]);
        let aug = AugmentedTree::new(&t, &samples).unwrap();
        assert_eq!(aug.sample_weights("A").unwrap(), &[0.7, 0.3]);
    }

    #[test]
    fn rejects_unknown_class_and_bad_weights() {
        let t = fig3();
        let mut samples = BTreeMap::new();
        samples.insert("Z".to_string(), vec![1.0]);
        assert!(matches!(
            AugmentedTree::new(&t, &samples),
            Err(Error::UnknownClass(_))
        ));
        let mut samples = BTreeMap::new();
        samples.insert("A".to_string(), vec![0.7, 0.7]);
        assert!(matches!(
            AugmentedTree::new(&t, &samples),
            Err(Error::InvalidWeights(_))
        ));
    }

    #[test]
    fn cross_class_sample_distance_is_constant() {
        let t = fig3();
        let mut samples = BTreeMap::new();
        samples.insert("A".to_string(), vec![0.25; 4]);
        samples.insert("C".to_string(), vec![0.5, 0.5]);
        let aug = AugmentedTree::new(&t, &samples).unwrap();
        let expected = t.distance("A", "C").unwrap() + 2.0;
        for &x in aug.sample_nodes("A").unwrap() {
            for &y in aug.sample_nodes("C").unwrap() {
                assert_eq!(aug.path_distance(x, y), expected);
            }
        }
    }
}
