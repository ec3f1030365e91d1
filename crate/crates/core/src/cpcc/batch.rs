use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::measures::{euclidean, normalize_weights, uniform_weights, WeightedPointSet};

/// Per-sample flow weight schemes for a class measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowWeightScheme {
    #[default]
    Uniform,
    /// Softmax of each sample's distance to the class centroid.
    Dist,
    /// Softmax of the negated distance to the class centroid.
    Inv,
}

impl std::str::FromStr for FlowWeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "dist" => Ok(Self::Dist),
            "inv" => Ok(Self::Inv),
            _ => Err(Error::InvalidParameter(format!(
                "unknown flow weight scheme `{s}` (expected uniform, dist or inv)"
            ))),
        }
    }
}

/// Flow weights for the rows of `z` under `scheme`.
pub fn flow_weights(z: ArrayView2<'_, f64>, scheme: FlowWeightScheme) -> Result<Vec<f64>> {
    let n = z.nrows();
    if n == 0 {
        return Err(Error::Empty("class feature matrix"));
    }
    let sign = match scheme {
        FlowWeightScheme::Uniform => return Ok(uniform_weights(n)),
        FlowWeightScheme::Dist => 1.0,
        FlowWeightScheme::Inv => -1.0,
    };
    let centroid = z.mean_axis(Axis(0)).expect("n >= 1");
    let scores: Vec<f64> = z
        .rows()
        .into_iter()
        .map(|r| sign * euclidean(r, centroid.view()))
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    Ok(exp.into_iter().map(|e| e / total).collect())
}

/// Features and flow weights of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassData {
    features: Array2<f64>,
    weights: Vec<f64>,
}

impl ClassData {
    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn has_uniform_weights(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.weights.iter().all(|&w| w == u)
    }

    pub fn measure(&self) -> WeightedPointSet {
        WeightedPointSet::new(self.features.clone(), self.weights.clone())
            .expect("class data is validated on insertion")
    }

    /// Weighted centroid.
    pub fn centroid(&self) -> ndarray::Array1<f64> {
        let mut mean = ndarray::Array1::zeros(self.features.ncols());
        for (row, &w) in self.features.rows().into_iter().zip(&self.weights) {
            mean.scaled_add(w, &row);
        }
        mean
    }
}

/// Class-conditional feature matrices keyed by class label.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassBatch {
    classes: BTreeMap<String, ClassData>,
}

impl ClassBatch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces a class. `weights` defaults to uniform.
    pub fn insert(
        &mut self,
        label: impl Into<String>,
        features: Array2<f64>,
        weights: Option<Vec<f64>>,
    ) -> Result<()> {
        let label = label.into();
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::Empty("class feature matrix"));
        }
        if let Some(((row, col), _)) = features.indexed_iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        if let Some(other) = self.classes.values().next() {
            if other.features.ncols() != d {
                return Err(Error::DimensionMismatch(other.features.ncols(), d));
            }
        }
        let weights = match weights {
            Some(w) if w.len() != n => return Err(Error::DimensionMismatch(n, w.len())),
            Some(w) => normalize_weights(&w)
                .map_err(|e| Error::InvalidWeights(format!("class `{label}`: {e}")))?,
            None => uniform_weights(n),
        };
        self.classes.insert(label, ClassData { features, weights });
        Ok(())
    }

    /// Groups the rows of `features` by `labels`, keeping row order within
    /// each class.
    pub fn from_labeled_rows(labels: &[String], features: &Array2<f64>) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(Error::DimensionMismatch(labels.len(), features.nrows()));
        }
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            groups.entry(l.as_str()).or_default().push(i);
        }
        let mut batch = Self::new();
        for (label, rows) in groups {
            batch.insert(label, features.select(Axis(0), &rows), None)?;
        }
        Ok(batch)
    }

    /// Same features with every class reweighted by `scheme`.
    pub fn with_flow_weights(&self, scheme: FlowWeightScheme) -> Result<Self> {
        let mut out = Self::new();
        for (label, c) in &self.classes {
            let w = flow_weights(c.features.view(), scheme)?;
            out.insert(label.clone(), c.features.clone(), Some(w))?;
        }
        Ok(out)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.classes.values().next().map(|c| c.features.ncols())
    }

    pub fn class(&self, label: &str) -> Result<&ClassData> {
        self.classes
            .get(label)
            .ok_or_else(|| Error::UnknownClass(label.to_string()))
    }

    pub fn classes(&self) -> impl Iterator<Item = (&str, &ClassData)> {
        self.classes.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// All unordered class pairs `(u, v)` with `u < v`.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let labels: Vec<&String> = self.classes.keys().collect();
        let mut out = Vec::with_capacity(labels.len() * labels.len().saturating_sub(1) / 2);
        for (i, u) in labels.iter().enumerate() {
            for v in &labels[i + 1..] {
                out.push(((*u).clone(), (*v).clone()));
            }
        }
        out
    }

    pub(crate) fn features_mut(&mut self, label: &str) -> Option<&mut Array2<f64>> {
        self.classes.get_mut(label).map(|c| &mut c.features)
    }
}
