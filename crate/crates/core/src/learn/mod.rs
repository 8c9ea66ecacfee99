//! Classifiers: CART decision tree, random forest and k-nearest neighbors.
//!
//! All ties (leaf majority, forest vote, neighbor distance) resolve towards the
//! lowest class code or the lowest training index.

mod forest;
mod importance;
mod knn;
mod tree;

pub use forest::{oob_error, Bootstrap, ForestModel, ForestParams, OobReport};
pub use importance::{permutation_importance, Importance};
pub use knn::{fit_scaler, KnnModel, KnnParams, Scaler};
pub use tree::{Node, TreeModel, TreeParams};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::dataset::Dataset;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LearnError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("class counts are all zero")]
    EmptyNode,
    #[error("input has {got} features, model expects {expected}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dataset has {got} rows but the model was trained on {expected}")]
    DatasetMismatch { expected: usize, got: usize },
    #[error("malformed model: {0}")]
    Malformed(String),
}

/// Gini impurity `1 - sum (c_i / n)^2` of a class histogram.
pub fn gini(class_counts: &[u32]) -> Result<f64, LearnError> {
    let n: u64 = class_counts.iter().map(|&c| u64::from(c)).sum();
    if n == 0 {
        return Err(LearnError::EmptyNode);
    }
    let n = n as f64;
    Ok(1.0 - class_counts.iter().map(|&c| (c as f64 / n) * (c as f64 / n)).sum::<f64>())
}

/// Index of the largest count; the lowest index wins ties.
pub(crate) fn majority(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

pub trait Classifier {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Result<usize, LearnError>;

    fn check_arity(&self, x: &[f64]) -> Result<(), LearnError> {
        if x.len() != self.n_features() {
            return Err(LearnError::ArityMismatch { expected: self.n_features(), got: x.len() });
        }
        Ok(())
    }
}

/// Something that can be fitted to a dataset to produce a classifier.
pub trait Learner {
    type Model: Classifier;
    fn fit(&self, ds: &Dataset) -> Result<Self::Model, LearnError>;
}

/// Model choice plus its hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Tree(TreeParams),
    Forest(ForestParams),
    Knn(KnnParams),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Tree(_) => ModelKind::Tree,
            ModelSpec::Forest(_) => ModelKind::Forest,
            ModelSpec::Knn(_) => ModelKind::Knn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Tree,
    Forest,
    Knn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
            ModelKind::Knn => "knn",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Tree(TreeModel),
    Forest(ForestModel),
    Knn(KnnModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Tree(_) => ModelKind::Tree,
            Model::Forest(_) => ModelKind::Forest,
            Model::Knn(_) => ModelKind::Knn,
        }
    }
}

impl Model {
    /// Predicted class plus per-class vote fractions.
    pub fn predict_scores(&self, x: &[f64]) -> Result<(usize, Vec<f64>), LearnError> {
        let votes = match self {
            Model::Tree(m) => return m.predict_scores(x),
            Model::Forest(m) => m.votes(x)?,
            Model::Knn(m) => {
                let mut v = vec![0u32; m.n_classes()];
                for i in m.neighbors(x)? {
                    v[m.labels()[i]] += 1;
                }
                v
            }
        };
        let total: u32 = votes.iter().sum();
        let scores = votes.iter().map(|&c| f64::from(c) / f64::from(total.max(1))).collect();
        Ok((majority(&votes), scores))
    }
}

impl Learner for ModelSpec {
    type Model = Model;

    fn fit(&self, ds: &Dataset) -> Result<Model, LearnError> {
        Ok(match self {
            ModelSpec::Tree(p) => Model::Tree(TreeModel::train(ds, p)?),
            ModelSpec::Forest(p) => Model::Forest(ForestModel::train(ds, p)?),
            ModelSpec::Knn(p) => Model::Knn(KnnModel::train(ds, p)?),
        })
    }
}

impl Classifier for Model {
    fn n_features(&self) -> usize {
        match self {
            Model::Tree(m) => m.n_features(),
            Model::Forest(m) => m.n_features(),
            Model::Knn(m) => m.n_features(),
        }
    }

    fn n_classes(&self) -> usize {
        match self {
            Model::Tree(m) => m.n_classes(),
            Model::Forest(m) => m.n_classes(),
            Model::Knn(m) => m.n_classes(),
        }
    }

    fn predict(&self, x: &[f64]) -> Result<usize, LearnError> {
        match self {
            Model::Tree(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
            Model::Knn(m) => m.predict(x),
        }
    }
}
