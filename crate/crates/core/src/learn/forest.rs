use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tree::{grow, TreeModel, TreeParams};
use super::{majority, Classifier, LearnError};
use crate::dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bootstrap {
    /// N draws with replacement.
    Sample,
    /// Every tree sees the training rows exactly once, in order.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per node; `None` uses `ceil(sqrt(M))`.
    pub feature_subsample: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
    pub bootstrap: Bootstrap,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 30,
            feature_subsample: None,
            max_depth: None,
            min_leaf: 1,
            seed: 0x5eed,
            bootstrap: Bootstrap::Sample,
        }
    }
}

pub(crate) fn ceil_sqrt(m: usize) -> usize {
    let mut r = libm::sqrt(m as f64) as usize;
    while r * r < m {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= m {
        r -= 1;
    }
    r.max(1)
}

/// Bagged CART trees with per-node feature subsampling.
///
/// Tree `t` draws from ChaCha stream `t` of the master seed, so trees can be
/// trained in any order (or in parallel) with identical results.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<TreeModel>,
    bootstraps: Vec<Vec<u32>>,
    seed: u64,
    feature_subsample: usize,
    n_features: usize,
    n_classes: usize,
}

impl ForestModel {
    pub fn train(ds: &Dataset, params: &ForestParams) -> Result<Self, LearnError> {
        if ds.is_empty() {
            return Err(LearnError::EmptyDataset);
        }
        if params.n_trees == 0 {
            return Err(LearnError::InvalidParams("n_trees must be at least 1".into()));
        }
        let n = ds.n_rows();
        let mtry = params.feature_subsample.unwrap_or_else(|| ceil_sqrt(ds.n_features()));
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            feature_subsample: Some(mtry),
            seed: params.seed,
        };
        let mut trees = Vec::with_capacity(params.n_trees);
        let mut bootstraps = Vec::with_capacity(params.n_trees);
        for t in 0..params.n_trees {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            let sample: Vec<u32> = match params.bootstrap {
                Bootstrap::Sample => (0..n).map(|_| rng.random_range(0..n as u32)).collect(),
                Bootstrap::Identity => (0..n as u32).collect(),
            };
            let mut work = sample.clone();
            trees.push(grow(ds, &mut work, &tree_params, &mut rng)?);
            bootstraps.push(sample);
        }
        Ok(ForestModel {
            trees,
            bootstraps,
            seed: params.seed,
            feature_subsample: mtry,
            n_features: ds.n_features(),
            n_classes: ds.n_classes(),
        })
    }

    pub fn from_parts(
        trees: Vec<TreeModel>,
        bootstraps: Vec<Vec<u32>>,
        seed: u64,
        feature_subsample: usize,
    ) -> Result<Self, LearnError> {
        let first = trees.first().ok_or_else(|| LearnError::Malformed("forest has no trees".into()))?;
        let (m, k) = (first.n_features(), first.n_classes());
        if trees.iter().any(|t| t.n_features() != m || t.n_classes() != k) {
            return Err(LearnError::Malformed("trees disagree on feature or class count".into()));
        }
        if bootstraps.len() != trees.len() {
            return Err(LearnError::Malformed(format!(
                "{} bootstrap lists for {} trees",
                bootstraps.len(),
                trees.len()
            )));
        }
        let n = bootstraps[0].len();
        if bootstraps.iter().any(|b| b.len() != n || b.iter().any(|&i| i as usize >= n)) {
            return Err(LearnError::Malformed("inconsistent bootstrap lists".into()));
        }
        Ok(ForestModel { trees, bootstraps, seed, feature_subsample, n_features: m, n_classes: k })
    }

    pub fn trees(&self) -> &[TreeModel] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn bootstraps(&self) -> &[Vec<u32>] {
        &self.bootstraps
    }

    pub fn n_samples(&self) -> usize {
        self.bootstraps.first().map_or(0, Vec::len)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn feature_subsample(&self) -> usize {
        self.feature_subsample
    }

    /// Per-class vote counts over all trees.
    pub fn votes(&self, x: &[f64]) -> Result<Vec<u32>, LearnError> {
        self.check_arity(x)?;
        let mut votes = vec![0u32; self.n_classes];
        for t in &self.trees {
            votes[t.predict_unchecked(x)] += 1;
        }
        Ok(votes)
    }

    /// For each tree, whether each training row is out of its bootstrap.
    pub(crate) fn oob_masks(&self) -> Vec<Vec<bool>> {
        let n = self.n_samples();
        self.bootstraps
            .iter()
            .map(|b| {
                let mut out = vec![true; n];
                for &i in b {
                    out[i as usize] = false;
                }
                out
            })
            .collect()
    }

    pub(crate) fn check_training_set(&self, ds: &Dataset) -> Result<(), LearnError> {
        if ds.n_rows() != self.n_samples() {
            return Err(LearnError::DatasetMismatch { expected: self.n_samples(), got: ds.n_rows() });
        }
        if ds.n_features() != self.n_features {
            return Err(LearnError::ArityMismatch { expected: self.n_features, got: ds.n_features() });
        }
        Ok(())
    }
}

impl Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: &[f64]) -> Result<usize, LearnError> {
        Ok(majority(&self.votes(x)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OobReport {
    /// Misclassified / evaluated; 0 when nothing was evaluated.
    pub error: f64,
    pub evaluated: usize,
    /// Rows that were in every tree's bootstrap.
    pub skipped: usize,
}

impl OobReport {
    pub fn is_defined(&self) -> bool {
        self.evaluated > 0
    }
}

/// Out-of-bag error on the training set `ds`: each row is voted on only by
/// the trees whose bootstrap excluded it.
pub fn oob_error(model: &ForestModel, ds: &Dataset) -> Result<OobReport, LearnError> {
    model.check_training_set(ds)?;
    let masks = model.oob_masks();
    let mut votes = vec![0u32; model.n_classes];
    let (mut wrong, mut evaluated, mut skipped) = (0usize, 0usize, 0usize);
    for i in 0..ds.n_rows() {
        votes.iter_mut().for_each(|v| *v = 0);
        let mut any = false;
        for (tree, mask) in model.trees.iter().zip(&masks) {
            if mask[i] {
                votes[tree.predict_unchecked(ds.row(i))] += 1;
                any = true;
            }
        }
        if !any {
            skipped += 1;
            continue;
        }
        evaluated += 1;
        if majority(&votes) != ds.label(i) {
            wrong += 1;
        }
    }
    let error = if evaluated == 0 { 0.0 } else { wrong as f64 / evaluated as f64 };
    Ok(OobReport { error, evaluated, skipped })
}
