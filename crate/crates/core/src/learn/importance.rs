//! Permutation importance over out-of-bag samples.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ForestModel, LearnError};
use crate::dataset::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct Importance {
    /// Mean increase of per-tree OOB error when the feature is permuted.
    pub raw: Vec<f64>,
    /// `raw / max(raw)`, or `raw` itself when `degenerate`.
    pub scores: Vec<f64>,
    /// No feature has a positive raw score, so nothing was normalized.
    pub degenerate: bool,
    /// Trees that had at least one OOB sample.
    pub trees_used: usize,
}

impl Importance {
    /// Feature indices sorted by descending score; ties keep index order.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        idx
    }
}

/// For every tree, shuffles one feature column among that tree's OOB rows and
/// measures how much the tree's OOB error grows; averages over trees.
pub fn permutation_importance(model: &ForestModel, ds: &Dataset, seed: u64) -> Result<Importance, LearnError> {
    model.check_training_set(ds)?;
    let m = ds.n_features();
    let masks = model.oob_masks();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = vec![0.0; m];
    let mut trees_used = 0usize;
    let mut x = vec![0.0; m];
    let mut column: Vec<f64> = Vec::new();

    for (tree, mask) in model.trees().iter().zip(&masks) {
        let oob: Vec<usize> = (0..ds.n_rows()).filter(|&i| mask[i]).collect();
        if oob.is_empty() {
            continue;
        }
        trees_used += 1;
        let n = oob.len() as f64;
        let base_wrong = oob.iter().filter(|&&i| tree.predict_unchecked(ds.row(i)) != ds.label(i)).count();
        for f in 0..m {
            column.clear();
            column.extend(oob.iter().map(|&i| ds.value(i, f)));
            column.shuffle(&mut rng);
            let mut wrong = 0usize;
            for (&i, &v) in oob.iter().zip(&column) {
                x.copy_from_slice(ds.row(i));
                x[f] = v;
                if tree.predict_unchecked(&x) != ds.label(i) {
                    wrong += 1;
                }
            }
            raw[f] += (wrong as f64 - base_wrong as f64) / n;
        }
    }
    if trees_used > 0 {
        raw.iter_mut().for_each(|r| *r /= trees_used as f64);
    }
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = !(max > 0.0);
    let scores = if degenerate { raw.clone() } else { raw.iter().map(|r| r / max).collect() };
    Ok(Importance { raw, scores, degenerate, trees_used })
}
