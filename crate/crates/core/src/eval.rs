//! k-fold cross-validation, confusion matrices and accuracy breakdowns.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::learn::{Classifier, LearnError, Learner};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("k = {k} is invalid for {n} samples (need 2 <= k <= N)")]
    BadK { n: usize, k: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("true and predicted label sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("class code {code} out of range for {n_classes} classes")]
    BadLabel { code: usize, n_classes: usize },
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// Randomly partitions `0..n` into `k` folds whose sizes differ by at most one.
/// The first `n % k` folds get the extra element.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 || k > n {
        return Err(EvalError::BadK { n, k });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut rest = perm.as_slice();
    for f in 0..k {
        let (head, tail) = rest.split_at(base + usize::from(f < extra));
        folds.push(head.to_vec());
        rest = tail;
    }
    Ok(folds)
}

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    class_names: Vec<String>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(class_names: &[String]) -> Self {
        let c = class_names.len();
        ConfusionMatrix { class_names: class_names.to_vec(), counts: vec![0; c * c] }
    }

    pub fn from_labels(class_names: &[String], truth: &[usize], pred: &[usize]) -> Result<Self, EvalError> {
        if truth.len() != pred.len() {
            return Err(EvalError::LengthMismatch(truth.len(), pred.len()));
        }
        let mut cm = ConfusionMatrix::new(class_names);
        for (&t, &p) in truth.iter().zip(pred) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: usize, pred: usize) -> Result<(), EvalError> {
        let c = self.n_classes();
        if let Some(&code) = [truth, pred].iter().find(|&&x| x >= c) {
            return Err(EvalError::BadLabel { code, n_classes: c });
        }
        self.counts[truth * c + pred] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.class_names, other.class_names, "merging matrices over different classes");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n_classes() + pred]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        let c = self.n_classes();
        &self.counts[truth * c..(truth + 1) * c]
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        self.row(truth).iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.get(i, i)).sum()
    }

    /// Trace over total; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            0.0
        } else {
            self.correct() as f64 / n as f64
        }
    }

    /// Per-class recall; `None` for classes with no true samples.
    pub fn recall(&self, class: usize) -> Option<f64> {
        let n = self.row_total(class);
        (n > 0).then(|| self.get(class, class) as f64 / n as f64)
    }

    /// Rows scaled to percent of the true-class total; empty rows stay zero.
    pub fn row_percentages(&self) -> Vec<Vec<f64>> {
        (0..self.n_classes())
            .map(|i| {
                let n = self.row_total(i);
                self.row(i).iter().map(|&c| if n == 0 { 0.0 } else { 100.0 * c as f64 / n as f64 }).collect()
            })
            .collect()
    }
}

/// Row-percentage table, true class down the side, prediction across the top.
impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.class_names.iter().map(String::len).max().unwrap_or(0).max(6) + 2;
        write!(f, "{:<width$}", "(%)")?;
        for name in &self.class_names {
            write!(f, "{name:>width$}")?;
        }
        writeln!(f, "{:>width$}", "n")?;
        for (i, row) in self.row_percentages().iter().enumerate() {
            write!(f, "{:<width$}", self.class_names[i])?;
            for p in row {
                write!(f, "{:>width$}", format!("{p:.1}"))?;
            }
            writeln!(f, "{:>width$}", self.row_total(i))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioAccuracy {
    pub correct: usize,
    pub total: usize,
}

impl ScenarioAccuracy {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

/// Mean and population standard deviation of repeated timings, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RuntimeStats {
    pub repetitions: usize,
    pub train_mean_s: f64,
    pub train_std_s: f64,
    pub predict_per_1000_mean_s: f64,
    pub predict_per_1000_std_s: f64,
}

/// Mean and population standard deviation; `(0, 0)` for no samples.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub fold_sizes: Vec<usize>,
    pub fold_accuracy: Vec<f64>,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    /// Only filled when the dataset carries scenario tags; scenarios without
    /// validation samples are absent.
    pub per_scenario: Option<BTreeMap<String, ScenarioAccuracy>>,
    pub warnings: Vec<String>,
    pub runtime: Option<RuntimeStats>,
}

/// Out-of-fold predictions: entry `i` comes from the model that did not see
/// row `i` during training.
pub fn out_of_fold_predictions<L: Learner>(
    ds: &Dataset,
    learner: &L,
    folds: &[Vec<usize>],
) -> Result<Vec<usize>, EvalError> {
    let n = ds.n_rows();
    let mut pred = vec![usize::MAX; n];
    let mut in_fold = vec![false; n];
    for fold in folds {
        in_fold.iter_mut().for_each(|b| *b = false);
        for &i in fold {
            in_fold[i] = true;
        }
        let train_idx: Vec<usize> = (0..n).filter(|&i| !in_fold[i]).collect();
        debug_assert!(train_idx.iter().all(|&i| !in_fold[i]));
        let model = learner.fit(&ds.subset(&train_idx))?;
        for &i in fold {
            assert_eq!(pred[i], usize::MAX, "row {i} validated twice");
            pred[i] = model.predict(ds.row(i))?;
        }
    }
    assert!(pred.iter().all(|&p| p != usize::MAX), "folds do not cover the dataset");
    Ok(pred)
}

/// k-fold cross-validation with unstratified random folds.
pub fn cross_validate<L: Learner>(ds: &Dataset, learner: &L, k: usize, seed: u64) -> Result<CvReport, EvalError> {
    if ds.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let folds = kfold_split(ds.n_rows(), k, seed)?;
    let pred = out_of_fold_predictions(ds, learner, &folds)?;
    let mut report = assemble_report(ds, &folds, &pred, seed)?;
    report.warnings.extend(starvation_warnings(ds, &folds));
    Ok(report)
}

fn assemble_report(ds: &Dataset, folds: &[Vec<usize>], pred: &[usize], seed: u64) -> Result<CvReport, EvalError> {
    let mut confusion = ConfusionMatrix::new(ds.class_names());
    let mut fold_accuracy = Vec::with_capacity(folds.len());
    for fold in folds {
        let correct = fold.iter().filter(|&&i| pred[i] == ds.label(i)).count();
        fold_accuracy.push(correct as f64 / fold.len() as f64);
        for &i in fold {
            confusion.record(ds.label(i), pred[i])?;
        }
    }
    let per_scenario = ds.has_scenarios().then(|| per_scenario_accuracy(ds, pred));
    Ok(CvReport {
        k: folds.len(),
        seed,
        fold_sizes: folds.iter().map(Vec::len).collect(),
        fold_accuracy,
        accuracy: confusion.accuracy(),
        confusion,
        per_scenario,
        warnings: Vec::new(),
        runtime: None,
    })
}

fn starvation_warnings(ds: &Dataset, folds: &[Vec<usize>]) -> Vec<String> {
    let k = folds.len();
    let counts = ds.class_counts();
    let mut out = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        if n < k {
            out.push(format!("class {} has {n} samples, fewer than k = {k}", ds.class_names()[c]));
        }
    }
    for (f, fold) in folds.iter().enumerate() {
        let mut held = vec![0usize; counts.len()];
        for &i in fold {
            held[ds.label(i)] += 1;
        }
        for (c, (&total, &h)) in counts.iter().zip(&held).enumerate() {
            if total > 0 && total == h {
                out.push(format!("fold {f} trains without any {} samples", ds.class_names()[c]));
            }
        }
    }
    out
}

/// Accuracy restricted to the rows of each scenario tag. Untagged datasets
/// yield an empty map.
pub fn per_scenario_accuracy(ds: &Dataset, pred: &[usize]) -> BTreeMap<String, ScenarioAccuracy> {
    let mut out: BTreeMap<String, ScenarioAccuracy> = BTreeMap::new();
    for (i, &p) in pred.iter().enumerate() {
        if let Some(tag) = ds.scenario(i) {
            let e = out.entry(tag.into()).or_insert(ScenarioAccuracy { correct: 0, total: 0 });
            e.total += 1;
            e.correct += usize::from(p == ds.label(i));
        }
    }
    out
}
