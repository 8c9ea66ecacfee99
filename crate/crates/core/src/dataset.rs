//! Labeled feature matrix: one row per non-empty sampling period.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("row has {got} features, dataset has {expected}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("non-finite value in row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("class code {code} out of range for {n_classes} classes")]
    BadLabel { code: usize, n_classes: usize },
    #[error("scenario tags must be present on all rows or on none")]
    ScenarioMismatch,
    #[error("datasets have different feature or class names")]
    SchemaMismatch,
}

/// Row-major N x M feature matrix with class codes and optional scenario tags.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    feature_names: Vec<String>,
    class_names: Vec<String>,
    features: Vec<f64>,
    labels: Vec<usize>,
    scenarios: Option<Vec<String>>,
}

impl Dataset {
    pub fn new<F, C>(feature_names: F, class_names: C) -> Self
    where
        F: IntoIterator,
        F::Item: ToString,
        C: IntoIterator,
        C::Item: ToString,
    {
        Dataset {
            feature_names: feature_names.into_iter().map(|s| s.to_string()).collect(),
            class_names: class_names.into_iter().map(|s| s.to_string()).collect(),
            features: Vec::new(),
            labels: Vec::new(),
            scenarios: None,
        }
    }

    pub fn push(&mut self, x: &[f64], label: usize, scenario: Option<&str>) -> Result<(), DatasetError> {
        let m = self.n_features();
        if x.len() != m {
            return Err(DatasetError::ArityMismatch { expected: m, got: x.len() });
        }
        if let Some(col) = x.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite { row: self.n_rows(), col });
        }
        if label >= self.n_classes() {
            return Err(DatasetError::BadLabel { code: label, n_classes: self.n_classes() });
        }
        match (&mut self.scenarios, scenario) {
            (Some(tags), Some(s)) => tags.push(s.into()),
            (None, None) => {}
            (None, Some(s)) if self.labels.is_empty() => self.scenarios = Some(alloc::vec![s.into()]),
            _ => return Err(DatasetError::ScenarioMismatch),
        }
        self.features.extend_from_slice(x);
        self.labels.push(label);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_features();
        &self.features[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        // chunks_exact(0) panics; a zero-feature dataset has no meaningful rows anyway
        self.features.chunks_exact(self.n_features().max(1))
    }

    pub fn value(&self, i: usize, m: usize) -> f64 {
        self.features[i * self.n_features() + m]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn scenario(&self, i: usize) -> Option<&str> {
        self.scenarios.as_ref().map(|s| s[i].as_str())
    }

    pub fn has_scenarios(&self) -> bool {
        self.scenarios.is_some()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let m = self.n_features();
        let mut features = Vec::with_capacity(indices.len() * m);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            scenarios: self.scenarios.as_ref().map(|s| indices.iter().map(|&i| s[i].clone()).collect()),
        }
    }

    /// Appends all rows of `other`, which must share feature and class names.
    pub fn append(&mut self, other: &Dataset) -> Result<(), DatasetError> {
        if other.feature_names != self.feature_names || other.class_names != self.class_names {
            return Err(DatasetError::SchemaMismatch);
        }
        if other.is_empty() {
            return Ok(());
        }
        match (&mut self.scenarios, &other.scenarios) {
            (Some(a), Some(b)) => a.extend(b.iter().cloned()),
            (None, None) => {}
            (None, Some(b)) if self.labels.is_empty() => self.scenarios = Some(b.clone()),
            _ => return Err(DatasetError::ScenarioMismatch),
        }
        self.features.extend_from_slice(&other.features);
        self.labels.extend_from_slice(&other.labels);
        Ok(())
    }

    /// Copy with an extra feature column appended.
    pub fn with_column(&self, name: &str, values: &[f64]) -> Result<Dataset, DatasetError> {
        if values.len() != self.n_rows() {
            return Err(DatasetError::ArityMismatch { expected: self.n_rows(), got: values.len() });
        }
        if let Some(row) = values.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite { row, col: self.n_features() });
        }
        let mut out = Dataset {
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            features: Vec::with_capacity(self.features.len() + values.len()),
            labels: self.labels.clone(),
            scenarios: self.scenarios.clone(),
        };
        out.feature_names.push(name.into());
        for (i, v) in values.iter().enumerate() {
            out.features.extend_from_slice(self.row(i));
            out.features.push(*v);
        }
        Ok(out)
    }
}
