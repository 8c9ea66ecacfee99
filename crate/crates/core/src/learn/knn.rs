use alloc::vec;
use alloc::vec::Vec;

use super::{majority, Classifier, LearnError};
use crate::dataset::Dataset;

/// Per-feature standardization `(x - mean) / std` with population std.
/// Constant features get std 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

pub fn fit_scaler(ds: &Dataset) -> Result<Scaler, LearnError> {
    if ds.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let m = ds.n_features();
    let n = ds.n_rows() as f64;
    let mut means = vec![0.0; m];
    for row in ds.rows() {
        for (acc, v) in means.iter_mut().zip(row) {
            *acc += v;
        }
    }
    means.iter_mut().for_each(|s| *s /= n);
    let mut vars = vec![0.0; m];
    for row in ds.rows() {
        for ((acc, v), mu) in vars.iter_mut().zip(row).zip(&means) {
            *acc += (v - mu) * (v - mu);
        }
    }
    let stds = vars
        .iter()
        .map(|v| {
            let s = libm::sqrt(v / n);
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    Ok(Scaler { means, stds })
}

impl Scaler {
    pub fn from_parts(means: Vec<f64>, stds: Vec<f64>) -> Result<Self, LearnError> {
        if means.len() != stds.len() || stds.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(LearnError::Malformed("scaler needs matching means and positive stds".into()));
        }
        Ok(Scaler { means, stds })
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), LearnError> {
        if x.len() != self.means.len() {
            return Err(LearnError::ArityMismatch { expected: self.means.len(), got: x.len() });
        }
        for (((o, v), mu), sd) in out.iter_mut().zip(x).zip(&self.means).zip(&self.stds) {
            *o = (v - mu) / sd;
        }
        Ok(())
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.means).zip(&self.stds).map(|((z, mu), sd)| mu + sd * z).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 1 }
    }
}

/// Brute-force k-nearest-neighbor classifier in standardized feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    scaler: Scaler,
    // standardized, row-major
    points: Vec<f64>,
    labels: Vec<usize>,
    k: usize,
    n_classes: usize,
}

impl KnnModel {
    pub fn train(ds: &Dataset, params: &KnnParams) -> Result<Self, LearnError> {
        if params.k == 0 {
            return Err(LearnError::InvalidParams("k must be at least 1".into()));
        }
        let scaler = fit_scaler(ds)?;
        let m = ds.n_features();
        let mut points = vec![0.0; ds.n_rows() * m];
        for (i, row) in ds.rows().enumerate() {
            scaler.apply_into(row, &mut points[i * m..(i + 1) * m])?;
        }
        Ok(KnnModel { scaler, points, labels: ds.labels().to_vec(), k: params.k, n_classes: ds.n_classes() })
    }

    /// Rebuilds a model from already standardized training rows.
    pub fn from_parts(
        scaler: Scaler,
        points: Vec<f64>,
        labels: Vec<usize>,
        k: usize,
        n_classes: usize,
    ) -> Result<Self, LearnError> {
        let m = scaler.means.len();
        if k == 0 || m == 0 || points.len() != labels.len() * m || labels.iter().any(|&l| l >= n_classes) {
            return Err(LearnError::Malformed("inconsistent k-NN tables".into()));
        }
        Ok(KnnModel { scaler, points, labels, k, n_classes })
    }

    /// Standardized training rows, row-major.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Training rows mapped back to the original feature scale.
    pub fn raw_points(&self) -> Vec<f64> {
        let m = self.scaler.means.len();
        self.points.chunks_exact(m).flat_map(|z| self.scaler.invert(z)).collect()
    }

    /// Indices of the k nearest training points, nearest first; equal
    /// distances keep the lower index first.
    pub fn neighbors(&self, x: &[f64]) -> Result<Vec<usize>, LearnError> {
        let q = self.scaler.apply(x)?;
        let m = q.len();
        // (squared distance, index), sorted ascending
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, p) in self.points.chunks_exact(m).enumerate() {
            let bound = if best.len() == self.k { best[self.k - 1].0 } else { f64::INFINITY };
            let mut d = 0.0;
            let mut pruned = false;
            for (a, b) in p.iter().zip(&q) {
                d += (a - b) * (a - b);
                if d > bound {
                    pruned = true;
                    break;
                }
            }
            if pruned || d == bound {
                // an equal distance never displaces an earlier index
                continue;
            }
            let at = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(at, (d, i));
            best.truncate(self.k);
        }
        Ok(best.into_iter().map(|(_, i)| i).collect())
    }
}

impl Classifier for KnnModel {
    fn n_features(&self) -> usize {
        self.scaler.means.len()
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: &[f64]) -> Result<usize, LearnError> {
        let mut votes = vec![0u32; self.n_classes];
        for i in self.neighbors(x)? {
            votes[self.labels[i]] += 1;
        }
        Ok(majority(&votes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[(&[f64], usize)]) -> Dataset {
        let m = rows[0].0.len();
        let names: Vec<_> = (0..m).map(|i| alloc::format!("f{i}")).collect();
        let mut d = Dataset::new(names, ["a", "b", "c"]);
        for (x, y) in rows {
            d.push(x, *y, None).unwrap();
        }
        d
    }

    #[test]
    fn scaler_arithmetic() {
        let d = ds(&[(&[1.0, 5.0], 0), (&[2.0, 5.0], 0), (&[3.0, 5.0], 0)]);
        let s = fit_scaler(&d).unwrap();
        assert_eq!(s.means, [2.0, 5.0]);
        assert!((s.stds[0] - 0.816_496_580_927_726).abs() < 1e-12);
        assert_eq!(s.stds[1], 1.0);
        let z = s.apply(&[1.0, 5.0]).unwrap();
        assert!((z[0] + 1.224_744_871_391_589).abs() < 1e-12);
        assert_eq!(z[1], 0.0);
        let back = s.invert(&z);
        assert!((back[0] - 1.0).abs() < 1e-12 && back[1] == 5.0);
    }

    #[test]
    fn one_nn_returns_own_label() {
        let d = ds(&[(&[0.0, 0.0], 0), (&[1.0, 0.0], 1), (&[0.0, 1.0], 2), (&[5.0, 5.0], 1)]);
        let m = KnnModel::train(&d, &KnnParams { k: 1 }).unwrap();
        for i in 0..d.n_rows() {
            assert_eq!(m.predict(d.row(i)).unwrap(), d.label(i));
        }
    }

    #[test]
    fn three_nn_hand_computed() {
        // 1-D points, std-scaling preserves order. Query 2.1:
        // distances to 0,1,2,3,10 -> 2.1,1.1,0.1,0.9,7.9; nearest {2,3,1} -> labels b,a,b
        let d = ds(&[(&[0.0], 0), (&[1.0], 1), (&[2.0], 1), (&[3.0], 0), (&[10.0], 2)]);
        let m = KnnModel::train(&d, &KnnParams { k: 3 }).unwrap();
        assert_eq!(m.neighbors(&[2.1]).unwrap(), [2, 3, 1]);
        assert_eq!(m.predict(&[2.1]).unwrap(), 1);
    }

    #[test]
    fn distance_ties_keep_lower_index() {
        let d = ds(&[(&[0.0], 2), (&[2.0], 1), (&[2.0], 0), (&[4.0], 0)]);
        let m = KnnModel::train(&d, &KnnParams { k: 1 }).unwrap();
        assert_eq!(m.neighbors(&[1.0]).unwrap(), [0]);
        assert_eq!(m.neighbors(&[2.0]).unwrap(), [1]);
        let m = KnnModel::train(&d, &KnnParams { k: 2 }).unwrap();
        assert_eq!(m.neighbors(&[3.0]).unwrap(), [1, 2]);
    }
}
