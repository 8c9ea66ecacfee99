use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{majority, Classifier, LearnError};
use crate::dataset::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or cannot be split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per node; `None` tries all of them.
    pub feature_subsample: Option<usize>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: None, min_leaf: 1, feature_subsample: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// `x[feature] <= threshold` goes to `left`.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

/// A CART classification tree. Node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    nodes: Vec<Node>,
    n_features: usize,
    n_classes: usize,
    max_depth_used: usize,
}

impl TreeModel {
    pub fn train(ds: &Dataset, params: &TreeParams) -> Result<Self, LearnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut indices: Vec<u32> = (0..ds.n_rows() as u32).collect();
        grow(ds, &mut indices, params, &mut rng)
    }

    /// Rebuilds a tree from its node table, checking structural invariants.
    pub fn from_parts(nodes: Vec<Node>, n_features: usize, n_classes: usize) -> Result<Self, LearnError> {
        let bad = |m: alloc::string::String| Err(LearnError::Malformed(m));
        if nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        let mut parent_seen = vec![false; nodes.len()];
        parent_seen[0] = true;
        for (i, n) in nodes.iter().enumerate() {
            match n {
                Node::Split { feature, threshold, left, right } => {
                    if *feature as usize >= n_features || !threshold.is_finite() {
                        return bad(format!("node {i} has feature {feature} / threshold {threshold}"));
                    }
                    for &c in [left, right] {
                        let c = c as usize;
                        // children always follow their parent, which rules out cycles
                        if c <= i || c >= nodes.len() || parent_seen[c] {
                            return bad(format!("node {i} has invalid child {c}"));
                        }
                        parent_seen[c] = true;
                    }
                }
                Node::Leaf { counts } => {
                    if counts.len() != n_classes || counts.iter().all(|&c| c == 0) {
                        return bad(format!("leaf {i} has bad class counts"));
                    }
                }
            }
        }
        if let Some(i) = parent_seen.iter().position(|s| !s) {
            return bad(format!("node {i} is unreachable"));
        }
        let max_depth_used = depth_of(&nodes);
        Ok(TreeModel { nodes, n_features, n_classes, max_depth_used })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn max_depth_used(&self) -> usize {
        self.max_depth_used
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Class counts of the leaf `x` falls into.
    pub fn leaf_counts(&self, x: &[f64]) -> Result<&[u32], LearnError> {
        self.check_arity(x)?;
        Ok(self.leaf_unchecked(x))
    }

    fn leaf_unchecked(&self, x: &[f64]) -> &[u32] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature as usize] <= *threshold { *left } else { *right } as usize;
                }
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Majority class of the reached leaf and the leaf's class proportions.
    pub fn predict_scores(&self, x: &[f64]) -> Result<(usize, Vec<f64>), LearnError> {
        let counts = self.leaf_counts(x)?;
        let n: u32 = counts.iter().sum();
        Ok((majority(counts), counts.iter().map(|&c| c as f64 / n as f64).collect()))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> usize {
        majority(self.leaf_unchecked(x))
    }
}

impl Classifier for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, x: &[f64]) -> Result<usize, LearnError> {
        self.check_arity(x)?;
        Ok(self.predict_unchecked(x))
    }
}

fn depth_of(nodes: &[Node]) -> usize {
    let mut depth = vec![0usize; nodes.len()];
    let mut max = 0;
    for i in 0..nodes.len() {
        if let Node::Split { left, right, .. } = nodes[i] {
            depth[left as usize] = depth[i] + 1;
            depth[right as usize] = depth[i] + 1;
            max = max.max(depth[i] + 1);
        }
    }
    max
}

struct BestSplit {
    score: f64,
    feature: usize,
    threshold: f64,
}

/// Grows a tree on the (possibly repeated) row indices in `indices`.
pub(crate) fn grow(
    ds: &Dataset,
    indices: &mut [u32],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Result<TreeModel, LearnError> {
    if indices.is_empty() {
        return Err(LearnError::EmptyDataset);
    }
    let m = ds.n_features();
    let k = ds.n_classes();
    if m == 0 || k == 0 {
        return Err(LearnError::InvalidParams("dataset needs features and classes".into()));
    }
    let mtry = params.feature_subsample.unwrap_or(m);
    if mtry == 0 || mtry > m {
        return Err(LearnError::InvalidParams(format!("feature subsample {mtry} not in 1..={m}")));
    }
    if params.min_leaf == 0 {
        return Err(LearnError::InvalidParams("min_leaf must be at least 1".into()));
    }

    let mut nodes: Vec<Node> = Vec::new();
    let mut scratch: Vec<(f64, u32)> = Vec::with_capacity(indices.len());
    let mut order: Vec<usize> = (0..m).collect();
    let mut left_counts = vec![0u32; k];
    let mut right_counts = vec![0u32; k];
    let mut max_depth_used = 0;

    // (node id, start, end, depth)
    let mut stack = vec![(0usize, 0usize, indices.len(), 0usize)];
    nodes.push(Node::Leaf { counts: Vec::new() });
    while let Some((id, start, end, depth)) = stack.pop() {
        max_depth_used = max_depth_used.max(depth);
        let idx = &mut indices[start..end];
        let mut counts = vec![0u32; k];
        for &i in idx.iter() {
            counts[ds.label(i as usize)] += 1;
        }
        let n = idx.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || n < 2 * params.min_leaf {
            nodes[id] = Node::Leaf { counts };
            continue;
        }

        let mut best: Option<BestSplit> = None;
        let mut tried = 0;
        for j in 0..m {
            if tried == mtry {
                break;
            }
            if mtry < m {
                let r = rng.random_range(j..m);
                order.swap(j, r);
            }
            let f = order[j];
            scratch.clear();
            scratch.extend(idx.iter().map(|&i| (ds.value(i as usize, f), ds.label(i as usize) as u32)));
            scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if scratch[0].0 == scratch[n - 1].0 {
                continue;
            }
            tried += 1;
            left_counts.iter_mut().for_each(|c| *c = 0);
            right_counts.copy_from_slice(&counts);
            // sums of squared class counts on each side
            let mut sq_left: u64 = 0;
            let mut sq_right: u64 = counts.iter().map(|&c| u64::from(c) * u64::from(c)).sum();
            for i in 0..n - 1 {
                let c = scratch[i].1 as usize;
                sq_left += 2 * u64::from(left_counts[c]) + 1;
                left_counts[c] += 1;
                sq_right -= 2 * u64::from(right_counts[c]) - 1;
                right_counts[c] -= 1;
                let (lo, hi) = (scratch[i].0, scratch[i + 1].0);
                let n_left = i + 1;
                let n_right = n - n_left;
                if lo == hi || n_left < params.min_leaf || n_right < params.min_leaf {
                    continue;
                }
                // maximizing this minimizes the weighted child Gini impurity
                let score = sq_left as f64 / n_left as f64 + sq_right as f64 / n_right as f64;
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(BestSplit { score, feature: f, threshold });
                }
            }
        }

        let Some(split) = best else {
            nodes[id] = Node::Leaf { counts };
            continue;
        };
        // partition: rows with x <= threshold first
        let mut lo = 0;
        let mut hi = n;
        while lo < hi {
            if ds.value(idx[lo] as usize, split.feature) <= split.threshold {
                lo += 1;
            } else {
                hi -= 1;
                idx.swap(lo, hi);
            }
        }
        let left = nodes.len();
        nodes.push(Node::Leaf { counts: Vec::new() });
        let right = nodes.len();
        nodes.push(Node::Leaf { counts: Vec::new() });
        nodes[id] = Node::Split {
            feature: split.feature as u32,
            threshold: split.threshold,
            left: left as u32,
            right: right as u32,
        };
        stack.push((right, start + lo, end, depth + 1));
        stack.push((left, start, start + lo, depth + 1));
    }
    Ok(TreeModel { nodes, n_features: m, n_classes: k, max_depth_used })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(rows: &[(&[f64], usize)], n_classes: usize) -> Dataset {
        let m = rows[0].0.len();
        let names: Vec<_> = (0..m).map(|i| format!("f{i}")).collect();
        let classes: Vec<_> = (0..n_classes).map(|i| format!("c{i}")).collect();
        let mut d = Dataset::new(names, classes);
        for (x, y) in rows {
            d.push(x, *y, None).unwrap();
        }
        d
    }

    #[test]
    fn separable_single_split() {
        let d = ds(&[(&[0.0], 0), (&[1.0], 0), (&[10.0], 1), (&[11.0], 1)], 2);
        let t = TreeModel::train(&d, &TreeParams::default()).unwrap();
        assert_eq!(t.nodes().len(), 3);
        match &t.nodes()[0] {
            Node::Split { threshold, .. } => assert!(*threshold > 1.0 && *threshold < 10.0),
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(t.max_depth_used(), 1);
        for (x, y) in [(0.5, 0), (10.5, 1)] {
            assert_eq!(t.predict(&[x]).unwrap(), y);
        }
    }

    #[test]
    fn single_class_gives_single_leaf() {
        let d = ds(&[(&[0.0], 1), (&[5.0], 1), (&[7.0], 1)], 2);
        let t = TreeModel::train(&d, &TreeParams::default()).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.max_depth_used(), 0);
    }

    #[test]
    fn xor_needs_depth_two() {
        // Hand oracle: no first split reduces impurity, both depth-2 splits are perfect.
        let d = ds(&[(&[0.0, 0.0], 0), (&[0.0, 1.0], 1), (&[1.0, 0.0], 1), (&[1.0, 1.0], 0)], 2);
        let t = TreeModel::train(&d, &TreeParams::default()).unwrap();
        assert_eq!(t.max_depth_used(), 2);
        for i in 0..d.n_rows() {
            assert_eq!(t.predict(d.row(i)).unwrap(), d.label(i));
        }
    }

    #[test]
    fn tie_leaf_and_arity() {
        // identical inputs with conflicting labels cannot be split
        let d = ds(&[(&[1.0], 0), (&[1.0], 1), (&[1.0], 1), (&[1.0], 0)], 2);
        let t = TreeModel::train(&d, &TreeParams::default()).unwrap();
        let (class, scores) = t.predict_scores(&[1.0]).unwrap();
        assert_eq!(class, 0);
        assert_eq!(scores, [0.5, 0.5]);
        assert_eq!(t.predict(&[1.0, 2.0]), Err(LearnError::ArityMismatch { expected: 1, got: 2 }));
    }

    #[test]
    fn max_depth_and_min_leaf_respected() {
        let rows: Vec<(Vec<f64>, usize)> = (0..40).map(|i| (vec![i as f64], (i / 3) % 2)).collect();
        let refs: Vec<(&[f64], usize)> = rows.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
        let d = ds(&refs, 2);
        let t = TreeModel::train(&d, &TreeParams { max_depth: Some(3), ..TreeParams::default() }).unwrap();
        assert!(t.max_depth_used() <= 3);
        let t = TreeModel::train(&d, &TreeParams { min_leaf: 5, ..TreeParams::default() }).unwrap();
        for n in t.nodes() {
            if let Node::Leaf { counts } = n {
                assert!(counts.iter().sum::<u32>() >= 5);
            }
        }
    }

    #[test]
    fn from_parts_rejects_bad_tables() {
        let leaf = || Node::Leaf { counts: vec![1, 0] };
        assert!(TreeModel::from_parts(vec![leaf()], 1, 2).is_ok());
        let split = |l, r| Node::Split { feature: 0, threshold: 0.5, left: l, right: r };
        assert!(TreeModel::from_parts(vec![split(1, 2), leaf(), leaf()], 1, 2).is_ok());
        assert!(TreeModel::from_parts(vec![split(1, 1), leaf(), leaf()], 1, 2).is_err());
        assert!(TreeModel::from_parts(vec![split(1, 2), leaf(), leaf(), leaf()], 1, 2).is_err());
        assert!(TreeModel::from_parts(vec![split(0, 2), leaf(), leaf()], 1, 2).is_err());
        assert!(TreeModel::from_parts(vec![split(1, 2), leaf(), leaf()], 0, 2).is_err());
    }
}
