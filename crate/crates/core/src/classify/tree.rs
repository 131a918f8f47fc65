use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_count, Classifier, ClassifyError, Dataset};

/// `1 - sum(p_k^2)` over class proportions.
pub fn gini_impurity(class_counts: &[usize]) -> Result<f64, ClassifyError> {
    let total: usize = class_counts.iter().sum();
    if total == 0 {
        return Err(ClassifyError::EmptyNode);
    }
    Ok(gini_unchecked(class_counts, total))
}

fn gini_unchecked(counts: &[usize], total: usize) -> f64 {
    let n = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// Binary classification tree. Internal nodes send `value <= threshold`
/// left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature_index: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class_counts: Vec<usize>,
        predicted_class: usize,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }
}

impl Classifier for TreeNode {
    fn predict(&self, row: &[f64]) -> usize {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { predicted_class, .. } => return *predicted_class,
                TreeNode::Internal {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature_index] <= *threshold { left } else { right };
                }
            }
        }
    }
}

/// Candidate features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    All,
    /// `max(1, floor(sqrt(p)))` features drawn per split.
    Sqrt,
    Count(usize),
}

impl FeatureSubset {
    fn size(self, p: usize) -> usize {
        match self {
            FeatureSubset::All => p,
            FeatureSubset::Sqrt => ((p as f64).sqrt().floor() as usize).max(1),
            FeatureSubset::Count(k) => k.clamp(1, p.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or `min_leaf` stops it.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub feature_subset: FeatureSubset,
    /// Drives feature subsampling only.
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_leaf: 1,
            feature_subset: FeatureSubset::All,
            seed: 0,
        }
    }
}

pub fn train_tree(data: &Dataset, params: &TreeParams) -> Result<TreeNode, ClassifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let rows: Vec<usize> = (0..data.len()).collect();
    train_tree_on(data, &rows, params, &mut rng)
}

/// Trains on `rows` (which may repeat, as in a bootstrap sample).
pub(crate) fn train_tree_on(
    data: &Dataset,
    rows: &[usize],
    params: &TreeParams,
    rng: &mut impl Rng,
) -> Result<TreeNode, ClassifyError> {
    if rows.is_empty() {
        return Err(ClassifyError::EmptyDataset);
    }
    let mut builder = Builder {
        data,
        params,
        rng,
        scratch: Vec::with_capacity(rows.len()),
    };
    let mut rows = rows.to_vec();
    Ok(builder.grow(&mut rows, 0))
}

struct Builder<'a, R> {
    data: &'a Dataset,
    params: &'a TreeParams,
    rng: &'a mut R,
    scratch: Vec<(f64, usize)>,
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.data.n_classes()];
        for &r in rows {
            c[self.data.labels[r]] += 1;
        }
        c
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize) -> TreeNode {
        let counts = self.counts(rows);
        let leaf = |counts: Vec<usize>| TreeNode::Leaf {
            predicted_class: argmax_count(&counts),
            class_counts: counts,
        };
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || rows.len() < 2 * self.params.min_leaf.max(1) {
            return leaf(counts);
        }
        let Some(split) = self.best_split(rows, &counts) else {
            return leaf(counts);
        };
        let mid = partition(rows, |r| self.data.features[r][split.feature] <= split.threshold);
        let (l, r) = rows.split_at_mut(mid);
        TreeNode::Internal {
            feature_index: split.feature,
            threshold: split.threshold,
            left: Box::new(self.grow(l, depth + 1)),
            right: Box::new(self.grow(r, depth + 1)),
        }
    }

    /// Lowest weighted child Gini over midpoints of consecutive distinct
    /// values. Earlier features and lower thresholds win ties.
    fn best_split(&mut self, rows: &[usize], counts: &[usize]) -> Option<Split> {
        let p = self.data.n_features();
        let k = self.params.feature_subset.size(p);
        let mut features: Vec<usize> = if k >= p {
            (0..p).collect()
        } else {
            index::sample(self.rng, p, k).into_vec()
        };
        features.sort_unstable();

        let n = rows.len();
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<Split> = None;
        let mut left = vec![0usize; counts.len()];
        let mut right = vec![0usize; counts.len()];
        for f in features {
            self.scratch.clear();
            self.scratch.extend(rows.iter().map(|&r| (self.data.features[r][f], self.data.labels[r])));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            left.iter_mut().for_each(|c| *c = 0);
            right.copy_from_slice(counts);
            for i in 0..n - 1 {
                let (v, label) = self.scratch[i];
                left[label] += 1;
                right[label] -= 1;
                let next = self.scratch[i + 1].0;
                let n_left = i + 1;
                if v == next || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let impurity = (n_left as f64 * gini_unchecked(&left, n_left)
                    + (n - n_left) as f64 * gini_unchecked(&right, n - n_left))
                    / n as f64;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }
}

/// Stable-enough in-place partition; returns the count satisfying `pred`.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut mid = 0;
    for i in 0..rows.len() {
        if pred(rows[i]) {
            rows.swap(i, mid);
            mid += 1;
        }
    }
    mid
}
