use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{train_tree_on, FeatureSubset, TreeNode, TreeParams};
use super::{argmax_count, Classifier, ClassifyError, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub feature_subset: FeatureSubset,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub rng_seed: u64,
}

impl EnsembleParams {
    /// 100 bootstrap trees drawing sqrt(p) candidate features per split.
    pub fn random_forest(rng_seed: u64) -> Self {
        EnsembleParams {
            n_trees: 100,
            bootstrap: true,
            feature_subset: FeatureSubset::Sqrt,
            max_depth: None,
            min_leaf: 1,
            rng_seed,
        }
    }

    /// 100 bootstrap trees over all features.
    pub fn bagging(rng_seed: u64) -> Self {
        EnsembleParams {
            feature_subset: FeatureSubset::All,
            ..Self::random_forest(rng_seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub per_tree_feature_subsampling: bool,
    pub rng_seed: u64,
    pub n_classes: usize,
}

impl ForestModel {
    pub fn votes(&self, row: &[f64]) -> Vec<usize> {
        let mut votes = vec![0; self.n_classes];
        for t in &self.trees {
            votes[t.predict(row)] += 1;
        }
        votes
    }
}

impl Classifier for ForestModel {
    /// Majority vote; ties go to the lowest class index.
    fn predict(&self, row: &[f64]) -> usize {
        argmax_count(&self.votes(row))
    }
}

/// Each tree gets its own ChaCha stream (stream = tree index) seeded from
/// `rng_seed`, so trees train independently and the result does not depend
/// on scheduling.
pub fn train_ensemble(data: &Dataset, params: &EnsembleParams) -> Result<ForestModel, ClassifyError> {
    if params.n_trees == 0 {
        return Err(ClassifyError::NoTrees);
    }
    if data.is_empty() {
        return Err(ClassifyError::EmptyDataset);
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        feature_subset: params.feature_subset,
        seed: params.rng_seed,
    };
    let n = data.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
            rng.set_stream(i as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            train_tree_on(data, &rows, &tree_params, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ForestModel {
        trees,
        per_tree_feature_subsampling: !matches!(params.feature_subset, FeatureSubset::All),
        rng_seed: params.rng_seed,
        n_classes: data.n_classes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::train_tree;

    fn noisy_dataset(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..120 {
            let y = i % 2;
            let row: Vec<f64> = (0..6).map(|j| rng.gen::<f64>() + if j < 2 { y as f64 * 0.8 } else { 0.0 }).collect();
            features.push(row);
            labels.push(y);
        }
        Dataset::new(features, labels, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn single_tree_without_bootstrap_matches_plain_tree() {
        let d = noisy_dataset(3);
        let params = EnsembleParams {
            n_trees: 1,
            bootstrap: false,
            feature_subset: FeatureSubset::All,
            max_depth: None,
            min_leaf: 1,
            rng_seed: 9,
        };
        let forest = train_ensemble(&d, &params).unwrap();
        let tree = train_tree(&d, &TreeParams::default()).unwrap();
        assert_eq!(forest.trees[0], tree);
        assert_eq!(forest.predict_all(&d.features), tree.predict_all(&d.features));
    }

    #[test]
    fn same_seed_same_model() {
        let d = noisy_dataset(5);
        let a = train_ensemble(&d, &EnsembleParams { n_trees: 15, ..EnsembleParams::random_forest(42) }).unwrap();
        let b = train_ensemble(&d, &EnsembleParams { n_trees: 15, ..EnsembleParams::random_forest(42) }).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = train_ensemble(&d, &EnsembleParams { n_trees: 15, ..EnsembleParams::random_forest(43) }).unwrap();
        assert_ne!(a, c);
        assert!(a.per_tree_feature_subsampling);
    }

    #[test]
    fn vote_ties_go_to_lowest_class() {
        let leaf = |c: usize| TreeNode::Leaf { class_counts: vec![1, 1], predicted_class: c };
        let f = ForestModel { trees: vec![leaf(1), leaf(0)], per_tree_feature_subsampling: false, rng_seed: 0, n_classes: 2 };
        assert_eq!(f.predict(&[0.0]), 0);
    }

    #[test]
    fn zero_trees_rejected() {
        let d = noisy_dataset(1);
        let p = EnsembleParams { n_trees: 0, ..EnsembleParams::bagging(0) };
        assert_eq!(train_ensemble(&d, &p), Err(ClassifyError::NoTrees));
    }
}
