//! Random forest of Gini classification trees.
//!
//! Each tree is grown on a bootstrap resample of the training rows, to purity
//! or until a node holds fewer than two samples. At every node `mtry`
//! features are drawn without replacement and the split minimising the
//! count-weighted Gini impurity of the children is taken, with the threshold
//! at the midpoint between consecutive distinct values (`x <= t` goes left).
//! A node with no impurity-reducing split becomes a leaf.
//!
//! Tree `i` draws from its own ChaCha stream seeded with `seed + i`, so the
//! forest is identical whether trees are grown serially or in parallel.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::scalar::Real;

pub const DEFAULT_TREES: usize = 100;

/// About one third of the features, rounded up: 4 of 10, 7 of 21.
pub fn default_mtry(n_features: usize) -> usize {
    n_features.div_ceil(3).max(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` resolves to [`default_mtry`].
    pub mtry: Option<usize>,
    pub seed: u64,
}

impl ForestConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            n_trees: DEFAULT_TREES,
            mtry: None,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "")]
pub enum Node<T: Real> {
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
        /// Bootstrap samples reaching the node.
        n_samples: usize,
        /// Gini impurity of the node.
        impurity: T,
        /// Count-weighted impurity decrease, `n G - n_l G_l - n_r G_r`.
        decrease: T,
    },
    Leaf {
        label: bool,
        n_bankrupt: usize,
        n_healthy: usize,
    },
}

/// Flat node array; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DecisionTree<T: Real> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Real> DecisionTree<T> {
    pub fn leaf(label: bool) -> Self {
        Self {
            nodes: vec![Node::Leaf {
                label,
                n_bankrupt: label as usize,
                n_healthy: !label as usize,
            }],
        }
    }

    pub fn predict_row(&self, row: &[T]) -> bool {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label, .. } => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go<T: Real>(t: &DecisionTree<T>, at: usize) -> usize {
            match &t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Forest<T: Real> {
    pub trees: Vec<DecisionTree<T>>,
    pub n_trees: usize,
    pub mtry: usize,
    pub seed: u64,
    pub feature_names: Vec<String>,
    /// Mean decrease in Gini impurity per feature, averaged over trees.
    pub importance: Vec<T>,
    pub warnings: Vec<String>,
}

pub fn gini<T: Real>(bankrupt: usize, total: usize) -> T {
    if total == 0 {
        return T::zero();
    }
    let p = T::of_usize(bankrupt) / T::of_usize(total);
    let q = T::one() - p;
    T::one() - p * p - q * q
}

struct BestSplit<T> {
    feature: usize,
    threshold: T,
    /// Count-weighted child impurity `n_l G_l + n_r G_r`.
    child_impurity: T,
    split_at: usize,
}

struct Grower<'a, T: Real> {
    x: &'a FeatureMatrix<T>,
    y: &'a [bool],
    mtry: usize,
    nodes: Vec<Node<T>>,
    importance: Vec<T>,
}

impl<T: Real> Grower<'_, T> {
    fn best_split(&self, samples: &mut [usize], rng: &mut ChaCha8Rng) -> Option<BestSplit<T>> {
        let n = samples.len();
        let n_pos = samples.iter().filter(|&&i| self.y[i]).count();
        let mut best: Option<BestSplit<T>> = None;
        let mut pairs: Vec<(T, bool)> = Vec::with_capacity(n);
        for feature in index::sample(rng, self.x.n_cols(), self.mtry) {
            pairs.clear();
            pairs.extend(samples.iter().map(|&i| (self.x.get(i, feature), self.y[i])));
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            let mut left_pos = 0;
            for s in 1..n {
                left_pos += pairs[s - 1].1 as usize;
                let (lo, hi) = (pairs[s - 1].0, pairs[s].0);
                if lo == hi {
                    continue;
                }
                let right_pos = n_pos - left_pos;
                let child = T::of_usize(s) * gini::<T>(left_pos, s) + T::of_usize(n - s) * gini::<T>(right_pos, n - s);
                if best.as_ref().is_none_or(|b| child < b.child_impurity) {
                    // halves first so +-MAX sentinels cannot overflow
                    let mut threshold = lo / T::of(2.0) + hi / T::of(2.0);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        child_impurity: child,
                        split_at: s,
                    });
                }
            }
        }
        best
    }

    /// Grows the subtree for `samples` and returns its node index.
    fn grow(&mut self, samples: &mut [usize], rng: &mut ChaCha8Rng) -> usize {
        let n = samples.len();
        let n_pos = samples.iter().filter(|&&i| self.y[i]).count();
        let impurity = gini::<T>(n_pos, n);
        let id = self.nodes.len();
        let leaf = Node::Leaf {
            label: 2 * n_pos >= n,
            n_bankrupt: n_pos,
            n_healthy: n - n_pos,
        };
        self.nodes.push(leaf.clone());
        if n < 2 || n_pos == 0 || n_pos == n {
            return id;
        }
        let Some(best) = self.best_split(samples, rng) else {
            return id;
        };
        let decrease = T::of_usize(n) * impurity - best.child_impurity;
        if !(decrease > T::of_usize(n) * T::epsilon() * T::of(4.0)) {
            return id;
        }
        let feature = best.feature;
        samples.sort_by(|&a, &b| {
            self.x
                .get(a, feature)
                .partial_cmp(&self.x.get(b, feature))
                .expect("finite features")
                .then(a.cmp(&b))
        });
        let (l, r) = samples.split_at_mut(best.split_at);
        self.importance[feature] += decrease;
        let left = self.grow(l, rng);
        let right = self.grow(r, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold: best.threshold,
            left,
            right,
            n_samples: n,
            impurity,
            decrease,
        };
        id
    }
}

fn grow_tree<T: Real>(x: &FeatureMatrix<T>, y: &[bool], mtry: usize, seed: u64) -> (DecisionTree<T>, Vec<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = x.n_rows();
    let mut samples: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let mut grower = Grower {
        x,
        y,
        mtry,
        nodes: Vec::new(),
        importance: vec![T::zero(); x.n_cols()],
    };
    grower.grow(&mut samples, &mut rng);
    (DecisionTree { nodes: grower.nodes }, grower.importance)
}

/// Fits `config.n_trees` trees. Non-finite cells must be mapped to finite
/// sentinels beforehand (see [`FeatureMatrix::sentinelized`]).
pub fn fit_forest<T: Real>(x: &FeatureMatrix<T>, y: &[bool], config: &ForestConfig) -> Result<Forest<T>> {
    let (n, p) = (x.n_rows(), x.n_cols());
    if y.len() != n {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    if n == 0 || p == 0 {
        return Err(Error::InsufficientData(
            "forest needs at least one row and one feature".into(),
        ));
    }
    if config.n_trees == 0 {
        return Err(Error::Config("number of trees must be positive".into()));
    }
    let mtry = config.mtry.unwrap_or_else(|| default_mtry(p));
    if mtry == 0 || mtry > p {
        return Err(Error::Config(format!("mtry = {mtry} must lie in 1..={p}")));
    }
    x.check_finite()?;

    let mut warnings = Vec::new();
    let positives = y.iter().filter(|&&b| b).count();
    if positives == 0 || positives == n {
        warnings.push(format!(
            "training labels are all {}; forest predicts that class everywhere",
            if positives == 0 { "healthy" } else { "bankrupt" }
        ));
    }

    let grown: Vec<(DecisionTree<T>, Vec<T>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| grow_tree(x, y, mtry, config.seed.wrapping_add(t as u64)))
        .collect();
    let mut importance = vec![T::zero(); p];
    for (_, imp) in &grown {
        for (acc, &v) in importance.iter_mut().zip(imp) {
            *acc += v;
        }
    }
    let k = T::of_usize(config.n_trees);
    importance.iter_mut().for_each(|v| *v /= k);
    Ok(Forest {
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        n_trees: config.n_trees,
        mtry,
        seed: config.seed,
        feature_names: x.columns().to_vec(),
        importance,
        warnings,
    })
}

impl<T: Real> Forest<T> {
    /// Assembles a forest from existing trees; importance is zero.
    pub fn from_trees(trees: Vec<DecisionTree<T>>, feature_names: Vec<String>) -> Self {
        let p = feature_names.len();
        Self {
            n_trees: trees.len(),
            trees,
            mtry: p,
            seed: 0,
            importance: vec![T::zero(); p],
            feature_names,
            warnings: Vec::new(),
        }
    }

    fn check_columns(&self, x: &FeatureMatrix<T>) -> Result<()> {
        if x.n_cols() != self.feature_names.len() {
            return Err(Error::ColumnMismatch {
                expected: self.feature_names.len(),
                found: x.n_cols(),
            });
        }
        Ok(())
    }

    /// Number of trees voting bankrupt, per row.
    pub fn vote_counts(&self, x: &FeatureMatrix<T>) -> Result<Vec<usize>> {
        self.check_columns(x)?;
        Ok((0..x.n_rows())
            .map(|i| {
                let row = x.row(i);
                self.trees.iter().filter(|t| t.predict_row(row)).count()
            })
            .collect())
    }
}

/// Majority vote; a tied vote goes to bankrupt.
pub fn predict_forest<T: Real>(forest: &Forest<T>, x: &FeatureMatrix<T>) -> Result<Vec<bool>> {
    let n_trees = forest.trees.len();
    Ok(forest.vote_counts(x)?.into_iter().map(|v| 2 * v >= n_trees).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Importance {
    pub feature: String,
    pub mean_decrease_gini: f64,
}

/// Features by descending mean decrease in Gini, ties in column order.
pub fn variable_importance<T: Real>(forest: &Forest<T>, top_n: usize) -> Vec<Importance> {
    let mut order: Vec<usize> = (0..forest.importance.len()).collect();
    order.sort_by(|&a, &b| {
        forest.importance[b]
            .partial_cmp(&forest.importance[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
        .into_iter()
        .take(top_n)
        .map(|j| Importance {
            feature: forest.feature_names[j].clone(),
            mean_decrease_gini: forest.importance[j].as_f64(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn split(feature: usize, threshold: f64, left: usize, right: usize) -> Node<f64> {
        Node::Split {
            feature,
            threshold,
            left,
            right,
            n_samples: 0,
            impurity: 0.0,
            decrease: 0.0,
        }
    }

    fn leaf(label: bool) -> Node<f64> {
        Node::Leaf {
            label,
            n_bankrupt: 0,
            n_healthy: 0,
        }
    }

    #[test]
    fn mtry_defaults() {
        assert_eq!(default_mtry(10), 4);
        assert_eq!(default_mtry(21), 7);
        assert_eq!(default_mtry(6), 2);
        assert_eq!(default_mtry(1), 1);
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini::<f64>(0, 10), 0.0);
        assert_eq!(gini::<f64>(5, 10), 0.5);
        assert!((gini::<f64>(1, 4) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn hand_built_forest_votes() {
        let names = vec!["a".to_string(), "b".to_string()];
        let trees = vec![
            DecisionTree {
                nodes: vec![split(0, 0.5, 1, 2), leaf(false), leaf(true)],
            },
            DecisionTree {
                nodes: vec![split(1, 0.0, 1, 2), leaf(true), leaf(false)],
            },
            DecisionTree::leaf(true),
        ];
        let f = Forest::from_trees(trees, names);
        let x = FeatureMatrix::unnamed(2, vec![0.0, 1.0, 1.0, -1.0, 1.0, 1.0, 0.0, -1.0]).unwrap();
        // row0: F, F, T -> 1; row1: T, T, T -> 3; row2: T, F, T -> 2; row3: F, T, T -> 2
        assert_eq!(f.vote_counts(&x).unwrap(), vec![1, 3, 2, 2]);
        assert_eq!(predict_forest(&f, &x).unwrap(), vec![false, true, true, true]);
        let narrow = FeatureMatrix::unnamed(1, vec![0.0]).unwrap();
        assert!(predict_forest(&f, &narrow).is_err());
    }

    #[test]
    fn even_vote_tie_goes_to_bankrupt() {
        let f = Forest::from_trees(
            vec![DecisionTree::leaf(true), DecisionTree::leaf(false)],
            vec!["a".into()],
        );
        let x = FeatureMatrix::unnamed(1, vec![0.0]).unwrap();
        assert_eq!(predict_forest(&f, &x).unwrap(), vec![true]);
    }

    #[test]
    fn single_tree_equals_its_leaf() {
        let x = FeatureMatrix::unnamed(1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let y = [false, false, true, true];
        let f = fit_forest(
            &x,
            &y,
            &ForestConfig {
                n_trees: 1,
                mtry: Some(1),
                seed: 3,
            },
        )
        .unwrap();
        let direct: Vec<bool> = (0..4).map(|i| f.trees[0].predict_row(x.row(i))).collect();
        assert_eq!(predict_forest(&f, &x).unwrap(), direct);
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = FeatureMatrix::unnamed(2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let f = fit_forest(&x, &[true; 3], &ForestConfig::new(1)).unwrap();
        assert_eq!(f.warnings.len(), 1);
        assert!(f.importance.iter().all(|&v| v == 0.0));
        let q = FeatureMatrix::unnamed(2, vec![-9.0, 9.0]).unwrap();
        assert_eq!(predict_forest(&f, &q).unwrap(), vec![true]);
        let ranked = variable_importance(&f, 10);
        assert_eq!(ranked.len(), 2);
        assert_eq!(ranked[0].feature, "x0");
    }

    #[test]
    fn separable_toy_data_is_learned() {
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let t = i as f64;
            data.extend([t, 0.5 * t + (i % 3) as f64]);
            y.push(i >= 10);
        }
        let x = FeatureMatrix::unnamed(2, data).unwrap();
        let f = fit_forest(
            &x,
            &y,
            &ForestConfig {
                n_trees: 25,
                mtry: Some(2),
                seed: 11,
            },
        )
        .unwrap();
        assert_eq!(predict_forest(&f, &x).unwrap(), y);
    }

    #[test]
    fn invalid_configs() {
        let x = FeatureMatrix::unnamed(2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let y = [true, false];
        assert!(fit_forest(
            &x,
            &y,
            &ForestConfig {
                n_trees: 5,
                mtry: Some(3),
                seed: 0
            }
        )
        .is_err());
        assert!(fit_forest(
            &x,
            &y,
            &ForestConfig {
                n_trees: 0,
                mtry: None,
                seed: 0
            }
        )
        .is_err());
        let bad = FeatureMatrix::unnamed(1, vec![f64::NAN, 1.0]).unwrap();
        assert!(fit_forest(&bad, &y, &ForestConfig::new(0)).is_err());
    }

    #[test]
    fn sentinel_values_split_cleanly() {
        let x = FeatureMatrix::unnamed(1, vec![-f64::MAX, 0.0, 1.0, f64::MAX]).unwrap();
        let y = [false, false, true, true];
        let f = fit_forest(
            &x,
            &y,
            &ForestConfig {
                n_trees: 15,
                mtry: None,
                seed: 2,
            },
        )
        .unwrap();
        for t in &f.trees {
            for node in &t.nodes {
                if let Node::Split { threshold, .. } = node {
                    assert!(threshold.is_finite());
                }
            }
        }
    }

    fn noisy_signal(seed: u64, n: usize, p: usize) -> (FeatureMatrix<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
            let noise: f64 = StandardNormal.sample(&mut rng);
            y.push(row[0] + 0.3 * noise > 0.0);
            data.extend(row);
        }
        (FeatureMatrix::unnamed(p, data).unwrap(), y)
    }

    #[test]
    fn signal_feature_ranks_first() {
        let mut first = 0;
        for seed in 0..20 {
            let (x, y) = noisy_signal(seed, 200, 6);
            let f = fit_forest(
                &x,
                &y,
                &ForestConfig {
                    n_trees: 50,
                    mtry: None,
                    seed,
                },
            )
            .unwrap();
            if variable_importance(&f, 10)[0].feature == "x0" {
                first += 1;
            }
        }
        assert!(first >= 19, "signal ranked first in {first} of 20 seeds");
    }

    #[test]
    fn splits_never_increase_impurity() {
        let (x, y) = noisy_signal(5, 150, 5);
        let f = fit_forest(
            &x,
            &y,
            &ForestConfig {
                n_trees: 10,
                mtry: None,
                seed: 5,
            },
        )
        .unwrap();
        for t in &f.trees {
            for node in &t.nodes {
                if let Node::Split {
                    decrease,
                    impurity,
                    n_samples,
                    ..
                } = node
                {
                    assert!(*decrease > 0.0);
                    assert!(*decrease <= *impurity * *n_samples as f64 + 1e-12);
                }
            }
        }
        assert!(f.importance.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn deterministic_and_serializable() {
        let (x, y) = noisy_signal(9, 120, 4);
        let cfg = ForestConfig {
            n_trees: 20,
            mtry: None,
            seed: 42,
        };
        let a = fit_forest(&x, &y, &cfg).unwrap();
        let b = fit_forest(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.contains("\"kind\":\"split\""));
        let back: Forest<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(predict_forest(&back, &x).unwrap(), predict_forest(&a, &x).unwrap());
    }
}
