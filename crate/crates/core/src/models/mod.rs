//! The three classifiers: logistic regression, k-nearest neighbours, random forest.

pub mod forest;
pub mod knn;
pub mod logistic;

pub use forest::{
    default_mtry, fit_forest, predict_forest, variable_importance, DecisionTree, Forest, ForestConfig, Importance, Node,
};
pub use knn::{default_k_grid, knn_classify, tune_knn, KnnModel, KnnTuning};
pub use logistic::{fit_logistic, predict_logistic, CoefficientRow, LogisticConfig, LogisticModel};
