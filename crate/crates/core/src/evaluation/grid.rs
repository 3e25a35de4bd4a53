use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::protocol::{downsample, split, ClassCounts};
use super::{confusion, metrics, render_metrics_table, MetricsReport};
use crate::coda::SpanningPlrGraph;
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureSet};
use crate::ingest::Dataset;
use crate::models::forest::{
    default_mtry, fit_forest, predict_forest, variable_importance, Forest, ForestConfig, Importance, DEFAULT_TREES,
};
use crate::models::knn::{default_k_grid, tune_knn, KnnModel, KnnTuning};
use crate::models::logistic::{
    fit_logistic, predict_logistic, CoefficientRow, LogisticConfig, LogisticModel, INTERCEPT,
};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Logistic,
    Knn,
    Forest,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Logistic, Method::Knn, Method::Forest];

    pub fn title(self) -> &'static str {
        match self {
            Method::Logistic => "Logistic regression",
            Method::Knn => "k-nearest neighbours",
            Method::Forest => "Random forests",
        }
    }

    /// Short tag used in file names.
    pub fn tag(self) -> &'static str {
        match self {
            Method::Logistic => "logit",
            Method::Knn => "knn",
            Method::Forest => "rf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Standard,
    Compositional,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 2] = [FeatureKind::Standard, FeatureKind::Compositional];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Standard => "standard",
            FeatureKind::Compositional => "compositional",
        }
    }

    /// Logistic regression gets a spanning log-ratio set; the other methods get all 21.
    pub fn feature_set(self, method: Method, graph: &SpanningPlrGraph) -> FeatureSet {
        match (self, method) {
            (FeatureKind::Standard, _) => FeatureSet::Standard,
            (FeatureKind::Compositional, Method::Logistic) => FeatureSet::SpanningPlr(graph.clone()),
            (FeatureKind::Compositional, _) => FeatureSet::FullPlr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct GridConfig<T: Real> {
    pub seed: u64,
    pub train_fraction: f64,
    pub methods: Vec<Method>,
    pub features: Vec<FeatureKind>,
    pub k_grid: Vec<usize>,
    pub n_trees: usize,
    /// `None` resolves per feature set to about a third of its columns.
    pub mtry: Option<usize>,
    pub threshold: f64,
    pub knn_zscore: bool,
    pub stratified: bool,
    pub graph: SpanningPlrGraph,
    pub logistic: LogisticConfig<T>,
    /// Length of the reported importance ranking.
    pub top_n: usize,
}

impl<T: Real> GridConfig<T> {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            train_fraction: 0.7,
            methods: Method::ALL.to_vec(),
            features: FeatureKind::ALL.to_vec(),
            k_grid: default_k_grid(),
            n_trees: DEFAULT_TREES,
            mtry: None,
            threshold: 0.5,
            knn_zscore: false,
            stratified: false,
            graph: SpanningPlrGraph::default(),
            logistic: LogisticConfig::default(),
            top_n: 10,
        }
    }

    pub fn downsample_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }

    pub fn forest_seed(&self) -> u64 {
        self.seed.wrapping_add(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSummary {
    pub n_firms: usize,
    pub train: ClassCounts,
    pub train_balanced: ClassCounts,
    pub valid: ClassCounts,
    /// SHA-256 over the firm ids of the balanced training rows, one per line.
    pub train_hash: String,
    pub valid_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticSummary {
    pub converged: bool,
    pub iterations: usize,
    pub separation_flag: bool,
    pub coefficients: Vec<CoefficientRow>,
    pub significant: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel<T: Real> {
    Logistic(LogisticModel<T>),
    Knn(KnnModel<T>),
    Forest(Forest<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct CellResult<T: Real> {
    pub report: MetricsReport,
    pub columns: Vec<String>,
    pub train_hash: String,
    pub valid_hash: String,
    /// Balanced training rows dropped for non-finite features.
    pub train_excluded: usize,
    /// Non-finite validation cells replaced by the largest finite magnitude.
    pub valid_sentinel_cells: usize,
    /// Columns left out of the logistic fit as exact linear combinations of
    /// the intercept and earlier columns.
    pub aliased: Vec<String>,
    pub logistic: Option<LogisticSummary>,
    pub knn: Option<KnnTuning>,
    pub importance: Option<Vec<Importance>>,
    #[serde(skip)]
    pub model: FittedModel<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct GridResult<T: Real> {
    pub split: SplitSummary,
    pub cells: Vec<CellResult<T>>,
}

impl<T: Real> GridResult<T> {
    pub fn reports(&self) -> Vec<MetricsReport> {
        self.cells.iter().map(|c| c.report.clone()).collect()
    }

    pub fn cell(&self, method: Method, features: FeatureKind) -> Option<&CellResult<T>> {
        self.cells
            .iter()
            .find(|c| c.report.method == method && c.report.features == features)
    }

    /// Metrics table followed by split counts and exclusions.
    pub fn render(&self) -> String {
        let s = &self.split;
        let mut out = render_metrics_table(&self.reports());
        let _ = writeln!(
            out,
            "\ntrain {} ({} bankrupt), balanced to {} ({} bankrupt); validation {} ({} bankrupt)",
            s.train.total,
            s.train.bankrupt,
            s.train_balanced.total,
            s.train_balanced.bankrupt,
            s.valid.total,
            s.valid.bankrupt
        );
        for c in &self.cells {
            if c.train_excluded > 0 || c.valid_sentinel_cells > 0 {
                let _ = writeln!(
                    out,
                    "{}: {} training rows excluded, {} validation cells sentinelized",
                    c.report.label(),
                    c.train_excluded,
                    c.valid_sentinel_cells
                );
            }
        }
        out
    }
}

fn id_hash<T: Real>(dataset: &Dataset<T>, rows: &[usize]) -> String {
    let mut h = Sha256::new();
    for &i in rows {
        h.update(dataset.firms[i].id.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

fn non_finite_cells<T: Real>(x: &FeatureMatrix<T>) -> usize {
    x.rows().flatten().filter(|v| !v.is_finite()).count()
}

/// Splits once, downsamples the training subset once, then fits and scores
/// every requested method on every requested feature set using those same rows.
pub fn run_experiment_grid<T: Real>(dataset: &Dataset<T>, config: &GridConfig<T>) -> Result<GridResult<T>> {
    if config.methods.is_empty() || config.features.is_empty() {
        return Err(Error::Config("no method or no feature set selected".into()));
    }
    if !(config.threshold > 0.0 && config.threshold < 1.0) {
        return Err(Error::Config(format!(
            "threshold must lie in (0, 1), got {}",
            config.threshold
        )));
    }
    let labels = dataset.labels();
    let partition = split(&labels, config.train_fraction, config.seed, config.stratified)?;
    let balanced = downsample(&labels, &partition.train, config.downsample_seed())?;
    let split_summary = SplitSummary {
        n_firms: dataset.len(),
        train: ClassCounts::of(&labels, &partition.train),
        train_balanced: ClassCounts::of(&labels, &balanced),
        valid: ClassCounts::of(&labels, &partition.valid),
        train_hash: id_hash(dataset, &balanced),
        valid_hash: id_hash(dataset, &partition.valid),
    };
    let train_set = dataset.subset(&balanced);
    let valid_set = dataset.subset(&partition.valid);

    let combos: Vec<(Method, FeatureKind)> = config
        .features
        .iter()
        .flat_map(|&f| config.methods.iter().map(move |&m| (m, f)))
        .collect();
    let cells = combos
        .par_iter()
        .map(|&(method, kind)| {
            run_cell(&train_set, &valid_set, method, kind, config)
                .map_err(|e| e.context(format!("{} ({})", method.title(), kind.name())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridResult {
        split: split_summary,
        cells,
    })
}

fn run_cell<T: Real>(
    train_set: &Dataset<T>,
    valid_set: &Dataset<T>,
    method: Method,
    kind: FeatureKind,
    config: &GridConfig<T>,
) -> Result<CellResult<T>> {
    let features = kind.feature_set(method, &config.graph);
    let x_train = features.build(train_set);
    let y_train = train_set.labels();
    let x_valid_raw = features.build(valid_set);
    let y_valid = valid_set.labels();
    let valid_sentinel_cells = non_finite_cells(&x_valid_raw);
    let x_valid = x_valid_raw.sentinelized();

    // logistic and kNN drop training rows with non-finite features; the forest
    // sees them as extreme finite values
    let (x_fit, y_fit, train_excluded) = match method {
        Method::Forest => (x_train.sentinelized(), y_train.clone(), 0),
        Method::Logistic | Method::Knn => {
            let keep = x_train.finite_rows();
            let y: Vec<bool> = keep.iter().map(|&i| y_train[i]).collect();
            let excluded = x_train.n_rows() - keep.len();
            (x_train.select_rows(&keep), y, excluded)
        }
    };

    let mut aliased = Vec::new();
    let mut logistic = None;
    let mut knn = None;
    let mut importance = None;
    let (predicted, model) = match method {
        Method::Logistic => {
            let m = match fit_logistic(&x_fit, &y_fit, &config.logistic) {
                Err(Error::RankDeficient(names)) if !names.iter().any(|n| n == INTERCEPT) => {
                    let keep: Vec<usize> = (0..x_fit.n_cols())
                        .filter(|&j| !names.contains(&x_fit.columns()[j]))
                        .collect();
                    aliased = names;
                    fit_logistic(&x_fit.select_columns(&keep), &y_fit, &config.logistic)?
                }
                other => other?,
            };
            let keep: Vec<usize> = (0..x_valid.n_cols())
                .filter(|j| !aliased.contains(&x_valid.columns()[*j]))
                .collect();
            let (labels, _) = predict_logistic(&m, &x_valid.select_columns(&keep), T::of(config.threshold))?;
            logistic = Some(LogisticSummary {
                converged: m.converged,
                iterations: m.iterations,
                separation_flag: m.separation_flag,
                coefficients: m.coefficient_table(),
                significant: m.significant_predictors().into_iter().map(String::from).collect(),
            });
            (labels, FittedModel::Logistic(m))
        }
        Method::Knn => {
            let tuning = tune_knn(&x_fit, &y_fit, &x_valid, &y_valid, &config.k_grid, config.knn_zscore)?;
            let m = KnnModel::fit(&x_fit, &y_fit, tuning.best_k, config.knn_zscore)?;
            let labels = m.classify(&x_valid)?;
            knn = Some(tuning);
            (labels, FittedModel::Knn(m))
        }
        Method::Forest => {
            let forest_config = ForestConfig {
                n_trees: config.n_trees,
                mtry: Some(config.mtry.unwrap_or_else(|| default_mtry(x_fit.n_cols()))),
                seed: config.forest_seed(),
            };
            let f = fit_forest(&x_fit, &y_fit, &forest_config)?;
            let labels = predict_forest(&f, &x_valid)?;
            importance = Some(variable_importance(&f, config.top_n));
            (labels, FittedModel::Forest(f))
        }
    };

    let cm = confusion(&y_valid, &predicted)?;
    let all_rows = |d: &Dataset<T>| (0..d.len()).collect::<Vec<_>>();
    Ok(CellResult {
        report: MetricsReport {
            method,
            features: kind,
            confusion: cm,
            metrics: metrics(&cm)?,
        },
        columns: x_train.columns().to_vec(),
        train_hash: id_hash(train_set, &all_rows(train_set)),
        valid_hash: id_hash(valid_set, &all_rows(valid_set)),
        train_excluded,
        valid_sentinel_cells,
        aliased,
        logistic,
        knn,
        importance,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coda::Part;
    use crate::evaluation::{generate_synthetic, SyntheticSignal};

    fn data(seed: u64, n: usize) -> Dataset<f64> {
        let signal = SyntheticSignal::single(Part::Re, Part::Ncl, 2.5).unwrap();
        generate_synthetic(seed, n, 0.1, &signal).unwrap().dataset
    }

    #[test]
    fn six_cells_on_shared_rows() {
        let d = data(3, 800);
        let mut config = GridConfig::<f64>::new(11);
        config.n_trees = 30;
        let r = run_experiment_grid(&d, &config).unwrap();
        assert_eq!(r.cells.len(), 6);
        for c in &r.cells {
            assert_eq!(c.train_hash, r.split.train_hash);
            assert_eq!(c.valid_hash, r.split.valid_hash);
            let m = &c.report.metrics;
            assert_eq!(
                m.balanced_accuracy,
                Some((m.sensitivity.unwrap() + m.specificity.unwrap()) / 2.0)
            );
            assert!(m.balanced_accuracy.unwrap() >= 50.0, "{}", c.report.label());
        }
        assert_eq!(r.split.train_balanced.bankrupt * 2, r.split.train_balanced.total);
        assert_eq!(r.split.valid.total + r.split.train.total, 800);
        assert_eq!(
            r.cell(Method::Logistic, FeatureKind::Compositional)
                .unwrap()
                .columns
                .len(),
            6
        );
        assert_eq!(
            r.cell(Method::Knn, FeatureKind::Compositional).unwrap().columns.len(),
            21
        );
        assert!(r.render().starts_with("Prediction method"));
        let logit = r.cell(Method::Logistic, FeatureKind::Standard).unwrap();
        assert_eq!(logit.aliased, vec!["(NCL+CL)/(NCA+CA)".to_string()]);
        assert_eq!(logit.logistic.as_ref().unwrap().coefficients.len(), 10);
    }

    #[test]
    fn single_cell_and_reproducible() {
        let d = data(5, 400);
        let mut config = GridConfig::<f64>::new(2);
        config.methods = vec![Method::Forest];
        config.features = vec![FeatureKind::Standard];
        config.n_trees = 20;
        let a = run_experiment_grid(&d, &config).unwrap();
        assert_eq!(a.cells.len(), 1);
        let b = run_experiment_grid(&d, &config).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.cells[0].importance.as_ref().unwrap().len(), 10);
    }

    #[test]
    fn errors_carry_the_combination() {
        let d = data(5, 400);
        let mut config = GridConfig::<f64>::new(2);
        config.methods = vec![Method::Knn];
        config.features = vec![FeatureKind::Compositional];
        config.k_grid = vec![2, 4];
        let err = run_experiment_grid(&d, &config).unwrap_err();
        assert!(
            err.to_string().contains("k-nearest neighbours (compositional)"),
            "{err}"
        );
        config.methods.clear();
        assert!(run_experiment_grid(&d, &config).is_err());
    }
}
