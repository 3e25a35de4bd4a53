//! k-nearest-neighbour classification by Euclidean distance.
//!
//! Neighbours are ranked by (distance, training row index), so an exact tie
//! at the k-th place goes to the earlier training row. `k` is odd, so a
//! binary vote cannot tie.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::scalar::{squared_euclidean, Real};

/// Per-column standardisation fitted on the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ZScore<T: Real> {
    pub means: Vec<T>,
    /// Columns with zero spread keep a scale of 1.
    pub scales: Vec<T>,
}

impl<T: Real> ZScore<T> {
    pub fn fit(x: &FeatureMatrix<T>) -> Self {
        let n = T::of_usize(x.n_rows().max(1));
        let (mut means, mut scales) = (Vec::new(), Vec::new());
        for j in 0..x.n_cols() {
            let col = x.column(j);
            let mean = col.iter().copied().sum::<T>() / n;
            let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            means.push(mean);
            scales.push(if var > T::zero() { var.sqrt() } else { T::one() });
        }
        Self { means, scales }
    }

    pub fn apply(&self, x: &FeatureMatrix<T>) -> FeatureMatrix<T> {
        let mut data = Vec::with_capacity(x.n_rows() * x.n_cols());
        for r in x.rows().take(x.n_rows()) {
            data.extend(
                r.iter()
                    .zip(&self.means)
                    .zip(&self.scales)
                    .map(|((&v, &m), &s)| (v - m) / s),
            );
        }
        FeatureMatrix::new(x.columns().to_vec(), data).expect("same shape")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KnnModel<T: Real> {
    train: FeatureMatrix<T>,
    labels: Vec<bool>,
    k: usize,
    scaler: Option<ZScore<T>>,
}

fn check_k(k: usize, n: usize) -> std::result::Result<(), String> {
    if k == 0 || k.is_multiple_of(2) {
        Err(format!("k = {k} must be a positive odd integer"))
    } else if k > n {
        Err(format!("k = {k} exceeds the {n} training rows"))
    } else {
        Ok(())
    }
}

impl<T: Real> KnnModel<T> {
    /// Stores the training set; with `zscore` every column is standardised
    /// by the training mean and standard deviation.
    pub fn fit(train: &FeatureMatrix<T>, labels: &[bool], k: usize, zscore: bool) -> Result<Self> {
        if labels.len() != train.n_rows() {
            return Err(Error::LengthMismatch(train.n_rows(), labels.len()));
        }
        check_k(k, train.n_rows()).map_err(Error::Config)?;
        train.check_finite()?;
        let scaler = zscore.then(|| ZScore::fit(train));
        let train = match &scaler {
            Some(s) => s.apply(train),
            None => train.clone(),
        };
        Ok(Self {
            train,
            labels: labels.to_vec(),
            k,
            scaler,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn prepare_query(&self, query: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
        if query.n_cols() != self.train.n_cols() && query.n_rows() > 0 {
            return Err(Error::ColumnMismatch {
                expected: self.train.n_cols(),
                found: query.n_cols(),
            });
        }
        Ok(match &self.scaler {
            Some(s) => s.apply(query),
            None => query.clone(),
        })
    }

    /// Training rows sorted by (distance to `q`, index), truncated to `k`.
    fn neighbours(&self, q: &[T], k: usize) -> Vec<usize> {
        let mut d: Vec<(T, usize)> = (0..self.train.n_rows())
            .map(|i| (squared_euclidean(self.train.row(i), q), i))
            .collect();
        d.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        d.truncate(k);
        d.into_iter().map(|(_, i)| i).collect()
    }

    fn vote(&self, neighbours: &[usize]) -> bool {
        let yes = neighbours.iter().filter(|&&i| self.labels[i]).count();
        2 * yes > neighbours.len()
    }

    pub fn classify(&self, query: &FeatureMatrix<T>) -> Result<Vec<bool>> {
        let q = self.prepare_query(query)?;
        Ok((0..q.n_rows())
            .map(|i| self.vote(&self.neighbours(q.row(i), self.k)))
            .collect())
    }

    /// Predictions for several `k` at once from a single neighbour ranking
    /// per query. Every `k` must be odd and at most the training size.
    fn classify_many(&self, query: &FeatureMatrix<T>, ks: &[usize]) -> Result<Vec<Vec<bool>>> {
        let q = self.prepare_query(query)?;
        let k_max = ks.iter().copied().max().unwrap_or(0);
        let mut out = vec![Vec::with_capacity(q.n_rows()); ks.len()];
        for i in 0..q.n_rows() {
            let nb = self.neighbours(q.row(i), k_max);
            for (slot, &k) in out.iter_mut().zip(ks) {
                slot.push(self.vote(&nb[..k]));
            }
        }
        Ok(out)
    }
}

pub fn knn_classify<T: Real>(model: &KnnModel<T>, query: &FeatureMatrix<T>) -> Result<Vec<bool>> {
    model.classify(query)
}

pub fn default_k_grid() -> Vec<usize> {
    (1..=25).step_by(2).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KAccuracy {
    pub k: usize,
    /// Percentage of validation rows classified correctly.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedK {
    pub k: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnnTuning {
    pub best_k: usize,
    pub table: Vec<KAccuracy>,
    pub skipped: Vec<SkippedK>,
}

/// Picks the `k` with the highest validation accuracy, smaller `k` on ties.
/// Grid entries that are even or exceed the training size are skipped and noted.
pub fn tune_knn<T: Real>(
    train: &FeatureMatrix<T>,
    train_labels: &[bool],
    valid: &FeatureMatrix<T>,
    valid_labels: &[bool],
    k_grid: &[usize],
    zscore: bool,
) -> Result<KnnTuning> {
    if valid_labels.len() != valid.n_rows() {
        return Err(Error::LengthMismatch(valid.n_rows(), valid_labels.len()));
    }
    if valid.n_rows() == 0 {
        return Err(Error::InsufficientData("empty validation set".into()));
    }
    let mut ks: Vec<usize> = Vec::new();
    let mut skipped = Vec::new();
    for &k in k_grid {
        if ks.contains(&k) {
            continue;
        }
        match check_k(k, train.n_rows()) {
            Ok(()) => ks.push(k),
            Err(reason) => skipped.push(SkippedK { k, reason }),
        }
    }
    let Some(&k_min) = ks.iter().min() else {
        return Err(Error::Config("no usable k in the grid".into()));
    };
    let model = KnnModel::fit(train, train_labels, k_min, zscore)?;
    let predictions = model.classify_many(valid, &ks)?;
    let mut table: Vec<KAccuracy> = ks
        .iter()
        .zip(&predictions)
        .map(|(&k, pred)| {
            let correct = pred.iter().zip(valid_labels).filter(|(a, b)| a == b).count();
            KAccuracy {
                k,
                accuracy: 100.0 * correct as f64 / valid_labels.len() as f64,
            }
        })
        .collect();
    table.sort_by_key(|r| r.k);
    let best_k = table
        .iter()
        .fold(None::<&KAccuracy>, |best, r| match best {
            Some(b) if b.accuracy >= r.accuracy => Some(b),
            _ => Some(r),
        })
        .map(|r| r.k)
        .expect("non-empty table");
    Ok(KnnTuning { best_k, table, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(cols: usize, v: &[f64]) -> FeatureMatrix<f64> {
        FeatureMatrix::unnamed(cols, v.to_vec()).unwrap()
    }

    #[test]
    fn one_neighbour_recalls_training_row() {
        let x = matrix(2, &[0.0, 0.0, 1.0, 1.0, 5.0, 5.0]);
        let m = KnnModel::fit(&x, &[false, true, false], 1, false).unwrap();
        assert_eq!(m.classify(&x).unwrap(), vec![false, true, false]);
    }

    #[test]
    fn hand_computed_vote() {
        // 1-D training points; query at 2.4
        // distances: 0 -> 2.4, 1 -> 1.4, 2 -> 0.4, 4 -> 1.6, 10 -> 7.6
        let x = matrix(1, &[0.0, 1.0, 2.0, 4.0, 10.0]);
        let y = [true, false, true, true, false];
        let m = KnnModel::fit(&x, &y, 3, false).unwrap();
        // nearest three: 2 (B), 1 (H), 4 (B) -> bankrupt
        assert_eq!(m.classify(&matrix(1, &[2.4])).unwrap(), vec![true]);
        // query 0.6: 1 (H, .4), 0 (B, .6), 2 (B, 1.4) -> bankrupt
        assert_eq!(m.classify(&matrix(1, &[0.6])).unwrap(), vec![true]);
        // query 8: 10 (H), 4 (B), 2 (B) -> bankrupt
        assert_eq!(m.classify(&matrix(1, &[8.0])).unwrap(), vec![true]);
        let m1 = KnnModel::fit(&x, &y, 1, false).unwrap();
        assert_eq!(m1.classify(&matrix(1, &[8.0])).unwrap(), vec![false]);
    }

    #[test]
    fn exact_tie_goes_to_earlier_row() {
        let x = matrix(1, &[-1.0, 1.0]);
        let m = KnnModel::fit(&x, &[true, false], 1, false).unwrap();
        assert_eq!(m.classify(&matrix(1, &[0.0])).unwrap(), vec![true]);
        let m = KnnModel::fit(&x, &[false, true], 1, false).unwrap();
        assert_eq!(m.classify(&matrix(1, &[0.0])).unwrap(), vec![false]);
    }

    #[test]
    fn invalid_k() {
        let x = matrix(1, &[0.0, 1.0, 2.0]);
        let y = [true, false, true];
        assert!(KnnModel::fit(&x, &y, 2, false).is_err());
        assert!(KnnModel::fit(&x, &y, 0, false).is_err());
        assert!(KnnModel::fit(&x, &y, 5, false).is_err());
    }

    #[test]
    fn empty_query() {
        let x = matrix(1, &[0.0, 1.0, 2.0]);
        let m = KnnModel::fit(&x, &[true, false, true], 1, false).unwrap();
        assert!(m.classify(&FeatureMatrix::empty(vec!["x0".into()])).unwrap().is_empty());
    }

    #[test]
    fn zscore_rescales_columns() {
        // second column dominates raw distances
        let x = matrix(2, &[0.0, 0.0, 1.0, 1000.0, 0.1, 2000.0]);
        let y = [false, true, true];
        let q = matrix(2, &[0.9, 100.0]);
        let raw = KnnModel::fit(&x, &y, 1, false).unwrap();
        let scaled = KnnModel::fit(&x, &y, 1, true).unwrap();
        assert_eq!(raw.classify(&q).unwrap(), vec![false]);
        assert_eq!(scaled.classify(&q).unwrap(), vec![true]);
    }

    #[test]
    fn tuning_self_match() {
        let x = matrix(1, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let y = [true, false, true, true, false, false, true];
        let t = tune_knn(&x, &y, &x, &y, &default_k_grid(), false).unwrap();
        assert_eq!(t.best_k, 1);
        assert_eq!(t.table[0].accuracy, 100.0);
        // 1, 3, 5, 7 usable; 9..25 exceed the 7 training rows
        assert_eq!(t.table.len(), 4);
        assert_eq!(t.skipped.len(), 9);
    }

    #[test]
    fn tuning_skips_even_k_and_rejects_empty_grid() {
        let x = matrix(1, &[0.0, 1.0, 2.0]);
        let y = [true, false, true];
        let t = tune_knn(&x, &y, &x, &y, &[2, 3], false).unwrap();
        assert_eq!(t.best_k, 3);
        assert_eq!(t.skipped[0].k, 2);
        assert!(tune_knn(&x, &y, &x, &y, &[4, 8], false).is_err());
    }
}
