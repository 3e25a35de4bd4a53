//! Dense row-major predictor matrices and the feature sets built from a dataset.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coda::{clr, clr_labels, full_plr_features, full_plr_labels, spanning_plr_features, SpanningPlrGraph};
use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::ratios::{standard_ratios, STANDARD_RATIO_LABELS};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeatureMatrix<T: Real> {
    columns: Vec<String>,
    data: Vec<T>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(columns: Vec<String>, data: Vec<T>) -> Result<Self> {
        if columns.is_empty() {
            if !data.is_empty() {
                return Err(Error::LengthMismatch(data.len(), 0));
            }
        } else if !data.len().is_multiple_of(columns.len()) {
            return Err(Error::LengthMismatch(data.len(), columns.len()));
        }
        Ok(Self { columns, data })
    }

    pub fn from_rows(columns: Vec<String>, rows: &[Vec<T>]) -> Result<Self> {
        let width = columns.len();
        let mut data = Vec::with_capacity(rows.len() * width);
        for row in rows {
            if row.len() != width {
                return Err(Error::ColumnMismatch {
                    expected: width,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { columns, data })
    }

    /// Columns named `x0, x1, ...`.
    pub fn unnamed(n_cols: usize, data: Vec<T>) -> Result<Self> {
        Self::new((0..n_cols).map(|j| format!("x{j}")).collect(), data)
    }

    pub fn empty(columns: Vec<String>) -> Self {
        Self {
            columns,
            data: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        if self.columns.is_empty() {
            0
        } else {
            self.data.len() / self.columns.len()
        }
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        let w = self.columns.len();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.columns.len().max(1))
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.columns.len() + j]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols());
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Self {
            columns: self.columns.clone(),
            data,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.n_rows() * cols.len());
        for row in self.rows() {
            data.extend(cols.iter().map(|&j| row[j]));
        }
        Self {
            columns: cols.iter().map(|&j| self.columns[j].clone()).collect(),
            data,
        }
    }

    /// Indices of rows whose cells are all finite.
    pub fn finite_rows(&self) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| self.row(i).iter().all(|v| v.is_finite()))
            .collect()
    }

    /// First non-finite cell, as an error.
    pub fn check_finite(&self) -> Result<()> {
        for i in 0..self.n_rows() {
            if let Some(j) = self.row(i).iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    column: self.columns[j].clone(),
                    row: i,
                });
            }
        }
        Ok(())
    }

    /// Copy with non-finite cells mapped to the largest finite magnitudes.
    pub fn sentinelized(&self) -> Self {
        Self {
            columns: self.columns.clone(),
            data: self.data.iter().map(|v| v.sentinel()).collect(),
        }
    }

    /// Writes a header of column labels, optionally preceded by `id` and
    /// followed by `bankrupt`, then one line per row.
    pub fn write_csv<W: Write>(&self, sink: W, ids: Option<&[String]>, labels: Option<&[bool]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header: Vec<&str> = Vec::new();
        if ids.is_some() {
            header.push("id");
        }
        header.extend(self.columns.iter().map(String::as_str));
        if labels.is_some() {
            header.push("bankrupt");
        }
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec: Vec<String> = Vec::with_capacity(header.len());
            if let Some(ids) = ids {
                rec.push(ids[i].clone());
            }
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            if let Some(labels) = labels {
                rec.push(if labels[i] { "1" } else { "0" }.into());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Which predictors to derive from each firm's composition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum FeatureSet {
    /// The ten standard ratios.
    Standard,
    /// One log-ratio per edge of a spanning graph.
    SpanningPlr(SpanningPlrGraph),
    /// All 21 pairwise log-ratios.
    FullPlr,
    /// Centred log-ratios.
    Clr,
}

impl FeatureSet {
    pub fn columns(&self) -> Vec<String> {
        match self {
            FeatureSet::Standard => STANDARD_RATIO_LABELS.iter().map(|s| s.to_string()).collect(),
            FeatureSet::SpanningPlr(g) => g.labels().to_vec(),
            FeatureSet::FullPlr => full_plr_labels(),
            FeatureSet::Clr => clr_labels(),
        }
    }

    pub fn build<T: Real>(&self, dataset: &Dataset<T>) -> FeatureMatrix<T> {
        let columns = self.columns();
        let mut data = Vec::with_capacity(dataset.len() * columns.len());
        for firm in &dataset.firms {
            let x = &firm.composition;
            match self {
                FeatureSet::Standard => data.extend_from_slice(&standard_ratios(x).values),
                FeatureSet::SpanningPlr(g) => data.extend(spanning_plr_features(x, g)),
                FeatureSet::FullPlr => data.extend_from_slice(&full_plr_features(x)),
                FeatureSet::Clr => data.extend_from_slice(&clr(x)),
            }
        }
        FeatureMatrix { columns, data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coda::Composition;
    use crate::ingest::Firm;

    fn dataset() -> Dataset<f64> {
        let firms = [[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0], [4.0, 6.0, 1.0, 3.0, 7.0, 5.0, 4.0]]
            .iter()
            .enumerate()
            .map(|(i, f)| Firm {
                id: format!("f{i}"),
                bankrupt: i == 1,
                composition: Composition::new(*f).unwrap(),
            })
            .collect();
        Dataset { firms }
    }

    #[test]
    fn shapes() {
        let d = dataset();
        assert_eq!(FeatureSet::Standard.build(&d).n_cols(), 10);
        assert_eq!(
            FeatureSet::SpanningPlr(SpanningPlrGraph::default()).build(&d).n_cols(),
            6
        );
        let full = FeatureSet::FullPlr.build(&d);
        assert_eq!((full.n_rows(), full.n_cols()), (2, 21));
        assert_eq!(FeatureSet::Clr.build(&d).n_cols(), 7);
    }

    #[test]
    fn non_finite_handling() {
        let m = FeatureSet::Standard.build(&dataset());
        assert_eq!(m.finite_rows(), vec![0]);
        assert!(matches!(m.check_finite(), Err(Error::NonFinite { row: 1, .. })));
        let s = m.sentinelized();
        assert!(s.check_finite().is_ok());
        assert_eq!(s.get(1, 8), f64::MAX);
    }

    #[test]
    fn csv_export_uses_formula_labels() {
        let d = dataset();
        let m = FeatureSet::Standard.build(&d);
        let ids: Vec<String> = d.firms.iter().map(|f| f.id.clone()).collect();
        let mut buf = Vec::new();
        m.write_csv(&mut buf, Some(&ids), Some(&d.labels())).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert!(header.starts_with("id,(CA-CL)/(NCA+CA),RE/(NCA+CA)"));
        assert!(header.ends_with("bankrupt"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn construction_checks_shape() {
        assert!(FeatureMatrix::<f64>::unnamed(3, vec![1.0; 7]).is_err());
        assert!(FeatureMatrix::from_rows(vec!["a".into()], &[vec![1.0, 2.0]]).is_err());
        let m = FeatureMatrix::unnamed(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.column(1), vec![2.0, 4.0]);
        assert_eq!(m.select_rows(&[1]).row(0), &[3.0, 4.0]);
    }
}
