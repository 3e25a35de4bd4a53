//! Distribution diagnostics: moment-ratio skewness and kurtosis, and the
//! 1.5 IQR outlier rule.
//!
//! Skewness is `m3 / m2^(3/2)` and excess kurtosis `m4 / m2^2 - 3`, both from
//! biased central moments `m_k = mean((x - mean)^k)`. Quartiles interpolate
//! linearly between order statistics at `(n - 1) p`. The outlier band is
//! closed: a value sitting exactly on a fence is not flagged.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::scalar::Real;

pub const ESTIMATOR_NOTE: &str = "moment-ratio estimators: skewness g1 = m3/m2^1.5, \
excess kurtosis g2 = m4/m2^2 - 3 (biased central moments, normal = 0); \
non-finite values excluded and counted";

/// A moment statistic plus the bookkeeping behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct MomentEstimate<T: Real> {
    /// Zero when `degenerate`.
    pub value: T,
    /// The sample has no spread.
    pub degenerate: bool,
    pub n_used: usize,
    pub n_non_finite: usize,
}

impl<T: Real> MomentEstimate<T> {
    pub fn get(&self) -> Option<T> {
        (!self.degenerate).then_some(self.value)
    }
}

struct Moments<T> {
    m2: T,
    m3: T,
    m4: T,
    n: usize,
    non_finite: usize,
    degenerate: bool,
}

fn central_moments<T: Real>(sample: &[T], min_n: usize) -> Result<Moments<T>> {
    let finite: Vec<T> = sample.iter().copied().filter(|v| v.is_finite()).collect();
    let n = finite.len();
    if n < min_n {
        return Err(Error::InsufficientData(format!(
            "{n} finite values, at least {min_n} required"
        )));
    }
    let nf = T::of_usize(n);
    let mean = finite.iter().copied().sum::<T>() / nf;
    let (mut m2, mut m3, mut m4) = (T::zero(), T::zero(), T::zero());
    let mut scale = T::zero();
    for &x in &finite {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        scale = scale.max(x.abs());
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    // spread indistinguishable from rounding of a constant sample
    let degenerate = m2.sqrt() <= T::of(8.0) * T::epsilon() * scale;
    Ok(Moments {
        m2,
        m3,
        m4,
        n,
        non_finite: sample.len() - n,
        degenerate,
    })
}

fn estimate<T: Real>(m: &Moments<T>, value: impl FnOnce(&Moments<T>) -> T) -> MomentEstimate<T> {
    MomentEstimate {
        value: if m.degenerate { T::zero() } else { value(m) },
        degenerate: m.degenerate,
        n_used: m.n,
        n_non_finite: m.non_finite,
    }
}

/// Needs at least three finite values.
pub fn skewness<T: Real>(sample: &[T]) -> Result<MomentEstimate<T>> {
    let m = central_moments(sample, 3)?;
    Ok(estimate(&m, |m| m.m3 / m.m2.powf(T::of(1.5))))
}

/// Needs at least four finite values.
pub fn excess_kurtosis<T: Real>(sample: &[T]) -> Result<MomentEstimate<T>> {
    let m = central_moments(sample, 4)?;
    Ok(estimate(&m, |m| m.m4 / (m.m2 * m.m2) - T::of(3.0)))
}

/// Linear interpolation between order statistics of a sorted slice.
pub fn quantile_sorted<T: Real>(sorted: &[T], p: f64) -> T {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = T::of(h - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutlierCounts {
    pub columns: Vec<String>,
    pub per_column: Vec<usize>,
    pub rows_flagged: usize,
    pub n_rows: usize,
}

impl OutlierCounts {
    pub fn rows_flagged_percent(&self) -> f64 {
        if self.n_rows == 0 {
            0.0
        } else {
            100.0 * self.rows_flagged as f64 / self.n_rows as f64
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let width = self.columns.iter().map(|c| c.len()).max().unwrap_or(0).max(7);
        for (c, n) in self.columns.iter().zip(&self.per_column) {
            let _ = writeln!(out, "{c:<width$}  {n:>8}");
        }
        let _ = writeln!(
            out,
            "rows with at least one flagged value: {} of {} ({:.1} %)",
            self.rows_flagged,
            self.n_rows,
            self.rows_flagged_percent()
        );
        out
    }
}

/// Flags cells outside `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`, per column.
///
/// Quartiles use the finite cells of each column. Infinite cells are always
/// flagged, NaN never.
pub fn iqr_outlier_count<T: Real>(features: &FeatureMatrix<T>) -> OutlierCounts {
    let (n, p) = (features.n_rows(), features.n_cols());
    let mut flagged_row = vec![false; n];
    let mut per_column = vec![0usize; p];
    let k = T::of(1.5);
    for (j, count) in per_column.iter_mut().enumerate() {
        let col = features.column(j);
        let mut finite: Vec<T> = col.iter().copied().filter(|v| v.is_finite()).collect();
        let fences = if finite.is_empty() {
            None
        } else {
            finite.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
            let q1 = quantile_sorted(&finite, 0.25);
            let q3 = quantile_sorted(&finite, 0.75);
            let iqr = q3 - q1;
            Some((q1 - k * iqr, q3 + k * iqr))
        };
        for (i, &v) in col.iter().enumerate() {
            let out = match fences {
                _ if v.is_nan() => false,
                _ if v.is_infinite() => true,
                Some((lo, hi)) => v < lo || v > hi,
                None => false,
            };
            if out {
                *count += 1;
                flagged_row[i] = true;
            }
        }
    }
    OutlierCounts {
        columns: features.columns().to_vec(),
        per_column,
        rows_flagged: flagged_row.iter().filter(|&&f| f).count(),
        n_rows: n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub feature: String,
    /// `None` when the column is degenerate or too short.
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    #[serde(skip)]
    pub non_finite: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsTable {
    pub rows: Vec<DiagnosticsRow>,
    pub note: &'static str,
}

impl DiagnosticsTable {
    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.feature.len()).max().unwrap_or(0).max(7);
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}"));
        let mut out = format!("{:<width$}  {:>10}  {:>10}\n", "", "Skewness", "Kurtosis");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>10}  {:>10}",
                r.feature,
                fmt(r.skewness),
                fmt(r.kurtosis)
            );
        }
        let _ = writeln!(out, "\n{}", self.note);
        out
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("feature\tskewness\tkurtosis\n");
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        for r in &self.rows {
            let _ = writeln!(out, "{}\t{}\t{}", r.feature, fmt(r.skewness), fmt(r.kurtosis));
        }
        out
    }
}

fn column_rows<T: Real>(m: &FeatureMatrix<T>) -> impl Iterator<Item = DiagnosticsRow> + '_ {
    (0..m.n_cols()).map(move |j| {
        let col = m.column(j);
        let skew = skewness(&col).ok();
        let kurt = excess_kurtosis(&col).ok();
        DiagnosticsRow {
            feature: m.columns()[j].clone(),
            skewness: skew.and_then(|s| s.get()).map(Real::as_f64),
            kurtosis: kurt.and_then(|k| k.get()).map(Real::as_f64),
            non_finite: col.iter().filter(|v| !v.is_finite()).count(),
        }
    })
}

/// Skewness and kurtosis per feature: standard columns first, then compositional.
pub fn diagnostics_table<T: Real>(
    standard: &FeatureMatrix<T>,
    compositional: &FeatureMatrix<T>,
) -> Result<DiagnosticsTable> {
    if standard.n_cols() > 0 && compositional.n_cols() > 0 && standard.n_rows() != compositional.n_rows() {
        return Err(Error::LengthMismatch(standard.n_rows(), compositional.n_rows()));
    }
    Ok(DiagnosticsTable {
        rows: column_rows(standard).chain(column_rows(compositional)).collect(),
        note: ESTIMATOR_NOTE,
    })
}
