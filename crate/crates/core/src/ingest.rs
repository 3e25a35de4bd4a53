//! Reading firm-level accounting data and turning it into compositions.
//!
//! Input is one row per firm with the seven figures of the predictor year and
//! the bankruptcy label of the following year. Joining multi-year panels into
//! that shape is left to the caller.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::Serialize;

use crate::coda::{Composition, Part, PARTS};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One firm-year: seven non-negative accounting figures plus the label.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct AccountingRecord<T: Real> {
    pub firm_id: String,
    pub period: i32,
    pub nca: T,
    pub ca: T,
    pub re: T,
    pub ncl: T,
    pub cl: T,
    pub or: T,
    pub oe: T,
    pub bankrupt: bool,
}

impl<T: Real> AccountingRecord<T> {
    pub fn from_figures(firm_id: impl Into<String>, period: i32, figures: [T; PARTS], bankrupt: bool) -> Self {
        let [nca, ca, re, ncl, cl, or, oe] = figures;
        Self {
            firm_id: firm_id.into(),
            period,
            nca,
            ca,
            re,
            ncl,
            cl,
            or,
            oe,
            bankrupt,
        }
    }

    /// Figures in canonical part order.
    pub fn figures(&self) -> [T; PARTS] {
        [self.nca, self.ca, self.re, self.ncl, self.cl, self.or, self.oe]
    }

    pub fn figure(&self, part: Part) -> T {
        self.figures()[part.index()]
    }
}

/// Column names and delimiter of the input table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schema {
    pub delimiter: u8,
    pub id: String,
    pub year: String,
    /// One column per part, canonical order.
    pub parts: [String; PARTS],
    pub label: String,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            delimiter: b',',
            id: "id".into(),
            year: "year".into(),
            parts: Part::ALL.map(|p| p.code().to_string()),
            label: "bankrupt".into(),
        }
    }
}

impl Schema {
    /// Overrides one column name. `key` is `id`, `year`, `bankrupt`, or a part code.
    pub fn set_column(&mut self, key: &str, name: &str) -> Result<()> {
        match key.to_ascii_lowercase().as_str() {
            "id" => self.id = name.into(),
            "year" => self.year = name.into(),
            "bankrupt" | "label" => self.label = name.into(),
            _ => {
                let part: Part = key.parse()?;
                self.parts[part.index()] = name.into();
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    /// 1-based line number in the source, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParseReport {
    pub rows_read: usize,
    pub accepted: usize,
    pub rejections: Vec<Rejection>,
}

impl ParseReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "rows read: {}\naccepted: {}\nrejected: {}",
            self.rows_read,
            self.accepted,
            self.rejections.len()
        );
        for r in &self.rejections {
            let _ = writeln!(out, "line {}: {}", r.line, r.reason);
        }
        out
    }
}

fn parse_label(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

/// Reads delimited text with a header row into records.
///
/// Rows with a missing, non-numeric, non-finite, or negative figure, an
/// unparseable year, or an unreadable label are skipped and listed in the
/// report. A missing column is a configuration error.
pub fn parse_records<T: Real, R: Read>(source: R, schema: &Schema) -> Result<(Vec<AccountingRecord<T>>, ParseReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let id_col = column(&schema.id)?;
    let year_col = column(&schema.year)?;
    let label_col = column(&schema.label)?;
    let part_cols = schema.parts.iter().map(|n| column(n)).collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut report = ParseReport::default();
    for row in reader.records() {
        report.rows_read += 1;
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.rejections.push(Rejection {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row, id_col, year_col, label_col, &part_cols, schema) {
            Ok(rec) => records.push(rec),
            Err(reason) => report.rejections.push(Rejection { line, reason }),
        }
    }
    report.accepted = records.len();
    Ok((records, report))
}

fn parse_row<T: Real>(
    row: &csv::StringRecord,
    id_col: usize,
    year_col: usize,
    label_col: usize,
    part_cols: &[usize],
    schema: &Schema,
) -> std::result::Result<AccountingRecord<T>, String> {
    let field = |i: usize, name: &str| row.get(i).ok_or_else(|| format!("missing field `{name}`"));
    let id = field(id_col, &schema.id)?.to_string();
    let year_text = field(year_col, &schema.year)?;
    let period = year_text
        .parse::<i32>()
        .map_err(|_| format!("year `{year_text}` is not an integer"))?;
    let mut figures = [T::zero(); PARTS];
    for ((slot, &col), part) in figures.iter_mut().zip(part_cols).zip(Part::ALL) {
        let text = field(col, &schema.parts[part.index()])?;
        let value: f64 = text.parse().map_err(|_| format!("{part} `{text}` is not a number"))?;
        if !value.is_finite() {
            return Err(format!("{part} `{text}` is not finite"));
        }
        if value < 0.0 {
            return Err(format!("{part} is negative ({text})"));
        }
        *slot = T::of(value);
    }
    let label_text = field(label_col, &schema.label)?;
    let bankrupt = parse_label(label_text).ok_or_else(|| format!("label `{label_text}` is not 0/1"))?;
    Ok(AccountingRecord::from_figures(id, period, figures, bankrupt))
}

/// Writes records in the layout [`parse_records`] reads.
pub fn write_records<T: Real, W: Write>(sink: W, records: &[AccountingRecord<T>], schema: &Schema) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(schema.delimiter).from_writer(sink);
    let mut header = vec![schema.id.as_str(), schema.year.as_str()];
    header.extend(schema.parts.iter().map(String::as_str));
    header.push(&schema.label);
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.firm_id.clone(), r.period.to_string()];
        row.extend(r.figures().iter().map(|v| v.to_string()));
        row.push(if r.bankrupt { "1" } else { "0" }.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable statement of the inactive-firm rule, embedded in reports.
pub const INACTIVE_RULE: &str = "removed if total assets (NCA+CA) = 0 or OR = 0 or OE = 0 (any one suffices)";

pub fn is_inactive<T: Real>(r: &AccountingRecord<T>) -> bool {
    r.nca + r.ca == T::zero() || r.or == T::zero() || r.oe == T::zero()
}

/// Drops inactive firms, keeping the rest in input order.
pub fn filter_inactive<T: Real>(records: Vec<AccountingRecord<T>>) -> (Vec<AccountingRecord<T>>, usize) {
    let before = records.len();
    let kept: Vec<_> = records.into_iter().filter(|r| !is_inactive(r)).collect();
    let removed = before - kept.len();
    (kept, removed)
}

pub const DEFAULT_DELTA_FRACTION: f64 = 0.65;

/// Zero replacement tallies over the retained sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroReport {
    pub n_records: usize,
    pub zero_counts: [usize; PARTS],
    /// Value each zero of the part was replaced with.
    pub replacement: [f64; PARTS],
    pub delta_fraction: f64,
    pub method: String,
}

impl ZeroReport {
    pub fn percentages(&self) -> [f64; PARTS] {
        self.zero_counts.map(|c| {
            if self.n_records == 0 {
                0.0
            } else {
                100.0 * c as f64 / self.n_records as f64
            }
        })
    }

    pub fn render(&self) -> String {
        let mut out = format!("zero replacement: {}\n", self.method);
        for ((part, count), pct) in Part::ALL.iter().zip(self.zero_counts).zip(self.percentages()) {
            let _ = writeln!(out, "{part:>4}: {count:>7} zeros ({pct:.2} %)");
        }
        out
    }
}

/// Replaces each zero of part `p` by `delta_fraction` times the smallest
/// positive value of `p` in the sample.
pub fn impute_zeros<T: Real>(
    records: &[AccountingRecord<T>],
    delta_fraction: f64,
) -> Result<(Vec<Composition<T>>, ZeroReport)> {
    if !(delta_fraction > 0.0 && delta_fraction < 1.0) {
        return Err(Error::Config(format!(
            "delta fraction must lie in (0, 1), got {delta_fraction}"
        )));
    }
    let mut zero_counts = [0usize; PARTS];
    let mut min_positive = [None::<T>; PARTS];
    for r in records {
        for (j, v) in r.figures().into_iter().enumerate() {
            if v == T::zero() {
                zero_counts[j] += 1;
            } else if min_positive[j].is_none_or(|m| v < m) {
                min_positive[j] = Some(v);
            }
        }
    }
    let mut replacement = [T::zero(); PARTS];
    if !records.is_empty() {
        for (j, part) in Part::ALL.into_iter().enumerate() {
            let m = min_positive[j].ok_or(Error::AllZeroPart(part))?;
            replacement[j] = T::of(delta_fraction) * m;
        }
    }
    let compositions = records
        .iter()
        .map(|r| {
            let mut figures = r.figures();
            for (v, &rep) in figures.iter_mut().zip(&replacement) {
                if *v == T::zero() {
                    *v = rep;
                }
            }
            Composition::new(figures)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = ZeroReport {
        n_records: records.len(),
        zero_counts,
        replacement: replacement.map(Real::as_f64),
        delta_fraction,
        method: format!("multiplicative replacement, zero -> {delta_fraction} x smallest positive value of the part"),
    };
    Ok((compositions, report))
}

/// A firm ready for feature extraction.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct Firm<T: Real> {
    pub id: String,
    pub bankrupt: bool,
    pub composition: Composition<T>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct Dataset<T: Real> {
    pub firms: Vec<Firm<T>>,
}

impl<T: Real> Dataset<T> {
    pub fn len(&self) -> usize {
        self.firms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.firms.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.firms.iter().map(|f| f.bankrupt).collect()
    }

    pub fn bankrupt_count(&self) -> usize {
        self.firms.iter().filter(|f| f.bankrupt).count()
    }

    pub fn compositions(&self) -> Vec<Composition<T>> {
        self.firms.iter().map(|f| f.composition).collect()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            firms: rows.iter().map(|&i| self.firms[i].clone()).collect(),
        }
    }

    pub fn to_records(&self, period: i32) -> Vec<AccountingRecord<T>> {
        self.firms
            .iter()
            .map(|f| AccountingRecord::from_figures(f.id.clone(), period, *f.composition.parts(), f.bankrupt))
            .collect()
    }
}

/// Outcome of the preprocessing chain: inactive filter then zero replacement.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct Prepared<T: Real> {
    #[serde(skip)]
    pub dataset: Dataset<T>,
    pub inactive_removed: usize,
    pub inactive_rule: &'static str,
    pub zeros: ZeroReport,
}

pub fn prepare<T: Real>(records: Vec<AccountingRecord<T>>, delta_fraction: f64) -> Result<Prepared<T>> {
    let (records, inactive_removed) = filter_inactive(records);
    let (compositions, zeros) = impute_zeros(&records, delta_fraction)?;
    let firms = records
        .into_iter()
        .zip(compositions)
        .map(|(r, composition)| Firm {
            id: r.firm_id,
            bankrupt: r.bankrupt,
            composition,
        })
        .collect();
    Ok(Prepared {
        dataset: Dataset { firms },
        inactive_removed,
        inactive_rule: INACTIVE_RULE,
        zeros,
    })
}
