use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub total: usize,
    pub bankrupt: usize,
    pub healthy: usize,
}

impl ClassCounts {
    pub fn of(labels: &[bool], rows: &[usize]) -> Self {
        let bankrupt = rows.iter().filter(|&&i| labels[i]).count();
        Self {
            total: rows.len(),
            bankrupt,
            healthy: rows.len() - bankrupt,
        }
    }
}

/// Row indices of the training and validation subsets, each ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
}

fn train_size(n: usize, fraction: f64) -> usize {
    // the nudge keeps e.g. 0.7 * 10 at 7 despite 0.7 not being exact
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Random partition without replacement; the training subset holds
/// `floor(fraction * n)` rows. With `stratified`, each class is split on its own.
pub fn split(labels: &[bool], train_fraction: f64, seed: u64, stratified: bool) -> Result<Partition> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut valid) = if stratified {
        let (mut train, mut valid) = (Vec::new(), Vec::new());
        for class in [true, false] {
            let mut rows: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
            rows.shuffle(&mut rng);
            let m = train_size(rows.len(), train_fraction);
            valid.extend_from_slice(&rows[m..]);
            rows.truncate(m);
            train.extend(rows);
        }
        (train, valid)
    } else {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        let valid = rows.split_off(train_size(n, train_fraction));
        (rows, valid)
    };
    if train.is_empty() || valid.is_empty() {
        return Err(Error::InsufficientData(format!(
            "split of {n} rows at {train_fraction} leaves an empty subset"
        )));
    }
    train.sort_unstable();
    valid.sort_unstable();
    Ok(Partition { train, valid })
}

/// Keeps every bankrupt row of `train` and an equal-size uniform draw of its
/// healthy rows. Output is ascending.
pub fn downsample(labels: &[bool], train: &[usize], seed: u64) -> Result<Vec<usize>> {
    let (bankrupt, healthy): (Vec<usize>, Vec<usize>) = train.iter().partition(|&&i| labels[i]);
    if bankrupt.is_empty() {
        return Err(Error::InsufficientData(
            "no bankrupt firms in the training subset".into(),
        ));
    }
    if healthy.len() < bankrupt.len() {
        return Err(Error::InsufficientData(format!(
            "{} healthy firms cannot balance {} bankrupt firms",
            healthy.len(),
            bankrupt.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = bankrupt.clone();
    out.extend(
        index::sample(&mut rng, healthy.len(), bankrupt.len())
            .into_iter()
            .map(|j| healthy[j]),
    );
    out.sort_unstable();
    Ok(out)
}
