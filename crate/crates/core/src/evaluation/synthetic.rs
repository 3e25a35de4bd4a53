//! Seeded synthetic firms with a known log-ratio signal, for end-to-end checks.
//!
//! Log figures are a fixed linear map of independent standard normals (a
//! common size factor, one idiosyncratic term per part, and operating
//! expenses tied to revenue), hence jointly normal. Bankruptcy is Bernoulli
//! with `logit p = intercept + sum_j coef_j * plr_j`, the intercept chosen so
//! that the sample mean of `p` equals the requested rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::coda::{spanning_plr_features, Composition, Part, SpanningPlrGraph, PARTS};
use crate::error::{Error, Result};
use crate::ingest::{Dataset, Firm};
use crate::models::logistic::sigmoid;
use crate::scalar::Real;

/// Mean log figure per part.
const LOG_MEANS: [f64; PARTS] = [12.0, 13.0, 11.5, 11.0, 12.5, 14.0, 13.97];
/// Loading of the shared size factor.
const SIZE_LOADING: f64 = 1.2;
/// Idiosyncratic standard deviation per part; OE gets its own small term on
/// top of the OR one.
const OWN_SD: [f64; PARTS] = [1.0, 0.6, 1.0, 1.2, 0.6, 0.5, 0.08];

/// Linear predictor over a spanning log-ratio set.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct SyntheticSignal<T: Real> {
    pub graph: SpanningPlrGraph,
    pub coefficients: Vec<T>,
}

impl<T: Real> SyntheticSignal<T> {
    pub fn new(graph: SpanningPlrGraph, coefficients: Vec<T>) -> Result<Self> {
        if coefficients.len() != graph.edges().len() {
            return Err(Error::LengthMismatch(coefficients.len(), graph.edges().len()));
        }
        Ok(Self { graph, coefficients })
    }

    pub fn none() -> Self {
        Self {
            graph: SpanningPlrGraph::default(),
            coefficients: vec![T::zero(); PARTS - 1],
        }
    }

    /// Signal on the single edge `num/den` of the default graph.
    pub fn single(num: Part, den: Part, coefficient: T) -> Result<Self> {
        let graph = SpanningPlrGraph::default();
        let j = graph
            .edges()
            .iter()
            .position(|&e| e == (num, den))
            .ok_or_else(|| Error::Config(format!("{num}/{den} is not an edge of the default log-ratio set")))?;
        let mut coefficients = vec![T::zero(); PARTS - 1];
        coefficients[j] = coefficient;
        Ok(Self { graph, coefficients })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct SyntheticData<T: Real> {
    pub dataset: Dataset<T>,
    pub intercept: T,
    /// Sample mean of the generating probabilities.
    pub expected_rate: f64,
}

fn draw_log_parts(rng: &mut ChaCha8Rng) -> [f64; PARTS] {
    let mut z = || -> f64 { StandardNormal.sample(rng) };
    let size = SIZE_LOADING * z();
    let mut logs = [0.0; PARTS];
    for j in 0..PARTS - 1 {
        logs[j] = LOG_MEANS[j] + size + OWN_SD[j] * z();
    }
    let or = Part::Or.index();
    logs[Part::Oe.index()] = logs[or] + (LOG_MEANS[Part::Oe.index()] - LOG_MEANS[or]) + OWN_SD[Part::Oe.index()] * z();
    logs
}

pub fn generate_synthetic<T: Real>(
    seed: u64,
    n_firms: usize,
    bankruptcy_rate: f64,
    signal: &SyntheticSignal<T>,
) -> Result<SyntheticData<T>> {
    if !(bankruptcy_rate > 0.0 && bankruptcy_rate < 1.0) {
        return Err(Error::Config(format!(
            "bankruptcy rate must lie in (0, 1), got {bankruptcy_rate}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compositions = Vec::with_capacity(n_firms);
    let mut scores = Vec::with_capacity(n_firms);
    for _ in 0..n_firms {
        let x = Composition::new(draw_log_parts(&mut rng).map(|l| T::of(l.exp())))?;
        let s: T = spanning_plr_features(&x, &signal.graph)
            .iter()
            .zip(&signal.coefficients)
            .map(|(&f, &c)| f * c)
            .sum();
        compositions.push(x);
        scores.push(s.as_f64());
    }

    let mean_p = |b0: f64| -> f64 {
        if scores.is_empty() {
            sigmoid(b0)
        } else {
            scores.iter().map(|&s| sigmoid(b0 + s)).sum::<f64>() / scores.len() as f64
        }
    };
    let (mut lo, mut hi) = (-200.0, 200.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) < bankruptcy_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let intercept = 0.5 * (lo + hi);
    let expected_rate = mean_p(intercept);
    if (expected_rate - bankruptcy_rate).abs() > 0.1 * bankruptcy_rate {
        return Err(Error::Numeric(format!(
            "bankruptcy rate {bankruptcy_rate} unreachable; closest attainable {expected_rate}"
        )));
    }

    let firms = compositions
        .into_iter()
        .zip(&scores)
        .enumerate()
        .map(|(i, (composition, &s))| Firm {
            id: format!("S{:06}", i + 1),
            bankrupt: rng.random::<f64>() < sigmoid(intercept + s),
            composition,
        })
        .collect();
    Ok(SyntheticData {
        dataset: Dataset { firms },
        intercept: T::of(intercept),
        expected_rate,
    })
}
