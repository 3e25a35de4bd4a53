//! Binary logistic regression fitted by Newton-Raphson / IRLS.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::linalg::{cholesky, cholesky_inverse, cholesky_solve, dependent_columns};
use crate::scalar::Real;

/// Fitted probabilities closer than this to 0 or 1 signal (quasi-)separation.
pub const SEPARATION_PROBABILITY: f64 = 1e-10;
/// Coefficient magnitude treated as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e4;
pub const INTERCEPT: &str = "(intercept)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct LogisticConfig<T: Real> {
    /// Stop when the largest absolute coefficient change falls below this.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for LogisticConfig<T> {
    /// `tol = 1e-8` (never tighter than 1000 ulps of `T`), `max_iter = 50`.
    fn default() -> Self {
        Self {
            tol: T::of(1e-8).max(T::epsilon() * T::of(1e3)),
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LogisticModel<T: Real> {
    pub feature_names: Vec<String>,
    pub coefficients: Vec<T>,
    pub intercept: T,
    /// Wald standard errors of `coefficients` from the inverse information matrix.
    pub standard_errors: Vec<T>,
    pub intercept_standard_error: T,
    /// Two-sided Wald p-values.
    pub p_values: Vec<T>,
    pub intercept_p_value: T,
    pub converged: bool,
    pub iterations: usize,
    /// Fitted probabilities hit numerical 0/1 or coefficients diverged.
    /// Standard errors and p-values are then not to be trusted.
    pub separation_flag: bool,
    pub log_likelihood: T,
}

/// One line of the significance report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    /// `None` when separation makes the test meaningless.
    pub significant_5pct: Option<bool>,
}

#[inline]
pub(crate) fn sigmoid<T: Real>(eta: T) -> T {
    if eta >= T::zero() {
        T::one() / (T::one() + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^eta)` without overflow.
#[inline]
fn softplus<T: Real>(eta: T) -> T {
    eta.max(T::zero()) + (-eta.abs()).exp().ln_1p()
}

fn two_sided_p<T: Real>(z: T) -> T {
    let z = z.abs().as_f64();
    if z.is_nan() {
        return T::nan();
    }
    T::of(libm::erfc(z / std::f64::consts::SQRT_2))
}

struct Design<'a, T: Real> {
    x: &'a FeatureMatrix<T>,
    y: Vec<T>,
}

impl<T: Real> Design<'_, T> {
    fn dim(&self) -> usize {
        self.x.n_cols() + 1
    }

    /// `beta[0]` is the intercept.
    fn eta(&self, beta: &[T], i: usize) -> T {
        beta[0] + self.x.row(i).iter().zip(&beta[1..]).map(|(&a, &b)| a * b).sum::<T>()
    }

    fn log_likelihood(&self, beta: &[T]) -> T {
        (0..self.x.n_rows())
            .map(|i| {
                let eta = self.eta(beta, i);
                self.y[i] * eta - softplus(eta)
            })
            .sum()
    }

    /// Gradient and information matrix at `beta`.
    fn score_and_information(&self, beta: &[T]) -> (Vec<T>, Vec<T>) {
        let d = self.dim();
        let mut grad = vec![T::zero(); d];
        let mut info = vec![T::zero(); d * d];
        let mut row = vec![T::one(); d];
        for i in 0..self.x.n_rows() {
            row[1..].copy_from_slice(self.x.row(i));
            let mu = sigmoid(self.eta(beta, i));
            let w = mu * (T::one() - mu);
            let r = self.y[i] - mu;
            for a in 0..d {
                grad[a] += row[a] * r;
                let wa = w * row[a];
                for b in 0..=a {
                    info[a * d + b] += wa * row[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                info[b * d + a] = info[a * d + b];
            }
        }
        (grad, info)
    }
}

/// Gradient of the log-likelihood at (`intercept`, `coefficients`), intercept first.
pub fn score<T: Real>(x: &FeatureMatrix<T>, y: &[bool], intercept: T, coefficients: &[T]) -> Vec<T> {
    let design = Design {
        x,
        y: y.iter().map(|&b| if b { T::one() } else { T::zero() }).collect(),
    };
    let mut beta = vec![intercept];
    beta.extend_from_slice(coefficients);
    design.score_and_information(&beta).0
}

/// Bernoulli log-likelihood at (`intercept`, `coefficients`).
pub fn log_likelihood<T: Real>(x: &FeatureMatrix<T>, y: &[bool], intercept: T, coefficients: &[T]) -> T {
    let design = Design {
        x,
        y: y.iter().map(|&b| if b { T::one() } else { T::zero() }).collect(),
    };
    let mut beta = vec![intercept];
    beta.extend_from_slice(coefficients);
    design.log_likelihood(&beta)
}

/// Maximum-likelihood logistic regression with an intercept.
///
/// The design `[1, X]` must have full column rank; otherwise the error names
/// every column that is a linear combination of earlier ones.
pub fn fit_logistic<T: Real>(x: &FeatureMatrix<T>, y: &[bool], config: &LogisticConfig<T>) -> Result<LogisticModel<T>> {
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    x.check_finite()?;
    let positives = y.iter().filter(|&&b| b).count();
    if positives == 0 {
        return Err(Error::SingleClass("all healthy"));
    }
    if positives == n {
        return Err(Error::SingleClass("all bankrupt"));
    }

    let mut columns = vec![vec![T::one(); n]];
    columns.extend((0..x.n_cols()).map(|j| x.column(j)));
    let dependent = dependent_columns(&columns, T::epsilon().sqrt());
    if !dependent.is_empty() {
        let names = dependent
            .into_iter()
            .map(|j| {
                if j == 0 {
                    INTERCEPT.to_string()
                } else {
                    x.columns()[j - 1].clone()
                }
            })
            .collect();
        return Err(Error::RankDeficient(names));
    }

    let design = Design {
        x,
        y: y.iter().map(|&b| if b { T::one() } else { T::zero() }).collect(),
    };
    let d = design.dim();
    let mut beta = vec![T::zero(); d];
    let mut ll = design.log_likelihood(&beta);
    let mut converged = false;
    let mut diverged = false;
    let mut iterations = 0;
    let bound = T::of(DIVERGENCE_BOUND);

    while iterations < config.max_iter {
        iterations += 1;
        let (grad, info) = design.score_and_information(&beta);
        let Some(l) = cholesky(&info, d) else {
            // full rank was checked, so a singular information matrix means
            // the weights collapsed
            diverged = true;
            break;
        };
        let step = cholesky_solve(&l, d, &grad);
        let mut t = T::one();
        let mut candidate: Vec<T>;
        let mut ll_new;
        let mut halvings = 0;
        loop {
            candidate = beta.iter().zip(&step).map(|(&b, &s)| b + t * s).collect();
            ll_new = design.log_likelihood(&candidate);
            if ll_new >= ll - T::epsilon() * ll.abs().max(T::one()) || halvings == 30 {
                break;
            }
            t /= T::of(2.0);
            halvings += 1;
        }
        let change = beta
            .iter()
            .zip(&candidate)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max);
        beta = candidate;
        ll = ll_new;
        if beta.iter().any(|b| b.abs() > bound || !b.is_finite()) {
            diverged = true;
            break;
        }
        if change < config.tol {
            converged = true;
            break;
        }
    }

    let extreme = (0..n).any(|i| sigmoid(-design.eta(&beta, i).abs()) < T::of(SEPARATION_PROBABILITY));
    let separation_flag = diverged || extreme;

    let (_, info) = design.score_and_information(&beta);
    let se: Vec<T> = match cholesky(&info, d) {
        Some(l) => {
            let inv = cholesky_inverse(&l, d);
            (0..d).map(|a| inv[a * d + a].sqrt()).collect()
        }
        None => vec![T::nan(); d],
    };
    let p: Vec<T> = beta.iter().zip(&se).map(|(&b, &s)| two_sided_p(b / s)).collect();

    Ok(LogisticModel {
        feature_names: x.columns().to_vec(),
        coefficients: beta[1..].to_vec(),
        intercept: beta[0],
        standard_errors: se[1..].to_vec(),
        intercept_standard_error: se[0],
        p_values: p[1..].to_vec(),
        intercept_p_value: p[0],
        converged,
        iterations,
        separation_flag,
        log_likelihood: ll,
    })
}

impl<T: Real> LogisticModel<T> {
    fn check_columns(&self, x: &FeatureMatrix<T>) -> Result<()> {
        if x.n_cols() != self.coefficients.len() {
            return Err(Error::ColumnMismatch {
                expected: self.coefficients.len(),
                found: x.n_cols(),
            });
        }
        Ok(())
    }

    pub fn linear_predictor(&self, row: &[T]) -> T {
        self.intercept + row.iter().zip(&self.coefficients).map(|(&a, &b)| a * b).sum::<T>()
    }

    pub fn predict_proba(&self, x: &FeatureMatrix<T>) -> Result<Vec<T>> {
        self.check_columns(x)?;
        Ok(x.rows()
            .take(x.n_rows())
            .map(|r| sigmoid(self.linear_predictor(r)))
            .collect())
    }

    /// Coefficient table, intercept first. Significance is withheld under separation.
    pub fn coefficient_table(&self) -> Vec<CoefficientRow> {
        let row = |name: &str, b: T, s: T, p: T| CoefficientRow {
            name: name.to_string(),
            estimate: b.as_f64(),
            std_error: s.as_f64(),
            z: (b / s).as_f64(),
            p_value: p.as_f64(),
            significant_5pct: (!self.separation_flag).then(|| p.as_f64() < 0.05),
        };
        std::iter::once(row(
            INTERCEPT,
            self.intercept,
            self.intercept_standard_error,
            self.intercept_p_value,
        ))
        .chain(
            self.feature_names
                .iter()
                .enumerate()
                .map(|(j, name)| row(name, self.coefficients[j], self.standard_errors[j], self.p_values[j])),
        )
        .collect()
    }

    /// Names of slope coefficients with p < 0.05; empty under separation.
    pub fn significant_predictors(&self) -> Vec<&str> {
        if self.separation_flag {
            return Vec::new();
        }
        self.feature_names
            .iter()
            .zip(&self.p_values)
            .filter(|(_, &p)| p < T::of(0.05))
            .map(|(n, _)| n.as_str())
            .collect()
    }
}

/// Labels (bankrupt iff probability >= `threshold`) and probabilities.
pub fn predict_logistic<T: Real>(
    model: &LogisticModel<T>,
    x: &FeatureMatrix<T>,
    threshold: T,
) -> Result<(Vec<bool>, Vec<T>)> {
    let probs = model.predict_proba(x)?;
    let labels = probs.iter().map(|&p| p >= threshold).collect();
    Ok((labels, probs))
}
