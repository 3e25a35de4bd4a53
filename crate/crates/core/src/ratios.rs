//! The ten standard financial ratios computed from raw figures.
//!
//! Five classic bankruptcy ratios plus five common extensions. Net worth is
//! book value, `NCA + CA - NCL - CL`.

use serde::Serialize;

use crate::coda::{Composition, Part};
use crate::scalar::Real;

pub const STANDARD_RATIO_COUNT: usize = 10;

/// Snake-case identifiers, in column order.
pub const STANDARD_RATIO_NAMES: [&str; STANDARD_RATIO_COUNT] = [
    "working_capital",
    "retained_over_assets",
    "roa",
    "networth_over_liabilities",
    "turnover",
    "profit_over_cl",
    "current_ratio",
    "inverted_leverage",
    "roe",
    "indebtedness",
];

/// Column labels written as the defining formulas.
pub const STANDARD_RATIO_LABELS: [&str; STANDARD_RATIO_COUNT] = [
    "(CA-CL)/(NCA+CA)",
    "RE/(NCA+CA)",
    "(OR-OE)/(NCA+CA)",
    "(NCA+CA-NCL-CL)/(NCL+CL)",
    "OR/(NCA+CA)",
    "(OR-OE)/CL",
    "CA/CL",
    "(NCA+CA-NCL-CL)/(NCA+CA)",
    "(OR-OE)/(NCA+CA-NCL-CL)",
    "(NCL+CL)/(NCA+CA)",
];

const ROE: usize = 8;

/// A ratio that came out non-finite, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RatioFlag {
    pub ratio: &'static str,
    pub reason: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct StandardRatioVector<T: Real> {
    pub values: [T; STANDARD_RATIO_COUNT],
    pub flags: Vec<RatioFlag>,
}

impl<T: Real> StandardRatioVector<T> {
    pub fn is_finite(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<T> {
        STANDARD_RATIO_NAMES
            .iter()
            .position(|&n| n == name)
            .map(|i| self.values[i])
    }
}

struct Sums<T> {
    assets: T,
    liabilities: T,
    net_worth: T,
    profit: T,
}

fn sums<T: Real>(x: &Composition<T>) -> Sums<T> {
    let assets = x.get(Part::Nca) + x.get(Part::Ca);
    let liabilities = x.get(Part::Ncl) + x.get(Part::Cl);
    Sums {
        assets,
        liabilities,
        net_worth: assets - liabilities,
        profit: x.get(Part::Or) - x.get(Part::Oe),
    }
}

/// working capital, retained earnings over assets, return on assets,
/// net worth over liabilities, turnover.
pub fn altman_ratios<T: Real>(x: &Composition<T>) -> [T; 5] {
    let s = sums(x);
    [
        (x.get(Part::Ca) - x.get(Part::Cl)) / s.assets,
        x.get(Part::Re) / s.assets,
        s.profit / s.assets,
        s.net_worth / s.liabilities,
        x.get(Part::Or) / s.assets,
    ]
}

/// profit over current liabilities, current ratio, inverted leverage,
/// return on equity, indebtedness.
///
/// Return on equity is undefined at zero net worth; it is then left at the
/// IEEE quotient (±inf or NaN) and flagged.
pub fn extended_ratios<T: Real>(x: &Composition<T>) -> ([T; 5], Option<RatioFlag>) {
    let s = sums(x);
    let flag = (s.net_worth == T::zero()).then_some(RatioFlag {
        ratio: STANDARD_RATIO_NAMES[ROE],
        reason: "zero net worth",
    });
    let values = [
        s.profit / x.get(Part::Cl),
        x.get(Part::Ca) / x.get(Part::Cl),
        s.net_worth / s.assets,
        s.profit / s.net_worth,
        s.liabilities / s.assets,
    ];
    (values, flag)
}

pub fn standard_ratios<T: Real>(x: &Composition<T>) -> StandardRatioVector<T> {
    let a = altman_ratios(x);
    let (e, flag) = extended_ratios(x);
    let mut values = [T::zero(); STANDARD_RATIO_COUNT];
    values[..5].copy_from_slice(&a);
    values[5..].copy_from_slice(&e);
    StandardRatioVector {
        values,
        flags: flag.into_iter().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coda::plr;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn comp(v: [f64; 7]) -> Composition<f64> {
        Composition::new(v).unwrap()
    }

    #[test]
    fn hand_computed_altman() {
        let a = altman_ratios(&comp([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]));
        let expected = [-1.0, 1.0, -1.0 / 3.0, -2.0 / 3.0, 2.0];
        for (v, e) in a.iter().zip(expected) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn equal_current_parts() {
        let r = standard_ratios(&comp([3.0, 5.0, 1.0, 2.0, 5.0, 9.0, 4.0]));
        assert_eq!(r.get("working_capital"), Some(0.0));
        assert_eq!(r.get("current_ratio"), Some(1.0));
    }

    #[test]
    fn zero_profit() {
        let x = comp([3.0, 5.0, 1.0, 2.0, 5.0, 4.0, 4.0]);
        let r = standard_ratios(&x);
        assert_eq!(r.get("roa"), Some(0.0));
        assert_eq!(r.get("turnover"), Some(0.5));
    }

    #[test]
    fn zero_net_worth_is_flagged() {
        let r = standard_ratios(&comp([4.0, 6.0, 1.0, 3.0, 7.0, 5.0, 4.0]));
        assert_eq!(r.get("inverted_leverage"), Some(0.0));
        assert_eq!(r.get("indebtedness"), Some(1.0));
        assert!(r.get("roe").unwrap().is_infinite());
        assert_eq!(
            r.flags,
            vec![RatioFlag {
                ratio: "roe",
                reason: "zero net worth"
            }]
        );
        assert!(!r.is_finite());
    }

    #[test]
    fn works_in_f32() {
        let x = Composition::new([1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        assert_eq!(altman_ratios(&x)[4], 2.0);
    }

    fn arb_comp() -> impl Strategy<Value = Composition<f64>> {
        proptest::array::uniform7(-6.0f64..6.0).prop_map(|l| comp(l.map(f64::exp)))
    }

    proptest! {
        #[test]
        fn indebtedness_complements_inverted_leverage(x in arb_comp()) {
            let r = standard_ratios(&x);
            let debt = r.get("indebtedness").unwrap();
            let sum = debt + r.get("inverted_leverage").unwrap();
            // cancellation in (A-L)/A costs a few ulps of L/A
            prop_assert!((sum - 1.0).abs() <= 8.0 * f64::EPSILON * (1.0 + debt.abs()));
        }

        #[test]
        fn ratios_are_scale_invariant(x in arb_comp(), k in 1e-2f64..1e2) {
            let a = standard_ratios(&x);
            let b = standard_ratios(&x.scaled(k).unwrap());
            for (u, v) in a.values.iter().zip(&b.values) {
                prop_assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
            }
        }

        #[test]
        fn current_ratio_matches_log_ratio(x in arb_comp()) {
            let cr = standard_ratios(&x).get("current_ratio").unwrap();
            let l = plr(&x, Part::Ca, Part::Cl).unwrap();
            prop_assert!((l.exp() - cr).abs() <= 1e-12 * cr);
        }
    }
}
