//! Compositions of accounting figures and their log-ratio representations.
//!
//! A firm is described by seven strictly positive figures. Only their ratios
//! carry information, so everything here is invariant to rescaling the whole
//! vector by a positive constant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::scalar::{euclidean, Real};

/// Number of parts in the composition.
pub const PARTS: usize = 7;

/// One accounting figure of the composition, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Part {
    /// Non-current assets.
    #[serde(rename = "NCA")]
    Nca,
    /// Current assets.
    #[serde(rename = "CA")]
    Ca,
    /// Retained earnings.
    #[serde(rename = "RE")]
    Re,
    /// Non-current liabilities.
    #[serde(rename = "NCL")]
    Ncl,
    /// Current liabilities.
    #[serde(rename = "CL")]
    Cl,
    /// Operating revenue.
    #[serde(rename = "OR")]
    Or,
    /// Operating expenses.
    #[serde(rename = "OE")]
    Oe,
}

impl Part {
    pub const ALL: [Part; PARTS] = [Part::Nca, Part::Ca, Part::Re, Part::Ncl, Part::Cl, Part::Or, Part::Oe];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn code(self) -> &'static str {
        match self {
            Part::Nca => "NCA",
            Part::Ca => "CA",
            Part::Re => "RE",
            Part::Ncl => "NCL",
            Part::Cl => "CL",
            Part::Or => "OR",
            Part::Oe => "OE",
        }
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.code())
    }
}

impl FromStr for Part {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let code = s.trim().to_ascii_uppercase();
        Part::ALL
            .into_iter()
            .find(|p| p.code() == code)
            .ok_or_else(|| Error::Config(format!("unknown part `{s}`")))
    }
}

/// Strictly positive seven-part vector in canonical [`Part`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Composition<T: Real> {
    parts: [T; PARTS],
}

impl<T: Real> Composition<T> {
    pub fn new(parts: [T; PARTS]) -> Result<Self> {
        for (part, &value) in Part::ALL.iter().zip(&parts) {
            if !(value.is_finite() && value > T::zero()) {
                return Err(Error::NonPositivePart {
                    part: *part,
                    value: value.as_f64(),
                });
            }
        }
        Ok(Self { parts })
    }

    #[inline]
    pub fn get(&self, part: Part) -> T {
        self.parts[part.index()]
    }

    #[inline]
    pub fn parts(&self) -> &[T; PARTS] {
        &self.parts
    }

    /// Multiplies every part by `k`, which must be positive.
    pub fn scaled(&self, k: T) -> Result<Self> {
        Self::new(self.parts.map(|v| v * k))
    }
}

/// Natural log of `x[num] / x[den]`.
pub fn plr<T: Real>(x: &Composition<T>, num: Part, den: Part) -> Result<T> {
    if num == den {
        return Err(Error::SamePart(num));
    }
    Ok(unchecked_plr(x, num, den))
}

#[inline]
fn unchecked_plr<T: Real>(x: &Composition<T>, num: Part, den: Part) -> T {
    (x.get(num) / x.get(den)).ln()
}

/// Human-readable column label `log(NUM/DEN)`.
pub fn plr_label(num: Part, den: Part) -> String {
    format!("log({num}/{den})")
}

/// Why an edge list is not a spanning tree over the parts.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphRejection {
    #[error("self-loop on {0}")]
    SelfLoop(Part),
    #[error("duplicate pair {0}/{1}")]
    DuplicatePair(Part, Part),
    #[error("too many edges / cycle: {found} edges, a spanning tree has {expected}")]
    TooManyEdges { found: usize, expected: usize },
    #[error("cycle closed by edge {0}/{1}")]
    Cycle(Part, Part),
    #[error("disconnected: {components} components, {found} edges for {expected} needed")]
    Disconnected {
        components: usize,
        found: usize,
        expected: usize,
    },
}

/// Ordered part pairs, each defining one pairwise log-ratio (numerator, denominator).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlrGraph {
    pub edges: Vec<(Part, Part)>,
}

impl PlrGraph {
    pub fn new(edges: Vec<(Part, Part)>) -> Self {
        Self { edges }
    }

    pub fn part_count(&self) -> usize {
        PARTS
    }

    /// Parses `"NCA/CA, OR/CA; ..."`: edges separated by commas, semicolons,
    /// or whitespace, each written `NUM/DEN`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for token in text
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            let token = token
                .strip_prefix("log(")
                .and_then(|t| t.strip_suffix(')'))
                .unwrap_or(token);
            let (num, den) = token
                .split_once('/')
                .ok_or_else(|| Error::Config(format!("edge `{token}` is not NUM/DEN")))?;
            edges.push((num.parse()?, den.parse()?));
        }
        Ok(Self { edges })
    }

    /// Accepts the graph iff it is a spanning tree over the seven parts.
    pub fn validate(&self) -> std::result::Result<(), GraphRejection> {
        let expected = PARTS - 1;
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if a == b {
                return Err(GraphRejection::SelfLoop(a));
            }
            let dup = self.edges[..i]
                .iter()
                .any(|&(c, d)| (c == a && d == b) || (c == b && d == a));
            if dup {
                return Err(GraphRejection::DuplicatePair(a, b));
            }
        }
        if self.edges.len() > expected {
            return Err(GraphRejection::TooManyEdges {
                found: self.edges.len(),
                expected,
            });
        }
        let mut sets = DisjointSets::new(PARTS);
        for &(a, b) in &self.edges {
            if !sets.union(a.index(), b.index()) {
                return Err(GraphRejection::Cycle(a, b));
            }
        }
        let components = sets.components();
        if components > 1 {
            return Err(GraphRejection::Disconnected {
                components,
                found: self.edges.len(),
                expected,
            });
        }
        Ok(())
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Returns false when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }

    fn components(&mut self) -> usize {
        (0..self.parent.len()).filter(|&i| self.find(i) == i).count()
    }
}

/// The financially interpretable spanning set used by default.
pub const DEFAULT_SPANNING_EDGES: [(Part, Part, &str); PARTS - 1] = [
    (Part::Nca, Part::Ca, "asset tangibility"),
    (Part::Or, Part::Ca, "current-asset turnover"),
    (Part::Or, Part::Oe, "margin"),
    (Part::Ca, Part::Cl, "current ratio"),
    (Part::Ncl, Part::Cl, "debt maturity"),
    (Part::Re, Part::Ncl, "retained earnings over non-current liabilities"),
];

/// A [`PlrGraph`] that passed [`PlrGraph::validate`], with one column label per edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpanningPlrGraph {
    graph: PlrGraph,
    labels: Vec<String>,
}

impl SpanningPlrGraph {
    /// Validates `graph`; columns are labelled `log(NUM/DEN)`.
    pub fn try_new(graph: PlrGraph) -> std::result::Result<Self, GraphRejection> {
        graph.validate()?;
        let labels = graph.edges.iter().map(|&(a, b)| plr_label(a, b)).collect();
        Ok(Self { graph, labels })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.graph.edges.len() {
            return Err(Error::LengthMismatch(labels.len(), self.graph.edges.len()));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn edges(&self) -> &[(Part, Part)] {
        &self.graph.edges
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn graph(&self) -> &PlrGraph {
        &self.graph
    }
}

impl Default for SpanningPlrGraph {
    /// The default interpretable set, labelled with financial concept names.
    fn default() -> Self {
        let graph = PlrGraph::new(DEFAULT_SPANNING_EDGES.iter().map(|&(a, b, _)| (a, b)).collect());
        Self {
            graph,
            labels: DEFAULT_SPANNING_EDGES
                .iter()
                .map(|&(_, _, name)| name.to_string())
                .collect(),
        }
    }
}

/// One log-ratio per edge of a validated spanning graph, in edge order.
pub fn spanning_plr_features<T: Real>(x: &Composition<T>, graph: &SpanningPlrGraph) -> Vec<T> {
    graph.edges().iter().map(|&(a, b)| unchecked_plr(x, a, b)).collect()
}

/// Number of distinct pairwise log-ratios, `D(D-1)/2`.
pub const FULL_PLR_COUNT: usize = PARTS * (PARTS - 1) / 2;

/// All pairwise log-ratios in publication order and orientation.
///
/// Rows run part-earlier over part-later except `OR/CA`.
pub const FULL_PLR_PAIRS: [(Part, Part); FULL_PLR_COUNT] = [
    (Part::Nca, Part::Ca),
    (Part::Nca, Part::Re),
    (Part::Nca, Part::Ncl),
    (Part::Nca, Part::Cl),
    (Part::Nca, Part::Or),
    (Part::Nca, Part::Oe),
    (Part::Ca, Part::Re),
    (Part::Ca, Part::Ncl),
    (Part::Ca, Part::Cl),
    (Part::Or, Part::Ca),
    (Part::Ca, Part::Oe),
    (Part::Re, Part::Ncl),
    (Part::Re, Part::Cl),
    (Part::Re, Part::Or),
    (Part::Re, Part::Oe),
    (Part::Ncl, Part::Cl),
    (Part::Ncl, Part::Or),
    (Part::Ncl, Part::Oe),
    (Part::Cl, Part::Or),
    (Part::Cl, Part::Oe),
    (Part::Or, Part::Oe),
];

pub fn full_plr_labels() -> Vec<String> {
    FULL_PLR_PAIRS.iter().map(|&(a, b)| plr_label(a, b)).collect()
}

pub fn full_plr_features<T: Real>(x: &Composition<T>) -> [T; FULL_PLR_COUNT] {
    FULL_PLR_PAIRS.map(|(a, b)| unchecked_plr(x, a, b))
}

/// Position of the unordered pair `{a, b}` in [`FULL_PLR_PAIRS`] and whether
/// the stored orientation is reversed relative to `a/b`.
pub fn full_plr_index(a: Part, b: Part) -> Option<(usize, bool)> {
    FULL_PLR_PAIRS.iter().enumerate().find_map(|(i, &(c, d))| {
        if (c, d) == (a, b) {
            Some((i, false))
        } else if (c, d) == (b, a) {
            Some((i, true))
        } else {
            None
        }
    })
}

/// Centred log-ratios: each log part minus the mean log part.
pub fn clr<T: Real>(x: &Composition<T>) -> [T; PARTS] {
    let logs = x.parts.map(|v| v.ln());
    let mean = logs.iter().copied().sum::<T>() / T::of_usize(PARTS);
    logs.map(|l| l - mean)
}

pub fn clr_labels() -> Vec<String> {
    Part::ALL.iter().map(|p| format!("clr({p})")).collect()
}

/// Euclidean distance between clr vectors.
pub fn aitchison_distance<T: Real>(x: &Composition<T>, y: &Composition<T>) -> T {
    euclidean(&clr(x), &clr(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn comp(v: [f64; 7]) -> Composition<f64> {
        Composition::new(v).unwrap()
    }

    #[test]
    fn rejects_non_positive_parts() {
        assert!(Composition::new([1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(Composition::new([1.0, 1.0, -2.0, 1.0, 1.0, 1.0, 1.0]).is_err());
        assert!(Composition::new([1.0, 1.0, 1.0, f64::NAN, 1.0, 1.0, 1.0]).is_err());
        assert!(Composition::new([1.0, 1.0, 1.0, 1.0, 1.0, f64::INFINITY, 1.0]).is_err());
    }

    #[test]
    fn plr_examples() {
        let x = comp([3.0, 3.0, 1.0, 1.0, 1.0, std::f64::consts::E, 1.0]);
        assert_eq!(plr(&x, Part::Nca, Part::Ca).unwrap(), 0.0);
        assert_abs_diff_eq!(plr(&x, Part::Or, Part::Oe).unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(plr(&x, Part::Re, Part::Re), Err(Error::SamePart(Part::Re))));
    }

    #[test]
    fn default_graph_is_spanning() {
        let g = SpanningPlrGraph::default();
        assert!(g.graph().validate().is_ok());
        assert_eq!(g.labels()[0], "asset tangibility");
    }

    #[test]
    fn graph_rejections() {
        let base = SpanningPlrGraph::default().graph().clone();
        let mut seven = base.clone();
        seven.edges.push((Part::Nca, Part::Oe));
        assert!(matches!(
            seven.validate(),
            Err(GraphRejection::TooManyEdges { found: 7, .. })
        ));
        assert!(seven
            .validate()
            .unwrap_err()
            .to_string()
            .contains("too many edges / cycle"));

        let dup = PlrGraph::new(vec![(Part::Nca, Part::Ca), (Part::Ca, Part::Nca)]);
        assert_eq!(dup.validate(), Err(GraphRejection::DuplicatePair(Part::Ca, Part::Nca)));

        let self_loop = PlrGraph::new(vec![(Part::Or, Part::Or)]);
        assert_eq!(self_loop.validate(), Err(GraphRejection::SelfLoop(Part::Or)));

        // six edges, one triangle, OE isolated
        let cyc = PlrGraph::parse("NCA/CA CA/RE RE/NCA NCL/CL CL/OR OR/NCL").unwrap();
        assert!(matches!(
            cyc.validate(),
            Err(GraphRejection::Cycle(Part::Re, Part::Nca))
        ));

        let short = PlrGraph::parse("NCA/CA, CA/RE").unwrap();
        assert!(matches!(
            short.validate(),
            Err(GraphRejection::Disconnected { components: 5, .. })
        ));
    }

    #[test]
    fn parse_accepts_log_labels() {
        let g = PlrGraph::parse("log(NCA/CA);log(OR/CA)").unwrap();
        assert_eq!(g.edges, vec![(Part::Nca, Part::Ca), (Part::Or, Part::Ca)]);
        assert!(PlrGraph::parse("NCA-CA").is_err());
        assert!(PlrGraph::parse("NCA/XX").is_err());
    }

    #[test]
    fn spanning_features_single_perturbed_part() {
        let g = SpanningPlrGraph::default();
        let ones = comp([1.0; 7]);
        assert_eq!(spanning_plr_features(&ones, &g), vec![0.0; 6]);
        let x = comp([2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let f = spanning_plr_features(&x, &g);
        assert_abs_diff_eq!(f[0], 2f64.ln(), epsilon = 1e-15);
        assert!(f[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_plr_layout() {
        let labels = full_plr_labels();
        assert_eq!(labels.len(), 21);
        assert_eq!(labels[9], "log(OR/CA)");
        assert_eq!(labels[20], "log(OR/OE)");
        assert_eq!(full_plr_features(&comp([4.0; 7])), [0.0; 21]);
        // every unordered pair appears exactly once
        for (i, &a) in Part::ALL.iter().enumerate() {
            for &b in &Part::ALL[i + 1..] {
                assert!(full_plr_index(a, b).is_some(), "{a}/{b}");
            }
        }
    }

    #[test]
    fn clr_f32() {
        let x = Composition::new([1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        let c = clr(&x);
        assert!(c.iter().sum::<f32>().abs() < 1e-5);
        assert_eq!(clr(&Composition::new([2.5f32; 7]).unwrap()), [0.0; 7]);
    }

    fn arb_comp() -> impl Strategy<Value = Composition<f64>> {
        proptest::array::uniform7(-8.0f64..8.0).prop_map(|l| comp(l.map(f64::exp)))
    }

    proptest! {
        #[test]
        fn plr_is_antisymmetric(x in arb_comp(), a in 0usize..7, b in 0usize..7) {
            prop_assume!(a != b);
            let (pa, pb) = (Part::ALL[a], Part::ALL[b]);
            let lhs = plr(&x, pa, pb).unwrap();
            let rhs = plr(&x, pb, pa).unwrap();
            prop_assert!((lhs + rhs).abs() < 1e-12);
        }

        #[test]
        fn spanning_features_match_plr(x in arb_comp()) {
            let g = SpanningPlrGraph::default();
            let f = spanning_plr_features(&x, &g);
            for (v, &(a, b)) in f.iter().zip(g.edges()) {
                prop_assert_eq!(*v, plr(&x, a, b).unwrap());
            }
        }

        #[test]
        fn full_plr_contains_spanning_set(x in arb_comp()) {
            let full = full_plr_features(&x);
            let g = SpanningPlrGraph::default();
            for (v, &(a, b)) in spanning_plr_features(&x, &g).iter().zip(g.edges()) {
                let (i, reversed) = full_plr_index(a, b).unwrap();
                let w = if reversed { -full[i] } else { full[i] };
                prop_assert!((v - w).abs() < 1e-12);
            }
        }

        #[test]
        fn log_ratios_are_scale_invariant(x in arb_comp(), k in 1e-3f64..1e3) {
            let y = x.scaled(k).unwrap();
            let (fx, fy) = (full_plr_features(&x), full_plr_features(&y));
            for (a, b) in fx.iter().zip(&fy) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let (cx, cy) = (clr(&x), clr(&y));
            for (a, b) in cx.iter().zip(&cy) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!(aitchison_distance(&x, &y) < 1e-9);
        }

        #[test]
        fn clr_sums_to_zero(x in arb_comp()) {
            prop_assert!(clr(&x).iter().sum::<f64>().abs() < 1e-12);
        }

        #[test]
        fn aitchison_is_symmetric(x in arb_comp(), y in arb_comp()) {
            prop_assert_eq!(aitchison_distance(&x, &x), 0.0);
            let d1 = aitchison_distance(&x, &y);
            let d2 = aitchison_distance(&y, &x);
            prop_assert!((d1 - d2).abs() < 1e-12);
        }
    }
}
