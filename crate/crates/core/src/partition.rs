//! Interval partitions of [0,1] and probability weights attached to their cells.

use crate::error::{Error, Result};
use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Smallest cell length a partition may contain. Degenerate cells are
/// rejected before they can poison downstream eigensolves.
pub const MIN_CELL_LENGTH: f64 = 1e-12;

/// Tolerance for a weight vector summing to one.
pub const MEASURE_SUM_TOL: f64 = 1e-12;

/// Closed subinterval of [0,1] with strictly positive length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
            return Err(Error::Domain(format!(
                "interval [{lo}, {hi}] must lie within [0, 1]"
            )));
        }
        if lo >= hi {
            return Err(Error::Domain(format!(
                "interval [{lo}, {hi}] must have positive length"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Closed-interval membership.
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// A single structural defect found while validating a cell list.
#[derive(Debug, Clone, PartialEq)]
pub enum PartitionIssue {
    Empty,
    DoesNotStartAtZero { lo: f64 },
    DoesNotEndAtOne { hi: f64 },
    /// Uncovered open interval between cells `after` and `after + 1`.
    Gap { after: usize, from: f64, to: f64 },
    /// Cells `after` and `after + 1` overlap on an interval of positive length.
    Overlap { after: usize, from: f64, to: f64 },
    BelowMinLength { cell: usize, length: f64 },
}

impl fmt::Display for PartitionIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionIssue::Empty => write!(f, "no cells"),
            PartitionIssue::DoesNotStartAtZero { lo } => {
                write!(f, "first cell starts at {lo}, not 0")
            }
            PartitionIssue::DoesNotEndAtOne { hi } => write!(f, "last cell ends at {hi}, not 1"),
            PartitionIssue::Gap { after, from, to } => {
                write!(f, "gap ({from}, {to}) after cell {after}")
            }
            PartitionIssue::Overlap { after, from, to } => {
                write!(f, "overlap ({from}, {to}) after cell {after}")
            }
            PartitionIssue::BelowMinLength { cell, length } => {
                write!(f, "cell {cell} has length {length:.3e}, below {MIN_CELL_LENGTH:.0e}")
            }
        }
    }
}

/// Outcome of validating a prospective cell list.
#[derive(Debug, Clone, Default)]
pub struct PartitionReport {
    pub issues: Vec<PartitionIssue>,
}

impl PartitionReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Lists every violated structural invariant of a prospective partition:
/// wrong endpoints, gaps, overlaps, cells below the minimum length.
pub fn validate_cells(cells: &[Interval]) -> PartitionReport {
    let mut issues = Vec::new();
    let Some(first) = cells.first() else {
        return PartitionReport { issues: vec![PartitionIssue::Empty] };
    };
    if first.lo() != 0.0 {
        issues.push(PartitionIssue::DoesNotStartAtZero { lo: first.lo() });
    }
    let last = cells.last().unwrap();
    if last.hi() != 1.0 {
        issues.push(PartitionIssue::DoesNotEndAtOne { hi: last.hi() });
    }
    for (j, pair) in cells.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        if b.lo() > a.hi() {
            issues.push(PartitionIssue::Gap { after: j, from: a.hi(), to: b.lo() });
        } else if b.lo() < a.hi() {
            issues.push(PartitionIssue::Overlap { after: j, from: b.lo(), to: a.hi() });
        }
    }
    for (j, c) in cells.iter().enumerate() {
        if c.length() < MIN_CELL_LENGTH {
            issues.push(PartitionIssue::BelowMinLength { cell: j, length: c.length() });
        }
    }
    PartitionReport { issues }
}

/// Ordered cover of [0,1] by closed cells sharing endpoints.
///
/// A point on a shared endpoint belongs to the left cell for location
/// queries; the ambiguity is a measure-zero set and determinism is what
/// matters.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalPartition {
    cells: Vec<Interval>,
}

impl IntervalPartition {
    /// Builds a partition from strictly increasing breakpoints `0 = b0 < … < bn = 1`.
    pub fn from_breakpoints(points: &[f64]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidPartition("need at least two breakpoints".into()));
        }
        let mut cells = Vec::with_capacity(points.len() - 1);
        for w in points.windows(2) {
            cells.push(Interval::new(w[0], w[1]).map_err(|e| match e {
                Error::Domain(msg) => Error::InvalidPartition(msg),
                other => other,
            })?);
        }
        Self::from_cells(cells)
    }

    pub fn from_cells(cells: Vec<Interval>) -> Result<Self> {
        let report = validate_cells(&cells);
        match report.issues.first() {
            None => Ok(Self { cells }),
            Some(issue) => Err(Error::InvalidPartition(issue.to_string())),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Interval] {
        &self.cells
    }

    pub fn cell(&self, j: usize) -> Option<Interval> {
        self.cells.get(j).copied()
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = Vec::with_capacity(self.cells.len() + 1);
        pts.push(0.0);
        pts.extend(self.cells.iter().map(|c| c.hi()));
        pts
    }

    /// Index of the cell containing `x`; shared endpoints resolve to the
    /// left cell. `None` outside [0,1].
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(0.0..=1.0).contains(&x) {
            return None;
        }
        if x == 0.0 {
            return Some(0);
        }
        // Count of cell upper endpoints strictly below x = index of the
        // first cell whose closure reaches x.
        let idx = self.cells.partition_point(|c| c.hi() < x);
        Some(idx.min(self.cells.len() - 1))
    }

    /// Breakpoint-array JSON document, 17 significant digits per value.
    pub fn to_breakpoint_json(&self) -> String {
        let body: Vec<String> =
            self.breakpoints().iter().map(|b| format!("{b:.16e}")).collect();
        format!("[{}]", body.join(","))
    }

    pub fn from_breakpoint_json(doc: &str) -> Result<Self> {
        let points: Vec<f64> = serde_json::from_str(doc)
            .map_err(|e| Error::InvalidPartition(format!("breakpoint JSON: {e}")))?;
        Self::from_breakpoints(&points)
    }
}

impl Serialize for IntervalPartition {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let pts = self.breakpoints();
        let mut seq = serializer.serialize_seq(Some(pts.len()))?;
        for p in pts {
            seq.serialize_element(&p)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for IntervalPartition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let points = Vec::<f64>::deserialize(deserializer)?;
        IntervalPartition::from_breakpoints(&points).map_err(de::Error::custom)
    }
}

/// Nonnegative weights over partition cells summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MeasureVector {
    weights: Vec<f64>,
}

impl MeasureVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::Domain("measure weights must be finite and >= 0".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > MEASURE_SUM_TOL {
            return Err(Error::Domain(format!(
                "measure weights sum to {sum}, expected 1 within {MEASURE_SUM_TOL:.0e}"
            )));
        }
        Ok(Self { weights })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("uniform measure needs at least one cell".into()));
        }
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, j: usize) -> Option<f64> {
        self.weights.get(j).copied()
    }
}

impl<'de> Deserialize<'de> for MeasureVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Vec<f64>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an array of weights")
            }
            fn visit_seq<A: SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(w) = seq.next_element()? {
                    out.push(w);
                }
                Ok(out)
            }
        }
        let weights = deserializer.deserialize_seq(V)?;
        MeasureVector::new(weights).map_err(de::Error::custom)
    }
}

/// Cell lengths of a partition, as a probability vector.
pub fn lebesgue_measure(p: &IntervalPartition) -> MeasureVector {
    let weights: Vec<f64> = p.cells().iter().map(|c| c.length()).collect();
    // Lengths of a valid partition telescope to 1 exactly up to float dust.
    MeasureVector::new(weights).expect("partition cell lengths sum to 1")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lebesgue_of_two_cells() {
        let p = IntervalPartition::from_breakpoints(&[0.0, 0.3, 1.0]).unwrap();
        assert_eq!(lebesgue_measure(&p).weights(), &[0.3, 0.7]);
    }

    #[test]
    fn lebesgue_of_uniform_four_cells() {
        let p = IntervalPartition::from_breakpoints(&[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(lebesgue_measure(&p).weights(), &[0.25; 4]);
    }

    #[test]
    fn lebesgue_of_skewed_refinement() {
        // Level-one refinement of the x0 = 0.1 tent base.
        let p = IntervalPartition::from_breakpoints(&[0.0, 0.01, 0.1, 0.91, 1.0]).unwrap();
        let m = lebesgue_measure(&p);
        let expect = [0.01, 0.09, 0.81, 0.09];
        for (w, e) in m.weights().iter().zip(expect) {
            assert!((w - e).abs() < 1e-15, "{w} vs {e}");
        }
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() <= MEASURE_SUM_TOL);
    }

    #[test]
    fn validate_accepts_halves() {
        let cells = vec![Interval::new(0.0, 0.5).unwrap(), Interval::new(0.5, 1.0).unwrap()];
        assert!(validate_cells(&cells).is_valid());
    }

    #[test]
    fn validate_names_gap() {
        let cells = vec![Interval::new(0.0, 0.4).unwrap(), Interval::new(0.5, 1.0).unwrap()];
        let report = validate_cells(&cells);
        assert_eq!(
            report.issues,
            vec![PartitionIssue::Gap { after: 0, from: 0.4, to: 0.5 }]
        );
    }

    #[test]
    fn validate_names_overlap() {
        let cells = vec![Interval::new(0.0, 0.6).unwrap(), Interval::new(0.5, 1.0).unwrap()];
        let report = validate_cells(&cells);
        assert_eq!(
            report.issues,
            vec![PartitionIssue::Overlap { after: 0, from: 0.5, to: 0.6 }]
        );
    }

    #[test]
    fn validate_rejects_short_cell() {
        let cells = vec![
            Interval::new(0.0, 1e-13).unwrap(),
            Interval::new(1e-13, 1.0).unwrap(),
        ];
        let report = validate_cells(&cells);
        assert!(matches!(report.issues[0], PartitionIssue::BelowMinLength { cell: 0, .. }));
    }

    #[test]
    fn locate_resolves_shared_endpoint_left() {
        let p = IntervalPartition::from_breakpoints(&[0.0, 0.3, 1.0]).unwrap();
        assert_eq!(p.locate(0.3), Some(0));
        assert_eq!(p.locate(0.0), Some(0));
        assert_eq!(p.locate(1.0), Some(1));
        assert_eq!(p.locate(0.8), Some(1));
        assert_eq!(p.locate(1.5), None);
        assert_eq!(p.locate(-0.1), None);
    }

    #[test]
    fn breakpoint_json_round_trips() {
        let p = IntervalPartition::from_breakpoints(&[0.0, 0.1, 0.91, 1.0]).unwrap();
        let doc = p.to_breakpoint_json();
        let back = IntervalPartition::from_breakpoint_json(&doc).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn serde_partition_as_breakpoints() {
        let p = IntervalPartition::from_breakpoints(&[0.0, 0.5, 1.0]).unwrap();
        let doc = serde_json::to_string(&p).unwrap();
        assert_eq!(doc, "[0.0,0.5,1.0]");
        let back: IntervalPartition = serde_json::from_str(&doc).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn measure_vector_rejects_bad_sum() {
        assert!(MeasureVector::new(vec![0.5, 0.4]).is_err());
        assert!(MeasureVector::new(vec![0.5, -0.5, 1.0]).is_err());
        assert!(MeasureVector::new(vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn partition_rejects_decreasing_breakpoints() {
        assert!(IntervalPartition::from_breakpoints(&[0.0, 0.7, 0.3, 1.0]).is_err());
        assert!(IntervalPartition::from_breakpoints(&[0.1, 0.5, 1.0]).is_err());
        assert!(IntervalPartition::from_breakpoints(&[0.0]).is_err());
    }
}
