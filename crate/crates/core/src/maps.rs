//! The concrete systems under study: piecewise-linear interval maps given by
//! affine branches, and finite-state symbolic models for systems whose
//! transition structure is known in closed form.

use crate::error::{Error, Result};
use crate::partition::{Interval, IntervalPartition, MeasureVector};
use crate::transition::SubstochasticMatrix;
use serde::{Deserialize, Serialize};

/// Slack allowed when checking that a branch image stays inside [0,1].
const BRANCH_IMAGE_TOL: f64 = 1e-12;

/// One affine piece `x ↦ slope·x + intercept` of an expanding interval map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    domain: Interval,
    slope: f64,
    intercept: f64,
}

impl Branch {
    pub fn new(domain: Interval, slope: f64, intercept: f64) -> Result<Self> {
        if !slope.is_finite() || !intercept.is_finite() {
            return Err(Error::Domain("branch coefficients must be finite".into()));
        }
        if slope.abs() <= 1.0 {
            return Err(Error::Domain(format!(
                "branch slope {slope} is not expanding (|slope| must exceed 1)"
            )));
        }
        let b = Self { domain, slope, intercept };
        let (lo, hi) = b.image();
        if lo < -BRANCH_IMAGE_TOL || hi > 1.0 + BRANCH_IMAGE_TOL {
            return Err(Error::Domain(format!(
                "branch image [{lo}, {hi}] leaves [0, 1]"
            )));
        }
        Ok(b)
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// Image of the branch domain, returned with ordered endpoints.
    pub fn image(&self) -> (f64, f64) {
        let a = self.slope * self.domain.lo() + self.intercept;
        let b = self.slope * self.domain.hi() + self.intercept;
        if a <= b { (a, b) } else { (b, a) }
    }

    /// Affine evaluation without domain checks.
    pub(crate) fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// Preimage of `y` under this branch, ignoring the domain.
    pub(crate) fn pull_back(&self, y: f64) -> f64 {
        (y - self.intercept) / self.slope
    }
}

/// Full map assembled from affine branches whose domains partition [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearMap {
    branches: Vec<Branch>,
    domains: IntervalPartition,
}

impl PiecewiseLinearMap {
    pub fn new(branches: Vec<Branch>) -> Result<Self> {
        let domains =
            IntervalPartition::from_cells(branches.iter().map(|b| b.domain()).collect())?;
        Ok(Self { branches, domains })
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// The partition formed by the branch domains.
    pub fn base_partition(&self) -> &IntervalPartition {
        &self.domains
    }

    /// Evaluates the map. A point on a shared branch endpoint goes through
    /// the left branch; the result is clamped to [0,1] to absorb float dust.
    pub fn apply(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("map argument {x} outside [0, 1]")));
        }
        Ok(self.eval(x))
    }

    /// `apply` without the range check, for hot loops that maintain it.
    pub(crate) fn eval(&self, x: f64) -> f64 {
        let j = self.domains.locate(x).expect("argument within [0,1]");
        self.branches[j].eval(x).clamp(0.0, 1.0)
    }
}

/// Skewed tent map: rises linearly from (0,0) to (x0,1), falls to (1,0).
pub fn make_skewed_tent(x0: f64) -> Result<PiecewiseLinearMap> {
    if !(x0 > 0.0 && x0 < 1.0) {
        return Err(Error::Domain(format!("tent peak {x0} must lie in (0, 1)")));
    }
    let left = Branch::new(Interval::new(0.0, x0)?, 1.0 / x0, 0.0)?;
    let right = Branch::new(
        Interval::new(x0, 1.0)?,
        -1.0 / (1.0 - x0),
        1.0 / (1.0 - x0),
    )?;
    PiecewiseLinearMap::new(vec![left, right])
}

/// Skewed doubling map: two increasing branches onto [0,1] with a break at `skew`.
pub fn make_doubling(skew: f64) -> Result<PiecewiseLinearMap> {
    if !(skew > 0.0 && skew < 1.0) {
        return Err(Error::Domain(format!("doubling break {skew} must lie in (0, 1)")));
    }
    let left = Branch::new(Interval::new(0.0, skew)?, 1.0 / skew, 0.0)?;
    let right = Branch::new(
        Interval::new(skew, 1.0)?,
        1.0 / (1.0 - skew),
        -skew / (1.0 - skew),
    )?;
    PiecewiseLinearMap::new(vec![left, right])
}

/// Finite-state model of a system given by its transition structure: a
/// row-stochastic matrix over abstract states plus the states' measures.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicMarkovModel {
    transition: SubstochasticMatrix,
    state_measure: MeasureVector,
}

impl SymbolicMarkovModel {
    pub fn new(transition: SubstochasticMatrix, state_measure: MeasureVector) -> Result<Self> {
        if transition.order() != state_measure.len() {
            return Err(Error::DimensionMismatch {
                left: transition.order(),
                right: state_measure.len(),
            });
        }
        if !transition.is_stochastic() {
            return Err(Error::Domain(
                "symbolic model requires a row-stochastic transition matrix".into(),
            ));
        }
        Ok(Self { transition, state_measure })
    }

    pub fn state_count(&self) -> usize {
        self.transition.order()
    }

    pub fn transition(&self) -> &SubstochasticMatrix {
        &self.transition
    }

    pub fn state_measure(&self) -> &MeasureVector {
        &self.state_measure
    }

    /// One refinement step of the chain: states become admissible-ordered
    /// pairs `(i, j)` laid out at index `i·k + j`, a pair carries measure
    /// `m_i · p_ij`, and `(i, j) → (j, l)` has probability `p_jl`.
    ///
    /// Pairs with `p_ij = 0` keep their rows but can never be entered, so
    /// they only add zero eigenvalues.
    pub fn refine_pairs(&self) -> SymbolicMarkovModel {
        let k = self.state_count();
        let kk = k * k;
        let mut entries = vec![0.0; kk * kk];
        let mut measure = vec![0.0; kk];
        for i in 0..k {
            for j in 0..k {
                let row = i * k + j;
                measure[row] =
                    self.state_measure.get(i).unwrap() * self.transition.get(i, j).unwrap();
                for l in 0..k {
                    entries[row * kk + j * k + l] = self.transition.get(j, l).unwrap();
                }
            }
        }
        let transition =
            SubstochasticMatrix::new(kk, entries).expect("pair rows copy stochastic rows");
        let state_measure = MeasureVector::new(measure).expect("pair measures sum to 1");
        Self { transition, state_measure }
    }

    /// Row indices of the refined chain whose pairs start at `state`, i.e.
    /// the rows to zero when `state` is the hole.
    pub fn pair_rows_for_state(&self, state: usize) -> std::ops::Range<usize> {
        let k = self.state_count();
        state * k..(state + 1) * k
    }
}

/// Five-state model of Arnold's cat map on the Markov partition built from
/// its two expanding rectangles.
pub fn make_cat_map_model() -> SymbolicMarkovModel {
    let s5 = 5.0_f64.sqrt();
    let a = (3.0 - s5) / 2.0;
    let b = s5 - 2.0;
    let c = (s5 - 1.0) / 2.0;
    #[rustfmt::skip]
    let entries = vec![
        a,   0.0, a,   b,   0.0,
        a,   0.0, a,   b,   0.0,
        a,   0.0, a,   b,   0.0,
        0.0, c,   0.0, 0.0, a,
        0.0, c,   0.0, 0.0, a,
    ];
    // State measures; r is the common scale factor and the five expressions
    // sum to exactly (2a + b)·r + (c + a)·(1 − r) = 1.
    let r = ((s5 + 3.0) / 10.0).sqrt();
    let measure = vec![a * r, b * r, a * r, c * (1.0 - r), a * (1.0 - r)];

    let transition = SubstochasticMatrix::new(5, entries).expect("closed-form rows");
    debug_assert!(transition
        .row_sums()
        .iter()
        .all(|s| (s - 1.0).abs() <= 1e-14));
    debug_assert!((measure.iter().sum::<f64>() - 1.0).abs() <= 1e-14);
    let state_measure = MeasureVector::new(measure).expect("closed-form measures");
    SymbolicMarkovModel::new(transition, state_measure).expect("model is stochastic")
}

/// Increasing bijection of [0,1] with its inverse.
#[derive(Debug, Clone, Copy)]
pub struct Conjugacy {
    forward: fn(f64) -> f64,
    inverse: fn(f64) -> f64,
}

impl Conjugacy {
    pub fn forward(&self, x: f64) -> f64 {
        (self.forward)(x)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        (self.inverse)(y)
    }
}

/// The change of coordinates `U(x) = sin²(πx/2)` carrying the symmetric
/// tent map to the logistic map, with inverse `(2/π)·asin(√y)`.
pub fn logistic_conjugacy() -> Conjugacy {
    Conjugacy {
        forward: |x| {
            let s = (std::f64::consts::FRAC_PI_2 * x).sin();
            s * s
        },
        inverse: |y| std::f64::consts::FRAC_2_PI * y.sqrt().asin(),
    }
}

/// Partition of [0,1] into 2ⁿ cells with breakpoints `sin²(iπ/2ⁿ⁺¹)`,
/// together with the logistic map's invariant measure, which weights every
/// cell equally.
pub fn make_logistic_partition(n: u32) -> Result<(IntervalPartition, MeasureVector)> {
    if n == 0 {
        return Err(Error::Domain("logistic partition level must be at least 1".into()));
    }
    if n > 20 {
        return Err(Error::Domain(format!("logistic partition level {n} is too deep")));
    }
    let k = 1usize << n;
    let denom = (2u64 << n) as f64;
    let points: Vec<f64> = (0..=k)
        .map(|i| {
            let s = (std::f64::consts::PI * i as f64 / denom).sin();
            s * s
        })
        .collect();
    let partition = IntervalPartition::from_breakpoints(&points)?;
    let measure = MeasureVector::uniform(k)?;
    Ok((partition, measure))
}

/// Map description accepted from JSON input.
///
/// `level` counts refinement steps: for tent and doubling maps it refines
/// the two-cell base (level L yields 2^(L+1) cells), for the logistic
/// partition it is the subdivision depth n (2ⁿ cells, n ≥ 1), and for the
/// cat model it applies the pair refinement (level 0 or 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapSpec {
    Tent {
        x0: f64,
        #[serde(default)]
        level: u32,
    },
    Doubling {
        skew: f64,
        #[serde(default)]
        level: u32,
    },
    Cat {
        #[serde(default)]
        level: u32,
    },
    Logistic { level: u32 },
}

pub fn map_spec_from_json(doc: &str) -> Result<MapSpec> {
    serde_json::from_str(doc).map_err(|e| Error::MapSpec(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tent_evaluates_on_both_branches() {
        let sym = make_skewed_tent(0.5).unwrap();
        assert_eq!(sym.apply(0.25).unwrap(), 0.5);
        assert_eq!(sym.apply(0.75).unwrap(), 0.5);

        let t = make_skewed_tent(0.3).unwrap();
        assert_eq!(t.apply(0.3).unwrap(), 1.0);
        assert_eq!(t.apply(1.0).unwrap(), 0.0);
        assert!((t.apply(0.15).unwrap() - 0.5).abs() < 1e-15);

        let skew = make_skewed_tent(0.1).unwrap();
        assert!((skew.apply(0.55).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tent_peak_uses_left_branch() {
        let t = make_skewed_tent(0.3).unwrap();
        // 0.3 belongs to the rising branch by the left-wins convention.
        assert_eq!(t.apply(0.3).unwrap(), 1.0);
    }

    #[test]
    fn tent_rejects_degenerate_peak() {
        assert!(make_skewed_tent(0.0).is_err());
        assert!(make_skewed_tent(1.0).is_err());
        assert!(make_skewed_tent(-0.2).is_err());
    }

    #[test]
    fn apply_rejects_outside_unit_interval() {
        let t = make_skewed_tent(0.5).unwrap();
        assert!(t.apply(1.2).is_err());
        assert!(t.apply(-0.1).is_err());
    }

    #[test]
    fn doubling_evaluates() {
        let d = make_doubling(0.5).unwrap();
        assert_eq!(d.apply(0.3).unwrap(), 0.6);
        assert_eq!(d.apply(0.75).unwrap(), 0.5);
        let d = make_doubling(0.25).unwrap();
        assert!((d.apply(0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn branches_map_onto_unit_interval() {
        for x0 in [0.1, 0.3, 0.5, 0.9] {
            for map in [make_skewed_tent(x0).unwrap(), make_doubling(x0).unwrap()] {
                for b in map.branches() {
                    let (lo, hi) = b.image();
                    assert!(lo.abs() <= 1e-12 && (hi - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn cat_model_matches_closed_forms() {
        let m = make_cat_map_model();
        assert_eq!(m.state_count(), 5);
        let s5 = 5.0_f64.sqrt();
        assert!((m.transition().get(0, 0).unwrap() - (3.0 - s5) / 2.0).abs() < 1e-15);
        assert!((m.transition().get(3, 1).unwrap() - (s5 - 1.0) / 2.0).abs() < 1e-15);
        for s in m.transition().row_sums() {
            assert!((s - 1.0).abs() <= 1e-14);
        }
        let total: f64 = m.state_measure().weights().iter().sum();
        assert!((total - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn conjugacy_round_trips_on_grid() {
        let u = logistic_conjugacy();
        for i in 0..=10_000 {
            let x = i as f64 / 10_000.0;
            assert!((u.inverse(u.forward(x)) - x).abs() <= 1e-10, "x = {x}");
        }
    }

    #[test]
    fn logistic_partition_level_one_is_halves() {
        let (p, mu) = make_logistic_partition(1).unwrap();
        assert_eq!(p.len(), 2);
        assert!((p.cell(0).unwrap().hi() - 0.5).abs() < 1e-15);
        assert_eq!(mu.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn logistic_partition_level_two_breakpoints() {
        let (p, mu) = make_logistic_partition(2).unwrap();
        let pts = p.breakpoints();
        let expect = [0.0, 0.146447, 0.5, 0.853553, 1.0];
        for (a, b) in pts.iter().zip(expect) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert_eq!(mu.weights(), &[0.25; 4]);
    }

    #[test]
    fn logistic_breakpoints_are_conjugated_dyadics() {
        let (p, _) = make_logistic_partition(3).unwrap();
        let u = logistic_conjugacy();
        for (i, b) in p.breakpoints().iter().enumerate() {
            assert!((b - u.forward(i as f64 / 8.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn map_spec_parses_each_kind() {
        assert_eq!(
            map_spec_from_json(r#"{"kind": "tent", "x0": 0.3, "level": 2}"#).unwrap(),
            MapSpec::Tent { x0: 0.3, level: 2 }
        );
        assert_eq!(
            map_spec_from_json(r#"{"kind": "doubling", "skew": 0.25}"#).unwrap(),
            MapSpec::Doubling { skew: 0.25, level: 0 }
        );
        assert_eq!(map_spec_from_json(r#"{"kind": "cat"}"#).unwrap(), MapSpec::Cat { level: 0 });
        assert_eq!(
            map_spec_from_json(r#"{"kind": "logistic", "level": 3}"#).unwrap(),
            MapSpec::Logistic { level: 3 }
        );
        assert!(map_spec_from_json(r#"{"kind": "tent"}"#).is_err());
        assert!(map_spec_from_json(r#"{"kind": "circle", "x0": 0.1}"#).is_err());
    }

    #[test]
    fn pair_refinement_keeps_stochasticity() {
        let m = make_cat_map_model();
        let r = m.refine_pairs();
        assert_eq!(r.state_count(), 25);
        for s in r.transition().row_sums() {
            assert!((s - 1.0).abs() <= 1e-12);
        }
        let total: f64 = r.state_measure().weights().iter().sum();
        assert!((total - 1.0).abs() <= 1e-12);
        assert_eq!(m.pair_rows_for_state(2), 10..15);
    }
}
