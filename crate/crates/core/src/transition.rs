//! Markov refinements of partitions and the transition matrices of the
//! induced finite chains, including hole punching.

use crate::error::{Error, Result};
use crate::maps::PiecewiseLinearMap;
use crate::partition::{IntervalPartition, MIN_CELL_LENGTH};

/// Tolerance for a branch-image endpoint to count as lying on a breakpoint.
pub const MARKOV_TOL: f64 = 1e-10;

/// Tolerance for a row of a stochastic matrix to sum to one.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Breakpoints closer than this merge during refinement.
const DEDUPE_TOL: f64 = 1e-14;

/// Dense k×k nonnegative matrix with row sums at most one. An optional
/// hole index marks the row that has been zeroed out.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstochasticMatrix {
    order: usize,
    entries: Vec<f64>,
    hole_index: Option<usize>,
}

impl SubstochasticMatrix {
    pub fn new(order: usize, entries: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::Domain("matrix order must be positive".into()));
        }
        if entries.len() != order * order {
            return Err(Error::DimensionMismatch {
                left: entries.len(),
                right: order * order,
            });
        }
        if entries.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(Error::Domain("matrix entries must be finite and >= 0".into()));
        }
        let m = Self { order, entries, hole_index: None };
        for (i, s) in m.row_sums().into_iter().enumerate() {
            if s > 1.0 + ROW_SUM_TOL {
                return Err(Error::Domain(format!(
                    "row {i} sums to {s}, above 1"
                )));
            }
        }
        Ok(m)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn hole_index(&self) -> Option<usize> {
        self.hole_index
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        if i < self.order && j < self.order {
            Some(self.entries[i * self.order + j])
        } else {
            None
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.order..(i + 1) * self.order]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.order).map(|i| self.row(i).iter().sum()).collect()
    }

    /// True when every row sums to one within tolerance (closed system).
    pub fn is_stochastic(&self) -> bool {
        self.row_sums().iter().all(|s| (s - 1.0).abs() <= ROW_SUM_TOL)
    }

    /// Copy with row `i` zeroed: the open system whose hole is cell `i`.
    /// Punching the hole that is already open changes nothing.
    pub fn punch_hole(&self, i: usize) -> Result<Self> {
        if i >= self.order {
            return Err(Error::IndexOutOfRange { index: i, order: self.order });
        }
        let mut out = self.clone();
        out.entries[i * self.order..(i + 1) * self.order].fill(0.0);
        out.hole_index = Some(i);
        Ok(out)
    }

    /// Copy with several rows zeroed, for holes that span a group of states
    /// (such as all refined states sitting over one base cell). The result
    /// carries no single hole index.
    pub fn zero_rows(&self, rows: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut out = self.clone();
        out.hole_index = None;
        for i in rows {
            if i >= self.order {
                return Err(Error::IndexOutOfRange { index: i, order: self.order });
            }
            out.entries[i * self.order..(i + 1) * self.order].fill(0.0);
        }
        Ok(out)
    }

    /// Row-major CSV at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.order {
            let row: Vec<String> = self.row(i).iter().map(|e| format!("{e:.16e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Verdict of the Markov check: either every cell's image is a union of
/// cells, or the first cell whose image endpoint misses the breakpoint grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovReport {
    pub violation: Option<MarkovIssue>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovIssue {
    pub cell: usize,
    pub endpoint: f64,
}

impl MarkovReport {
    pub fn is_markov(&self) -> bool {
        self.violation.is_none()
    }
}

fn nearest_breakpoint(points: &[f64], y: f64) -> f64 {
    let idx = points.partition_point(|p| *p < y);
    let mut best = f64::INFINITY;
    for cand in [idx.checked_sub(1), Some(idx)].into_iter().flatten() {
        if let Some(p) = points.get(cand) {
            if (p - y).abs() < (best - y).abs() {
                best = *p;
            }
        }
    }
    best
}

fn snap(points: &[f64], y: f64) -> f64 {
    let b = nearest_breakpoint(points, y);
    if (b - y).abs() <= MARKOV_TOL { b } else { y }
}

/// Ordered images of the affine pieces of one cell (a cell may straddle
/// several branch domains).
fn piece_images(map: &PiecewiseLinearMap, lo: f64, hi: f64) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for b in map.branches() {
        let d = b.domain();
        let plo = lo.max(d.lo());
        let phi = hi.min(d.hi());
        if phi <= plo {
            continue;
        }
        let (a, z) = {
            let a = b.eval(plo);
            let z = b.eval(phi);
            if a <= z { (a, z) } else { (z, a) }
        };
        out.push((a, z, b.slope().abs()));
    }
    out
}

/// Checks that the image of every cell under the map is a union of cells:
/// the endpoints of each connected component of the image must land on the
/// breakpoint grid within tolerance. Reports the first violation.
pub fn check_markov(map: &PiecewiseLinearMap, p: &IntervalPartition) -> MarkovReport {
    let points = p.breakpoints();
    for (ci, cell) in p.cells().iter().enumerate() {
        let mut images: Vec<(f64, f64)> = piece_images(map, cell.lo(), cell.hi())
            .into_iter()
            .map(|(a, z, _)| (a, z))
            .collect();
        images.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Merge overlapping or touching components.
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (a, z) in images {
            match merged.last_mut() {
                Some(last) if a <= last.1 + MARKOV_TOL => last.1 = last.1.max(z),
                _ => merged.push((a, z)),
            }
        }
        for (a, z) in merged {
            for end in [a, z] {
                if (nearest_breakpoint(&points, end) - end).abs() > MARKOV_TOL {
                    return MarkovReport {
                        violation: Some(MarkovIssue { cell: ci, endpoint: end }),
                    };
                }
            }
        }
    }
    MarkovReport { violation: None }
}

/// Transition matrix of the closed chain induced by a Markov partition:
/// entry (i,j) is the fraction of cell i that lands in cell j.
///
/// For a cell inside a single affine branch of slope s this is the closed
/// form m(Ej)/(|s|·m(Ei)) whenever Ej lies inside the image and 0
/// otherwise; cells straddling several branches sum the same expression
/// piece by piece. Piece-image endpoints are snapped to the breakpoint
/// grid first so that entries come out as exact length ratios.
pub fn transition_matrix(
    map: &PiecewiseLinearMap,
    p: &IntervalPartition,
) -> Result<SubstochasticMatrix> {
    let report = check_markov(map, p);
    if let Some(issue) = report.violation {
        return Err(Error::MarkovViolation { cell: issue.cell, endpoint: issue.endpoint });
    }
    let points = p.breakpoints();
    let k = p.len();
    let mut entries = vec![0.0; k * k];
    for (i, cell) in p.cells().iter().enumerate() {
        let mi = cell.length();
        for (a, z, slope) in piece_images(map, cell.lo(), cell.hi()) {
            let (a, z) = (snap(&points, a), snap(&points, z));
            for (j, target) in p.cells().iter().enumerate() {
                let overlap = z.min(target.hi()) - a.max(target.lo());
                if overlap > 0.0 {
                    entries[i * k + j] += overlap / (slope * mi);
                }
            }
        }
    }
    // Branch pieces tile each cell, so every row sums to 1 exactly; the
    // snapped endpoints carry float dust that the small cells of deep
    // refinements amplify. Normalize it away, but refuse anything larger.
    for row in entries.chunks_mut(k) {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("transition row sums to {sum}, not 1")));
        }
        for e in row {
            *e /= sum;
        }
    }
    let m = SubstochasticMatrix::new(k, entries)?;
    debug_assert!(m.is_stochastic());
    Ok(m)
}

/// Refines a Markov base partition by pulling every breakpoint back through
/// the branch inverses, `levels` times. Each level multiplies the cell
/// count by the branch count for full-branch maps.
pub fn refine(
    map: &PiecewiseLinearMap,
    base: &IntervalPartition,
    levels: u32,
) -> Result<IntervalPartition> {
    let base_report = check_markov(map, base);
    if let Some(issue) = base_report.violation {
        return Err(Error::MarkovViolation { cell: issue.cell, endpoint: issue.endpoint });
    }
    let mut points = base.breakpoints();
    for _ in 0..levels {
        // Established points from the previous level survive near-duplicate
        // merges, so refinements nest exactly as float sets.
        let mut next: Vec<(f64, bool)> = points.iter().map(|&x| (x, true)).collect();
        for b in map.branches() {
            let d = b.domain();
            for y in &points {
                let x = b.pull_back(*y);
                if x >= d.lo() - DEDUPE_TOL && x <= d.hi() + DEDUPE_TOL {
                    next.push((x.clamp(d.lo(), d.hi()), false));
                }
            }
        }
        next.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, bool)> = Vec::with_capacity(next.len());
        for (x, established) in next {
            match merged.last_mut() {
                Some(last) if (x - last.0).abs() <= DEDUPE_TOL => {
                    if established && !last.1 {
                        *last = (x, true);
                    }
                }
                _ => merged.push((x, established)),
            }
        }
        points = merged.into_iter().map(|(x, _)| x).collect();
    }
    // The pulled-back endpoints reproduce 0 and 1 exactly for maps whose
    // branches are onto; anything else has already been caught above.
    for w in points.windows(2) {
        let len = w[1] - w[0];
        if len < MIN_CELL_LENGTH {
            return Err(Error::RefinementDegenerate { length: len, min: MIN_CELL_LENGTH });
        }
    }
    IntervalPartition::from_breakpoints(&points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{make_cat_map_model, make_skewed_tent};

    #[test]
    fn two_cell_tent_matrix() {
        let map = make_skewed_tent(0.3).unwrap();
        let p = map.base_partition().clone();
        let m = transition_matrix(&map, &p).unwrap();
        let expect = [0.3, 0.7, 0.3, 0.7];
        for (e, x) in m.entries().iter().zip(expect) {
            assert!((e - x).abs() < 1e-15, "{e} vs {x}");
        }

        let sym = make_skewed_tent(0.5).unwrap();
        let m = transition_matrix(&sym, sym.base_partition()).unwrap();
        assert_eq!(m.entries(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn refine_symmetric_tent_is_dyadic() {
        let map = make_skewed_tent(0.5).unwrap();
        let p = refine(&map, map.base_partition(), 1).unwrap();
        assert_eq!(p.breakpoints(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn refine_skewed_tent_level_one() {
        let map = make_skewed_tent(0.1).unwrap();
        let p = refine(&map, map.base_partition(), 1).unwrap();
        let expect = [0.0, 0.01, 0.1, 0.91, 1.0];
        for (a, b) in p.breakpoints().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn refine_doubles_cell_count_per_level() {
        for x0 in [0.1, 0.2, 0.3, 0.4, 0.5] {
            let map = make_skewed_tent(x0).unwrap();
            for levels in 0..=6 {
                let p = refine(&map, map.base_partition(), levels).unwrap();
                assert_eq!(p.len(), 2usize << levels, "x0={x0} levels={levels}");
            }
        }
    }

    #[test]
    fn refine_is_nested() {
        let map = make_skewed_tent(0.3).unwrap();
        let mut previous = map.base_partition().breakpoints();
        for levels in 1..=5 {
            let p = refine(&map, map.base_partition(), levels).unwrap();
            let current = p.breakpoints();
            for b in &previous {
                assert!(
                    current.iter().any(|c| (c - b).abs() <= 1e-12),
                    "level {levels} lost breakpoint {b}"
                );
            }
            previous = current;
        }
    }

    #[test]
    fn markov_check_accepts_base_and_refinements() {
        let map = make_skewed_tent(0.3).unwrap();
        assert!(check_markov(&map, map.base_partition()).is_markov());
        let p = refine(&map, map.base_partition(), 3).unwrap();
        assert!(check_markov(&map, &p).is_markov());
    }

    #[test]
    fn markov_check_names_first_bad_cell() {
        // Uniform thirds against the x0 = 0.3 tent: the first cell straddles
        // the peak but its merged image is all of [0,1]; the middle cell's
        // image ends strictly inside a cell.
        let map = make_skewed_tent(0.3).unwrap();
        let p = IntervalPartition::from_breakpoints(&[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]).unwrap();
        let report = check_markov(&map, &p);
        let issue = report.violation.expect("not Markov");
        assert_eq!(issue.cell, 1);
    }

    #[test]
    fn transition_rejects_non_markov_partition() {
        let map = make_skewed_tent(0.3).unwrap();
        let p = IntervalPartition::from_breakpoints(&[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]).unwrap();
        match transition_matrix(&map, &p) {
            Err(Error::MarkovViolation { cell, .. }) => assert_eq!(cell, 1),
            other => panic!("expected Markov violation, got {other:?}"),
        }
    }

    #[test]
    fn rows_sum_to_one_after_refinement() {
        for x0 in [0.1, 0.35, 0.5, 0.77] {
            let map = make_skewed_tent(x0).unwrap();
            let p = refine(&map, map.base_partition(), 4).unwrap();
            let m = transition_matrix(&map, &p).unwrap();
            for s in m.row_sums() {
                assert!((s - 1.0).abs() <= ROW_SUM_TOL, "x0={x0}: row sum {s}");
            }
        }
    }

    #[test]
    fn punch_hole_zeroes_one_row() {
        let m = SubstochasticMatrix::new(2, vec![0.3, 0.7, 0.3, 0.7]).unwrap();
        let h = m.punch_hole(0).unwrap();
        assert_eq!(h.entries(), &[0.0, 0.0, 0.3, 0.7]);
        assert_eq!(h.hole_index(), Some(0));
        // Idempotent.
        assert_eq!(h.punch_hole(0).unwrap(), h);
        assert!(m.punch_hole(2).is_err());
    }

    #[test]
    fn punch_hole_on_cat_model() {
        let cat = make_cat_map_model();
        let t4 = cat.transition().punch_hole(4).unwrap();
        assert!(t4.row(4).iter().all(|e| *e == 0.0));
        for i in 0..4 {
            assert_eq!(t4.row(i), cat.transition().row(i));
        }
    }

    #[test]
    fn zero_rows_spans_a_group() {
        let cat = make_cat_map_model();
        let refined = cat.refine_pairs();
        let punched = refined.transition().zero_rows(cat.pair_rows_for_state(1)).unwrap();
        for r in 5..10 {
            assert!(punched.row(r).iter().all(|e| *e == 0.0));
        }
        assert_eq!(punched.hole_index(), None);
    }

    #[test]
    fn matrix_csv_has_full_precision() {
        let m = SubstochasticMatrix::new(2, vec![1.0 / 3.0, 2.0 / 3.0, 0.25, 0.5]).unwrap();
        let csv = m.to_csv();
        let mut parsed = Vec::new();
        for line in csv.lines() {
            for field in line.split(',') {
                parsed.push(field.parse::<f64>().unwrap());
            }
        }
        assert_eq!(parsed, m.entries());
    }

    #[test]
    fn matrix_rejects_bad_rows() {
        assert!(SubstochasticMatrix::new(2, vec![0.6, 0.6, 0.0, 0.0]).is_err());
        assert!(SubstochasticMatrix::new(2, vec![-0.1, 0.5, 0.0, 0.0]).is_err());
        assert!(SubstochasticMatrix::new(2, vec![0.5, 0.5]).is_err());
        assert!(SubstochasticMatrix::new(0, vec![]).is_err());
    }
}
