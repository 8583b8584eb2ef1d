//! Leading eigenvalue and eigenvector of substochastic matrices, plus
//! structural diagnostics of the underlying directed chain.
//!
//! The eigenvector convention is the left one: row vectors evolve by
//! v ← v·M, so for a stochastic matrix the result is the stationary
//! distribution. Escape problems only punch rows, which keeps the leading
//! eigenvalue equal to the survival factor per iteration.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::transition::SubstochasticMatrix;

/// Default residual tolerance for eigensolves.
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-12;

/// Iteration budget before the power method hands over to the dense path.
pub const MAX_POWER_ITERATIONS: usize = 1_000_000;

/// The power method reviews progress at this interval; a residual that has
/// not at least halved since the previous review signals a tied or
/// defective leading eigenvalue and routes to the dense path.
const STAGNATION_CHECK_INTERVAL: usize = 500;

/// Iterate mass below this counts as total escape (leading eigenvalue 0).
const COLLAPSE_MASS: f64 = 1e-300;

/// A dense-solve eigenvalue counts as real when |Im| is at most this.
const REAL_EIG_IMAG_TOL: f64 = 1e-8;

/// Communicating classes whose leading roots agree to this are treated as
/// exactly tied when the eigenvector support is chosen. Kept near machine
/// precision: genuinely distinct-but-close roots must not merge.
const TIE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralResult {
    pub eigenvalue: f64,
    /// Left eigenvector, entries >= 0, normalized to sum 1.
    pub eigenvector: Vec<f64>,
    pub iterations: usize,
    /// Max-norm of v·M − λv for the returned pair.
    pub residual: f64,
    pub used_dense_fallback: bool,
}

/// Irreducibility and periodicity of the recurrent part of the chain:
/// the states that lie on some cycle of the support graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChainStructure {
    /// True when the recurrent states form a single communicating class.
    pub strongly_connected: bool,
    /// Gcd of cycle lengths over the recurrent part; 1 when no cycles.
    pub period: usize,
}

struct SparseRows {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    fn build(m: &SubstochasticMatrix) -> Self {
        let rows = (0..m.order())
            .map(|i| {
                m.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| **e != 0.0)
                    .map(|(j, e)| (j, *e))
                    .collect()
            })
            .collect();
        SparseRows { rows }
    }

    fn left_multiply(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (vi, row) in v.iter().zip(&self.rows) {
            if *vi == 0.0 {
                continue;
            }
            for &(j, e) in row {
                out[j] += vi * e;
            }
        }
    }
}

fn max_abs_diff(w: &[f64], v: &[f64], scale: f64) -> f64 {
    w.iter()
        .zip(v)
        .fold(0.0f64, |r, (wj, vj)| r.max((wj - scale * vj).abs()))
}

/// Spectral radius and left Perron eigenvector of a substochastic matrix.
///
/// Power iteration from the uniform vector, renormalized to sum 1 each
/// step; the sum of the unnormalized iterate estimates the eigenvalue and
/// the max-norm residual decides convergence. Iterate collapse means the
/// matrix is nilpotent and the eigenvalue is 0. Stagnating residuals are
/// handed to [`dense_leading`], which resolves tied and defective leading
/// eigenvalues that the plain iteration cannot.
pub fn leading_eigenvalue(m: &SubstochasticMatrix, tol: f64) -> Result<SpectralResult> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let k = m.order();
    let sparse = SparseRows::build(m);
    let mut v = vec![1.0 / k as f64; k];
    let mut w = vec![0.0; k];
    let mut checkpoint = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=MAX_POWER_ITERATIONS {
        iterations = it;
        sparse.left_multiply(&v, &mut w);
        let mass: f64 = w.iter().sum();
        if mass < COLLAPSE_MASS {
            let residual = w.iter().fold(0.0f64, |r, x| r.max(x.abs()));
            return Ok(SpectralResult {
                eigenvalue: 0.0,
                eigenvector: v,
                iterations: it,
                residual,
                used_dense_fallback: false,
            });
        }
        let residual = max_abs_diff(&w, &v, mass);
        if residual <= tol {
            return Ok(SpectralResult {
                eigenvalue: mass,
                eigenvector: v,
                iterations: it,
                residual,
                used_dense_fallback: false,
            });
        }
        for (vj, wj) in v.iter_mut().zip(&w) {
            *vj = wj / mass;
        }
        if it % STAGNATION_CHECK_INTERVAL == 0 {
            if residual > 0.5 * checkpoint {
                break;
            }
            checkpoint = residual;
        }
    }
    dense_leading(m, &sparse, tol, iterations)
}

/// Leading eigenvalue by a dense full-spectrum solve: the largest real
/// nonnegative eigenvalue of the matrix. Exposed as a cross-check; when
/// the leading eigenvalue is shared or defective this value carries the
/// sqrt(eps)-level error inherent to the QR algorithm, which is why
/// [`leading_eigenvalue`] refines it through the communicating classes.
pub fn dense_spectrum_leading(m: &SubstochasticMatrix) -> f64 {
    let k = m.order();
    let a = DMatrix::from_row_slice(k, k, m.entries());
    let mut lambda = 0.0f64;
    for z in a.complex_eigenvalues().iter() {
        if z.im.abs() <= REAL_EIG_IMAG_TOL && z.re > lambda {
            lambda = z.re;
        }
    }
    lambda
}

/// Resolves the cases power iteration cannot: the spectral radius equals
/// the largest Perron root over the cyclic communicating classes, each of
/// which is irreducible and therefore has a simple root reachable by a
/// shifted power iteration. The eigenvector is rebuilt from the most
/// downstream class attaining the radius, propagating through the class
/// DAG; classes that do not attain it get solvable linear systems because
/// their own roots stay strictly below the radius.
fn dense_leading(
    m: &SubstochasticMatrix,
    sparse: &SparseRows,
    tol: f64,
    prior_iterations: usize,
) -> Result<SpectralResult> {
    let k = m.order();
    let comps = strongly_connected_components(&sparse.rows);
    let cyclic: Vec<usize> = (0..comps.len())
        .filter(|&c| is_cyclic(&comps[c], m))
        .collect();
    if cyclic.is_empty() {
        return collapse_walk(m, sparse, prior_iterations);
    }

    let mut iterations = prior_iterations;
    let block_tol = (tol * 0.1).max(1e-15);
    let mut roots: Vec<(usize, f64, Vec<f64>)> = Vec::with_capacity(cyclic.len());
    let mut lambda = 0.0f64;
    for &c in &cyclic {
        let (root, vector, iters) = block_perron(sparse, &comps[c], block_tol)
            .map_err(|_| Error::Convergence { iterations, residual: f64::INFINITY })?;
        iterations += iters;
        lambda = lambda.max(root);
        roots.push((c, root, vector));
    }

    // Components are emitted sinks first, so the smallest component index
    // among the tied maximizers is the most downstream one: no other
    // maximizer is reachable from it.
    let (base_comp, _, base_vector) = roots
        .iter()
        .filter(|(_, root, _)| *root >= lambda - TIE_TOL)
        .min_by_key(|(c, _, _)| *c)
        .expect("at least one cyclic class");

    let mut v = vec![0.0; k];
    let mut w = vec![0.0; k];
    for (&state, &value) in comps[*base_comp].iter().zip(base_vector) {
        v[state] = value;
    }
    for ci in (0..comps.len()).rev() {
        if ci == *base_comp {
            continue;
        }
        let comp = &comps[ci];
        // Inflow from already assigned states; same-class states still
        // hold zero and drop out of the product.
        sparse.left_multiply(&v, &mut w);
        let inflow: Vec<f64> = comp.iter().map(|&j| w[j]).collect();
        if inflow.iter().all(|b| *b == 0.0) {
            continue;
        }
        let n = comp.len();
        let mut a = DMatrix::zeros(n, n);
        for (r, &i) in comp.iter().enumerate() {
            for (cidx, &j) in comp.iter().enumerate() {
                // (λI − B)ᵀ, B the restriction of m to this class.
                a[(cidx, r)] = -m.get(i, j).unwrap();
            }
        }
        for d in 0..n {
            a[(d, d)] += lambda;
        }
        let rhs = DVector::from_vec(inflow);
        let Some(x) = a.lu().solve(&rhs) else {
            return Err(Error::Convergence { iterations, residual: f64::INFINITY });
        };
        for (idx, &j) in comp.iter().enumerate() {
            v[j] = x[idx].max(0.0);
        }
    }

    let total: f64 = v.iter().sum();
    for e in &mut v {
        *e /= total;
    }
    sparse.left_multiply(&v, &mut w);
    let residual = max_abs_diff(&w, &v, lambda);
    if residual <= tol {
        Ok(SpectralResult {
            eigenvalue: lambda,
            eigenvector: v,
            iterations,
            residual,
            used_dense_fallback: true,
        })
    } else {
        Err(Error::Convergence { iterations, residual })
    }
}

/// Perron root and left eigenvector of one irreducible class, by power
/// iteration on the class plus the identity; the added self-loops make
/// the class aperiodic, so convergence is geometric even for periodic
/// classes, and the eigenvectors are unchanged.
fn block_perron(
    sparse: &SparseRows,
    states: &[usize],
    tol: f64,
) -> Result<(f64, Vec<f64>, usize)> {
    let n = states.len();
    let mut local = vec![usize::MAX; sparse.rows.len()];
    for (idx, &s) in states.iter().enumerate() {
        local[s] = idx;
    }
    let rows: Vec<Vec<(usize, f64)>> = states
        .iter()
        .map(|&s| {
            sparse.rows[s]
                .iter()
                .filter(|(j, _)| local[*j] != usize::MAX)
                .map(|&(j, e)| (local[j], e))
                .collect()
        })
        .collect();
    let mut v = vec![1.0 / n as f64; n];
    let mut w = vec![0.0; n];
    let mut last_residual = f64::INFINITY;
    for it in 1..=MAX_POWER_ITERATIONS {
        w.fill(0.0);
        for (vi, row) in v.iter().zip(&rows) {
            for &(j, e) in row {
                w[j] += vi * e;
            }
        }
        let root: f64 = w.iter().sum();
        last_residual = max_abs_diff(&w, &v, root);
        if last_residual <= tol {
            return Ok((root, v, it));
        }
        let mass = root + 1.0;
        for (vj, wj) in v.iter_mut().zip(&w) {
            *vj = (*wj + *vj) / mass;
        }
    }
    Err(Error::Convergence { iterations: MAX_POWER_ITERATIONS, residual: last_residual })
}

/// Nilpotent path: no state lies on a cycle, so the iterate dies within
/// `order` steps and the last surviving direction is reported with
/// eigenvalue 0.
fn collapse_walk(
    m: &SubstochasticMatrix,
    sparse: &SparseRows,
    prior_iterations: usize,
) -> Result<SpectralResult> {
    let k = m.order();
    let mut v = vec![1.0 / k as f64; k];
    let mut w = vec![0.0; k];
    for it in 1..=k + 1 {
        sparse.left_multiply(&v, &mut w);
        let mass: f64 = w.iter().sum();
        if mass < COLLAPSE_MASS {
            let residual = w.iter().fold(0.0f64, |r, x| r.max(x.abs()));
            return Ok(SpectralResult {
                eigenvalue: 0.0,
                eigenvector: v,
                iterations: prior_iterations + it,
                residual,
                used_dense_fallback: true,
            });
        }
        for (vj, wj) in v.iter_mut().zip(&w) {
            *vj = wj / mass;
        }
    }
    Err(Error::Convergence { iterations: prior_iterations + k + 1, residual: f64::INFINITY })
}

/// Strongly connected components of the support graph, emitted with every
/// edge pointing from a later component to an earlier one (sinks first).
fn strongly_connected_components(rows: &[Vec<(usize, f64)>]) -> Vec<Vec<usize>> {
    let n = rows.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut next_index = 0usize;
    let mut frames: Vec<(usize, usize)> = Vec::new();

    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        index[start] = next_index;
        low[start] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start] = true;
        frames.push((start, 0));
        while let Some(frame) = frames.last().copied() {
            let (u, cursor) = frame;
            if cursor < rows[u].len() {
                frames.last_mut().unwrap().1 += 1;
                let t = rows[u][cursor].0;
                if index[t] == usize::MAX {
                    index[t] = next_index;
                    low[t] = next_index;
                    next_index += 1;
                    stack.push(t);
                    on_stack[t] = true;
                    frames.push((t, 0));
                } else if on_stack[t] {
                    low[u] = low[u].min(index[t]);
                }
            } else {
                frames.pop();
                if let Some(&(p, _)) = frames.last() {
                    low[p] = low[p].min(low[u]);
                }
                if low[u] == index[u] {
                    let mut comp = Vec::new();
                    loop {
                        let s = stack.pop().expect("component stack");
                        on_stack[s] = false;
                        comp.push(s);
                        if s == u {
                            break;
                        }
                    }
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

fn is_cyclic(comp: &[usize], m: &SubstochasticMatrix) -> bool {
    comp.len() > 1 || m.get(comp[0], comp[0]).unwrap() > 0.0
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Gcd of cycle lengths within one cyclic class, by breadth-first levels:
/// every edge u→v contributes level(u) + 1 − level(v), and every cycle
/// contains an edge with a nonzero contribution.
fn class_period(comp: &[usize], rows: &[Vec<(usize, f64)>]) -> usize {
    let n = rows.len();
    let mut member = vec![false; n];
    for &s in comp {
        member[s] = true;
    }
    let mut level = vec![i64::MIN; n];
    let mut queue = std::collections::VecDeque::new();
    level[comp[0]] = 0;
    queue.push_back(comp[0]);
    while let Some(u) = queue.pop_front() {
        for &(t, _) in &rows[u] {
            if member[t] && level[t] == i64::MIN {
                level[t] = level[u] + 1;
                queue.push_back(t);
            }
        }
    }
    let mut g: usize = 0;
    for &u in comp {
        for &(t, _) in &rows[u] {
            if member[t] {
                let diff = (level[u] + 1 - level[t]).unsigned_abs() as usize;
                g = gcd(g, diff);
            }
        }
    }
    g.max(1)
}

/// Irreducibility and periodicity of the recurrent part of the support
/// graph: the union of classes that contain a cycle. Transient states are
/// ignored, so a chain whose only recurrence is one communicating class
/// reports as strongly connected even when feeder states exist.
pub fn chain_structure(m: &SubstochasticMatrix) -> ChainStructure {
    let sparse = SparseRows::build(m);
    let comps = strongly_connected_components(&sparse.rows);
    let mut cyclic_count = 0;
    let mut period: usize = 0;
    for comp in &comps {
        if !is_cyclic(comp, m) {
            continue;
        }
        cyclic_count += 1;
        period = gcd(period, class_period(comp, &sparse.rows));
    }
    ChainStructure {
        strongly_connected: cyclic_count == 1,
        period: period.max(1),
    }
}
