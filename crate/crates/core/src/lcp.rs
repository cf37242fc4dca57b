//! Lemke's complementary pivoting for `LCP(M, b)` with a positive
//! semidefinite `M`, followed by an exact re-solve on the final basis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assemble::LcpSystem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute bound on `max(-(Mx+b))` and `max(-x)`.
    pub feasibility: f64,
    /// Bound on `Σ|x_i (Mx+b)_i|` relative to `1 + ‖b‖∞`.
    pub complementarity: f64,
    /// Interval width, relative to `1 + |x̂_i|`, below which a component
    /// counts as unique.
    pub uniqueness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-9,
            complementarity: 1e-8,
            uniqueness: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Largest violation of `Mx + b ⪰ 0`.
    pub feasibility: f64,
    /// Largest violation of `x ⪰ 0`.
    pub nonnegativity: f64,
    /// `Σ|x_i (Mx+b)_i|`.
    pub gap: f64,
    /// `gap / (1 + ‖b‖∞)`.
    pub relative_gap: f64,
}

impl Residuals {
    pub fn of(sys: &LcpSystem, x: &[f64]) -> Residuals {
        let w = sys.slack(x);
        // `+ 0.0` turns a negative zero into a positive one.
        let feasibility = w.iter().fold(0.0f64, |a, v| a.max(-v)) + 0.0;
        let nonnegativity = x.iter().fold(0.0f64, |a, v| a.max(-v)) + 0.0;
        let gap: f64 = x.iter().zip(&w).map(|(a, b)| (a * b).abs()).sum();
        let bnorm = sys.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Residuals {
            feasibility,
            nonnegativity,
            gap,
            relative_gap: gap / (1.0 + bnorm),
        }
    }

    pub fn within(&self, tol: &Tolerances) -> bool {
        self.feasibility <= tol.feasibility
            && self.nonnegativity <= tol.feasibility
            && self.relative_gap <= tol.complementarity
    }

    fn merit(&self) -> f64 {
        self.feasibility.max(self.nonnegativity) + self.relative_gap
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub pivots: usize,
    pub refinement_steps: usize,
    /// Residual merit after pivoting and after each refinement step.
    pub merit_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub x: Vec<f64>,
    pub residuals: Residuals,
    pub trace: SolverTrace,
}

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("pivoting stopped on a secondary ray after {pivots} pivots")]
    Ray { pivots: usize },
    #[error("no solution within {0} pivots")]
    IterationLimit(usize),
    #[error("residuals {residuals:?} exceed tolerances after refinement (merit history {history:?})")]
    Conditioning { residuals: Residuals, history: Vec<f64> },
}

#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    /// Positive covering vector for the artificial variable; all ones when
    /// absent. Different vectors generally end at different solutions when
    /// the solution set is not a single point.
    pub covering: Option<Vec<f64>>,
    /// Pivot limit; `50·p + 100` when absent.
    pub max_pivots: Option<usize>,
}

const PIVOT_TOL: f64 = 1e-11;

/// Solves `LCP(M, b)` with the default covering vector.
pub fn solve(sys: &LcpSystem, tol: &Tolerances) -> Result<EquilibriumSolution, SolveError> {
    solve_with(sys, tol, &SolveOptions::default())
}

pub fn solve_with(
    sys: &LcpSystem,
    tol: &Tolerances,
    opts: &SolveOptions,
) -> Result<EquilibriumSolution, SolveError> {
    let p = sys.len();
    let dense = sys.m.to_dense();
    let (basic_x, pivots) = lemke(&dense, &sys.b, opts)?;

    let mut trace = SolverTrace { pivots, ..Default::default() };
    let mut x = vec![0.0; p];
    for (j, v) in &basic_x {
        x[*j] = *v;
    }
    let mut res = Residuals::of(sys, &x);
    trace.merit_history.push(res.merit());

    // Re-solve the complementary basis exactly; keep whichever is better.
    let active: Vec<usize> = basic_x.iter().map(|(j, _)| *j).collect();
    if let Some((y, steps)) = solve_active(&dense, &sys.b, &active) {
        let r = Residuals::of(sys, &y);
        trace.refinement_steps = steps;
        trace.merit_history.push(r.merit());
        if r.merit() <= res.merit() {
            x = y;
            res = r;
        }
    }
    // Round-off below zero is cleared when that keeps the residuals valid.
    if x.iter().any(|v| *v < 0.0 && *v >= -tol.feasibility) {
        let clamped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
        let r = Residuals::of(sys, &clamped);
        if r.within(tol) {
            x = clamped;
            res = r;
        }
    }
    if !res.within(tol) {
        return Err(SolveError::Conditioning { residuals: res, history: trace.merit_history });
    }
    Ok(EquilibriumSolution { x, residuals: res, trace })
}

/// Runs the pivoting and returns the basic `x` components with their values.
fn lemke(m: &[Vec<f64>], b: &[f64], opts: &SolveOptions) -> Result<(Vec<(usize, f64)>, usize), SolveError> {
    let p = b.len();
    if b.iter().all(|v| *v >= 0.0) {
        return Ok((Vec::new(), 0));
    }
    let d = match &opts.covering {
        Some(d) => {
            assert!(d.len() == p && d.iter().all(|v| *v > 0.0), "covering vector must be positive");
            d.clone()
        }
        None => vec![1.0; p],
    };
    let max_pivots = opts.max_pivots.unwrap_or(50 * p + 100);

    // Columns: w (0..p), x (p..2p), z0 (2p), rhs (2p+1).
    let width = 2 * p + 2;
    let z0 = 2 * p;
    let rhs = 2 * p + 1;
    let mut t = vec![0.0; p * width];
    for i in 0..p {
        let row = &mut t[i * width..(i + 1) * width];
        row[i] = 1.0;
        for j in 0..p {
            row[p + j] = -m[i][j];
        }
        row[z0] = -d[i];
        row[rhs] = b[i];
    }
    let mut basis: Vec<usize> = (0..p).collect();

    let first = (0..p)
        .min_by(|&i, &k| (b[i] / d[i]).total_cmp(&(b[k] / d[k])).then(i.cmp(&k)))
        .unwrap();
    pivot(&mut t, width, p, first, z0);
    let mut leaving = basis[first];
    basis[first] = z0;

    let mut pivots = 1;
    loop {
        let entering = if leaving < p { leaving + p } else { leaving - p };
        let Some(r) = ratio_test(&t, width, p, entering, &basis, z0) else {
            return Err(SolveError::Ray { pivots });
        };
        pivot(&mut t, width, p, r, entering);
        leaving = basis[r];
        basis[r] = entering;
        pivots += 1;
        if leaving == z0 {
            break;
        }
        if pivots >= max_pivots {
            return Err(SolveError::IterationLimit(pivots));
        }
    }

    let basic_x = basis
        .iter()
        .enumerate()
        .filter(|(_, &v)| (p..2 * p).contains(&v))
        .map(|(i, &v)| (v - p, t[i * width + rhs]))
        .collect();
    Ok((basic_x, pivots))
}

/// Lexicographic minimum ratio test; the artificial leaves whenever it ties
/// for the minimum, remaining ties go to the smallest row.
fn ratio_test(t: &[f64], width: usize, p: usize, e: usize, basis: &[usize], z0: usize) -> Option<usize> {
    let rhs = width - 1;
    let col_max = (0..p).map(|i| t[i * width + e].abs()).fold(0.0, f64::max);
    let eps = PIVOT_TOL * col_max.max(1.0);
    let rows: Vec<usize> = (0..p).filter(|&i| t[i * width + e] > eps).collect();
    if rows.is_empty() {
        return None;
    }
    let ratio = |i: usize| t[i * width + rhs] / t[i * width + e];
    let min = rows.iter().map(|&i| ratio(i)).fold(f64::INFINITY, f64::min);
    let slack = 1e-12 * (1.0 + min.abs());
    let mut ties: Vec<usize> = rows.into_iter().filter(|&i| ratio(i) <= min + slack).collect();
    if let Some(&r) = ties.iter().find(|&&i| basis[i] == z0) {
        return Some(r);
    }
    // Columns of the w block hold the inverse of the current basis.
    for j in 0..p {
        if ties.len() == 1 {
            break;
        }
        let lex = |i: usize| t[i * width + j] / t[i * width + e];
        let best = ties.iter().map(|&i| lex(i)).fold(f64::INFINITY, f64::min);
        let s = 1e-12 * (1.0 + best.abs());
        ties.retain(|&i| lex(i) <= best + s);
    }
    ties.into_iter().min()
}

fn pivot(t: &mut [f64], width: usize, p: usize, r: usize, e: usize) {
    let piv = t[r * width + e];
    for v in &mut t[r * width..(r + 1) * width] {
        *v /= piv;
    }
    let prow: Vec<f64> = t[r * width..(r + 1) * width].to_vec();
    for i in 0..p {
        if i == r {
            continue;
        }
        let f = t[i * width + e];
        if f == 0.0 {
            continue;
        }
        let row = &mut t[i * width..(i + 1) * width];
        for (v, pv) in row.iter_mut().zip(&prow) {
            *v -= f * pv;
        }
        row[e] = 0.0;
    }
}

/// Solves `M_AA x_A = -b_A`, `x_rest = 0` with two steps of iterative
/// refinement. `None` when `M_AA` is singular.
fn solve_active(m: &[Vec<f64>], b: &[f64], active: &[usize]) -> Option<(Vec<f64>, usize)> {
    let p = b.len();
    let k = active.len();
    let mut x = vec![0.0; p];
    if k == 0 {
        return Some((x, 0));
    }
    let a = DMatrix::from_fn(k, k, |i, j| m[active[i]][active[j]]);
    let lu = a.clone().lu();
    let rhs = DVector::from_fn(k, |i, _| -b[active[i]]);
    let mut y = lu.solve(&rhs)?;
    if y.iter().any(|v| !v.is_finite()) {
        return None;
    }
    // Reject numerically singular blocks: the solve must reproduce the rhs.
    let scale = 1.0 + rhs.amax() + a.amax() * y.amax();
    let mut steps = 0;
    for _ in 0..2 {
        let r = &rhs - &a * &y;
        if r.amax() <= 1e-15 * scale {
            break;
        }
        y += lu.solve(&r)?;
        steps += 1;
    }
    if (&rhs - &a * &y).amax() > 1e-9 * scale {
        return None;
    }
    for (i, &j) in active.iter().enumerate() {
        x[j] = y[i];
    }
    Some((x, steps))
}

/// Result of [`refine`].
#[derive(Clone, Debug, PartialEq)]
pub struct Refined {
    pub solution: EquilibriumSolution,
    /// Set when the input was returned unchanged for a reason other than
    /// already being exact.
    pub warning: Option<String>,
}

/// Polishes `x` by solving the equations of its active set
/// `{i : x_i > (Mx+b)_i}` exactly. Residuals never increase: when the
/// active block is singular or the solve does not improve on `x`, the input
/// is returned with a warning.
pub fn refine(sys: &LcpSystem, x: &[f64]) -> Refined {
    let before = Residuals::of(sys, x);
    let unchanged = |warning: Option<String>| Refined {
        solution: EquilibriumSolution {
            x: x.to_vec(),
            residuals: before,
            trace: SolverTrace::default(),
        },
        warning,
    };
    if before.merit() == 0.0 {
        return unchanged(None);
    }
    let w = sys.slack(x);
    let active: Vec<usize> = (0..x.len()).filter(|&i| x[i] > w[i]).collect();
    let dense = sys.m.to_dense();
    let Some((y, steps)) = solve_active(&dense, &sys.b, &active) else {
        return unchanged(Some(format!(
            "active set of {} components is singular; solution left unchanged",
            active.len()
        )));
    };
    let after = Residuals::of(sys, &y);
    if after.merit() >= before.merit() {
        return unchanged(Some("active-set solve did not reduce residuals; solution left unchanged".into()));
    }
    Refined {
        solution: EquilibriumSolution {
            x: y,
            residuals: after,
            trace: SolverTrace {
                pivots: 0,
                refinement_steps: steps,
                merit_history: vec![before.merit(), after.merit()],
            },
        },
        warning: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::assemble;
    use crate::index::build_index;
    use crate::scenarios;
    use approx::assert_abs_diff_eq;

    fn system(theta: f64) -> LcpSystem {
        let model = scenarios::monopoly(10.0, -1.0, 2.0, 1.0, theta);
        assemble(&model, &build_index(&model)).unwrap()
    }

    #[test]
    fn monopoly_closed_form() {
        let s = solve(&system(1.0), &Tolerances::default()).unwrap();
        assert_abs_diff_eq!(s.x[0], 8.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 8.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[5], 22.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn competitive_closed_form() {
        let s = solve(&system(0.0), &Tolerances::default()).unwrap();
        assert_abs_diff_eq!(s.x[1], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[5], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn nonnegative_constant_gives_zero() {
        let mut sys = system(1.0);
        for v in &mut sys.b {
            *v = v.abs();
        }
        let s = solve(&sys, &Tolerances::default()).unwrap();
        assert!(s.x.iter().all(|v| *v == 0.0));
        assert_eq!(s.trace.pivots, 0);
    }

    #[test]
    fn refine_keeps_exact_and_repairs_perturbed() {
        let sys = system(1.0);
        let s = solve(&sys, &Tolerances::default()).unwrap();
        let r = refine(&sys, &s.x);
        for (a, b) in r.solution.x.iter().zip(&s.x) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let mut x = s.x.clone();
        for (i, v) in x.iter_mut().enumerate() {
            if s.x[i] == 0.0 {
                *v += 1e-6;
            }
        }
        let r = refine(&sys, &x);
        assert!(r.warning.is_none());
        assert!(r.solution.residuals.merit() < 1e-10);
    }

    #[test]
    fn covering_vector_changes_nothing_for_unique_solution() {
        let sys = system(0.5);
        let a = solve(&sys, &Tolerances::default()).unwrap();
        let opts = SolveOptions { covering: Some(vec![3.0, 0.5, 1.0, 2.0, 7.0, 1.5]), max_pivots: None };
        let b = solve_with(&sys, &Tolerances::default(), &opts).unwrap();
        for (u, v) in a.x.iter().zip(&b.x) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-10);
        }
    }
}
