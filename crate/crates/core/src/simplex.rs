//! Dense two-phase primal simplex for
//! `min cᵀy  s.t.  a_i·y ≥ r_i, e_k·y = s_k, y ⪰ 0`.
//!
//! Phase one runs once; every subsequent objective starts from the last
//! optimal basis. Entering columns are chosen by most negative reduced cost,
//! switching to Bland's rule while pivots stay degenerate. Artificial
//! columns never re-enter but are kept in the tableau, where together with
//! the initial slack columns they hold the basis inverse.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Clone, Debug, Default)]
pub struct Constraints {
    pub vars: usize,
    /// `a·y ≥ r`, with `a` sparse.
    pub ge: Vec<(Vec<(usize, f64)>, f64)>,
    /// `a·y = r`.
    pub eq: Vec<(Vec<(usize, f64)>, f64)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("constraints are infeasible (phase-one objective {0:e})")]
    Infeasible(f64),
    #[error("pivot limit {0} reached")]
    PivotLimit(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal {
        value: f64,
        y: Vec<f64>,
        /// Largest negative reduced cost at the final basis.
        dual_infeasibility: f64,
        pivots: usize,
    },
    /// The objective decreases without bound along `direction`.
    Unbounded { direction: Vec<f64>, pivots: usize },
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 30;

#[derive(Clone, Debug)]
pub struct Simplex {
    m: usize,
    vars: usize,
    /// Columns: y, surplus, artificial.
    cols: usize,
    artificial_from: usize,
    /// Original constraint matrix, rows sign-normalized so `rhs ⪰ 0`.
    a: Vec<f64>,
    h: Vec<f64>,
    /// Current tableau `B⁻¹[A | h]`, row-major with `cols + 1` entries per row.
    t: Vec<f64>,
    basis: Vec<usize>,
    scale: f64,
}

impl Simplex {
    /// Sets up the tableau and finds a feasible basis.
    pub fn new(c: &Constraints) -> Result<Simplex, LpError> {
        let m = c.ge.len() + c.eq.len();
        let n = c.vars;
        let n_surplus = c.ge.len();
        // Row i: a·y - s_i = r (ge) or a·y = r (eq); flip so rhs ≥ 0.
        let mut rows: Vec<(Vec<f64>, f64, Option<usize>)> = Vec::with_capacity(m);
        for (k, (coef, r)) in c.ge.iter().enumerate() {
            let mut row = vec![0.0; n + n_surplus];
            for &(j, v) in coef {
                row[j] += v;
            }
            row[n + k] = -1.0;
            rows.push((row, *r, Some(n + k)));
        }
        for (coef, r) in &c.eq {
            let mut row = vec![0.0; n + n_surplus];
            for &(j, v) in coef {
                row[j] += v;
            }
            rows.push((row, *r, None));
        }
        let mut needs_artificial = Vec::new();
        let mut basis = vec![usize::MAX; m];
        for (i, (row, r, surplus)) in rows.iter_mut().enumerate() {
            if *r < 0.0 || (*r == 0.0 && surplus.is_some()) {
                row.iter_mut().for_each(|v| *v = -*v);
                *r = -*r;
            }
            match surplus {
                Some(s) if row[*s] == 1.0 => basis[i] = *s,
                _ => needs_artificial.push(i),
            }
        }
        let artificial_from = n + n_surplus;
        let cols = artificial_from + needs_artificial.len();
        let width = cols + 1;
        let mut a = vec![0.0; m * cols];
        let mut h = vec![0.0; m];
        for (i, (row, r, _)) in rows.iter().enumerate() {
            a[i * cols..i * cols + row.len()].copy_from_slice(row);
            h[i] = *r;
        }
        for (k, &i) in needs_artificial.iter().enumerate() {
            a[i * cols + artificial_from + k] = 1.0;
            basis[i] = artificial_from + k;
        }
        let mut t = vec![0.0; m * width];
        for i in 0..m {
            t[i * width..i * width + cols].copy_from_slice(&a[i * cols..(i + 1) * cols]);
            t[i * width + cols] = h[i];
        }
        let scale = a.iter().chain(&h).fold(1.0f64, |s, v| s.max(v.abs()));
        let mut lp = Simplex { m, vars: n, cols, artificial_from, a, h, t, basis, scale };

        if !needs_artificial.is_empty() {
            let mut cost = vec![0.0; cols];
            for c in cost.iter_mut().skip(artificial_from) {
                *c = 1.0;
            }
            match lp.run(&cost, true)? {
                Run::Optimal { value, .. } if value <= 1e-9 * lp.scale => {}
                Run::Optimal { value, .. } => return Err(LpError::Infeasible(value)),
                Run::Unbounded { .. } => unreachable!("phase one is bounded below"),
            }
            lp.drive_out_artificials();
        }
        Ok(lp)
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    /// Minimizes `objective·y` (sparse) starting from the current basis.
    pub fn minimize(&mut self, objective: &[(usize, f64)]) -> Result<LpOutcome, LpError> {
        let mut cost = vec![0.0; self.cols];
        for &(j, v) in objective {
            cost[j] += v;
        }
        match self.run(&cost, false)? {
            Run::Unbounded { column, pivots } => {
                let width = self.cols + 1;
                let mut direction = vec![0.0; self.vars];
                if column < self.vars {
                    direction[column] = 1.0;
                }
                for i in 0..self.m {
                    let b = self.basis[i];
                    if b < self.vars {
                        direction[b] = -self.t[i * width + column];
                    }
                }
                Ok(LpOutcome::Unbounded { direction, pivots })
            }
            Run::Optimal { pivots, .. } => {
                let y_basic = self.polish();
                let mut y = vec![0.0; self.vars];
                for (i, &b) in self.basis.iter().enumerate() {
                    if b < self.vars {
                        y[b] = y_basic[i].max(0.0);
                    }
                }
                let value = objective.iter().map(|&(j, v)| v * y[j]).sum();
                let dual_infeasibility = self.dual_infeasibility(&cost);
                Ok(LpOutcome::Optimal { value, y, dual_infeasibility, pivots })
            }
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let width = self.cols + 1;
        let mut d = cost.to_vec();
        d.push(0.0);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * width..(i + 1) * width];
                for (dj, tj) in d.iter_mut().zip(row) {
                    *dj -= cb * tj;
                }
            }
        }
        d
    }

    fn dual_infeasibility(&self, cost: &[f64]) -> f64 {
        let d = self.reduced_costs(cost);
        let mut in_basis = vec![false; self.cols];
        for &b in &self.basis {
            in_basis[b] = true;
        }
        (0..self.artificial_from)
            .filter(|&j| !in_basis[j])
            .fold(0.0f64, |a, j| a.max(-d[j]))
    }

    fn run(&mut self, cost: &[f64], phase_one: bool) -> Result<Run, LpError> {
        let width = self.cols + 1;
        let rhs = self.cols;
        let mut d = self.reduced_costs(cost);
        let limit = 50 * (self.m + self.cols) + 1000;
        let allowed = if phase_one { self.cols } else { self.artificial_from };
        let mut pivots = 0;
        let mut streak = 0;
        loop {
            let cost_tol = COST_TOL * (1.0 + cost.iter().fold(0.0f64, |a, v| a.max(v.abs())));
            let entering = if streak < DEGENERATE_STREAK {
                (0..allowed)
                    .filter(|&j| d[j] < -cost_tol)
                    .min_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)))
            } else {
                (0..allowed).find(|&j| d[j] < -cost_tol)
            };
            let Some(e) = entering else {
                return Ok(Run::Optimal { value: -d[rhs], pivots });
            };
            let col_max = (0..self.m).fold(0.0f64, |a, i| a.max(self.t[i * width + e].abs()));
            let tol = PIVOT_TOL * col_max.max(1.0);
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let v = self.t[i * width + e];
                if v > tol {
                    let ratio = self.t[i * width + rhs].max(0.0) / v;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((k, r)) => {
                            let tie = (ratio - r).abs() <= 1e-12 * (1.0 + r.abs());
                            if ratio < r && !tie || tie && self.basis[i] < self.basis[k] {
                                Some((i, ratio))
                            } else {
                                Some((k, r))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = best else {
                return Ok(Run::Unbounded { column: e, pivots });
            };
            streak = if ratio <= 1e-12 { streak + 1 } else { 0 };
            self.pivot(r, e, &mut d);
            pivots += 1;
            if pivots > limit {
                return Err(LpError::PivotLimit(limit));
            }
        }
    }

    fn pivot(&mut self, r: usize, e: usize, d: &mut [f64]) {
        let width = self.cols + 1;
        let piv = self.t[r * width + e];
        for v in &mut self.t[r * width..(r + 1) * width] {
            *v /= piv;
        }
        let prow = self.t[r * width..(r + 1) * width].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * width + e];
            if f != 0.0 {
                for (v, p) in self.t[i * width..(i + 1) * width].iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                self.t[i * width + e] = 0.0;
            }
        }
        let f = d[e];
        for (v, p) in d.iter_mut().zip(&prow) {
            *v -= f * p;
        }
        d[e] = 0.0;
        self.basis[r] = e;
    }

    /// Replaces basic artificials by structural columns where possible; the
    /// rest sit on redundant rows at value zero.
    fn drive_out_artificials(&mut self) {
        let width = self.cols + 1;
        let mut dummy = vec![0.0; width];
        for i in 0..self.m {
            if self.basis[i] < self.artificial_from {
                continue;
            }
            let row = &self.t[i * width..i * width + self.artificial_from];
            let pick = (0..self.artificial_from)
                .filter(|&j| row[j].abs() > PIVOT_TOL * self.scale)
                .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()).then(b.cmp(&a)));
            if let Some(j) = pick {
                self.pivot(i, j, &mut dummy);
            } else {
                self.t[i * width + self.cols] = 0.0;
            }
        }
    }

    /// Re-solves `B y_B = h` from the original data with one refinement
    /// step; refreshes the whole tableau when it has drifted.
    fn polish(&mut self) -> Vec<f64> {
        let width = self.cols + 1;
        let m = self.m;
        let cols = self.cols;
        let b = DMatrix::from_fn(m, m, |i, k| self.a[i * cols + self.basis[k]]);
        let lu = b.clone().lu();
        let h = DVector::from_column_slice(&self.h);
        let Some(mut y) = lu.solve(&h) else {
            return (0..m).map(|i| self.t[i * width + cols]).collect();
        };
        if let Some(dy) = lu.solve(&(&h - &b * &y)) {
            y += dy;
        }
        let drift = (0..m).fold(0.0f64, |a, i| a.max((y[i] - self.t[i * width + cols]).abs()));
        if drift > 1e-9 * (1.0 + y.amax()) {
            let a = DMatrix::from_fn(m, cols, |i, j| self.a[i * cols + j]);
            if let Some(t) = lu.solve(&a) {
                for i in 0..m {
                    for j in 0..cols {
                        self.t[i * width + j] = t[(i, j)];
                    }
                }
            }
        }
        for i in 0..m {
            self.t[i * width + cols] = y[i];
        }
        y.iter().copied().collect()
    }
}

enum Run {
    Optimal { value: f64, pivots: usize },
    Unbounded { column: usize, pivots: usize },
}
