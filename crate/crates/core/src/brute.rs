//! Exhaustive enumeration of the solution set's vertices for tiny systems.
//!
//! Every vertex of the solution set is a vertex of `{x ⪰ 0, Mx + b ⪰ 0}`
//! satisfying complementarity, so it solves a system that picks, for each
//! `i`, either `x_i = 0` or `(Mx + b)_i = 0`. The search walks these
//! choices depth first, abandons a branch as soon as the chosen equations
//! become linearly dependent, and keeps the feasible leaves.

use thiserror::Error;

use crate::assemble::LcpSystem;

pub const DEFAULT_LIMIT: usize = 20;

#[derive(Debug, Error, PartialEq)]
#[error("system has {size} components; exhaustive enumeration is limited to {limit}")]
pub struct TooLarge {
    pub size: usize,
    pub limit: usize,
}

/// All distinct vertices, sorted lexicographically. Feasibility is checked
/// to `feas_tol` absolute.
pub fn enumerate_bruteforce(sys: &LcpSystem, feas_tol: f64) -> Result<Vec<Vec<f64>>, TooLarge> {
    enumerate_with_limit(sys, feas_tol, DEFAULT_LIMIT)
}

pub fn enumerate_with_limit(sys: &LcpSystem, feas_tol: f64, limit: usize) -> Result<Vec<Vec<f64>>, TooLarge> {
    let p = sys.len();
    if p > limit {
        return Err(TooLarge { size: p, limit });
    }
    let m = sys.m.to_dense();
    let scale = m.iter().flatten().chain(&sys.b).fold(1.0f64, |a, v| a.max(v.abs()));
    let mut search = Search {
        p,
        m: &m,
        b: &sys.b,
        dep_tol: 1e-10 * scale,
        feas_tol,
        found: Vec::new(),
    };
    search.descend(0, Echelon { rows: Vec::new() });

    let mut found = search.found;
    found.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut unique: Vec<Vec<f64>> = Vec::new();
    for v in found {
        let dup = unique.iter().any(|u| {
            u.iter()
                .zip(&v)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())))
        });
        if !dup {
            unique.push(v);
        }
    }
    Ok(unique)
}

/// Reduced row echelon form; each row is `(pivot column, coefficients, rhs)`
/// with a unit pivot that is zero in every other row.
#[derive(Clone)]
struct Echelon {
    rows: Vec<(usize, Vec<f64>, f64)>,
}

struct Search<'a> {
    p: usize,
    m: &'a [Vec<f64>],
    b: &'a [f64],
    dep_tol: f64,
    feas_tol: f64,
    found: Vec<Vec<f64>>,
}

impl Search<'_> {
    fn descend(&mut self, i: usize, ech: Echelon) {
        if i == self.p {
            self.leaf(&ech);
            return;
        }
        let mut unit = vec![0.0; self.p];
        unit[i] = 1.0;
        // x_i = 0
        if let Some(next) = self.add(&ech, unit, 0.0) {
            self.descend(i + 1, next);
        }
        // (Mx + b)_i = 0
        if let Some(next) = self.add(&ech, self.m[i].clone(), -self.b[i]) {
            self.descend(i + 1, next);
        }
    }

    fn add(&self, ech: &Echelon, mut row: Vec<f64>, mut rhs: f64) -> Option<Echelon> {
        for (pc, r, h) in &ech.rows {
            let f = row[*pc];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(r) {
                    *a -= f * b;
                }
                rhs -= f * h;
                row[*pc] = 0.0;
            }
        }
        let (pc, &pv) = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))?;
        if pv.abs() <= self.dep_tol {
            return None;
        }
        row.iter_mut().for_each(|v| *v /= pv);
        rhs /= pv;
        row[pc] = 1.0;
        let mut next = ech.clone();
        for (_, r, h) in &mut next.rows {
            let f = r[pc];
            if f != 0.0 {
                for (a, b) in r.iter_mut().zip(&row) {
                    *a -= f * b;
                }
                *h -= f * rhs;
                r[pc] = 0.0;
            }
        }
        next.rows.push((pc, row, rhs));
        Some(next)
    }

    fn leaf(&mut self, ech: &Echelon) {
        let mut x = vec![0.0; self.p];
        for (pc, _, h) in &ech.rows {
            x[*pc] = *h;
        }
        if x.iter().any(|v| *v < -self.feas_tol) {
            return;
        }
        for i in 0..self.p {
            let w: f64 = self.m[i].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + self.b[i];
            if w < -self.feas_tol {
                return;
            }
        }
        for v in &mut x {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        self.found.push(x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::assemble;
    use crate::index::build_index;
    use crate::scenarios;
    use approx::assert_abs_diff_eq;

    #[test]
    fn monopoly_has_one_vertex() {
        let model = scenarios::monopoly(10.0, -1.0, 2.0, 1.0, 1.0);
        let sys = assemble(&model, &build_index(&model)).unwrap();
        let v = enumerate_bruteforce(&sys, 1e-9).unwrap();
        assert_eq!(v.len(), 1);
        assert_abs_diff_eq!(v[0][1], 8.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[0][5], 22.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn refuses_large_systems() {
        let model = scenarios::two_markets(0.0);
        let sys = assemble(&model, &build_index(&model)).unwrap();
        assert_eq!(
            enumerate_bruteforce(&sys, 1e-9).unwrap_err(),
            TooLarge { size: 24, limit: 20 }
        );
    }
}
