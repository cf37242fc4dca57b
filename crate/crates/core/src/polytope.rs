//! The set of all equilibria and per-component bounds over it.
//!
//! For positive semidefinite `M` and any solution `x̂`, the solution set is
//! the polyhedron
//!
//! ```text
//! S = { x ⪰ 0 : Mx + b ⪰ 0, bᵀ(x − x̂) = 0, (M + Mᵀ)(x − x̂) = 0 }.
//! ```
//!
//! Because `M + Mᵀ` is diagonal here, the last condition fixes every
//! component with `M_ii > 0` at `x̂_i`. Those components are substituted
//! out and linear programs range over the remaining ones.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::assemble::LcpSystem;
use crate::index::Family;
use crate::lcp::{Residuals, Tolerances};
use crate::simplex::{Constraints, LpError, LpOutcome, Simplex};

#[derive(Debug, Error, PartialEq)]
pub enum PolytopeError {
    #[error("base point is not a solution within tolerance: {0:?}")]
    NotASolution(Residuals),
    #[error("base point violates its own solution set: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// A linear function `constant + Σ coef·x_i` over the solution set.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Objective {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Objective {
    pub fn component(i: usize) -> Self {
        Objective { terms: vec![(i, 1.0)], constant: 0.0 }
    }

    pub fn sum(indices: impl IntoIterator<Item = usize>) -> Self {
        Objective { terms: indices.into_iter().map(|i| (i, 1.0)).collect(), constant: 0.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }
}

#[derive(Clone, Debug)]
pub struct SolutionPolytope<'a> {
    pub sys: &'a LcpSystem,
    pub base: Vec<f64>,
    /// Components fixed by the diagonal of `M + Mᵀ`.
    pub pinned: Vec<bool>,
    free: Vec<usize>,
    free_pos: Vec<Option<usize>>,
    lp: Simplex,
}

/// Describes the solution set through `base`.
pub fn build_polytope<'a>(
    sys: &'a LcpSystem,
    base: &[f64],
    tol: &Tolerances,
) -> Result<SolutionPolytope<'a>, PolytopeError> {
    let res = Residuals::of(sys, base);
    if !res.within(tol) {
        return Err(PolytopeError::NotASolution(res));
    }
    let p = sys.len();
    let pinned: Vec<bool> = (0..p).map(|i| sys.m.diag(i) > 0.0).collect();
    let free: Vec<usize> = (0..p).filter(|&i| !pinned[i]).collect();
    let mut free_pos = vec![None; p];
    for (k, &i) in free.iter().enumerate() {
        free_pos[i] = Some(k);
    }

    let mut cons = Constraints { vars: free.len(), ..Default::default() };
    for r in 0..p {
        let mut coef = Vec::new();
        let mut constant = sys.b[r];
        for (c, v) in sys.m.row(r) {
            match free_pos[c] {
                Some(k) => coef.push((k, v)),
                None => constant += v * base[c],
            }
        }
        if coef.is_empty() {
            if constant < -tol.feasibility {
                return Err(PolytopeError::Inconsistent(format!(
                    "row {} is {constant:e} with all its components fixed",
                    sys.index.tag(r)
                )));
            }
            continue;
        }
        cons.ge.push((coef, -constant));
    }
    let eq: Vec<(usize, f64)> = free
        .iter()
        .enumerate()
        .filter(|(_, &i)| sys.b[i] != 0.0)
        .map(|(k, &i)| (k, sys.b[i]))
        .collect();
    if !eq.is_empty() {
        let rhs = free.iter().map(|&i| sys.b[i] * base[i]).sum();
        cons.eq.push((eq, rhs));
    }
    let lp = Simplex::new(&cons).map_err(|e| match e {
        LpError::Infeasible(v) => PolytopeError::Inconsistent(format!("phase one ended at {v:e}")),
        other => PolytopeError::Lp(other),
    })?;
    Ok(SolutionPolytope { sys, base: base.to_vec(), pinned, free, free_pos, lp })
}

/// Minimum and maximum of an objective over the solution set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Extremes {
    pub min: f64,
    pub max: f64,
    pub min_witness: Vec<f64>,
    pub max_witness: Vec<f64>,
    pub unbounded_above: bool,
    pub unbounded_below: bool,
    /// Largest dual infeasibility of the two optimal bases.
    pub dual_infeasibility: f64,
}

impl Extremes {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

struct Bound {
    value: f64,
    witness: Vec<f64>,
    unbounded: bool,
    dual_infeasibility: f64,
}

impl SolutionPolytope<'_> {
    pub fn free_count(&self) -> usize {
        self.free.len()
    }

    fn lift(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            x[i] = y[k];
        }
        x
    }

    fn restrict(&self, obj: &Objective, sign: f64) -> (Vec<(usize, f64)>, f64) {
        let mut terms = Vec::new();
        let mut constant = obj.constant;
        for &(i, c) in &obj.terms {
            match self.free_pos[i] {
                Some(k) => terms.push((k, sign * c)),
                None => constant += c * self.base[i],
            }
        }
        (terms, constant)
    }

    /// Minimizes `sign · obj` from the current basis of `lp`.
    fn bound(&self, lp: &mut Simplex, obj: &Objective, sign: f64) -> Result<Bound, PolytopeError> {
        let (terms, constant) = self.restrict(obj, sign);
        if terms.is_empty() {
            return Ok(Bound {
                value: constant,
                witness: self.base.clone(),
                unbounded: false,
                dual_infeasibility: 0.0,
            });
        }
        Ok(match lp.minimize(&terms)? {
            LpOutcome::Optimal { y, dual_infeasibility, .. } => {
                let witness = self.lift(&y);
                Bound { value: obj.eval(&witness), witness, unbounded: false, dual_infeasibility }
            }
            LpOutcome::Unbounded { .. } => Bound {
                value: -sign * f64::INFINITY,
                witness: self.base.clone(),
                unbounded: true,
                dual_infeasibility: 0.0,
            },
        })
    }

    /// Range of `obj` over the solution set (two linear programs).
    pub fn extremes(&self, obj: &Objective) -> Result<Extremes, PolytopeError> {
        let mut lp = self.lp.clone();
        let lo = self.bound(&mut lp, obj, 1.0)?;
        let hi = self.bound(&mut lp, obj, -1.0)?;
        Ok(Extremes {
            min: lo.value,
            max: hi.value,
            min_witness: lo.witness,
            max_witness: hi.witness,
            unbounded_below: lo.unbounded,
            unbounded_above: hi.unbounded,
            dual_infeasibility: lo.dual_infeasibility.max(hi.dual_infeasibility),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum UniquenessClass {
    /// `M_ii > 0`: fixed in every solution.
    PredictedUnique,
    EmpiricallyUnique,
    Ambiguous,
}

impl UniquenessClass {
    pub fn label(self) -> &'static str {
        match self {
            UniquenessClass::PredictedUnique => "predicted-unique",
            UniquenessClass::EmpiricallyUnique => "empirically-unique",
            UniquenessClass::Ambiguous => "ambiguous",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentInterval {
    pub index: usize,
    pub base: f64,
    pub min: f64,
    pub max: f64,
    pub min_witness: Vec<f64>,
    pub max_witness: Vec<f64>,
    pub unbounded_above: bool,
    pub class: UniquenessClass,
    pub dual_infeasibility: f64,
}

impl ComponentInterval {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

/// `true` when `width` is within the relative uniqueness tolerance.
pub fn is_unique_width(width: f64, reference: f64, tol: &Tolerances) -> bool {
    width <= tol.uniqueness * (1.0 + reference.abs())
}

fn class_of(pinned: bool, width: f64, base: f64, tol: &Tolerances) -> UniquenessClass {
    if pinned {
        UniquenessClass::PredictedUnique
    } else if is_unique_width(width, base, tol) {
        UniquenessClass::EmpiricallyUnique
    } else {
        UniquenessClass::Ambiguous
    }
}

/// Minimum and maximum of every component. Fixed components are reported
/// at their base value without solving. `jobs` worker threads share the
/// linear programs in contiguous blocks (0 means one per core); results
/// come back in index order and depend only on `jobs`.
pub fn sweep(
    poly: &SolutionPolytope<'_>,
    tol: &Tolerances,
    jobs: usize,
) -> Result<Vec<ComponentInterval>, PolytopeError> {
    let p = poly.base.len();
    let jobs = if jobs == 0 { rayon::current_num_threads().max(1) } else { jobs };
    let free = &poly.free;
    let chunk = free.len().div_ceil(jobs).max(1);
    let blocks: Vec<&[usize]> = free.chunks(chunk).collect();

    let run_block = |block: &[usize]| -> Result<Vec<(Bound, Bound)>, PolytopeError> {
        let mut lp = poly.lp.clone();
        block
            .iter()
            .map(|&i| {
                let obj = Objective::component(i);
                Ok((poly.bound(&mut lp, &obj, 1.0)?, poly.bound(&mut lp, &obj, -1.0)?))
            })
            .collect()
    };
    let results: Vec<Result<Vec<(Bound, Bound)>, PolytopeError>> = if jobs == 1 {
        blocks.iter().map(|b| run_block(b)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| blocks.par_iter().map(|b| run_block(b)).collect())
    };

    let mut bounds: Vec<Option<(Bound, Bound)>> = (0..p).map(|_| None).collect();
    for (block, res) in blocks.iter().zip(results) {
        for (&i, pair) in block.iter().zip(res?) {
            bounds[i] = Some(pair);
        }
    }

    Ok((0..p)
        .map(|i| {
            let base = poly.base[i];
            match bounds[i].take() {
                None => ComponentInterval {
                    index: i,
                    base,
                    min: base,
                    max: base,
                    min_witness: poly.base.clone(),
                    max_witness: poly.base.clone(),
                    unbounded_above: false,
                    class: UniquenessClass::PredictedUnique,
                    dual_infeasibility: 0.0,
                },
                Some((lo, hi)) => {
                    let width = hi.value - lo.value;
                    ComponentInterval {
                        index: i,
                        base,
                        min: lo.value,
                        max: hi.value,
                        min_witness: lo.witness,
                        max_witness: hi.witness,
                        unbounded_above: hi.unbounded,
                        class: class_of(false, width, base, tol),
                        dual_infeasibility: lo.dual_infeasibility.max(hi.dual_infeasibility),
                    }
                }
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AggregateKind {
    /// Total sales in a market and period.
    TotalSales,
    /// Total sales of price-taking traders in a market and period.
    CompetitiveSales,
    /// Sales of the only trader present in a market and period.
    SoleTrader,
    /// Sales of a trader with a single market and period, lossless networks.
    SingleMarketTrader,
    /// Wholesale price.
    Price,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateCheck {
    pub kind: AggregateKind,
    pub label: String,
    pub base: f64,
    pub min: f64,
    pub max: f64,
    pub unique: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub classes: Vec<UniquenessClass>,
    pub predicted: usize,
    pub empirical: usize,
    pub ambiguous: usize,
    pub aggregates: Vec<AggregateCheck>,
}

impl UniquenessReport {
    pub fn violations(&self) -> impl Iterator<Item = &AggregateCheck> {
        self.aggregates.iter().filter(|a| !a.unique)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TheoryViolation {
    #[error("component {tag} should be unique but ranges over [{min}, {max}]")]
    Component { tag: String, min: f64, max: f64 },
    #[error("{label} should be unique but ranges over [{min}, {max}]")]
    Aggregate { label: String, min: f64, max: f64 },
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
}

/// Interval of an aggregate taken from component intervals: exact for a
/// single component, otherwise computed by linear programs.
fn aggregate_range(
    poly: &SolutionPolytope<'_>,
    intervals: &[ComponentInterval],
    members: &[usize],
) -> Result<(f64, f64, f64), PolytopeError> {
    let base: f64 = members.iter().map(|&i| poly.base[i]).sum();
    if let [i] = members {
        return Ok((base, intervals[*i].min, intervals[*i].max));
    }
    let e = poly.extremes(&Objective::sum(members.iter().copied()))?;
    Ok((base, e.min, if e.unbounded_above { f64::INFINITY } else { e.max }))
}

/// Labels every component and checks the uniqueness statements that follow
/// from the structure of `M`: each component with `M_ii > 0` is unique;
/// per market and period the total sales, the total sales of price-taking
/// traders, the sales of a sole trader and the price are unique; in
/// lossless networks a trader selling in a single market and period has
/// unique sales. Any breach is a [`TheoryViolation`].
pub fn classify(
    intervals: &[ComponentInterval],
    poly: &SolutionPolytope<'_>,
    tol: &Tolerances,
) -> Result<UniquenessReport, TheoryViolation> {
    let sys = poly.sys;
    let idx = &sys.index;
    let mut classes = Vec::with_capacity(intervals.len());
    for iv in intervals {
        let pinned = sys.m.diag(iv.index) > 0.0;
        let class = class_of(pinned, iv.width(), iv.base, tol);
        if pinned && (iv.unbounded_above || !is_unique_width(iv.width(), iv.base, tol)) {
            return Err(TheoryViolation::Component {
                tag: idx.tag(iv.index).to_string(),
                min: iv.min,
                max: iv.max,
            });
        }
        classes.push(class);
    }

    // Sales grouped by market and period, in index order.
    let mut markets: Vec<((String, String), Vec<usize>)> = Vec::new();
    for i in idx.family_members(Family::QC) {
        let t = idx.tag(i);
        let key = (t.n().unwrap().to_string(), t.period.clone().unwrap_or_default());
        match markets.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(i),
            None => markets.push((key, vec![i])),
        }
    }

    let mut aggregates = Vec::new();
    let mut check = |kind, label: String, members: &[usize]| -> Result<(), PolytopeError> {
        let (base, min, max) = aggregate_range(poly, intervals, members)?;
        let unique = min.is_finite() && max.is_finite() && is_unique_width(max - min, base, tol);
        aggregates.push(AggregateCheck { kind, label, base, min, max, unique });
        Ok(())
    };
    for ((n, t), members) in &markets {
        check(AggregateKind::TotalSales, format!("total sales in {n}, {t}"), members)?;
        let competitive: Vec<usize> = members.iter().copied().filter(|&i| sys.m.diag(i) == 0.0).collect();
        if !competitive.is_empty() && competitive.len() < members.len() {
            check(
                AggregateKind::CompetitiveSales,
                format!("price-taking sales in {n}, {t}"),
                &competitive,
            )?;
        }
        if let [only] = members.as_slice() {
            check(AggregateKind::SoleTrader, format!("sole trader sales {}", idx.tag(*only)), members)?;
        }
    }
    if sys.lossless {
        let traders: std::collections::BTreeSet<String> = idx
            .family_members(Family::QP)
            .filter_map(|i| idx.tag(i).trader.clone())
            .collect();
        for trader in traders {
            let sales: Vec<usize> = idx
                .family_members(Family::QC)
                .filter(|&i| idx.tag(i).trader.as_deref() == Some(trader.as_str()))
                .collect();
            if let [only] = sales.as_slice() {
                check(
                    AggregateKind::SingleMarketTrader,
                    format!("single-market trader sales {}", idx.tag(*only)),
                    &sales,
                )?;
            }
        }
    }
    for i in idx.family_members(Family::LambdaC) {
        check(AggregateKind::Price, format!("price {}", idx.tag(i)), &[i])?;
    }

    if let Some(bad) = aggregates.iter().find(|a| !a.unique) {
        return Err(TheoryViolation::Aggregate { label: bad.label.clone(), min: bad.min, max: bad.max });
    }
    let count = |c| classes.iter().filter(|x| **x == c).count();
    Ok(UniquenessReport {
        predicted: count(UniquenessClass::PredictedUnique),
        empirical: count(UniquenessClass::EmpiricallyUnique),
        ambiguous: count(UniquenessClass::Ambiguous),
        classes,
        aggregates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::assemble;
    use crate::index::build_index;
    use crate::lcp::solve;
    use crate::scenarios;
    use crate::model::ScenarioModel;

    fn system(model: &ScenarioModel) -> LcpSystem {
        assemble(model, &build_index(model)).unwrap()
    }

    #[test]
    fn monopoly_set_is_a_point() {
        let sys = system(&scenarios::monopoly(10.0, -1.0, 2.0, 1.0, 1.0));
        let tol = Tolerances::default();
        let x = solve(&sys, &tol).unwrap().x;
        let poly = build_polytope(&sys, &x, &tol).unwrap();
        let iv = sweep(&poly, &tol, 1).unwrap();
        assert!(iv.iter().all(|c| c.width().abs() <= 1e-12));
        let report = classify(&iv, &poly, &tol).unwrap();
        assert_eq!(report.ambiguous, 0);
    }

    #[test]
    fn price_takers_split_sales_freely() {
        // Both markets clear at 4 units and price 6 with free transport, so
        // each trader's sales anywhere range over [0, 4].
        let sys = system(&scenarios::two_markets(0.0));
        let tol = Tolerances::default();
        let x = solve(&sys, &tol).unwrap().x;
        let poly = build_polytope(&sys, &x, &tol).unwrap();
        let iv = sweep(&poly, &tol, 2).unwrap();
        let report = classify(&iv, &poly, &tol).unwrap();
        for i in sys.index.family_members(Family::QC) {
            assert!((iv[i].min - 0.0).abs() < 1e-9 && (iv[i].max - 4.0).abs() < 1e-9, "{:?}", iv[i]);
            assert_eq!(report.classes[i], UniquenessClass::Ambiguous);
        }
        for i in sys.index.family_members(Family::LambdaC) {
            assert!((iv[i].min - 6.0).abs() < 1e-9 && iv[i].width() < 1e-12);
        }
        let totals: Vec<_> = report.aggregates.iter().filter(|a| a.kind == AggregateKind::TotalSales).collect();
        assert_eq!(totals.len(), 2);
        assert!(totals.iter().all(|a| a.unique && (a.base - 4.0).abs() < 1e-9));
    }

    #[test]
    fn witnesses_are_equilibria() {
        let sys = system(&scenarios::hub_market(0.0));
        let tol = Tolerances::default();
        let x = solve(&sys, &tol).unwrap().x;
        let poly = build_polytope(&sys, &x, &tol).unwrap();
        for iv in sweep(&poly, &tol, 1).unwrap() {
            for w in [&iv.min_witness, &iv.max_witness] {
                assert!(Residuals::of(&sys, w).within(&tol));
            }
            assert!((iv.min_witness[iv.index] - iv.min).abs() < 1e-12);
        }
    }

    #[test]
    fn thread_count_does_not_change_intervals() {
        let sys = system(&scenarios::hub_market(0.01));
        let tol = Tolerances::default();
        let x = solve(&sys, &tol).unwrap().x;
        let poly = build_polytope(&sys, &x, &tol).unwrap();
        let one = sweep(&poly, &tol, 1).unwrap();
        let again = sweep(&poly, &tol, 1).unwrap();
        assert_eq!(one, again);
        for jobs in [2, 5] {
            for (a, b) in one.iter().zip(sweep(&poly, &tol, jobs).unwrap()) {
                assert!((a.min - b.min).abs() < 1e-9 && (a.max - b.max).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn non_solutions_are_refused() {
        let sys = system(&scenarios::monopoly(10.0, -1.0, 2.0, 1.0, 1.0));
        let zero = vec![0.0; sys.len()];
        assert!(matches!(
            build_polytope(&sys, &zero, &Tolerances::default()),
            Err(PolytopeError::NotASolution(_))
        ));
    }

    #[test]
    fn widths_are_judged_relative_to_the_value() {
        let tol = Tolerances::default();
        assert!(is_unique_width(1e-7, 0.0, &tol));
        assert!(!is_unique_width(2e-6, 0.0, &tol));
        assert!(is_unique_width(5e-4, 1000.0, &tol));
    }
}
