//! Service volumes and prices recovered from a solution, family maxima over
//! the solution set, and side-by-side comparison of two scenarios.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::assemble::LcpSystem;
use crate::index::{Family, Group, VarTag};
use crate::lcp::{Residuals, Tolerances};
use crate::model::{Location, ScenarioModel, ServiceKind};
use crate::polytope::{
    build_polytope, classify, is_unique_width, sweep, ComponentInterval, Objective, SolutionPolytope,
    TheoryViolation, UniquenessClass, UniquenessReport,
};

/// Affine expressions for one provider in one period.
#[derive(Clone, Debug, PartialEq)]
pub struct ServiceExpr {
    pub kind: ServiceKind,
    pub location: Location,
    pub period: String,
    /// Contracted volume: the usage-weighted sum of the flows drawing on the
    /// provider.
    pub volume: Objective,
    /// Marginal cost at the contracted volume.
    pub marginal_cost: Objective,
    /// Service price: marginal cost plus the per-period and annual
    /// capacity duals.
    pub price: Objective,
}

/// Builds the volume and price expressions of every provider-period.
pub fn service_expressions(sys: &LcpSystem, model: &ScenarioModel) -> Vec<ServiceExpr> {
    let idx = &sys.index;
    let q = idx.blocks().q.clone();
    idx.family_members(Family::Alpha)
        .map(|row| {
            let tag = idx.tag(row);
            let kind = tag.service.expect("capacity dual names its service");
            let location = tag.location.clone().expect("capacity dual names its location");
            let period = tag.period.clone().expect("per-period capacity dual");
            let provider = model
                .providers
                .iter()
                .find(|p| p.kind == kind && p.location == location)
                .expect("index built from this model");
            let weight = model
                .periods
                .iter()
                .find(|t| t.id == period)
                .map_or(1.0, |t| t.weight);
            let annual = idx
                .position(&VarTag::alpha(kind, location.clone(), None))
                .expect("annual dual exists for every provider");

            let volume_terms: Vec<(usize, f64)> = sys
                .m
                .row(row)
                .filter(|(j, _)| q.contains(j))
                .map(|(j, v)| (j, -v))
                .collect();
            let volume = Objective { terms: volume_terms.clone(), constant: 0.0 };
            let quac = if kind == ServiceKind::P { provider.quac(&period) } else { 0.0 };
            let marginal_cost = Objective {
                terms: if quac != 0.0 {
                    volume_terms.iter().map(|&(j, c)| (j, quac * c)).collect()
                } else {
                    Vec::new()
                },
                constant: provider.linc(&period),
            };
            let mut price = marginal_cost.clone();
            price.terms.push((row, 1.0));
            price.terms.push((annual, weight));
            ServiceExpr { kind, location, period, volume, marginal_cost, price }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ServiceRecord {
    pub kind: ServiceKind,
    pub location: Location,
    pub period: String,
    pub volume: f64,
    pub price: f64,
    pub marginal_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WholesalePrice {
    pub node: String,
    pub period: String,
    pub price: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveredMarket {
    pub services: Vec<ServiceRecord>,
    pub wholesale: Vec<WholesalePrice>,
}

/// Evaluates the service expressions and wholesale prices at `x`.
pub fn recover_services(x: &[f64], sys: &LcpSystem, model: &ScenarioModel) -> RecoveredMarket {
    let services = service_expressions(sys, model)
        .into_iter()
        .map(|e| ServiceRecord {
            volume: e.volume.eval(x),
            price: e.price.eval(x),
            marginal_cost: e.marginal_cost.eval(x),
            kind: e.kind,
            location: e.location,
            period: e.period,
        })
        .collect();
    let idx = &sys.index;
    let wholesale = idx
        .family_members(Family::LambdaC)
        .map(|i| {
            let tag = idx.tag(i);
            WholesalePrice {
                node: tag.n().unwrap_or_default().to_string(),
                period: tag.period.clone().unwrap_or_default(),
                price: x[i],
            }
        })
        .collect();
    RecoveredMarket { services, wholesale }
}

/// Range of a scalar over the solution set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Range {
    pub base: f64,
    pub min: f64,
    pub max: f64,
    pub unbounded: bool,
    pub unique: bool,
}

impl Range {
    pub fn width(&self) -> f64 {
        if self.unbounded {
            f64::INFINITY
        } else {
            self.max - self.min
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ServiceInterval {
    pub kind: ServiceKind,
    pub location: Location,
    pub period: String,
    pub volume: Range,
    pub price: Range,
}

impl ServiceInterval {
    pub fn label(&self) -> String {
        format!("{}[{},{}]", self.kind.letter(), self.location, self.period)
    }
}

fn range_of(poly: &SolutionPolytope<'_>, obj: &Objective, tol: &Tolerances) -> Result<Range, TheoryViolation> {
    let base = obj.eval(&poly.base);
    let e = poly.extremes(obj)?;
    let unbounded = e.unbounded_above || e.unbounded_below;
    Ok(Range {
        base,
        min: e.min,
        max: e.max,
        unbounded,
        unique: !unbounded && is_unique_width(e.width(), base, tol),
    })
}

/// Ranges of every service volume and price, each from its own pair of
/// linear programs.
pub fn service_intervals(
    poly: &SolutionPolytope<'_>,
    model: &ScenarioModel,
    tol: &Tolerances,
) -> Result<Vec<ServiceInterval>, TheoryViolation> {
    service_expressions(poly.sys, model)
        .into_iter()
        .map(|e| {
            Ok(ServiceInterval {
                volume: range_of(poly, &e.volume, tol)?,
                price: range_of(poly, &e.price, tol)?,
                kind: e.kind,
                location: e.location,
                period: e.period,
            })
        })
        .collect()
}

/// Reporting groups in display order.
pub const GROUPS: [&str; 11] = ["qP", "qI", "qX", "qA", "qB", "qC", "alpha", "phi", "lambdaC", "sZ", "lambdaZ"];

fn group_name(family: Family) -> &'static str {
    match family.group() {
        Group::Q => family.name(),
        Group::Alpha => "alpha",
        Group::Phi => "phi",
        Group::Lambda => "lambdaC",
    }
}

/// Largest spread within one reporting group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupMax {
    pub group: &'static str,
    pub members: usize,
    pub max_width: f64,
    /// Member attaining `max_width`; the smallest label among ties.
    pub attained_by: Option<String>,
    pub max_value: f64,
}

#[derive(Default)]
struct Acc {
    members: usize,
    width: f64,
    by: Option<String>,
    value: f64,
}

impl Acc {
    fn add(&mut self, label: String, width: f64, max: f64) {
        self.members += 1;
        let better = match &self.by {
            None => true,
            Some(cur) => width > self.width || (width == self.width && label < *cur),
        };
        if better {
            self.width = width;
            self.by = Some(label);
        }
        if self.members == 1 || max > self.value {
            self.value = max;
        }
    }
}

/// Maximum interval width, attaining member and maximum value for each of
/// the [`GROUPS`].
pub fn group_max_diff(
    tags: &[VarTag],
    intervals: &[ComponentInterval],
    services: &[ServiceInterval],
) -> Vec<GroupMax> {
    let mut acc: Vec<Acc> = GROUPS.iter().map(|_| Acc::default()).collect();
    let slot = |name: &str| GROUPS.iter().position(|g| *g == name).expect("known group");
    for iv in intervals {
        let tag = &tags[iv.index];
        let width = if iv.unbounded_above { f64::INFINITY } else { iv.width() };
        let max = if iv.unbounded_above { f64::INFINITY } else { iv.max };
        acc[slot(group_name(tag.family))].add(tag.to_string(), width, max);
    }
    for s in services {
        let max = |r: &Range| if r.unbounded { f64::INFINITY } else { r.max };
        acc[slot("sZ")].add(s.label(), s.volume.width(), max(&s.volume));
        acc[slot("lambdaZ")].add(s.label(), s.price.width(), max(&s.price));
    }
    GROUPS
        .iter()
        .zip(acc)
        .map(|(g, a)| GroupMax {
            group: g,
            members: a.members,
            max_width: a.width,
            attained_by: a.by,
            max_value: a.value,
        })
        .collect()
}

/// Everything known about one scenario's solution set.
#[derive(Clone, Debug, PartialEq)]
pub struct Exploration {
    pub scenario: String,
    pub tags: Vec<VarTag>,
    pub base: Vec<f64>,
    pub residuals: Residuals,
    pub intervals: Vec<ComponentInterval>,
    pub services: Vec<ServiceInterval>,
    pub uniqueness: UniquenessReport,
    pub groups: Vec<GroupMax>,
}

/// Bounds every component, service volume and service price over the
/// solution set through `base`, then checks the uniqueness statements.
pub fn explore(
    model: &ScenarioModel,
    sys: &LcpSystem,
    base: &[f64],
    tol: &Tolerances,
    jobs: usize,
) -> Result<Exploration, TheoryViolation> {
    let poly = build_polytope(sys, base, tol)?;
    let intervals = sweep(&poly, tol, jobs)?;
    let uniqueness = classify(&intervals, &poly, tol)?;
    let services = service_intervals(&poly, model, tol)?;
    let tags = sys.index.tags().to_vec();
    let groups = group_max_diff(&tags, &intervals, &services);
    Ok(Exploration {
        scenario: model.name.clone(),
        residuals: Residuals::of(sys, base),
        base: poly.base.clone(),
        tags,
        intervals,
        services,
        uniqueness,
        groups,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub tag: String,
    pub a_min: f64,
    pub a_max: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub a_class: UniquenessClass,
    pub b_class: UniquenessClass,
    /// The two intervals intersect. No direction of change is implied by
    /// either value of this flag.
    pub overlap: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioComparison {
    pub a: String,
    pub b: String,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ComparisonError {
    #[error("scenarios have different components: {only_a} only in the first, {only_b} only in the second (e.g. {example})")]
    IndexMismatch { only_a: usize, only_b: usize, example: String },
}

/// Pairs the intervals of two explorations component by component, in the
/// order of `a`.
pub fn compare_scenarios(
    a: &Exploration,
    b: &Exploration,
    tol: &Tolerances,
) -> Result<ScenarioComparison, ComparisonError> {
    let set_a: BTreeSet<&VarTag> = a.tags.iter().collect();
    let set_b: BTreeSet<&VarTag> = b.tags.iter().collect();
    if set_a != set_b {
        let only_a: Vec<_> = set_a.difference(&set_b).collect();
        let only_b: Vec<_> = set_b.difference(&set_a).collect();
        let example = only_a.first().or(only_b.first()).map(|t| t.to_string()).unwrap_or_default();
        return Err(ComparisonError::IndexMismatch { only_a: only_a.len(), only_b: only_b.len(), example });
    }
    let pos_b: std::collections::HashMap<&VarTag, usize> =
        b.tags.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let hi = |iv: &ComponentInterval| if iv.unbounded_above { f64::INFINITY } else { iv.max };
    let rows = a
        .tags
        .iter()
        .enumerate()
        .map(|(i, tag)| {
            let j = pos_b[tag];
            let (ia, ib) = (&a.intervals[i], &b.intervals[j]);
            let slack = tol.uniqueness * (1.0 + ia.base.abs().max(ib.base.abs()));
            ComparisonRow {
                tag: tag.to_string(),
                a_min: ia.min,
                a_max: hi(ia),
                b_min: ib.min,
                b_max: hi(ib),
                a_class: a.uniqueness.classes[i],
                b_class: b.uniqueness.classes[j],
                overlap: ia.min <= hi(ib) + slack && ib.min <= hi(ia) + slack,
            }
        })
        .collect();
    Ok(ScenarioComparison { a: a.scenario.clone(), b: b.scenario.clone(), rows })
}
