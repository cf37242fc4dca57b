use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{
    calibrate_demand, ArcKind, Demand, FlowKind, Location, ScenarioModel, ServiceKind,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Entity path, e.g. `traders[F1].theta[n2,winter]`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Collects every admissibility violation of `model`. An empty report means
/// the model can be assembled.
pub fn validate_scenario(model: &ScenarioModel) -> ValidationReport {
    let mut r = ValidationReport::default();
    check_periods(model, &mut r);
    check_nodes_and_arcs(model, &mut r);
    check_traders(model, &mut r);
    check_providers(model, &mut r);
    check_demand(model, &mut r);
    check_bounds(model, &mut r);
    r
}

fn check_periods(model: &ScenarioModel, r: &mut ValidationReport) {
    if model.periods.is_empty() {
        r.push("periods", "at least one period is required");
    }
    let mut seen = BTreeSet::new();
    for p in &model.periods {
        if !seen.insert(p.id.as_str()) {
            r.push(format!("periods[{}]", p.id), "duplicate period id");
        }
        if !(p.weight > 0.0 && p.weight.is_finite()) {
            r.push(format!("periods[{}].weight", p.id), "weight must be positive");
        }
    }
}

fn check_nodes_and_arcs(model: &ScenarioModel, r: &mut ValidationReport) {
    let mut seen = BTreeSet::new();
    for n in &model.nodes {
        if n.id.is_empty() {
            r.push("nodes", "empty node id");
        }
        if !seen.insert(n.id.as_str()) {
            r.push(format!("nodes[{}]", n.id), "duplicate node id");
        }
    }
    let mut arcs = BTreeSet::new();
    for a in &model.arcs {
        let path = format!("arcs[{}>{}]", a.from, a.to);
        if a.from == a.to {
            r.push(&path, "arc endpoints must differ");
        }
        for end in [&a.from, &a.to] {
            if model.node(end).is_none() {
                r.push(&path, format!("unknown node {end}"));
            }
        }
        if !arcs.insert((a.from.as_str(), a.to.as_str(), a.kind)) {
            r.push(&path, "duplicate arc");
        }
        if a.kind == ArcKind::Ship {
            if model.node(&a.from).is_some_and(|n| !n.has_liquefaction) {
                r.push(&path, "shipping arc starts at a node without liquefaction");
            }
            if model.node(&a.to).is_some_and(|n| !n.has_regasification) {
                r.push(&path, "shipping arc ends at a node without regasification");
            }
        }
    }
}

fn check_traders(model: &ScenarioModel, r: &mut ValidationReport) {
    let mut ids = BTreeSet::new();
    let mut homes = BTreeSet::new();
    let periods: BTreeSet<&str> = model.period_ids().collect();
    for t in &model.traders {
        let path = format!("traders[{}]", t.id);
        if !ids.insert(t.id.as_str()) {
            r.push(&path, "duplicate trader id");
        }
        match model.node(&t.home) {
            None => r.push(format!("{path}.home"), format!("unknown node {}", t.home)),
            Some(n) if !n.has_producer => {
                r.push(format!("{path}.home"), "home node has no producer")
            }
            Some(_) => {}
        }
        if !homes.insert(t.home.as_str()) {
            r.push(
                format!("{path}.home"),
                "another trader already draws on this producer; each producer serves one trader",
            );
        }
        for n in &t.reachable {
            if model.node(n).is_none() {
                r.push(format!("{path}.reachable"), format!("unknown node {n}"));
            }
        }
        let connected = model.connected_from_home(t);
        for n in t.nodes() {
            if model.node(&n).is_some() && !connected.contains(&n) {
                r.push(
                    format!("{path}.reachable[{n}]"),
                    "node is not connected to the home node through arcs",
                );
            }
        }
        let mut thetas = vec![(format!("{path}.theta_default"), t.theta_default)];
        for ((n, p), v) in &t.theta {
            let tp = format!("{path}.theta[{n},{p}]");
            if !t.operates_in(n) {
                r.push(&tp, "trader does not operate in this node");
            }
            if !periods.contains(p.as_str()) {
                r.push(&tp, format!("unknown period {p}"));
            }
            thetas.push((tp, *v));
        }
        for (tp, v) in thetas {
            if v > 1.0 {
                r.push(tp, "cartelization excluded: market-power weight must not exceed 1");
            } else if !(v >= 0.0) {
                r.push(tp, "market-power weight must lie in [0, 1]");
            }
        }
    }
}

fn facility_flag(model: &ScenarioModel, kind: ServiceKind, node: &str) -> Option<bool> {
    let n = model.node(node)?;
    Some(match kind {
        ServiceKind::P => n.has_producer,
        ServiceKind::I | ServiceKind::X => n.has_storage,
        ServiceKind::L => n.has_liquefaction,
        ServiceKind::R => n.has_regasification,
        ServiceKind::A | ServiceKind::B => false,
    })
}

fn check_providers(model: &ScenarioModel, r: &mut ValidationReport) {
    let mut seen = BTreeSet::new();
    for p in &model.providers {
        let path = format!("providers[{}@{}]", p.kind, p.location);
        if !seen.insert((p.kind, p.location.clone())) {
            r.push(&path, "duplicate provider");
        }
        match (&p.location, p.kind.is_arc_service()) {
            (Location::Node(n), false) => match facility_flag(model, p.kind, n) {
                None => r.push(&path, format!("unknown node {n}")),
                Some(false) => r.push(&path, "node does not declare this facility"),
                Some(true) => {}
            },
            (Location::Arc(a, b), true) => {
                let kind = if p.kind == ServiceKind::A {
                    ArcKind::Pipeline
                } else {
                    ArcKind::Ship
                };
                if !model.has_arc(a, b, kind) {
                    r.push(&path, "no matching arc");
                }
            }
            _ => r.push(&path, "service kind does not match location type"),
        }
        for period in model.period_ids() {
            let pp = format!("{path}[{period}]");
            match p.cap_per_period.get(period) {
                Some(c) if *c > 0.0 && c.is_finite() => {}
                Some(_) => r.push(&pp, "capacity per period must be positive"),
                None => r.push(&pp, "missing capacity for period"),
            }
            let linc = p.linc(period);
            if !(linc >= 0.0) {
                r.push(&pp, "linear cost must be non-negative");
            }
            let quac = p.quac(period);
            if p.kind == ServiceKind::P {
                if !(quac > 0.0) {
                    r.push(&pp, "production needs a strictly positive quadratic cost");
                }
            } else if quac != 0.0 {
                r.push(&pp, "only production may carry a quadratic cost");
            }
        }
        for key in p.cap_per_period.keys().chain(p.lin_cost.keys()).chain(p.quad_cost.keys()) {
            if !model.periods.iter().any(|q| &q.id == key) {
                r.push(&path, format!("unknown period {key}"));
            }
        }
        if !(p.cap_total > 0.0 && p.cap_total.is_finite()) {
            r.push(&path, "total capacity must be positive");
        }
        if !(p.loss_factor > 0.0 && p.loss_factor <= 1.0) {
            r.push(&path, "loss factor must lie in (0, 1]");
        } else if matches!(p.kind, ServiceKind::P | ServiceKind::X) && p.loss_factor != 1.0 {
            r.push(&path, "loss factor does not apply to this service; use 1");
        }
    }
    // Every declared facility and arc needs its provider.
    for n in &model.nodes {
        for kind in [ServiceKind::P, ServiceKind::I, ServiceKind::X, ServiceKind::L, ServiceKind::R] {
            if facility_flag(model, kind, &n.id) == Some(true) && model.provider_at(kind, &n.id).is_none()
            {
                r.push(format!("nodes[{}]", n.id), format!("declared facility lacks a {kind} provider"));
            }
        }
    }
    for a in &model.arcs {
        let kind = match a.kind {
            ArcKind::Pipeline => ServiceKind::A,
            ArcKind::Ship => ServiceKind::B,
        };
        if model
            .provider(kind, &Location::Arc(a.from.clone(), a.to.clone()))
            .is_none()
        {
            r.push(format!("arcs[{}>{}]", a.from, a.to), format!("arc lacks a {kind} provider"));
        }
    }
}

fn check_demand(model: &ScenarioModel, r: &mut ValidationReport) {
    for ((node, period), d) in &model.demand {
        let path = format!("demand[{node},{period}]");
        match model.node(node) {
            None => r.push(&path, format!("unknown node {node}")),
            Some(n) if !n.has_consumer => r.push(&path, "node has no consumer"),
            Some(_) => {}
        }
        if !model.periods.iter().any(|p| &p.id == period) {
            r.push(&path, format!("unknown period {period}"));
        }
        match d {
            Demand::Curve(c) => {
                if !(c.slope < 0.0) {
                    r.push(&path, "slope must be strictly negative");
                }
                if !(c.intercept >= 0.0) {
                    r.push(&path, "intercept must be non-negative");
                }
            }
            Demand::Reference(rf) => {
                if rf.elasticity.as_array().iter().any(|e| !(*e < 0.0)) {
                    r.push(&path, "sector elasticities must be strictly negative");
                }
                if let Err(e) = calibrate_demand(rf) {
                    r.push(&path, e.to_string());
                }
            }
        }
    }
    for n in model.nodes.iter().filter(|n| n.has_consumer) {
        for period in model.period_ids() {
            if !model.demand.contains_key(&(n.id.clone(), period.to_string())) {
                r.push(format!("demand[{},{period}]", n.id), "consumer node lacks demand");
            }
        }
    }
}

fn check_bounds(model: &ScenarioModel, r: &mut ValidationReport) {
    let mut seen = BTreeSet::new();
    for b in &model.bounds {
        let path = format!(
            "bounds[{},{},{},{}]",
            b.trader,
            b.flow.letter(),
            b.location,
            b.period
        );
        if !seen.insert((b.trader.clone(), b.flow, b.location.clone(), b.period.clone())) {
            r.push(&path, "duplicate bound");
        }
        let Some(t) = model.trader(&b.trader) else {
            r.push(&path, format!("unknown trader {}", b.trader));
            continue;
        };
        if !model.periods.iter().any(|p| p.id == b.period) {
            r.push(&path, format!("unknown period {}", b.period));
        }
        let admissible = match (&b.location, b.flow) {
            (Location::Node(n), FlowKind::P) => &t.home == n,
            (Location::Node(n), FlowKind::I | FlowKind::X) => {
                t.operates_in(n) && model.node(n).is_some_and(|x| x.has_storage)
            }
            (Location::Node(n), FlowKind::C) => {
                t.operates_in(n) && model.node(n).is_some_and(|x| x.has_consumer)
            }
            (Location::Arc(a, c), FlowKind::A) => {
                t.operates_in(a) && t.operates_in(c) && model.has_arc(a, c, ArcKind::Pipeline)
            }
            (Location::Arc(a, c), FlowKind::B) => {
                t.operates_in(a) && t.operates_in(c) && model.has_arc(a, c, ArcKind::Ship)
            }
            _ => false,
        };
        if !admissible {
            r.push(&path, "bounded flow does not exist for this trader");
        }
        for v in [b.upper, b.lower].into_iter().flatten() {
            if !(v >= 0.0 && v.is_finite()) {
                r.push(&path, "bounds must be finite and non-negative");
            }
        }
        if let (Some(u), Some(l)) = (b.upper, b.lower) {
            if l > u {
                r.push(&path, "lower bound exceeds upper bound");
            }
        }
        if b.upper.is_none() && b.lower.is_none() {
            r.push(&path, "bound entry sets neither upper nor lower");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn full_two_node_market_is_admissible() {
        let r = validate_scenario(&scenarios::two_nodes_full());
        assert!(r.is_admissible(), "{r}");
    }

    #[test]
    fn cartelization_is_excluded() {
        let mut m = scenarios::two_nodes_full();
        m.traders[1].theta_default = 1.5;
        let r = validate_scenario(&m);
        assert!(!r.is_admissible());
        assert!(r.violations.iter().all(|v| v.path.starts_with("traders[F2]")));
        assert!(r.violations.iter().any(|v| v.message.contains("cartelization excluded")));
    }

    #[test]
    fn demand_slope_must_be_negative() {
        for slope in [0.0, 0.5] {
            let mut m = scenarios::monopoly(10.0, slope, 2.0, 1.0, 1.0);
            m.name = "flat".into();
            let r = validate_scenario(&m);
            assert_eq!(r.violations.len(), 1, "{r}");
            assert_eq!(r.violations[0].path, "demand[n1,t1]");
            assert_eq!(r.violations[0].message, "slope must be strictly negative");
        }
    }

    #[test]
    fn every_violation_is_reported() {
        let mut m = scenarios::two_nodes_full();
        m.traders[0].theta_default = -0.1;
        m.providers[0].cap_per_period.insert("t1".into(), 0.0);
        m.periods[1].weight = 0.0;
        let r = validate_scenario(&m);
        assert_eq!(r.violations.len(), 3, "{r}");
    }

    #[test]
    fn validation_is_idempotent() {
        let mut m = scenarios::two_nodes_full();
        m.traders[0].theta_default = 2.0;
        let before = m.clone();
        let first = validate_scenario(&m);
        assert_eq!(validate_scenario(&m), first);
        assert_eq!(m, before);
    }
}
