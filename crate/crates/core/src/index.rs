//! Ordering of the complementarity vector.
//!
//! Components are grouped as flows `q`, capacity duals `α`, balance duals
//! `φ` and wholesale prices `λ`, in that order. Within the flow group the
//! families follow production, injection, extraction, pipeline, shipping and
//! sales. Contract-bound multipliers, when present, sit at the end of the
//! `α` group.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use serde::Serialize;

use crate::model::{ArcKind, FlowKind, Location, ScenarioModel, ServiceKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Family {
    QP,
    QI,
    QX,
    QA,
    QB,
    QC,
    Alpha,
    AlphaTotal,
    UpperBound,
    LowerBound,
    PhiNode,
    PhiStorage,
    LambdaC,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Group {
    Q,
    Alpha,
    Phi,
    Lambda,
}

impl Family {
    pub const ALL: [Family; 13] = [
        Family::QP,
        Family::QI,
        Family::QX,
        Family::QA,
        Family::QB,
        Family::QC,
        Family::Alpha,
        Family::AlphaTotal,
        Family::UpperBound,
        Family::LowerBound,
        Family::PhiNode,
        Family::PhiStorage,
        Family::LambdaC,
    ];

    pub fn group(self) -> Group {
        match self {
            Family::QP | Family::QI | Family::QX | Family::QA | Family::QB | Family::QC => Group::Q,
            Family::Alpha | Family::AlphaTotal | Family::UpperBound | Family::LowerBound => Group::Alpha,
            Family::PhiNode | Family::PhiStorage => Group::Phi,
            Family::LambdaC => Group::Lambda,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::QP => "qP",
            Family::QI => "qI",
            Family::QX => "qX",
            Family::QA => "qA",
            Family::QB => "qB",
            Family::QC => "qC",
            Family::Alpha => "alpha",
            Family::AlphaTotal => "alphaT",
            Family::UpperBound => "xiU",
            Family::LowerBound => "xiL",
            Family::PhiNode => "phiN",
            Family::PhiStorage => "phiS",
            Family::LambdaC => "lambdaC",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == s)
    }

    pub fn flow(self) -> Option<FlowKind> {
        match self {
            Family::QP => Some(FlowKind::P),
            Family::QI => Some(FlowKind::I),
            Family::QX => Some(FlowKind::X),
            Family::QA => Some(FlowKind::A),
            Family::QB => Some(FlowKind::B),
            Family::QC => Some(FlowKind::C),
            _ => None,
        }
    }

    pub fn of_flow(flow: FlowKind) -> Family {
        match flow {
            FlowKind::P => Family::QP,
            FlowKind::I => Family::QI,
            FlowKind::X => Family::QX,
            FlowKind::A => Family::QA,
            FlowKind::B => Family::QB,
            FlowKind::C => Family::QC,
        }
    }
}

/// Identity of one component of the complementarity vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarTag {
    pub family: Family,
    /// Service of a capacity dual.
    pub service: Option<ServiceKind>,
    /// Bounded flow of a contract-bound multiplier.
    pub flow: Option<FlowKind>,
    pub trader: Option<String>,
    pub location: Option<Location>,
    pub period: Option<String>,
}

impl VarTag {
    pub fn flow_var(family: Family, trader: &str, location: Location, period: &str) -> Self {
        VarTag {
            family,
            service: None,
            flow: None,
            trader: Some(trader.to_string()),
            location: Some(location),
            period: Some(period.to_string()),
        }
    }

    pub fn alpha(kind: ServiceKind, location: Location, period: Option<&str>) -> Self {
        VarTag {
            family: if period.is_some() { Family::Alpha } else { Family::AlphaTotal },
            service: Some(kind),
            flow: None,
            trader: None,
            location: Some(location),
            period: period.map(str::to_string),
        }
    }

    pub fn phi_node(trader: &str, node: &str, period: &str) -> Self {
        VarTag::flow_var(Family::PhiNode, trader, Location::Node(node.to_string()), period)
    }

    pub fn phi_storage(trader: &str, node: &str) -> Self {
        VarTag {
            family: Family::PhiStorage,
            service: None,
            flow: None,
            trader: Some(trader.to_string()),
            location: Some(Location::Node(node.to_string())),
            period: None,
        }
    }

    pub fn lambda(node: &str, period: &str) -> Self {
        VarTag {
            family: Family::LambdaC,
            service: None,
            flow: None,
            trader: None,
            location: Some(Location::Node(node.to_string())),
            period: Some(period.to_string()),
        }
    }

    pub fn bound(upper: bool, flow: FlowKind, trader: &str, location: Location, period: &str) -> Self {
        VarTag {
            family: if upper { Family::UpperBound } else { Family::LowerBound },
            service: None,
            flow: Some(flow),
            trader: Some(trader.to_string()),
            location: Some(location),
            period: Some(period.to_string()),
        }
    }

    /// Start node (or the node itself).
    pub fn n(&self) -> Option<&str> {
        match &self.location {
            Some(Location::Node(n)) | Some(Location::Arc(n, _)) => Some(n),
            None => None,
        }
    }

    /// End node of an arc.
    pub fn m(&self) -> Option<&str> {
        match &self.location {
            Some(Location::Arc(_, m)) => Some(m),
            _ => None,
        }
    }

    /// Tab-separated `family service trader n m t` columns; `-` marks an
    /// empty field.
    pub fn columns(&self) -> [String; 6] {
        let kind = self
            .service
            .map(|s| s.letter().to_string())
            .or_else(|| self.flow.map(|f| f.letter().to_string()));
        let opt = |v: Option<&str>| v.unwrap_or("-").to_string();
        [
            self.family.name().to_string(),
            opt(kind.as_deref()),
            opt(self.trader.as_deref()),
            opt(self.n()),
            opt(self.m()),
            opt(self.period.as_deref()),
        ]
    }

    pub fn from_columns(cols: &[&str]) -> Option<VarTag> {
        if cols.len() != 6 {
            return None;
        }
        let get = |s: &str| (s != "-").then(|| s.to_string());
        let family = Family::parse(cols[0])?;
        let (service, flow) = match family {
            Family::Alpha | Family::AlphaTotal => (Some(ServiceKind::parse(cols[1])?), None),
            Family::UpperBound | Family::LowerBound => (None, Some(FlowKind::parse(cols[1])?)),
            _ => (None, None),
        };
        let location = match (get(cols[3]), get(cols[4])) {
            (Some(n), Some(m)) => Some(Location::Arc(n, m)),
            (Some(n), None) => Some(Location::Node(n)),
            (None, None) => None,
            (None, Some(_)) => return None,
        };
        Some(VarTag {
            family,
            service,
            flow,
            trader: get(cols[2]),
            location,
            period: get(cols[5]),
        })
    }
}

impl fmt::Display for VarTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if let Some(s) = self.service {
            parts.push(s.letter().into());
        }
        if let Some(k) = self.flow {
            parts.push(k.letter().into());
        }
        if let Some(t) = &self.trader {
            parts.push(t.clone());
        }
        if let Some(l) = &self.location {
            parts.push(l.to_string());
        }
        if let Some(p) = &self.period {
            parts.push(p.clone());
        }
        write!(f, "{}[{}]", self.family.name(), parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockLayout {
    pub q: Range<usize>,
    pub alpha: Range<usize>,
    pub phi: Range<usize>,
    pub lambda: Range<usize>,
}

impl BlockLayout {
    pub fn group_of(&self, i: usize) -> Group {
        if self.q.contains(&i) {
            Group::Q
        } else if self.alpha.contains(&i) {
            Group::Alpha
        } else if self.phi.contains(&i) {
            Group::Phi
        } else {
            Group::Lambda
        }
    }
}

/// Bijection between model entities and positions of the complementarity
/// vector.
#[derive(Clone, Debug)]
pub struct VariableIndex {
    tags: Vec<VarTag>,
    lookup: HashMap<VarTag, usize>,
    blocks: BlockLayout,
}

impl VariableIndex {
    pub fn from_tags(tags: Vec<VarTag>) -> Result<Self, String> {
        let mut lookup = HashMap::with_capacity(tags.len());
        for (i, t) in tags.iter().enumerate() {
            if lookup.insert(t.clone(), i).is_some() {
                return Err(format!("duplicate component {t}"));
            }
        }
        for w in tags.windows(2) {
            if w[0].family.group() > w[1].family.group() {
                return Err(format!("{} after {} breaks group order", w[1], w[0]));
            }
        }
        let end_of = |g: Group| tags.iter().take_while(|t| t.family.group() <= g).count();
        let (q, a, f) = (end_of(Group::Q), end_of(Group::Alpha), end_of(Group::Phi));
        let blocks = BlockLayout {
            q: 0..q,
            alpha: q..a,
            phi: a..f,
            lambda: f..tags.len(),
        };
        Ok(VariableIndex { tags, lookup, blocks })
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[VarTag] {
        &self.tags
    }

    pub fn tag(&self, i: usize) -> &VarTag {
        &self.tags[i]
    }

    pub fn position(&self, tag: &VarTag) -> Option<usize> {
        self.lookup.get(tag).copied()
    }

    pub fn blocks(&self) -> &BlockLayout {
        &self.blocks
    }

    pub fn family_members(&self, family: Family) -> impl Iterator<Item = usize> + '_ {
        self.tags
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.family == family)
            .map(|(i, _)| i)
    }
}

/// Lists every component for `model`. The model should be validated.
pub fn build_index(model: &ScenarioModel) -> VariableIndex {
    let periods: Vec<&str> = model.period_ids().collect();
    let mut tags = Vec::new();

    let node_has = |n: &str, pred: fn(&crate::model::Node) -> bool| model.node(n).is_some_and(pred);

    // Flows, family by family.
    for t in &model.traders {
        for p in &periods {
            tags.push(VarTag::flow_var(Family::QP, &t.id, Location::Node(t.home.clone()), p));
        }
    }
    for family in [Family::QI, Family::QX] {
        for t in &model.traders {
            for n in t.nodes().iter().filter(|n| node_has(n, |x| x.has_storage)) {
                for p in &periods {
                    tags.push(VarTag::flow_var(family, &t.id, Location::Node(n.clone()), p));
                }
            }
        }
    }
    for (family, kind) in [(Family::QA, ArcKind::Pipeline), (Family::QB, ArcKind::Ship)] {
        for t in &model.traders {
            for a in model
                .arcs
                .iter()
                .filter(|a| a.kind == kind && t.operates_in(&a.from) && t.operates_in(&a.to))
            {
                for p in &periods {
                    tags.push(VarTag::flow_var(
                        family,
                        &t.id,
                        Location::Arc(a.from.clone(), a.to.clone()),
                        p,
                    ));
                }
            }
        }
    }
    for t in &model.traders {
        for n in t.nodes().iter().filter(|n| node_has(n, |x| x.has_consumer)) {
            for p in &periods {
                tags.push(VarTag::flow_var(Family::QC, &t.id, Location::Node(n.clone()), p));
            }
        }
    }

    // Capacity duals: per period, then annual; providers by service kind.
    let mut providers: Vec<_> = model.providers.iter().collect();
    providers.sort_by_key(|p| p.kind);
    for pr in &providers {
        for p in &periods {
            tags.push(VarTag::alpha(pr.kind, pr.location.clone(), Some(p)));
        }
    }
    for pr in &providers {
        tags.push(VarTag::alpha(pr.kind, pr.location.clone(), None));
    }
    for upper in [true, false] {
        for b in &model.bounds {
            if (upper && b.upper.is_some()) || (!upper && b.lower.is_some()) {
                tags.push(VarTag::bound(upper, b.flow, &b.trader, b.location.clone(), &b.period));
            }
        }
    }

    // Balance duals.
    for t in &model.traders {
        for n in t.nodes() {
            for p in &periods {
                tags.push(VarTag::phi_node(&t.id, &n, p));
            }
        }
    }
    for t in &model.traders {
        for n in t.nodes().iter().filter(|n| node_has(n, |x| x.has_storage)) {
            tags.push(VarTag::phi_storage(&t.id, n));
        }
    }

    for n in model.nodes.iter().filter(|n| n.has_consumer) {
        for p in &periods {
            tags.push(VarTag::lambda(&n.id, p));
        }
    }

    VariableIndex::from_tags(tags).expect("generated tags are unique and grouped")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn full_two_node_market_counts() {
        let model = scenarios::two_nodes_full();
        let idx = build_index(&model);
        // Per trader and period: 1 production, 2 injections, 2 extractions,
        // 2 pipeline flows, 2 LNG flows, 2 sales.
        let q = 2 * 2 * (1 + 2 + 2 + 2 + 2 + 2);
        // 14 providers, each with two per-period duals and one annual dual.
        let alpha = 14 * 3;
        // Node balances per trader, node and period; storage balances per
        // trader and storage node.
        let phi = 2 * 2 * 2 + 2 * 2;
        let lambda = 2 * 2;
        assert_eq!(idx.len(), q + alpha + phi + lambda);
        let b = idx.blocks();
        assert_eq!((b.q.len(), b.alpha.len(), b.phi.len(), b.lambda.len()), (q, alpha, phi, lambda));
    }

    #[test]
    fn tags_survive_their_columns() {
        let idx = build_index(&scenarios::two_nodes_full());
        for tag in idx.tags() {
            let cols = tag.columns();
            let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
            assert_eq!(VarTag::from_columns(&refs).as_ref(), Some(tag));
            assert_eq!(idx.position(tag).map(|i| idx.tag(i)), Some(tag));
        }
    }

    #[test]
    fn duplicate_tags_are_refused() {
        let t = VarTag::lambda("n1", "t1");
        assert!(VariableIndex::from_tags(vec![t.clone(), t]).is_err());
    }

    #[test]
    fn groups_must_be_contiguous() {
        let tags = vec![
            VarTag::lambda("n1", "t1"),
            VarTag::flow_var(Family::QP, "F1", Location::Node("n1".into()), "t1"),
        ];
        assert!(VariableIndex::from_tags(tags).is_err());
    }
}
