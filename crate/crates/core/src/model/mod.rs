//! Market description for the spatial gas model.
//!
//! A [`ScenarioModel`] holds the network (nodes and arcs), the strategic
//! traders, the price-taking service providers and the consumer demand per
//! node and period. Volumes are rates in mcm/d and prices are in k€/mcm;
//! the scenario file loader converts other units on ingestion.
//!
//! Models are plain data. Nothing here checks admissibility; run
//! [`validate_scenario`] before handing a model to the assembler.

mod calibrate;
mod file;
mod validate;

pub use calibrate::{calibrate_demand, calibrate_elasticity, curve_from_elasticity};
pub use file::{ScenarioFile, ScenarioFileError};
pub use validate::{validate_scenario, ValidationReport, Violation};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("elasticity {0} must be strictly negative")]
    NonNegativeElasticity(f64),
    #[error("invalid demand reference: {0}")]
    InvalidReference(String),
    #[error("no demand given for node {node} in period {period}")]
    MissingDemand { node: String, period: String },
}

/// Service provider types. `P` is production; the rest are infrastructure
/// services: storage injection/extraction, liquefaction, regasification,
/// pipeline transport and LNG shipping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ServiceKind {
    P,
    I,
    X,
    L,
    R,
    A,
    B,
}

impl ServiceKind {
    pub const ALL: [ServiceKind; 7] = [
        ServiceKind::P,
        ServiceKind::I,
        ServiceKind::X,
        ServiceKind::L,
        ServiceKind::R,
        ServiceKind::A,
        ServiceKind::B,
    ];

    pub fn is_arc_service(self) -> bool {
        matches!(self, ServiceKind::A | ServiceKind::B)
    }

    pub fn letter(self) -> &'static str {
        match self {
            ServiceKind::P => "P",
            ServiceKind::I => "I",
            ServiceKind::X => "X",
            ServiceKind::L => "L",
            ServiceKind::R => "R",
            ServiceKind::A => "A",
            ServiceKind::B => "B",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ServiceKind::ALL.into_iter().find(|k| k.letter() == s)
    }
}

impl fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcKind {
    Pipeline,
    Ship,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: String,
    pub has_consumer: bool,
    pub has_producer: bool,
    pub has_storage: bool,
    pub has_liquefaction: bool,
    pub has_regasification: bool,
}

impl Node {
    /// A node with no facilities; set the flags you need.
    pub fn bare(id: impl Into<String>) -> Self {
        Node {
            id: id.into(),
            has_consumer: false,
            has_producer: false,
            has_storage: false,
            has_liquefaction: false,
            has_regasification: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arc {
    pub from: String,
    pub to: String,
    pub kind: ArcKind,
}

/// A period of the year. `weight` scales the period's flows in the
/// cross-period constraints (annual capacities and the storage balance).
#[derive(Clone, Debug, PartialEq)]
pub struct Period {
    pub id: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trader {
    pub id: String,
    pub home: String,
    /// Nodes the trader operates in. The home node is always included.
    pub reachable: BTreeSet<String>,
    /// Market-power weight used where `theta` has no explicit entry.
    pub theta_default: f64,
    /// Market-power weight per (node, period).
    pub theta: BTreeMap<(String, String), f64>,
}

impl Trader {
    pub fn theta(&self, node: &str, period: &str) -> f64 {
        self.theta
            .get(&(node.to_string(), period.to_string()))
            .copied()
            .unwrap_or(self.theta_default)
    }

    pub fn operates_in(&self, node: &str) -> bool {
        self.home == node || self.reachable.contains(node)
    }

    /// Operating nodes in sorted order, home included.
    pub fn nodes(&self) -> BTreeSet<String> {
        let mut out = self.reachable.clone();
        out.insert(self.home.clone());
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Location {
    Node(String),
    Arc(String, String),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Node(n) => f.write_str(n),
            Location::Arc(a, b) => write!(f, "{a}>{b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ServiceProvider {
    pub kind: ServiceKind,
    pub location: Location,
    /// Capacity per period (rate).
    pub cap_per_period: BTreeMap<String, f64>,
    /// Capacity over all periods, in weighted rate units.
    pub cap_total: f64,
    pub lin_cost: BTreeMap<String, f64>,
    /// Quadratic cost term; only production carries one.
    pub quad_cost: BTreeMap<String, f64>,
    pub loss_factor: f64,
}

impl ServiceProvider {
    pub fn cap(&self, period: &str) -> f64 {
        self.cap_per_period.get(period).copied().unwrap_or(f64::NAN)
    }

    pub fn linc(&self, period: &str) -> f64 {
        self.lin_cost.get(period).copied().unwrap_or(0.0)
    }

    pub fn quac(&self, period: &str) -> f64 {
        self.quad_cost.get(period).copied().unwrap_or(0.0)
    }

    /// Provider with the same capacity and costs in every period.
    pub fn uniform(
        kind: ServiceKind,
        location: Location,
        periods: &[Period],
        cap: f64,
        cap_total: f64,
        linc: f64,
        quac: f64,
    ) -> Self {
        let each = |v: f64| periods.iter().map(|p| (p.id.clone(), v)).collect();
        ServiceProvider {
            kind,
            location,
            cap_per_period: each(cap),
            cap_total,
            lin_cost: each(linc),
            quad_cost: if quac != 0.0 { each(quac) } else { BTreeMap::new() },
            loss_factor: 1.0,
        }
    }
}

/// Affine inverse demand `price = intercept + slope * volume`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandCurve {
    pub intercept: f64,
    pub slope: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorValues {
    pub residential: f64,
    pub industrial: f64,
    pub power: f64,
}

impl SectorValues {
    pub fn new(residential: f64, industrial: f64, power: f64) -> Self {
        SectorValues { residential, industrial, power }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.residential, self.industrial, self.power]
    }
}

/// Reference point from which an inverse demand curve is calibrated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandReference {
    /// Reference willingness to pay (price).
    pub wtp: f64,
    /// Reference demand (rate).
    pub dmd: f64,
    pub elasticity: SectorValues,
    pub shares: SectorValues,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Demand {
    Curve(DemandCurve),
    Reference(DemandReference),
}

impl Demand {
    pub fn curve(&self) -> Result<DemandCurve, ModelError> {
        match self {
            Demand::Curve(c) => Ok(*c),
            Demand::Reference(r) => calibrate_demand(r),
        }
    }
}

/// Flow families a trader decides on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FlowKind {
    P,
    I,
    X,
    A,
    B,
    C,
}

impl FlowKind {
    pub fn letter(self) -> &'static str {
        match self {
            FlowKind::P => "P",
            FlowKind::I => "I",
            FlowKind::X => "X",
            FlowKind::A => "A",
            FlowKind::B => "B",
            FlowKind::C => "C",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [FlowKind::P, FlowKind::I, FlowKind::X, FlowKind::A, FlowKind::B, FlowKind::C]
            .into_iter()
            .find(|k| k.letter() == s)
    }
}

/// Contractual bound on one trader flow in one period.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowBound {
    pub trader: String,
    pub flow: FlowKind,
    pub location: Location,
    pub period: String,
    pub upper: Option<f64>,
    pub lower: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScenarioModel {
    pub name: String,
    pub periods: Vec<Period>,
    pub nodes: Vec<Node>,
    pub arcs: Vec<Arc>,
    pub traders: Vec<Trader>,
    pub providers: Vec<ServiceProvider>,
    pub demand: BTreeMap<(String, String), Demand>,
    pub bounds: Vec<FlowBound>,
}

impl ScenarioModel {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn trader(&self, id: &str) -> Option<&Trader> {
        self.traders.iter().find(|t| t.id == id)
    }

    pub fn provider(&self, kind: ServiceKind, location: &Location) -> Option<&ServiceProvider> {
        self.providers
            .iter()
            .find(|p| p.kind == kind && &p.location == location)
    }

    pub fn provider_at(&self, kind: ServiceKind, node: &str) -> Option<&ServiceProvider> {
        self.providers
            .iter()
            .find(|p| p.kind == kind && matches!(&p.location, Location::Node(n) if n == node))
    }

    pub fn has_arc(&self, from: &str, to: &str, kind: ArcKind) -> bool {
        self.arcs
            .iter()
            .any(|a| a.from == from && a.to == to && a.kind == kind)
    }

    pub fn period_ids(&self) -> impl Iterator<Item = &str> {
        self.periods.iter().map(|p| p.id.as_str())
    }

    pub fn demand_curve(&self, node: &str, period: &str) -> Result<DemandCurve, ModelError> {
        self.demand
            .get(&(node.to_string(), period.to_string()))
            .ok_or_else(|| ModelError::MissingDemand {
                node: node.to_string(),
                period: period.to_string(),
            })?
            .curve()
    }

    /// True when every loss factor equals one.
    pub fn is_lossless(&self) -> bool {
        self.providers.iter().all(|p| p.loss_factor == 1.0)
    }

    /// Nodes reachable from `trader`'s home along arcs that stay inside its
    /// operating set.
    pub fn connected_from_home(&self, trader: &Trader) -> BTreeSet<String> {
        let allowed = trader.nodes();
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([trader.home.clone()]);
        seen.insert(trader.home.clone());
        while let Some(n) = queue.pop_front() {
            for a in self.arcs.iter().filter(|a| a.from == n) {
                if allowed.contains(&a.to) && seen.insert(a.to.clone()) {
                    queue.push_back(a.to.clone());
                }
            }
        }
        seen
    }

    /// Sets every trader's market-power weight, dropping per-market overrides.
    pub fn with_uniform_theta(mut self, theta: f64) -> Self {
        for t in &mut self.traders {
            t.theta_default = theta;
            t.theta.clear();
        }
        self
    }
}
