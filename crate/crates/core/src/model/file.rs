//! TOML scenario files.
//!
//! The schema is documented in the repository README. Unknown keys are
//! rejected. Values are converted to mcm/d and k€/mcm on load according to
//! the optional `[units]` table.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    Arc, ArcKind, Demand, DemandCurve, DemandReference, FlowBound, FlowKind, Location, Node,
    Period, ScenarioModel, SectorValues, ServiceKind, ServiceProvider, Trader,
};

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("cannot read scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario schema error: {0}")]
    Schema(String),
    #[error("cannot serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
}

fn schema(msg: impl Into<String>) -> ScenarioFileError {
    ScenarioFileError::Schema(msg.into())
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Units {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<String>,
}

impl Units {
    /// Multiplier converting file volumes (rates) to mcm/d.
    fn volume_factor(&self) -> Result<f64, ScenarioFileError> {
        match self.volume.as_deref().unwrap_or("mcm/d") {
            "mcm/d" => Ok(1.0),
            "mcm/y" => Ok(1.0 / 365.0),
            "bcm/y" => Ok(1000.0 / 365.0),
            other => Err(schema(format!("unsupported volume unit {other:?}"))),
        }
    }

    /// Multiplier converting file prices to k€/mcm.
    fn price_factor(&self) -> Result<f64, ScenarioFileError> {
        match self.price.as_deref().unwrap_or("keur/mcm") {
            "keur/mcm" | "k€/mcm" => Ok(1.0),
            "eur/mcm" | "€/mcm" => Ok(1e-3),
            other => Err(schema(format!("unsupported price unit {other:?}"))),
        }
    }
}

/// A scalar applied to every period, or one value per period id.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PerPeriod {
    Uniform(f64),
    ByPeriod(BTreeMap<String, f64>),
}

impl PerPeriod {
    fn expand(&self, periods: &[Period], scale: f64) -> BTreeMap<String, f64> {
        match self {
            PerPeriod::Uniform(v) => periods.iter().map(|p| (p.id.clone(), v * scale)).collect(),
            PerPeriod::ByPeriod(m) => m.iter().map(|(k, v)| (k.clone(), v * scale)).collect(),
        }
    }

    fn compact(map: &BTreeMap<String, f64>, periods: &[Period]) -> Option<Self> {
        if map.is_empty() {
            return None;
        }
        let first = map.values().next().copied().unwrap_or(0.0);
        let covers_all = periods.iter().all(|p| map.contains_key(&p.id)) && map.len() == periods.len();
        if covers_all && map.values().all(|v| *v == first) {
            Some(PerPeriod::Uniform(first))
        } else {
            Some(PerPeriod::ByPeriod(map.clone()))
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PeriodEntry {
    pub id: String,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "is_false")]
    pub consumer: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub producer: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub storage: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub liquefaction: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub regasification: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ArcEntry {
    pub from: String,
    pub to: String,
    pub kind: ArcKind,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ThetaEntry {
    pub node: String,
    pub period: String,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TraderEntry {
    pub id: String,
    pub home: String,
    #[serde(default)]
    pub reachable: Vec<String>,
    #[serde(default)]
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub theta_override: Vec<ThetaEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProviderEntry {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arc: Option<[String; 2]>,
    pub cap: PerPeriod,
    pub cap_total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lin_cost: Option<PerPeriod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_cost: Option<PerPeriod>,
    #[serde(default = "one")]
    pub loss: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DemandEntry {
    pub node: String,
    /// Omitted: the entry applies to every period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wtp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dmd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elasticity: Option<SectorValues>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shares: Option<SectorValues>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BoundEntry {
    pub trader: String,
    pub flow: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arc: Option<[String; 2]>,
    pub period: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
}

/// On-disk scenario document.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<Units>,
    pub periods: Vec<PeriodEntry>,
    pub nodes: Vec<NodeEntry>,
    #[serde(default)]
    pub arcs: Vec<ArcEntry>,
    #[serde(default)]
    pub traders: Vec<TraderEntry>,
    #[serde(default)]
    pub providers: Vec<ProviderEntry>,
    #[serde(default)]
    pub demand: Vec<DemandEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<BoundEntry>,
}

fn location(node: &Option<String>, arc: &Option<[String; 2]>, what: &str) -> Result<Location, ScenarioFileError> {
    match (node, arc) {
        (Some(n), None) => Ok(Location::Node(n.clone())),
        (None, Some([a, b])) => Ok(Location::Arc(a.clone(), b.clone())),
        _ => Err(schema(format!("{what}: give exactly one of `node` or `arc`"))),
    }
}

fn split_location(loc: &Location) -> (Option<String>, Option<[String; 2]>) {
    match loc {
        Location::Node(n) => (Some(n.clone()), None),
        Location::Arc(a, b) => (None, Some([a.clone(), b.clone()])),
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioFileError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<ScenarioModel, ScenarioFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)?.into_model()
    }

    pub fn to_toml(&self) -> Result<String, ScenarioFileError> {
        Ok(toml::to_string(self)?)
    }

    /// Converts to the in-memory model, applying unit conversion. Structural
    /// problems (unknown kinds, ambiguous entries) are errors here; model
    /// admissibility is left to validation.
    pub fn into_model(self) -> Result<ScenarioModel, ScenarioFileError> {
        let units = self.units.clone().unwrap_or_default();
        let vol = units.volume_factor()?;
        let price = units.price_factor()?;

        let periods: Vec<Period> = self
            .periods
            .iter()
            .map(|p| Period { id: p.id.clone(), weight: p.weight })
            .collect();

        let nodes = self
            .nodes
            .iter()
            .map(|n| Node {
                id: n.id.clone(),
                has_consumer: n.consumer,
                has_producer: n.producer,
                has_storage: n.storage,
                has_liquefaction: n.liquefaction,
                has_regasification: n.regasification,
            })
            .collect();

        let arcs = self
            .arcs
            .iter()
            .map(|a| Arc { from: a.from.clone(), to: a.to.clone(), kind: a.kind })
            .collect();

        let traders = self
            .traders
            .iter()
            .map(|t| {
                let mut reachable: BTreeSet<String> = t.reachable.iter().cloned().collect();
                reachable.insert(t.home.clone());
                Trader {
                    id: t.id.clone(),
                    home: t.home.clone(),
                    reachable,
                    theta_default: t.theta,
                    theta: t
                        .theta_override
                        .iter()
                        .map(|e| ((e.node.clone(), e.period.clone()), e.value))
                        .collect(),
                }
            })
            .collect();

        let mut providers = Vec::new();
        for p in &self.providers {
            let kind = ServiceKind::parse(&p.kind)
                .ok_or_else(|| schema(format!("unknown provider kind {:?}", p.kind)))?;
            providers.push(ServiceProvider {
                kind,
                location: location(&p.node, &p.arc, &format!("provider {}", p.kind))?,
                cap_per_period: p.cap.expand(&periods, vol),
                cap_total: p.cap_total * vol,
                lin_cost: p
                    .lin_cost
                    .as_ref()
                    .map(|c| c.expand(&periods, price))
                    .unwrap_or_else(|| periods.iter().map(|q| (q.id.clone(), 0.0)).collect()),
                quad_cost: p
                    .quad_cost
                    .as_ref()
                    .map(|c| c.expand(&periods, price / vol))
                    .unwrap_or_default(),
                loss_factor: p.loss,
            });
        }

        let mut demand = BTreeMap::new();
        for d in &self.demand {
            let value = match (d.intercept, d.slope, d.wtp, d.dmd, d.elasticity, d.shares) {
                (Some(i), Some(s), None, None, None, None) => Demand::Curve(DemandCurve {
                    intercept: i * price,
                    slope: s * price / vol,
                }),
                (None, None, Some(w), Some(q), Some(e), Some(sh)) => Demand::Reference(DemandReference {
                    wtp: w * price,
                    dmd: q * vol,
                    elasticity: e,
                    shares: sh,
                }),
                _ => {
                    return Err(schema(format!(
                        "demand at {}: give either intercept+slope or wtp+dmd+elasticity+shares",
                        d.node
                    )))
                }
            };
            let targets: Vec<String> = match &d.period {
                Some(p) => vec![p.clone()],
                None => periods.iter().map(|p| p.id.clone()).collect(),
            };
            for p in targets {
                if demand.insert((d.node.clone(), p.clone()), value).is_some() {
                    return Err(schema(format!("demand at {} in {p} given twice", d.node)));
                }
            }
        }

        let mut bounds = Vec::new();
        for b in &self.bounds {
            let flow = FlowKind::parse(&b.flow)
                .ok_or_else(|| schema(format!("unknown bounded flow {:?}", b.flow)))?;
            bounds.push(FlowBound {
                trader: b.trader.clone(),
                flow,
                location: location(&b.node, &b.arc, "bound")?,
                period: b.period.clone(),
                upper: b.upper.map(|v| v * vol),
                lower: b.lower.map(|v| v * vol),
            });
        }

        Ok(ScenarioModel {
            name: self.name,
            periods,
            nodes,
            arcs,
            traders,
            providers,
            demand,
            bounds,
        })
    }

    /// Document for a model, in base units.
    pub fn from_model(model: &ScenarioModel) -> Self {
        let periods = &model.periods;
        ScenarioFile {
            name: model.name.clone(),
            units: None,
            periods: periods
                .iter()
                .map(|p| PeriodEntry { id: p.id.clone(), weight: p.weight })
                .collect(),
            nodes: model
                .nodes
                .iter()
                .map(|n| NodeEntry {
                    id: n.id.clone(),
                    consumer: n.has_consumer,
                    producer: n.has_producer,
                    storage: n.has_storage,
                    liquefaction: n.has_liquefaction,
                    regasification: n.has_regasification,
                })
                .collect(),
            arcs: model
                .arcs
                .iter()
                .map(|a| ArcEntry { from: a.from.clone(), to: a.to.clone(), kind: a.kind })
                .collect(),
            traders: model
                .traders
                .iter()
                .map(|t| TraderEntry {
                    id: t.id.clone(),
                    home: t.home.clone(),
                    reachable: t.reachable.iter().filter(|n| **n != t.home).cloned().collect(),
                    theta: t.theta_default,
                    theta_override: t
                        .theta
                        .iter()
                        .map(|((n, p), v)| ThetaEntry { node: n.clone(), period: p.clone(), value: *v })
                        .collect(),
                })
                .collect(),
            providers: model
                .providers
                .iter()
                .map(|p| {
                    let (node, arc) = split_location(&p.location);
                    ProviderEntry {
                        kind: p.kind.letter().to_string(),
                        node,
                        arc,
                        cap: PerPeriod::compact(&p.cap_per_period, periods)
                            .unwrap_or(PerPeriod::ByPeriod(BTreeMap::new())),
                        cap_total: p.cap_total,
                        lin_cost: PerPeriod::compact(&p.lin_cost, periods),
                        quad_cost: PerPeriod::compact(&p.quad_cost, periods),
                        loss: p.loss_factor,
                    }
                })
                .collect(),
            demand: model
                .demand
                .iter()
                .map(|((n, p), d)| {
                    let mut e = DemandEntry {
                        node: n.clone(),
                        period: Some(p.clone()),
                        intercept: None,
                        slope: None,
                        wtp: None,
                        dmd: None,
                        elasticity: None,
                        shares: None,
                    };
                    match d {
                        Demand::Curve(c) => {
                            e.intercept = Some(c.intercept);
                            e.slope = Some(c.slope);
                        }
                        Demand::Reference(r) => {
                            e.wtp = Some(r.wtp);
                            e.dmd = Some(r.dmd);
                            e.elasticity = Some(r.elasticity);
                            e.shares = Some(r.shares);
                        }
                    }
                    e
                })
                .collect(),
            bounds: model
                .bounds
                .iter()
                .map(|b| {
                    let (node, arc) = split_location(&b.location);
                    BoundEntry {
                        trader: b.trader.clone(),
                        flow: b.flow.letter().to_string(),
                        node,
                        arc,
                        period: b.period.clone(),
                        upper: b.upper,
                        lower: b.lower,
                    }
                })
                .collect(),
        }
    }
}
