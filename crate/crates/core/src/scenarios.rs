//! Small reference markets with known equilibrium structure, and a
//! generator of random admissible markets.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    Arc, ArcKind, Demand, DemandCurve, FlowBound, FlowKind, Location, Node, Period, ScenarioModel,
    ServiceKind, ServiceProvider, Trader,
};

const BIG: f64 = 1000.0;

fn periods(ids: &[&str]) -> Vec<Period> {
    ids.iter().map(|id| Period { id: (*id).into(), weight: 1.0 }).collect()
}

fn node(id: &str, producer: bool, consumer: bool, storage: bool) -> Node {
    Node {
        has_producer: producer,
        has_consumer: consumer,
        has_storage: storage,
        ..Node::bare(id)
    }
}

fn pipe(from: &str, to: &str) -> Arc {
    Arc { from: from.into(), to: to.into(), kind: ArcKind::Pipeline }
}

fn trader(id: &str, home: &str, reachable: &[&str], theta: f64) -> Trader {
    Trader {
        id: id.into(),
        home: home.into(),
        reachable: reachable.iter().map(|s| (*s).to_string()).collect(),
        theta_default: theta,
        theta: BTreeMap::new(),
    }
}

fn at(n: &str) -> Location {
    Location::Node(n.into())
}

fn on(a: &str, b: &str) -> Location {
    Location::Arc(a.into(), b.into())
}

fn curve(model: &mut ScenarioModel, n: &str, t: &str, intercept: f64, slope: f64) {
    model
        .demand
        .insert((n.into(), t.into()), Demand::Curve(DemandCurve { intercept, slope }));
}

/// One node with a producer and consumers, one trader, one period and
/// capacities that never bind.
pub fn monopoly(intercept: f64, slope: f64, linc: f64, quac: f64, theta: f64) -> ScenarioModel {
    let ps = periods(&["t1"]);
    let mut m = ScenarioModel {
        name: "monopoly".into(),
        nodes: vec![node("n1", true, true, false)],
        traders: vec![trader("F1", "n1", &[], theta)],
        providers: vec![ServiceProvider::uniform(ServiceKind::P, at("n1"), &ps, BIG, BIG, linc, quac)],
        periods: ps,
        ..Default::default()
    };
    curve(&mut m, "n1", "t1", intercept, slope);
    m
}

/// Two identical producer-consumer nodes joined by free pipelines in both
/// directions, one trader at each. Under price-taking behaviour who serves
/// which market is undetermined; totals are not.
pub fn two_markets(theta: f64) -> ScenarioModel {
    let ps = periods(&["t1"]);
    let mut providers = Vec::new();
    for n in ["n1", "n2"] {
        providers.push(ServiceProvider::uniform(ServiceKind::P, at(n), &ps, BIG, BIG, 2.0, 1.0));
    }
    for (a, b) in [("n1", "n2"), ("n2", "n1")] {
        providers.push(ServiceProvider::uniform(ServiceKind::A, on(a, b), &ps, 10.0, BIG, 0.0, 0.0));
    }
    let mut m = ScenarioModel {
        name: format!("two-markets-theta-{theta}"),
        nodes: vec![node("n1", true, true, false), node("n2", true, true, false)],
        arcs: vec![pipe("n1", "n2"), pipe("n2", "n1")],
        traders: vec![trader("F1", "n1", &["n2"], theta), trader("F2", "n2", &["n1"], theta)],
        providers,
        periods: ps,
        ..Default::default()
    };
    curve(&mut m, "n1", "t1", 10.0, -1.0);
    curve(&mut m, "n2", "t1", 10.0, -1.0);
    m
}

/// Producer `n1`, market `n2` and a transit node `n3`; the direct pipeline
/// and the route through `n3` cost the same and never congest.
pub fn two_paths() -> ScenarioModel {
    let ps = periods(&["t1"]);
    let providers = vec![
        ServiceProvider::uniform(ServiceKind::P, at("n1"), &ps, BIG, BIG, 2.0, 1.0),
        ServiceProvider::uniform(ServiceKind::A, on("n1", "n2"), &ps, BIG, BIG, 1.0, 0.0),
        ServiceProvider::uniform(ServiceKind::A, on("n1", "n3"), &ps, BIG, BIG, 0.5, 0.0),
        ServiceProvider::uniform(ServiceKind::A, on("n3", "n2"), &ps, BIG, BIG, 0.5, 0.0),
    ];
    let mut m = ScenarioModel {
        name: "two-paths".into(),
        nodes: vec![
            node("n1", true, false, false),
            node("n2", false, true, false),
            node("n3", false, false, false),
        ],
        arcs: vec![pipe("n1", "n2"), pipe("n1", "n3"), pipe("n3", "n2")],
        traders: vec![trader("F1", "n1", &["n2", "n3"], 1.0)],
        providers,
        periods: ps,
        ..Default::default()
    };
    curve(&mut m, "n2", "t1", 10.0, -1.0);
    m
}

/// Producer `n1` feeds market `n3` through transit node `n2`; both
/// pipelines have the same binding per-period capacity.
pub fn congested_chain() -> ScenarioModel {
    let ps = periods(&["t1"]);
    let providers = vec![
        ServiceProvider::uniform(ServiceKind::P, at("n1"), &ps, BIG, BIG, 2.0, 1.0),
        ServiceProvider::uniform(ServiceKind::A, on("n1", "n2"), &ps, 2.0, BIG, 0.5, 0.0),
        ServiceProvider::uniform(ServiceKind::A, on("n2", "n3"), &ps, 2.0, BIG, 0.5, 0.0),
    ];
    let mut m = ScenarioModel {
        name: "congested-chain".into(),
        nodes: vec![
            node("n1", true, false, false),
            node("n2", false, false, false),
            node("n3", false, true, false),
        ],
        arcs: vec![pipe("n1", "n2"), pipe("n2", "n3")],
        traders: vec![trader("F1", "n1", &["n2", "n3"], 1.0)],
        providers,
        periods: ps,
        ..Default::default()
    };
    curve(&mut m, "n3", "t1", 10.0, -1.0);
    m
}

/// Two symmetric producers (`n1`, `n2`) supply a hub `n3` and a market
/// `n4` over two periods with seasonal demand. The hub-to-market pipeline
/// is congested and has a detour through `n5`; both the hub and `n5` have
/// storage, the cheaper hub storage being injection-constrained.
///
/// Capacities that bind pin the aggregate flows while leaving the split
/// between the traders open, so per-trader storage and pipeline flows are
/// ambiguous for any market-power weight. Per-trader sales are ambiguous
/// only for price-taking traders.
pub fn hub_market(theta: f64) -> ScenarioModel {
    let ps = periods(&["t1", "t2"]);
    let uni = |kind, loc, cap, linc, quac| ServiceProvider::uniform(kind, loc, &ps, cap, BIG, linc, quac);
    let providers = vec![
        uni(ServiceKind::P, at("n1"), BIG, 2.0, 0.5),
        uni(ServiceKind::P, at("n2"), BIG, 2.0, 0.5),
        uni(ServiceKind::I, at("n3"), 2.0, 0.1, 0.0),
        uni(ServiceKind::X, at("n3"), BIG, 0.1, 0.0),
        uni(ServiceKind::I, at("n5"), BIG, 0.5, 0.0),
        uni(ServiceKind::X, at("n5"), BIG, 0.5, 0.0),
        uni(ServiceKind::A, on("n1", "n3"), BIG, 1.0, 0.0),
        uni(ServiceKind::A, on("n2", "n3"), BIG, 1.0, 0.0),
        uni(ServiceKind::A, on("n3", "n4"), 3.0, 0.5, 0.0),
        uni(ServiceKind::A, on("n3", "n5"), BIG, 0.5, 0.0),
        uni(ServiceKind::A, on("n5", "n4"), BIG, 0.5, 0.0),
    ];
    let reach = ["n3", "n4", "n5"];
    let mut m = ScenarioModel {
        name: format!("hub-market-theta-{theta}"),
        nodes: vec![
            node("n1", true, false, false),
            node("n2", true, false, false),
            node("n3", false, true, true),
            node("n4", false, true, false),
            node("n5", false, false, true),
        ],
        arcs: vec![
            pipe("n1", "n3"),
            pipe("n2", "n3"),
            pipe("n3", "n4"),
            pipe("n3", "n5"),
            pipe("n5", "n4"),
        ],
        traders: vec![trader("F1", "n1", &reach, theta), trader("F2", "n2", &reach, theta)],
        providers,
        periods: ps,
        ..Default::default()
    };
    curve(&mut m, "n3", "t1", 20.0, -1.0);
    curve(&mut m, "n3", "t2", 30.0, -1.0);
    curve(&mut m, "n4", "t1", 25.0, -1.0);
    curve(&mut m, "n4", "t2", 35.0, -1.0);
    m
}

/// Two nodes that each host every facility, joined by a pipeline and an
/// LNG route in both directions; one trader per node, two periods.
pub fn two_nodes_full() -> ScenarioModel {
    let ps = periods(&["t1", "t2"]);
    let uni = |kind, loc, linc, quac| ServiceProvider::uniform(kind, loc, &ps, BIG, BIG, linc, quac);
    let full = |id: &str| Node {
        has_liquefaction: true,
        has_regasification: true,
        ..node(id, true, true, true)
    };
    let mut providers = Vec::new();
    for (n, o) in [("n1", "n2"), ("n2", "n1")] {
        providers.push(uni(ServiceKind::P, at(n), 2.0, 0.5));
        providers.push(uni(ServiceKind::I, at(n), 0.2, 0.0));
        providers.push(uni(ServiceKind::X, at(n), 0.2, 0.0));
        providers.push(uni(ServiceKind::L, at(n), 0.5, 0.0));
        providers.push(uni(ServiceKind::R, at(n), 0.5, 0.0));
        providers.push(uni(ServiceKind::A, on(n, o), 1.0, 0.0));
        providers.push(uni(ServiceKind::B, on(n, o), 0.3, 0.0));
    }
    let ship = |a: &str, b: &str| Arc { from: a.into(), to: b.into(), kind: ArcKind::Ship };
    let mut m = ScenarioModel {
        name: "two-nodes-full".into(),
        nodes: vec![full("n1"), full("n2")],
        arcs: vec![pipe("n1", "n2"), pipe("n2", "n1"), ship("n1", "n2"), ship("n2", "n1")],
        traders: vec![trader("F1", "n1", &["n2"], 0.5), trader("F2", "n2", &["n1"], 0.5)],
        providers,
        periods: ps,
        ..Default::default()
    };
    curve(&mut m, "n1", "t1", 20.0, -1.0);
    curve(&mut m, "n1", "t2", 30.0, -1.5);
    curve(&mut m, "n2", "t1", 25.0, -1.0);
    curve(&mut m, "n2", "t2", 15.0, -0.5);
    m
}

/// Random admissible market: 2–5 nodes, 1–3 traders, 1–2 periods, sparse
/// pipelines with an occasional LNG route, storage, losses, market-power
/// weights and upper flow bounds.
pub fn random_scenario(seed: u64) -> ScenarioModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_nodes = rng.gen_range(2..=5);
    let n_traders = rng.gen_range(1..=3.min(n_nodes));
    let ps: Vec<Period> = if rng.gen_bool(0.5) {
        periods(&["t1"])
    } else {
        vec![
            Period { id: "t1".into(), weight: 1.0 },
            Period { id: "t2".into(), weight: if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.5..2.0) } },
        ]
    };
    let ids: Vec<String> = (1..=n_nodes).map(|i| format!("n{i}")).collect();
    let mut order: Vec<usize> = (0..n_nodes).collect();
    order.shuffle(&mut rng);
    let homes: BTreeSet<usize> = order[..n_traders].iter().copied().collect();

    let mut nodes: Vec<Node> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| Node {
            has_producer: homes.contains(&i),
            has_consumer: !homes.contains(&i) || rng.gen_bool(0.5),
            has_storage: rng.gen_bool(0.2),
            ..Node::bare(id.clone())
        })
        .collect();

    // A random spanning structure keeps most nodes reachable; a few extra
    // arcs create alternative routes.
    let mut arcs: Vec<Arc> = Vec::new();
    for i in 1..n_nodes {
        let j = rng.gen_range(0..i);
        let (a, b) = if rng.gen_bool(0.7) { (j, i) } else { (i, j) };
        arcs.push(pipe(&ids[a], &ids[b]));
    }
    for _ in 0..rng.gen_range(0..=n_nodes / 2 + 1) {
        let (a, b) = (rng.gen_range(0..n_nodes), rng.gen_range(0..n_nodes));
        if a != b && !arcs.iter().any(|x| x.from == ids[a] && x.to == ids[b]) {
            arcs.push(pipe(&ids[a], &ids[b]));
        }
    }
    if n_nodes >= 3 && rng.gen_bool(0.15) {
        let (a, b) = (rng.gen_range(0..n_nodes), rng.gen_range(0..n_nodes));
        if a != b {
            arcs.push(Arc { from: ids[a].clone(), to: ids[b].clone(), kind: ArcKind::Ship });
            nodes[a].has_liquefaction = true;
            nodes[b].has_regasification = true;
        }
    }

    let lossy = rng.gen_bool(0.3);
    let loss = |rng: &mut ChaCha8Rng| if lossy { rng.gen_range(0.9..1.0) } else { 1.0 };
    let mut providers = Vec::new();
    let mut provider = |rng: &mut ChaCha8Rng, kind: ServiceKind, loc: Location, quac: f64| {
        let mut pr = ServiceProvider::uniform(kind, loc, &ps, 0.0, 0.0, 0.0, quac);
        for t in &ps {
            let cap = if rng.gen_bool(0.3) { rng.gen_range(1.0..6.0) } else { 100.0 };
            pr.cap_per_period.insert(t.id.clone(), cap);
            pr.lin_cost.insert(t.id.clone(), (rng.gen_range(0.0..3.0) * 4.0f64).round() / 4.0);
        }
        pr.cap_total = if rng.gen_bool(0.2) { rng.gen_range(2.0..10.0) } else { 1000.0 };
        if !matches!(kind, ServiceKind::P | ServiceKind::X) {
            pr.loss_factor = loss(rng);
        }
        providers.push(pr);
    };
    for n in &nodes {
        if n.has_producer {
            let quac = rng.gen_range(0.2..2.0);
            provider(&mut rng, ServiceKind::P, at(&n.id), quac);
        }
        if n.has_storage {
            provider(&mut rng, ServiceKind::I, at(&n.id), 0.0);
            provider(&mut rng, ServiceKind::X, at(&n.id), 0.0);
        }
        if n.has_liquefaction {
            provider(&mut rng, ServiceKind::L, at(&n.id), 0.0);
        }
        if n.has_regasification {
            provider(&mut rng, ServiceKind::R, at(&n.id), 0.0);
        }
    }
    for a in &arcs {
        let kind = if a.kind == ArcKind::Ship { ServiceKind::B } else { ServiceKind::A };
        provider(&mut rng, kind, on(&a.from, &a.to), 0.0);
    }

    let mut model = ScenarioModel {
        name: format!("random-{seed}"),
        periods: ps.clone(),
        nodes,
        arcs,
        providers,
        ..Default::default()
    };

    for (k, &h) in homes.iter().enumerate() {
        let home = ids[h].clone();
        let mut t = trader(&format!("F{}", k + 1), &home, &[], 0.0);
        t.reachable = ids.iter().filter(|id| **id != home).cloned().collect();
        let connected = model.connected_from_home(&t);
        t.reachable = connected
            .into_iter()
            .filter(|n| *n != home && rng.gen_bool(0.85))
            .collect();
        // Dropping nodes can disconnect others; keep the connected part.
        t.reachable = model.connected_from_home(&t).into_iter().filter(|n| *n != home).collect();
        t.theta_default = match rng.gen_range(0..4) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.gen_range(0.0..1.0),
        };
        if rng.gen_bool(0.2) {
            for n in t.nodes() {
                for p in &ps {
                    if rng.gen_bool(0.3) {
                        t.theta.insert((n.clone(), p.id.clone()), rng.gen_range(0.0..1.0));
                    }
                }
            }
        }
        model.traders.push(t);
    }

    for n in model.nodes.iter().filter(|n| n.has_consumer) {
        for p in &ps {
            let intercept = rng.gen_range(5.0..30.0);
            let slope = -rng.gen_range(0.2..3.0);
            model
                .demand
                .insert((n.id.clone(), p.id.clone()), Demand::Curve(DemandCurve { intercept, slope }));
        }
    }

    if rng.gen_bool(0.15) {
        let t = &model.traders[0];
        let period = ps[0].id.clone();
        if let Some(c) = t.nodes().into_iter().find(|n| model.node(n).is_some_and(|x| x.has_consumer)) {
            model.bounds.push(FlowBound {
                trader: t.id.clone(),
                flow: FlowKind::C,
                location: at(&c),
                period,
                upper: Some(rng.gen_range(0.5..3.0)),
                lower: None,
            });
        }
    }
    model
}
