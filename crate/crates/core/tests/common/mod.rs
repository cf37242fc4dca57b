//! Helpers shared by the integration tests.
#![allow(dead_code)]

use gaseq::assemble::{assemble, LcpSystem};
use gaseq::index::{build_index, Family};
use gaseq::lcp::{solve, Tolerances};
use gaseq::model::{Location, ScenarioModel, ServiceKind};
use gaseq::report::{explore, Exploration};

pub fn system(model: &ScenarioModel) -> LcpSystem {
    assemble(model, &build_index(model)).unwrap()
}

pub fn explored(model: &ScenarioModel) -> (LcpSystem, Exploration) {
    let sys = system(model);
    let tol = Tolerances::default();
    let x = solve(&sys, &tol).unwrap().x;
    let ex = explore(model, &sys, &x, &tol, 1).unwrap();
    (sys, ex)
}

/// Half the diagonal of `M + Mᵀ`, read off the market description.
pub fn expected_diagonal(model: &ScenarioModel, sys: &LcpSystem) -> Vec<f64> {
    sys.index
        .tags()
        .iter()
        .map(|tag| {
            let t = tag.period.as_deref().unwrap_or("");
            match tag.family {
                Family::QP => {
                    let n = Location::Node(tag.n().unwrap().into());
                    model
                        .providers
                        .iter()
                        .find(|p| p.kind == ServiceKind::P && p.location == n)
                        .unwrap()
                        .quac(t)
                }
                Family::QC => {
                    let n = tag.n().unwrap();
                    let slope = model.demand_curve(n, t).unwrap().slope;
                    -model.trader(tag.trader.as_deref().unwrap()).unwrap().theta(n, t) * slope
                }
                Family::LambdaC => 1.0 / model.demand_curve(tag.n().unwrap(), t).unwrap().slope.abs(),
                _ => 0.0,
            }
        })
        .collect()
}

/// Componentwise minimum and maximum over a vertex list.
pub fn hull(vertices: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let p = vertices[0].len();
    (0..p)
        .map(|i| {
            vertices
                .iter()
                .map(|v| v[i])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        })
        .collect()
}

/// Range of `Σ coef·x_i` over a vertex list.
pub fn hull_of(vertices: &[Vec<f64>], terms: &[(usize, f64)]) -> (f64, f64) {
    vertices
        .iter()
        .map(|v| terms.iter().map(|&(i, c)| c * v[i]).sum::<f64>())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

pub fn position(sys: &LcpSystem, label: &str) -> usize {
    sys.index
        .tags()
        .iter()
        .position(|t| t.to_string() == label)
        .unwrap_or_else(|| panic!("no component {label}"))
}
