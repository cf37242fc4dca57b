//! Assembly of the linear complementarity system `Mx + b ⪰ 0, x ⪰ 0,
//! xᵀ(Mx + b) = 0` for a market model.
//!
//! Rows are the stationarity conditions of the traders (one per flow), the
//! capacity constraints of the service providers, the traders' balance
//! constraints and the consumer market clearing conditions. Service prices
//! are substituted by marginal cost plus capacity fees and contracted
//! volumes by the sum of trader flows, so every constraint couples to the
//! flows it restricts through a skew-symmetric pair of entries. Only the
//! production and sales rows carry diagonal terms, and the market clearing
//! rows are divided by the demand slope magnitude.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::index::{BlockLayout, Family, Group, VarTag, VariableIndex};
use crate::model::{Location, ModelError, ScenarioModel, ServiceKind};
use crate::sparse::{DuplicateEntry, SparseMatrix};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("capacity of {kind} provider at {location} is {value} in {period}; assembly needs positive capacities")]
    NonPositiveCapacity {
        kind: ServiceKind,
        location: Location,
        period: String,
        value: f64,
    },
    #[error("no {kind} provider at {location}")]
    MissingProvider { kind: ServiceKind, location: Location },
    #[error("bound targets {0}, which is not a flow of the model")]
    UnknownBoundTarget(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("internal assembly error: {0}")]
    Duplicate(#[from] DuplicateEntry),
}

/// Where a nonzero of `M` or `b` came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub row: usize,
    /// `None` for entries of `b`.
    pub col: Option<usize>,
    pub value: f64,
    pub term: &'static str,
}

/// Scaling applied to one market clearing row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClearingRow {
    pub row: usize,
    /// Positive factor `1/|slope|` the row was multiplied by.
    pub scale: f64,
    pub intercept: f64,
}

#[derive(Clone, Debug)]
pub struct LcpSystem {
    pub m: SparseMatrix,
    pub b: Vec<f64>,
    pub index: VariableIndex,
    pub clearing: Vec<ClearingRow>,
    pub provenance: Vec<Provenance>,
    pub lossless: bool,
}

impl LcpSystem {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn blocks(&self) -> &BlockLayout {
        self.index.blocks()
    }

    /// `Mx + b`.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        self.m.affine(x, &self.b)
    }

    /// Market clearing residuals in price units, `λ − (INT + SLP·Σ_f q^C)`,
    /// undoing the row scaling.
    pub fn clearing_residuals(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let w = self.slack(x);
        self.clearing.iter().map(|c| (c.row, w[c.row] / c.scale)).collect()
    }

    /// Diagonal of `M` (half the diagonal of `M + Mᵀ`).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.m.diag(i)).collect()
    }

    /// Writes `M.mtx`, `b.mtx` and `index.tsv` into `dir`.
    pub fn dump(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("M.mtx"), self.matrix_market())?;
        let mut b = String::from("%%MatrixMarket matrix array real general\n");
        let _ = writeln!(b, "{} 1", self.len());
        for v in &self.b {
            let _ = writeln!(b, "{v:e}");
        }
        std::fs::write(dir.join("b.mtx"), b)?;
        std::fs::write(dir.join("index.tsv"), index_table(&self.index))
    }

    pub fn matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.len(), self.len(), self.m.nnz());
        for (r, c, v) in self.m.iter() {
            let _ = writeln!(s, "{} {} {v:e}", r + 1, c + 1);
        }
        s
    }
}

/// Index sidecar: position followed by the tag columns.
pub fn index_table(index: &VariableIndex) -> String {
    let mut s = String::from("i\tfamily\tkind\ttrader\tn\tm\tt\n");
    for (i, t) in index.tags().iter().enumerate() {
        let _ = writeln!(s, "{i}\t{}", t.columns().join("\t"));
    }
    s
}

struct Builder<'a> {
    index: &'a VariableIndex,
    triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    provenance: Vec<Provenance>,
}

impl Builder<'_> {
    fn pos(&self, tag: &VarTag) -> usize {
        self.index
            .position(tag)
            .unwrap_or_else(|| panic!("index has no entry {tag}"))
    }

    fn diag(&mut self, i: usize, v: f64, term: &'static str) {
        self.triplets.push((i, i, v));
        self.provenance.push(Provenance { row: i, col: Some(i), value: v, term });
    }

    fn constant(&mut self, i: usize, v: f64, term: &'static str) {
        self.b[i] = v;
        if v != 0.0 {
            self.provenance.push(Provenance { row: i, col: None, value: v, term });
        }
    }

    /// Constraint `row` has coefficient `c` on flow `q`; the flow's
    /// stationarity row gets `-c` on the constraint's multiplier.
    fn couple(&mut self, row: usize, q: usize, c: f64, term: &'static str) {
        self.triplets.push((row, q, c));
        self.triplets.push((q, row, -c));
        self.provenance.push(Provenance { row, col: Some(q), value: c, term });
        self.provenance.push(Provenance { row: q, col: Some(row), value: -c, term });
    }
}

/// Assembles `M` and `b` for a validated model.
pub fn assemble(model: &ScenarioModel, index: &VariableIndex) -> Result<LcpSystem, AssemblyError> {
    let p = index.len();
    let mut bld = Builder {
        index,
        triplets: Vec::new(),
        b: vec![0.0; p],
        provenance: Vec::new(),
    };
    let weight: HashMap<&str, f64> = model.periods.iter().map(|t| (t.id.as_str(), t.weight)).collect();
    let provider = |kind: ServiceKind, loc: &Location| {
        model.provider(kind, loc).ok_or_else(|| AssemblyError::MissingProvider {
            kind,
            location: loc.clone(),
        })
    };

    for pr in &model.providers {
        for t in model.period_ids() {
            let cap = pr.cap(t);
            if !(cap > 0.0) {
                return Err(AssemblyError::NonPositiveCapacity {
                    kind: pr.kind,
                    location: pr.location.clone(),
                    period: t.to_string(),
                    value: cap,
                });
            }
        }
        if !(pr.cap_total > 0.0) {
            return Err(AssemblyError::NonPositiveCapacity {
                kind: pr.kind,
                location: pr.location.clone(),
                period: "all periods".into(),
                value: pr.cap_total,
            });
        }
    }

    // Capacity rows: right-hand sides.
    for pr in &model.providers {
        for t in model.period_ids() {
            let row = bld.pos(&VarTag::alpha(pr.kind, pr.location.clone(), Some(t)));
            bld.constant(row, pr.cap(t), "capacity per period");
        }
        let row = bld.pos(&VarTag::alpha(pr.kind, pr.location.clone(), None));
        bld.constant(row, pr.cap_total, "capacity over all periods");
    }

    // Flow rows, with the capacity and balance couplings of each flow.
    for i in 0..p {
        let tag = index.tag(i).clone();
        if tag.family.group() != Group::Q {
            continue;
        }
        let trader = tag.trader.as_deref().expect("flows carry a trader");
        let t = tag.period.as_deref().expect("flows carry a period");
        let w_t = weight[t];
        let phi = |n: &str| VarTag::phi_node(trader, n, t);

        // usage of provider capacity: (kind, location, units per unit flow)
        let mut usage: Vec<(ServiceKind, Location, f64)> = Vec::new();
        // coefficient in a node balance
        let mut balance: Vec<(String, f64)> = Vec::new();

        match tag.family {
            Family::QP => {
                let n = tag.n().unwrap();
                let pr = provider(ServiceKind::P, &Location::Node(n.into()))?;
                bld.diag(i, pr.quac(t), "production cost slope");
                bld.constant(i, pr.linc(t), "production cost");
                usage.push((ServiceKind::P, pr.location.clone(), 1.0));
                balance.push((n.into(), 1.0));
            }
            Family::QI | Family::QX => {
                let n = tag.n().unwrap();
                let kind = if tag.family == Family::QI { ServiceKind::I } else { ServiceKind::X };
                let pr = provider(kind, &Location::Node(n.into()))?;
                bld.constant(i, pr.linc(t), "storage service cost");
                usage.push((kind, pr.location.clone(), 1.0));
                let s_row = bld.pos(&VarTag::phi_storage(trader, n));
                if kind == ServiceKind::I {
                    balance.push((n.into(), -1.0));
                    bld.couple(s_row, i, w_t * pr.loss_factor, "storage balance");
                } else {
                    balance.push((n.into(), 1.0));
                    bld.couple(s_row, i, -w_t, "storage balance");
                }
            }
            Family::QA => {
                let (n, m) = (tag.n().unwrap(), tag.m().unwrap());
                let pr = provider(ServiceKind::A, tag.location.as_ref().unwrap())?;
                bld.constant(i, pr.linc(t), "pipeline cost");
                usage.push((ServiceKind::A, pr.location.clone(), 1.0));
                balance.push((n.into(), -1.0));
                balance.push((m.into(), pr.loss_factor));
            }
            Family::QB => {
                let (n, m) = (tag.n().unwrap(), tag.m().unwrap());
                let ship = provider(ServiceKind::B, tag.location.as_ref().unwrap())?;
                let liq = provider(ServiceKind::L, &Location::Node(n.into()))?;
                let reg = provider(ServiceKind::R, &Location::Node(m.into()))?;
                let (ll, lb, lr) = (liq.loss_factor, ship.loss_factor, reg.loss_factor);
                bld.constant(
                    i,
                    liq.linc(t) / ll + ship.linc(t) + lb * reg.linc(t),
                    "LNG chain cost",
                );
                usage.push((ServiceKind::L, liq.location.clone(), 1.0 / ll));
                usage.push((ServiceKind::B, ship.location.clone(), 1.0));
                usage.push((ServiceKind::R, reg.location.clone(), lb));
                balance.push((n.into(), -1.0 / ll));
                balance.push((m.into(), lb * lr));
            }
            Family::QC => {
                let n = tag.n().unwrap();
                let curve = model.demand_curve(n, t)?;
                let th = model.trader(trader).map(|f| f.theta(n, t)).unwrap_or(0.0);
                bld.diag(i, -th * curve.slope, "market power");
                balance.push((n.into(), -1.0));
                let l_row = bld.pos(&VarTag::lambda(n, t));
                bld.couple(l_row, i, 1.0, "market clearing");
            }
            _ => unreachable!(),
        }

        for (kind, loc, u) in usage {
            let row = bld.pos(&VarTag::alpha(kind, loc.clone(), Some(t)));
            bld.couple(row, i, -u, "capacity per period");
            let row = bld.pos(&VarTag::alpha(kind, loc, None));
            bld.couple(row, i, -w_t * u, "capacity over all periods");
        }
        for (n, c) in balance {
            let row = bld.pos(&phi(&n));
            bld.couple(row, i, c, "node balance");
        }
    }

    // Contract bounds.
    for bnd in &model.bounds {
        let q_tag = VarTag::flow_var(
            Family::of_flow(bnd.flow),
            &bnd.trader,
            bnd.location.clone(),
            &bnd.period,
        );
        let q = index
            .position(&q_tag)
            .ok_or_else(|| AssemblyError::UnknownBoundTarget(q_tag.to_string()))?;
        if let Some(u) = bnd.upper {
            let row = bld.pos(&VarTag::bound(true, bnd.flow, &bnd.trader, bnd.location.clone(), &bnd.period));
            bld.constant(row, u, "upper flow bound");
            bld.couple(row, q, -1.0, "upper flow bound");
        }
        if let Some(l) = bnd.lower {
            let row = bld.pos(&VarTag::bound(false, bnd.flow, &bnd.trader, bnd.location.clone(), &bnd.period));
            bld.constant(row, -l, "lower flow bound");
            bld.couple(row, q, 1.0, "lower flow bound");
        }
    }

    // Market clearing, divided by |slope|.
    let mut clearing = Vec::new();
    for i in index.family_members(Family::LambdaC) {
        let tag = index.tag(i);
        let curve = model.demand_curve(tag.n().unwrap(), tag.period.as_deref().unwrap())?;
        let scale = 1.0 / curve.slope.abs();
        bld.diag(i, scale, "demand slope");
        bld.constant(i, -curve.intercept * scale, "demand intercept");
        clearing.push(ClearingRow { row: i, scale, intercept: curve.intercept });
    }

    let m = SparseMatrix::from_triplets(p, p, &bld.triplets)?;
    Ok(LcpSystem {
        m,
        b: bld.b,
        index: index.clone(),
        clearing,
        provenance: bld.provenance,
        lossless: model.is_lossless(),
    })
}

#[derive(Debug, Error, PartialEq)]
#[error("structural defect in block {block} at ({row}, {col}): {message}")]
pub struct StructuralDefect {
    pub block: &'static str,
    pub row: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sign {
    Zero,
    NonNegative,
    NonPositive,
    Mixed,
}

impl Sign {
    fn of(values: impl IntoIterator<Item = f64>) -> Sign {
        let (mut pos, mut neg) = (false, false);
        for v in values {
            pos |= v > 0.0;
            neg |= v < 0.0;
        }
        match (pos, neg) {
            (false, false) => Sign::Zero,
            (true, false) => Sign::NonNegative,
            (false, true) => Sign::NonPositive,
            (true, true) => Sign::Mixed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StructureReport {
    pub size: usize,
    pub nonzeros: usize,
    /// Flow rows with a zero diagonal entry.
    pub d_zero: usize,
    pub d_positive: usize,
    pub h_min: f64,
    pub h_max: f64,
    /// Sign of the capacity-constraint rows' flow coefficients.
    pub e_sign: Sign,
    /// Sign of the balance rows' flow coefficients.
    pub f_sign: Sign,
    /// Sign of the market clearing rows' flow coefficients.
    pub g_sign: Sign,
    /// Largest `|xᵀMx − (qᵀDq + λᵀHλ)|` relative to `Σ|x_i M_ij x_j|` over
    /// the random probes.
    pub quadratic_identity_error: f64,
    pub probes: usize,
}

const PROBES: usize = 100;
const IDENTITY_TOL: f64 = 1e-12;

/// Checks the block structure the existence and uniqueness arguments rely
/// on: `M + Mᵀ` diagonal, flow diagonal non-negative, price diagonal
/// positive, all other diagonal and inter-multiplier blocks zero, the signs
/// of `b` per block, and the quadratic form identity on random vectors.
pub fn verify_structure(sys: &LcpSystem) -> Result<StructureReport, StructuralDefect> {
    let blocks = sys.blocks().clone();
    let defect = |block, row, col, message: String| StructuralDefect { block, row, col, message };

    for (r, c, v) in sys.m.iter() {
        let (gr, gc) = (blocks.group_of(r), blocks.group_of(c));
        if r == c {
            match gr {
                Group::Q if v < 0.0 => return Err(defect("D", r, c, format!("negative diagonal {v}"))),
                Group::Alpha | Group::Phi => {
                    return Err(defect("multiplier diagonal", r, c, format!("nonzero diagonal {v}")))
                }
                _ => {}
            }
            continue;
        }
        if gr != Group::Q && gc != Group::Q {
            return Err(defect("multiplier coupling", r, c, format!("expected zero, found {v}")));
        }
        if gr == Group::Q && gc == Group::Q {
            return Err(defect("D", r, c, format!("off-diagonal entry {v}")));
        }
        let mirror = sys.m.get(c, r);
        if mirror != -v {
            return Err(defect(
                "M + Mᵀ",
                r,
                c,
                format!("{v} mirrored by {mirror}, sum not zero"),
            ));
        }
    }

    let mut h = Vec::new();
    for i in blocks.lambda.clone() {
        let d = sys.m.diag(i);
        if !(d > 0.0) {
            return Err(defect("H", i, i, format!("diagonal {d} not positive")));
        }
        h.push(d);
    }
    let d: Vec<f64> = blocks.q.clone().map(|i| sys.m.diag(i)).collect();

    for i in 0..sys.len() {
        let v = sys.b[i];
        let tag = sys.index.tag(i);
        let bad = match tag.family {
            Family::QP | Family::QI | Family::QX | Family::QA | Family::QB | Family::QC => v < 0.0,
            Family::Alpha | Family::AlphaTotal => !(v > 0.0),
            Family::UpperBound => v < 0.0,
            Family::LowerBound => v > 0.0,
            Family::PhiNode | Family::PhiStorage => v != 0.0,
            Family::LambdaC => {
                let intercept = sys.clearing.iter().find(|c| c.row == i).map_or(0.0, |c| c.intercept);
                if intercept > 0.0 {
                    !(v < 0.0)
                } else {
                    v != 0.0
                }
            }
        };
        if bad || !v.is_finite() {
            return Err(defect("b", i, i, format!("{} has constant {v}", tag)));
        }
    }

    let coupling_sign = |rows: std::ops::Range<usize>| {
        Sign::of(rows.flat_map(|r| {
            let q = blocks.q.clone();
            sys.m.row(r).filter(move |(c, _)| q.contains(c)).map(|(_, v)| v).collect::<Vec<_>>()
        }))
    };
    let capacity_rows = sys
        .index
        .family_members(Family::Alpha)
        .chain(sys.index.family_members(Family::AlphaTotal))
        .collect::<Vec<_>>();
    let e_sign = Sign::of(capacity_rows.iter().flat_map(|&r| {
        let q = blocks.q.clone();
        sys.m.row(r).filter(move |(c, _)| q.contains(c)).map(|(_, v)| v).collect::<Vec<_>>()
    }));
    let f_sign = coupling_sign(blocks.phi.clone());
    let g_sign = coupling_sign(blocks.lambda.clone());

    let quadratic_identity_error = quadratic_identity_probe(sys, PROBES, 0x5eed);
    if quadratic_identity_error > IDENTITY_TOL {
        return Err(defect(
            "M",
            0,
            0,
            format!("quadratic form identity off by {quadratic_identity_error:e} (relative)"),
        ));
    }

    Ok(StructureReport {
        size: sys.len(),
        nonzeros: sys.m.nnz(),
        d_zero: d.iter().filter(|v| **v == 0.0).count(),
        d_positive: d.iter().filter(|v| **v > 0.0).count(),
        h_min: h.iter().copied().fold(f64::INFINITY, f64::min),
        h_max: h.iter().copied().fold(0.0, f64::max),
        e_sign,
        f_sign,
        g_sign,
        quadratic_identity_error,
        probes: PROBES,
    })
}

/// Largest relative deviation of `xᵀMx` from `Σ M_ii x_i²` over `probes`
/// random vectors.
pub fn quadratic_identity_probe(sys: &LcpSystem, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let x: Vec<f64> = (0..sys.len()).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let (mut full, mut scale) = (0.0, 0.0);
        for (r, c, v) in sys.m.iter() {
            let term = x[r] * v * x[c];
            full += term;
            scale += term.abs();
        }
        let diagonal: f64 = (0..sys.len()).map(|i| sys.m.diag(i) * x[i] * x[i]).sum();
        if scale > 0.0 {
            worst = worst.max((full - diagonal).abs() / scale);
        }
    }
    worst
}

/// Constructive feasible point: flows zero, capacity fees and node balance
/// duals at the largest demand intercept, storage duals zero, prices at
/// their intercepts.
pub fn feasible_seed(sys: &LcpSystem) -> Result<Vec<f64>, StructuralDefect> {
    let k = sys.clearing.iter().map(|c| c.intercept).fold(0.0, f64::max);
    let mut x = vec![0.0; sys.len()];
    for (i, tag) in sys.index.tags().iter().enumerate() {
        x[i] = match tag.family {
            Family::Alpha | Family::AlphaTotal | Family::PhiNode => k,
            _ => 0.0,
        };
    }
    for c in &sys.clearing {
        x[c.row] = c.intercept;
    }
    let w = sys.slack(&x);
    if let Some(i) = (0..sys.len()).find(|&i| w[i] < 0.0) {
        return Err(StructuralDefect {
            block: "seed",
            row: i,
            col: i,
            message: format!("seed violates {} by {}", sys.index.tag(i), -w[i]),
        });
    }
    Ok(x)
}
