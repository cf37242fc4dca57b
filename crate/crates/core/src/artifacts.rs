//! On-disk formats: the solution dump, interval and service tables, the
//! human report and the comparison files.
//!
//! Machine outputs print numbers at full round-trip precision; the human
//! report rounds to three significant digits.

use std::fmt::Write as _;

use serde_json::json;
use thiserror::Error;

use crate::index::{VarTag, VariableIndex};
use crate::lcp::{EquilibriumSolution, Residuals};
use crate::report::{Exploration, ScenarioComparison};

#[derive(Debug, Error, PartialEq)]
pub enum ArtifactError {
    #[error("solution file line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("solution file has {found} components, scenario has {expected}")]
    Size { found: usize, expected: usize },
    #[error("solution file component {index} is {found}, scenario has {expected}")]
    Tag { index: usize, found: String, expected: String },
}

/// Rounds to three significant digits for display.
pub fn sig3(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-4..=6).contains(&mag) {
        return format!("{v:.2e}");
    }
    let decimals = (2 - mag).max(0) as usize;
    let step = 10f64.powi(mag - 2);
    let rounded = (v / step).round() * step;
    let s = format!("{rounded:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0".into()
    } else {
        s
    }
}

const TAG_HEADER: &str = "family\tkind\ttrader\tn\tm\tt";

fn tag_cols(tag: &VarTag) -> String {
    tag.columns().join("\t")
}

pub fn solution_tsv(scenario: &str, index: &VariableIndex, sol: &EquilibriumSolution) -> String {
    let r = &sol.residuals;
    let mut out = String::new();
    writeln!(out, "# scenario: {scenario}").unwrap();
    writeln!(out, "# components: {}", index.len()).unwrap();
    writeln!(out, "# feasibility: {:?}", r.feasibility).unwrap();
    writeln!(out, "# nonnegativity: {:?}", r.nonnegativity).unwrap();
    writeln!(out, "# relative_gap: {:?}", r.relative_gap).unwrap();
    writeln!(out, "# pivots: {}", sol.trace.pivots).unwrap();
    writeln!(out, "i\t{TAG_HEADER}\tvalue").unwrap();
    for (i, (tag, v)) in index.tags().iter().zip(&sol.x).enumerate() {
        writeln!(out, "{i}\t{}\t{v:?}", tag_cols(tag)).unwrap();
    }
    out
}

/// Reads a solution dump and checks it lists exactly the components of
/// `index`, in order.
pub fn parse_solution(text: &str, index: &VariableIndex) -> Result<Vec<f64>, ArtifactError> {
    let mut x = Vec::with_capacity(index.len());
    let rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1);
    for (n, line) in rows {
        let bad = |message: &str| ArtifactError::Malformed { line: n + 1, message: message.into() };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 8 {
            return Err(bad("expected 8 tab-separated columns"));
        }
        let tag = VarTag::from_columns(&cols[1..7]).ok_or_else(|| bad("unreadable component tag"))?;
        let k = x.len();
        if k >= index.len() {
            return Err(ArtifactError::Size { found: k + 1, expected: index.len() });
        }
        if &tag != index.tag(k) {
            return Err(ArtifactError::Tag { index: k, found: tag.to_string(), expected: index.tag(k).to_string() });
        }
        x.push(cols[7].parse::<f64>().map_err(|_| bad("unreadable value"))?);
    }
    if x.len() != index.len() {
        return Err(ArtifactError::Size { found: x.len(), expected: index.len() });
    }
    Ok(x)
}

pub fn intervals_tsv(ex: &Exploration) -> String {
    let mut out = format!("i\t{TAG_HEADER}\tbase\tmin\tmax\twidth\tclass\tunbounded\n");
    for (iv, class) in ex.intervals.iter().zip(&ex.uniqueness.classes) {
        let (max, width) = if iv.unbounded_above {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (iv.max, iv.width())
        };
        writeln!(
            out,
            "{}\t{}\t{:?}\t{:?}\t{:?}\t{:?}\t{}\t{}",
            iv.index,
            tag_cols(&ex.tags[iv.index]),
            iv.base,
            iv.min,
            max,
            width,
            class.label(),
            iv.unbounded_above
        )
        .unwrap();
    }
    out
}

pub fn services_tsv(ex: &Exploration) -> String {
    let mut out = String::from(
        "kind\tlocation\tt\tvolume\tvolume_min\tvolume_max\tvolume_unique\tprice\tprice_min\tprice_max\tprice_unique\n",
    );
    for s in &ex.services {
        let (v, p) = (&s.volume, &s.price);
        writeln!(
            out,
            "{}\t{}\t{}\t{:?}\t{:?}\t{:?}\t{}\t{:?}\t{:?}\t{:?}\t{}",
            s.kind.letter(),
            s.location,
            s.period,
            v.base,
            v.min,
            if v.unbounded { f64::INFINITY } else { v.max },
            v.unique,
            p.base,
            p.min,
            if p.unbounded { f64::INFINITY } else { p.max },
            p.unique
        )
        .unwrap();
    }
    out
}

fn residuals_json(r: &Residuals) -> serde_json::Value {
    json!({
        "feasibility": r.feasibility,
        "nonnegativity": r.nonnegativity,
        "gap": r.gap,
        "relative_gap": r.relative_gap,
    })
}

pub fn report_json(ex: &Exploration) -> String {
    let intervals: Vec<_> = ex
        .intervals
        .iter()
        .zip(&ex.uniqueness.classes)
        .map(|(iv, c)| {
            json!({
                "tag": ex.tags[iv.index].to_string(),
                "base": iv.base,
                "min": iv.min,
                "max": if iv.unbounded_above { None } else { Some(iv.max) },
                "class": c.label(),
                "unbounded_above": iv.unbounded_above,
            })
        })
        .collect();
    let doc = json!({
        "scenario": ex.scenario,
        "components": ex.tags.len(),
        "residuals": residuals_json(&ex.residuals),
        "counts": {
            "predicted_unique": ex.uniqueness.predicted,
            "empirically_unique": ex.uniqueness.empirical,
            "ambiguous": ex.uniqueness.ambiguous,
        },
        "groups": ex.groups,
        "checks": ex.uniqueness.aggregates,
        "services": ex.services,
        "intervals": intervals,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("plain JSON values");
    s.push('\n');
    s
}

pub fn report_text(ex: &Exploration) -> String {
    let u = &ex.uniqueness;
    let mut out = String::new();
    writeln!(out, "scenario {}: {} components", ex.scenario, ex.tags.len()).unwrap();
    writeln!(
        out,
        "  {} fixed by the quadratic terms, {} unique on inspection, {} ambiguous",
        u.predicted, u.empirical, u.ambiguous
    )
    .unwrap();
    writeln!(
        out,
        "  base point: infeasibility {}, relative gap {}",
        sig3(ex.residuals.feasibility.max(ex.residuals.nonnegativity)),
        sig3(ex.residuals.relative_gap)
    )
    .unwrap();
    writeln!(out).unwrap();
    writeln!(out, "Maximum difference between equilibria").unwrap();
    writeln!(out, "{:<9}{:>8}{:>11}{:>11}  attained by", "group", "members", "max diff", "max value").unwrap();
    for g in &ex.groups {
        if g.members == 0 {
            writeln!(out, "{:<9}{:>8}{:>11}{:>11}  -", g.group, 0, "-", "-").unwrap();
            continue;
        }
        writeln!(
            out,
            "{:<9}{:>8}{:>11}{:>11}  {}",
            g.group,
            g.members,
            sig3(g.max_width),
            sig3(g.max_value),
            g.attained_by.as_deref().unwrap_or("-")
        )
        .unwrap();
    }
    if !u.aggregates.is_empty() {
        writeln!(out).unwrap();
        writeln!(out, "Uniqueness checks").unwrap();
        for a in &u.aggregates {
            writeln!(
                out,
                "  {:<6} {} = {} on [{}, {}]",
                if a.unique { "ok" } else { "BREACH" },
                a.label,
                sig3(a.base),
                sig3(a.min),
                sig3(a.max)
            )
            .unwrap();
        }
    }
    out
}

pub fn comparison_tsv(cmp: &ScenarioComparison) -> String {
    let mut out = String::from("tag\ta_min\ta_max\tb_min\tb_max\ta_class\tb_class\toverlap\n");
    for r in &cmp.rows {
        writeln!(
            out,
            "{}\t{:?}\t{:?}\t{:?}\t{:?}\t{}\t{}\t{}",
            r.tag,
            r.a_min,
            r.a_max,
            r.b_min,
            r.b_max,
            r.a_class.label(),
            r.b_class.label(),
            r.overlap
        )
        .unwrap();
    }
    out
}

/// Side-by-side extremes per component. Overlapping intervals are marked
/// as such and nothing more is said about them.
pub fn comparison_text(cmp: &ScenarioComparison) -> String {
    let width = cmp.rows.iter().map(|r| r.tag.len()).max().unwrap_or(3).max(3);
    let mut out = String::new();
    writeln!(out, "a = {}, b = {}", cmp.a, cmp.b).unwrap();
    writeln!(
        out,
        "{:<width$}{:>10}{:>10}{:>10}{:>10}  intervals",
        "component", "a min", "a max", "b min", "b max"
    )
    .unwrap();
    for r in &cmp.rows {
        writeln!(
            out,
            "{:<width$}{:>10}{:>10}{:>10}{:>10}  {}",
            r.tag,
            sig3(r.a_min),
            sig3(r.a_max),
            sig3(r.b_min),
            sig3(r.b_max),
            if r.overlap { "overlap" } else { "disjoint" }
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assemble::assemble;
    use crate::index::build_index;
    use crate::lcp::{solve, Tolerances};
    use crate::scenarios;

    #[test]
    fn three_significant_digits() {
        assert_eq!(sig3(8.0 / 3.0), "2.67");
        assert_eq!(sig3(186.4), "186");
        assert_eq!(sig3(2656.0), "2660");
        assert_eq!(sig3(0.0123456), "0.0123");
        assert_eq!(sig3(-7.006), "-7.01");
        assert_eq!(sig3(0.0), "0");
        assert_eq!(sig3(1e-16), "1.00e-16");
        assert_eq!(sig3(f64::INFINITY), "inf");
    }

    #[test]
    fn solution_round_trips() {
        let model = scenarios::two_paths();
        let index = build_index(&model);
        let sys = assemble(&model, &index).unwrap();
        let sol = solve(&sys, &Tolerances::default()).unwrap();
        let text = solution_tsv("two_paths", &index, &sol);
        assert_eq!(parse_solution(&text, &index).unwrap(), sol.x);
    }

    #[test]
    fn solution_from_another_scenario_is_refused() {
        let a = scenarios::two_paths();
        let b = scenarios::congested_chain();
        let (ia, ib) = (build_index(&a), build_index(&b));
        let sol = solve(&assemble(&a, &ia).unwrap(), &Tolerances::default()).unwrap();
        let text = solution_tsv("two_paths", &ia, &sol);
        assert!(parse_solution(&text, &ib).is_err());
    }

    #[test]
    fn truncated_solution_is_refused() {
        let model = scenarios::monopoly(10.0, -1.0, 2.0, 1.0, 1.0);
        let index = build_index(&model);
        let sol = solve(&assemble(&model, &index).unwrap(), &Tolerances::default()).unwrap();
        let text = solution_tsv("m", &index, &sol);
        let cut: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
        assert_eq!(parse_solution(&cut, &index), Err(ArtifactError::Size { found: 5, expected: 6 }));
    }
}
