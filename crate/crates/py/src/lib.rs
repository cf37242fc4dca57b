//! Python bindings: load and validate scenarios, solve for one equilibrium,
//! bound every variable over the solution set and compare two scenarios.

use std::path::PathBuf;

use gaseq::artifacts;
use gaseq::assemble::{assemble, verify_structure, LcpSystem};
use gaseq::index::build_index;
use gaseq::lcp::{solve, EquilibriumSolution, Tolerances};
use gaseq::model::{validate_scenario, ScenarioFile, ScenarioModel};
use gaseq::report::{compare_scenarios, explore, recover_services, Exploration};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(pygaseq, GaseqError, PyException);
create_exception!(pygaseq, ValidationError, GaseqError);
create_exception!(pygaseq, SolverError, GaseqError);
create_exception!(pygaseq, TheoryViolation, GaseqError);

fn tolerances(feas: f64, comp: f64, unique: f64) -> PyResult<Tolerances> {
    if [feas, comp, unique].iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(Tolerances { feasibility: feas, complementarity: comp, uniqueness: unique })
    } else {
        Err(GaseqError::new_err("tolerances must be positive"))
    }
}

/// A market scenario read from TOML.
#[pyclass(frozen, module = "pygaseq")]
struct Scenario {
    model: ScenarioModel,
}

impl Scenario {
    fn system(&self) -> PyResult<LcpSystem> {
        let report = validate_scenario(&self.model);
        if !report.is_admissible() {
            return Err(ValidationError::new_err(report.to_string()));
        }
        let sys = assemble(&self.model, &build_index(&self.model)).map_err(|e| ValidationError::new_err(e.to_string()))?;
        verify_structure(&sys).map_err(|d| TheoryViolation::new_err(format!("{d:?}")))?;
        Ok(sys)
    }
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let model = ScenarioFile::load(&path).map_err(|e| ValidationError::new_err(e.to_string()))?;
        Ok(Scenario { model })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let model = ScenarioFile::parse(text)
            .and_then(ScenarioFile::into_model)
            .map_err(|e| ValidationError::new_err(e.to_string()))?;
        Ok(Scenario { model })
    }

    fn to_toml(&self) -> PyResult<String> {
        ScenarioFile::from_model(&self.model).to_toml().map_err(|e| GaseqError::new_err(e.to_string()))
    }

    #[getter]
    fn name(&self) -> String {
        self.model.name.clone()
    }

    /// Admissibility violations as `(path, message)` pairs; empty when admissible.
    fn validate(&self) -> Vec<(String, String)> {
        validate_scenario(&self.model).violations.into_iter().map(|v| (v.path, v.message)).collect()
    }

    /// Labels of the equilibrium vector in solver order.
    fn labels(&self) -> PyResult<Vec<String>> {
        Ok(self.system()?.index.tags().iter().map(|t| t.to_string()).collect())
    }

    #[pyo3(signature = (tol_feas = 1e-9, tol_comp = 1e-8))]
    fn solve(&self, py: Python<'_>, tol_feas: f64, tol_comp: f64) -> PyResult<Solution> {
        let tol = tolerances(tol_feas, tol_comp, 1e-6)?;
        let sys = self.system()?;
        let sol = py.detach(|| solve(&sys, &tol)).map_err(|e| SolverError::new_err(e.to_string()))?;
        Ok(Solution { name: self.model.name.clone(), model: self.model.clone(), sys, sol })
    }

    #[pyo3(signature = (jobs = 0, tol_feas = 1e-9, tol_comp = 1e-8, tol_unique = 1e-6))]
    fn explore(&self, py: Python<'_>, jobs: usize, tol_feas: f64, tol_comp: f64, tol_unique: f64) -> PyResult<Explored> {
        let tol = tolerances(tol_feas, tol_comp, tol_unique)?;
        let sys = self.system()?;
        let model = &self.model;
        let mut ex = py.detach(|| -> PyResult<Exploration> {
            let sol = solve(&sys, &tol).map_err(|e| SolverError::new_err(e.to_string()))?;
            explore(model, &sys, &sol.x, &tol, jobs).map_err(|e| TheoryViolation::new_err(e.to_string()))
        })?;
        ex.scenario = model.name.clone();
        Ok(Explored { ex, tol })
    }
}

/// One equilibrium with its residuals.
#[pyclass(frozen, module = "pygaseq")]
struct Solution {
    name: String,
    model: ScenarioModel,
    sys: LcpSystem,
    sol: EquilibriumSolution,
}

#[pymethods]
impl Solution {
    #[getter]
    fn x(&self) -> Vec<f64> {
        self.sol.x.clone()
    }

    #[getter]
    fn pivots(&self) -> usize {
        self.sol.trace.pivots
    }

    /// `(feasibility, nonnegativity, gap, relative_gap)`.
    #[getter]
    fn residuals(&self) -> (f64, f64, f64, f64) {
        let r = &self.sol.residuals;
        (r.feasibility, r.nonnegativity, r.gap, r.relative_gap)
    }

    fn value(&self, label: &str) -> PyResult<f64> {
        self.sys
            .index
            .tags()
            .iter()
            .position(|t| t.to_string() == label)
            .map(|i| self.sol.x[i])
            .ok_or_else(|| GaseqError::new_err(format!("no variable {label}")))
    }

    /// Services as `(kind, location, period, volume, price, marginal_cost)`.
    fn services(&self) -> Vec<(String, String, String, f64, f64, f64)> {
        recover_services(&self.sol.x, &self.sys, &self.model)
            .services
            .into_iter()
            .map(|s| (s.kind.letter().to_string(), s.location.to_string(), s.period, s.volume, s.price, s.marginal_cost))
            .collect()
    }

    fn to_tsv(&self) -> String {
        artifacts::solution_tsv(&self.name, &self.sys.index, &self.sol)
    }
}

/// Intervals of every variable and service over the solution set.
#[pyclass(frozen, module = "pygaseq")]
struct Explored {
    ex: Exploration,
    tol: Tolerances,
}

#[pymethods]
impl Explored {
    /// `(label, base, min, max, class)` per component.
    fn intervals(&self) -> Vec<(String, f64, f64, f64, &'static str)> {
        self.ex
            .tags
            .iter()
            .zip(&self.ex.intervals)
            .map(|(t, iv)| (t.to_string(), iv.base, iv.min, iv.max, iv.class.label()))
            .collect()
    }

    /// `(label, volume_min, volume_max, price_min, price_max)` per service.
    fn services(&self) -> Vec<(String, f64, f64, f64, f64)> {
        self.ex
            .services
            .iter()
            .map(|s| (s.label(), s.volume.min, s.volume.max, s.price.min, s.price.max))
            .collect()
    }

    /// `(group, max_width, attained_by)` rows of the difference table.
    fn groups(&self) -> Vec<(&'static str, f64, Option<String>)> {
        self.ex.groups.iter().map(|g| (g.group, g.max_width, g.attained_by.clone())).collect()
    }

    #[getter]
    fn ambiguous(&self) -> usize {
        self.ex.uniqueness.ambiguous
    }

    fn report_text(&self) -> String {
        artifacts::report_text(&self.ex)
    }

    fn report_json(&self) -> String {
        artifacts::report_json(&self.ex)
    }

    /// Side-by-side intervals `(label, a_min, a_max, b_min, b_max, overlap)`.
    fn compare(&self, other: &Explored) -> PyResult<Vec<(String, f64, f64, f64, f64, bool)>> {
        let cmp = compare_scenarios(&self.ex, &other.ex, &self.tol).map_err(|e| GaseqError::new_err(e.to_string()))?;
        Ok(cmp.rows.into_iter().map(|r| (r.tag, r.a_min, r.a_max, r.b_min, r.b_max, r.overlap)).collect())
    }
}

#[pymodule]
fn pygaseq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<Scenario>()?;
    m.add_class::<Solution>()?;
    m.add_class::<Explored>()?;
    m.add("GaseqError", py.get_type::<GaseqError>())?;
    m.add("ValidationError", py.get_type::<ValidationError>())?;
    m.add("SolverError", py.get_type::<SolverError>())?;
    m.add("TheoryViolation", py.get_type::<TheoryViolation>())?;
    Ok(())
}
