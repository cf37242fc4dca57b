//! Command-line driver. Every command computes all of its outputs before
//! writing any file, so a failed run leaves the output directory untouched.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use thiserror::Error;

use crate::artifacts::{self, ArtifactError};
use crate::assemble::{assemble, verify_structure, AssemblyError, LcpSystem, StructuralDefect};
use crate::index::build_index;
use crate::lcp::{solve, EquilibriumSolution, Residuals, SolveError, SolverTrace, Tolerances};
use crate::model::{validate_scenario, ScenarioFile, ScenarioFileError, ScenarioModel, ValidationReport};
use crate::polytope::{PolytopeError, TheoryViolation};
use crate::report::{compare_scenarios, explore, recover_services, ComparisonError, Exploration};

/// Process exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 2;
    pub const VALIDATION: u8 = 3;
    pub const SOLVER: u8 = 4;
    pub const THEORY: u8 = 5;
    pub const IO: u8 = 6;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Check scenario admissibility.
    Validate,
    /// Compute one equilibrium.
    Solve,
    /// Bound every variable over the set of equilibria.
    Explore,
    /// Explore and also write a human-readable summary.
    Report,
    /// Explore two scenarios and set their intervals side by side.
    Compare,
}

#[derive(Clone, Debug, Parser)]
#[command(name = "gaseq", version, about = "Gas market equilibria and their non-uniqueness")]
pub struct RunConfig {
    /// Scenario file (TOML). Repeat for `compare`.
    #[arg(long = "scenario", required = true)]
    pub scenarios: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub command: Command,
    /// Absolute feasibility tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol_feas: f64,
    /// Complementarity gap tolerance, relative to 1 + max|b|.
    #[arg(long, default_value_t = 1e-8)]
    pub tol_comp: f64,
    /// Relative interval width below which a variable counts as unique.
    #[arg(long, default_value_t = 1e-6)]
    pub tol_unique: f64,
    /// Worker threads for the interval sweep; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long, default_value = "gaseq-out")]
    pub out: PathBuf,
    /// Saved solution to explore instead of solving again.
    #[arg(long)]
    pub base: Option<PathBuf>,
}

impl RunConfig {
    pub fn tolerances(&self) -> Result<Tolerances, CliError> {
        for (name, v) in [("--tol-feas", self.tol_feas), ("--tol-comp", self.tol_comp), ("--tol-unique", self.tol_unique)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Usage(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Tolerances { feasibility: self.tol_feas, complementarity: self.tol_comp, uniqueness: self.tol_unique })
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioFileError),
    #[error("scenario {scenario} is not admissible:\n{report}")]
    Validation { scenario: String, report: ValidationReport },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("assembled system breaks its expected structure: {0:?}")]
    Structure(StructuralDefect),
    #[error("solver failed: {0}")]
    Solve(#[from] SolveError),
    #[error("base solution residuals {0:?} exceed tolerance; nothing explored")]
    BaseResiduals(Residuals),
    #[error("cannot use saved solution: {0}")]
    Base(#[from] ArtifactError),
    #[error("{0}")]
    Theory(#[from] TheoryViolation),
    #[error("comparison refused: {0}")]
    Comparison(#[from] ComparisonError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Comparison(_) => exit::USAGE,
            CliError::Scenario(ScenarioFileError::Io { .. }) => exit::IO,
            CliError::Scenario(_) | CliError::Validation { .. } | CliError::Assembly(_) => exit::VALIDATION,
            CliError::Solve(_) | CliError::BaseResiduals(_) => exit::SOLVER,
            CliError::Theory(TheoryViolation::Polytope(PolytopeError::Lp(_) | PolytopeError::NotASolution(_))) => {
                exit::SOLVER
            }
            CliError::Structure(_) | CliError::Theory(_) => exit::THEORY,
            CliError::Base(_) | CliError::Io { .. } => exit::IO,
        }
    }
}

/// Files written and text meant for standard output.
#[derive(Debug, Default)]
pub struct RunSummary {
    pub written: Vec<PathBuf>,
    pub stdout: String,
}

struct Prepared {
    model: ScenarioModel,
    sys: LcpSystem,
}

fn load(path: &Path) -> Result<ScenarioModel, CliError> {
    let model = ScenarioFile::load(path)?;
    let report = validate_scenario(&model);
    if !report.is_admissible() {
        return Err(CliError::Validation { scenario: path.display().to_string(), report });
    }
    Ok(model)
}

fn prepare(path: &Path) -> Result<Prepared, CliError> {
    let model = load(path)?;
    let sys = assemble(&model, &build_index(&model))?;
    verify_structure(&sys).map_err(CliError::Structure)?;
    Ok(Prepared { model, sys })
}

fn base_solution(p: &Prepared, base: Option<&Path>, tol: &Tolerances) -> Result<EquilibriumSolution, CliError> {
    let Some(path) = base else {
        return Ok(solve(&p.sys, tol)?);
    };
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let x = artifacts::parse_solution(&text, &p.sys.index)?;
    let residuals = Residuals::of(&p.sys, &x);
    if !residuals.within(tol) {
        return Err(CliError::BaseResiduals(residuals));
    }
    Ok(EquilibriumSolution { x, residuals, trace: SolverTrace::default() })
}

fn name_of(p: &Prepared, path: &Path) -> String {
    if p.model.name.is_empty() {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    } else {
        p.model.name.clone()
    }
}

fn explored(path: &Path, cfg: &RunConfig, tol: &Tolerances) -> Result<(Prepared, EquilibriumSolution, Exploration), CliError> {
    let p = prepare(path)?;
    let sol = base_solution(&p, cfg.base.as_deref(), tol)?;
    let mut ex = explore(&p.model, &p.sys, &sol.x, tol, cfg.jobs)?;
    ex.scenario = name_of(&p, path);
    Ok((p, sol, ex))
}

fn recovered_tsv(p: &Prepared, x: &[f64]) -> String {
    let rec = recover_services(x, &p.sys, &p.model);
    let mut out = String::from("kind\tlocation\tt\tvolume\tprice\tmarginal_cost\n");
    for s in rec.services {
        out.push_str(&format!(
            "{}\t{}\t{}\t{:?}\t{:?}\t{:?}\n",
            s.kind.letter(),
            s.location,
            s.period,
            s.volume,
            s.price,
            s.marginal_cost
        ));
    }
    out.push_str("\nnode\tt\twholesale_price\n");
    for w in rec.wholesale {
        out.push_str(&format!("{}\t{}\t{:?}\n", w.node, w.period, w.price));
    }
    out
}

/// Runs one command. On error nothing has been written.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    let tol = cfg.tolerances()?;
    let single = || -> Result<&Path, CliError> {
        match cfg.scenarios.as_slice() {
            [one] => Ok(one.as_path()),
            _ => Err(CliError::Usage(format!("{:?} takes exactly one --scenario", cfg.command))),
        }
    };
    if cfg.base.is_some() && !matches!(cfg.command, Command::Explore | Command::Report) {
        return Err(CliError::Usage("--base applies to explore and report only".into()));
    }

    let mut files: Vec<(&str, String)> = Vec::new();
    let mut stdout = String::new();
    match cfg.command {
        Command::Validate => {
            for path in &cfg.scenarios {
                load(path)?;
                stdout.push_str(&format!("{}: admissible\n", path.display()));
            }
        }
        Command::Solve => {
            let path = single()?;
            let p = prepare(path)?;
            let sol = solve(&p.sys, &tol)?;
            let name = name_of(&p, path);
            files.push(("solution.tsv", artifacts::solution_tsv(&name, &p.sys.index, &sol)));
            files.push(("recovered.tsv", recovered_tsv(&p, &sol.x)));
            stdout.push_str(&format!(
                "{name}: solved {} components in {} pivots, relative gap {:e}\n",
                p.sys.len(),
                sol.trace.pivots,
                sol.residuals.relative_gap
            ));
        }
        Command::Explore | Command::Report => {
            let path = single()?;
            let (p, sol, ex) = explored(path, cfg, &tol)?;
            files.push(("solution.tsv", artifacts::solution_tsv(&ex.scenario, &p.sys.index, &sol)));
            files.push(("intervals.tsv", artifacts::intervals_tsv(&ex)));
            files.push(("services.tsv", artifacts::services_tsv(&ex)));
            files.push(("report.json", artifacts::report_json(&ex)));
            if cfg.command == Command::Report {
                let text = artifacts::report_text(&ex);
                stdout.push_str(&text);
                files.push(("report.txt", text));
            } else {
                stdout.push_str(&format!(
                    "{}: {} components, {} ambiguous\n",
                    ex.scenario,
                    ex.tags.len(),
                    ex.uniqueness.ambiguous
                ));
            }
        }
        Command::Compare => {
            let [a, b] = cfg.scenarios.as_slice() else {
                return Err(CliError::Usage("compare takes exactly two --scenario".into()));
            };
            let (_, _, ea) = explored(a, cfg, &tol)?;
            let (_, _, eb) = explored(b, cfg, &tol)?;
            let cmp = compare_scenarios(&ea, &eb, &tol)?;
            let text = artifacts::comparison_text(&cmp);
            stdout.push_str(&text);
            files.push(("comparison.tsv", artifacts::comparison_tsv(&cmp)));
            files.push(("comparison.txt", text));
        }
    }

    let mut written = Vec::new();
    if !files.is_empty() {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        std::fs::create_dir_all(&cfg.out).map_err(io(&cfg.out))?;
        for (name, content) in files {
            let path = cfg.out.join(name);
            std::fs::write(&path, content).map_err(io(&path))?;
            written.push(path);
        }
    }
    Ok(RunSummary { written, stdout })
}
