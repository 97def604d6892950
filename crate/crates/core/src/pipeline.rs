//! End-to-end run: parse, enumerate, constrain, solve, report.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::constraints::{build_constraint_set, ConstraintPolicy};
use crate::error::Result;
use crate::input::{parse_portfolio, ParseOptions};
use crate::model::{enumerate_outcomes, Company};
use crate::solver::{solve, SolverConfig};
use crate::stats::{compute_report_with_thresholds, AllocationReport, DEFAULT_LOSS_THRESHOLDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Text,
    Structured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input_path: PathBuf,
    pub policy: ConstraintPolicy,
    pub parse: ParseOptions,
    pub solver: SolverConfig,
    pub output_format: OutputFormat,
    pub exceedance_thresholds: Vec<f64>,
}

impl RunConfig {
    pub fn new(input_path: impl Into<PathBuf>) -> Self {
        RunConfig {
            input_path: input_path.into(),
            policy: ConstraintPolicy::default(),
            parse: ParseOptions::default(),
            solver: SolverConfig::default(),
            output_format: OutputFormat::Text,
            exceedance_thresholds: DEFAULT_LOSS_THRESHOLDS.to_vec(),
        }
    }
}

/// Solver provenance for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub num_companies: usize,
    pub num_outcomes: usize,
    pub num_constraints: usize,
    pub constraints: Vec<String>,
    pub systems_attempted: usize,
    pub systems_converged: usize,
    pub viable_count: usize,
    pub selected_mask: u64,
    pub active_constraints: Vec<String>,
    pub selected_iterations: usize,
    pub selected_residual_norm: f64,
    /// Not part of the structured document: it differs from run to run.
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub companies: Vec<Company>,
    pub report: AllocationReport,
    pub metadata: RunMetadata,
}

pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutput> {
    let text = std::fs::read_to_string(&config.input_path)?;
    let companies = parse_portfolio(&text, config.parse)?;
    run_on_companies(
        companies,
        &config.policy,
        &config.solver,
        &config.exceedance_thresholds,
    )
}

pub fn run_on_companies(
    companies: Vec<Company>,
    policy: &ConstraintPolicy,
    solver: &SolverConfig,
    thresholds: &[f64],
) -> Result<PipelineOutput> {
    let start = Instant::now();
    let space = enumerate_outcomes(&companies)?;
    let constraints = build_constraint_set(policy, companies.len())?;
    let summary = solve(&space, &constraints, solver)?;
    let selected = &summary.selected;
    let report = compute_report_with_thresholds(&selected.fractions, &space, thresholds)?;

    let metadata = RunMetadata {
        num_companies: companies.len(),
        num_outcomes: space.num_outcomes(),
        num_constraints: constraints.len(),
        constraints: constraints.iter().map(|c| c.name()).collect(),
        systems_attempted: summary.systems_attempted,
        systems_converged: summary.systems_converged,
        viable_count: summary.viable_count,
        selected_mask: selected.mask.index(),
        active_constraints: constraints
            .iter()
            .enumerate()
            .filter(|(l, _)| selected.mask.is_active(*l))
            .map(|(_, c)| c.name())
            .collect(),
        selected_iterations: selected.iterations,
        selected_residual_norm: selected.residual_norm,
        wall_time: start.elapsed(),
    };
    Ok(PipelineOutput {
        companies,
        report,
        metadata,
    })
}
