//! Constrained multi-asset Kelly allocation.
//!
//! Given candidate companies, each with probability-weighted intrinsic value
//! scenarios, finds the capital fractions that maximize expected logarithmic
//! growth under long-only, leverage, concentration and permanent-loss
//! constraints, and reports risk statistics of the result.
//!
//! The pipeline is:
//!
//! 1. [`model::enumerate_outcomes`] builds the joint outcome space.
//! 2. [`constraints::build_constraint_set`] expands a policy into inequality
//!    constraints.
//! 3. [`solver::solve`] enumerates every active/inactive combination, solves
//!    each KKT system with Newton-Raphson, filters viable solutions and picks
//!    the most diversified one with the highest expected value.
//! 4. [`stats::compute_report`] summarizes the chosen allocation.

pub mod constraints;
pub mod error;
pub mod input;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod solver;
pub mod stats;

pub use constraints::{build_constraint_set, ConstraintPolicy, ConstraintSet, ConstraintSpec};
pub use error::{Error, Result};
pub use input::{parse_portfolio, serialize_portfolio, ParseOptions};
pub use model::{enumerate_outcomes, Company, FractionVector, OutcomeSpace, Scenario};
pub use pipeline::{run_pipeline, OutputFormat, PipelineOutput, RunConfig, RunMetadata};
pub use report::{render_report, StructuredReport};
pub use solver::{CandidateSolution, SolverConfig, StatusMask};
pub use stats::{compute_report, AllocationReport};
