//! Human-readable and structured rendering of a pipeline result.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{OutputFormat, PipelineOutput, RunMetadata};
use crate::stats::AllocationReport;

pub const STRUCTURED_FORMAT: &str = "kelly-alloc-report";
pub const STRUCTURED_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyAllocation {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub currency: Option<String>,
    pub fraction: f64,
}

/// Versioned machine-readable report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredReport {
    pub format: String,
    pub version: u32,
    pub allocations: Vec<CompanyAllocation>,
    pub report: AllocationReport,
    pub solver: RunMetadata,
}

impl StructuredReport {
    pub fn from_output(output: &PipelineOutput) -> Self {
        StructuredReport {
            format: STRUCTURED_FORMAT.to_string(),
            version: STRUCTURED_VERSION,
            allocations: output
                .companies
                .iter()
                .zip(output.report.fractions.iter())
                .map(|(c, &fraction)| CompanyAllocation {
                    name: c.name().to_string(),
                    currency: c.currency().map(str::to_string),
                    fraction,
                })
                .collect(),
            report: output.report.clone(),
            solver: output.metadata.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: StructuredReport =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if r.format != STRUCTURED_FORMAT || r.version != STRUCTURED_VERSION {
            return Err(Error::Parse(format!(
                "unsupported report format {} v{}",
                r.format, r.version
            )));
        }
        Ok(r)
    }
}

pub fn render_report(output: &PipelineOutput, format: OutputFormat) -> String {
    match format {
        OutputFormat::Structured => StructuredReport::from_output(output).to_json(),
        OutputFormat::Text => render_text(output),
    }
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn prob(x: f64) -> String {
    format!("{:.4}%", 100.0 * x)
}

fn render_text(output: &PipelineOutput) -> String {
    let r = &output.report;
    let m = &output.metadata;
    let mut s = String::new();

    writeln!(s, "Allocation").unwrap();
    for (c, f) in output.companies.iter().zip(r.fractions.iter()) {
        writeln!(s, "  {} {}", c.name(), pct(*f)).unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "Invested total:           {}", pct(r.invested_total)).unwrap();
    writeln!(
        s,
        "Expected arithmetic gain: {:.4} per unit of capital",
        r.expected_arithmetic_gain
    )
    .unwrap();
    writeln!(s, "Expected log growth:      {:.6}", r.expected_log_growth).unwrap();
    writeln!(
        s,
        "Geometric gain:           {:.4} per unit of capital",
        r.geometric_gain
    )
    .unwrap();
    writeln!(s, "Probability of loss:      {}", prob(r.probability_of_loss)).unwrap();
    writeln!(s).unwrap();

    writeln!(s, "Loss exceedance").unwrap();
    for e in r.loss_exceedance.iter().filter(|e| e.probability > 0.0) {
        writeln!(s, "  loss >= {:>7}  probability {}", pct(e.threshold), prob(e.probability))
            .unwrap();
    }
    writeln!(
        s,
        "Worst outcome:            {} with probability {}",
        pct(r.worst_outcome.portfolio_return),
        prob(r.worst_outcome.probability)
    )
    .unwrap();
    writeln!(s).unwrap();
    render_metadata(&mut s, m);
    s
}

fn render_metadata(s: &mut String, m: &RunMetadata) {
    writeln!(s, "Solver").unwrap();
    writeln!(
        s,
        "  {} companies, {} outcomes, {} constraints",
        m.num_companies, m.num_outcomes, m.num_constraints
    )
    .unwrap();
    writeln!(
        s,
        "  systems: {} attempted, {} converged, {} viable",
        m.systems_attempted, m.systems_converged, m.viable_count
    )
    .unwrap();
    let active = if m.active_constraints.is_empty() {
        "none".to_string()
    } else {
        m.active_constraints.join(", ")
    };
    writeln!(s, "  selected mask {} (active: {})", m.selected_mask, active).unwrap();
    writeln!(
        s,
        "  residual {:.3e} after {} iterations",
        m.selected_residual_norm, m.selected_iterations
    )
    .unwrap();
    writeln!(s, "  wall time {:.3} s", m.wall_time.as_secs_f64()).unwrap();
}
