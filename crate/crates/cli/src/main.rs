//! kelly-alloc: constrained Kelly allocation for a portfolio file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use kelly_alloc::{render_report, run_pipeline, ConstraintPolicy, Error, OutputFormat, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Debug, Parser)]
#[command(name = "kelly-alloc", version, about = "Growth-optimal capital allocation across scenario-valued companies")]
struct Cli {
    /// Portfolio document (TOML).
    input: PathBuf,

    /// Maximum leverage L: total allocation may not exceed 1 + L.
    #[arg(long, value_name = "L", conflicts_with = "unconstrained")]
    max_leverage: Option<f64>,

    /// Maximum fraction of capital in any single company.
    #[arg(long, value_name = "M", conflicts_with = "unconstrained")]
    max_allocation: Option<f64>,

    /// Tolerated permanent loss: return K (negative) with probability P.
    #[arg(
        long,
        num_args = 2,
        value_names = ["P", "K"],
        allow_negative_numbers = true,
        conflicts_with = "unconstrained"
    )]
    max_loss: Option<Vec<f64>>,

    /// Drop every constraint, including long-only.
    #[arg(long)]
    unconstrained: bool,

    /// Accept companies with no scenario below market cap.
    #[arg(long)]
    allow_no_downside: bool,

    /// Convergence threshold on the KKT residual.
    #[arg(long)]
    tolerance: Option<f64>,

    #[arg(long)]
    max_iterations: Option<usize>,

    /// Solver threads (defaults to available cores).
    #[arg(long)]
    workers: Option<usize>,

    #[arg(long, value_enum, default_value = "text")]
    format: Format,

    /// Comma-separated loss thresholds for the exceedance table.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    exceedance_thresholds: Option<Vec<f64>>,

    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cli {
    fn run_config(self) -> (RunConfig, Option<PathBuf>) {
        let mut config = RunConfig::new(self.input);
        config.policy = if self.unconstrained {
            ConstraintPolicy::unconstrained()
        } else {
            ConstraintPolicy {
                max_leverage: self.max_leverage,
                max_allocation: self.max_allocation,
                max_loss: self.max_loss.map(|v| (v[0], v[1])),
                ..Default::default()
            }
        };
        config.parse.allow_no_downside = self.allow_no_downside;
        if let Some(t) = self.tolerance {
            config.solver.tolerance = t;
        }
        if let Some(n) = self.max_iterations {
            config.solver.max_iterations = n;
        }
        if let Some(w) = self.workers {
            config.solver.worker_count = w;
        }
        config.output_format = match self.format {
            Format::Text => OutputFormat::Text,
            Format::Structured => OutputFormat::Structured,
        };
        if let Some(t) = self.exceedance_thresholds {
            config.exceedance_thresholds = t;
        }
        (config, self.out)
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse(_) => 3,
        Error::Validation(_) | Error::OutcomeExplosion { .. } | Error::DomainViolation { .. } => 4,
        Error::NoViableSolution { .. } => 5,
        Error::EnumerationCapExceeded { .. } => 6,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let (config, out) = Cli::parse().run_config();
    if let Some(bad) = config
        .exceedance_thresholds
        .iter()
        .find(|t| !(t.is_finite() && **t > 0.0))
    {
        eprintln!("error: exceedance thresholds must be positive, got {bad}");
        return ExitCode::from(1);
    }

    let output = match run_pipeline(&config) {
        Ok(output) => output,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(exit_code(&err));
        }
    };
    let m = &output.metadata;
    eprintln!(
        "solved {} systems ({} converged, {} viable) on {} workers in {:.3} s",
        m.systems_attempted,
        m.systems_converged,
        m.viable_count,
        config.solver.worker_count,
        m.wall_time.as_secs_f64()
    );

    let rendered = render_report(&output, config.output_format);
    match out {
        Some(path) => {
            if let Err(err) = std::fs::write(&path, rendered) {
                eprintln!("error: cannot write {}: {err}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{rendered}"),
    }
    ExitCode::SUCCESS
}
