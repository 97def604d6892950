//! Report statistics of an allocation over the joint outcome space.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{growth, FractionVector, OutcomeSpace};

/// Loss thresholds used unless the caller supplies its own grid.
pub const DEFAULT_LOSS_THRESHOLDS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Slack used when comparing a return with a threshold or the worst return,
/// so that exact boundary hits (e.g. -0.5 at the 50% threshold) count.
pub const RETURN_COMPARISON_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossExceedance {
    /// Fraction of capital lost.
    pub threshold: f64,
    /// Probability of losing at least `threshold`.
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstOutcome {
    pub portfolio_return: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub fractions: FractionVector,
    pub invested_total: f64,
    /// `sum_i p_i r_i` per unit of capital.
    pub expected_arithmetic_gain: f64,
    pub expected_log_growth: f64,
    /// `exp(G) - 1`.
    pub geometric_gain: f64,
    pub probability_of_loss: f64,
    pub loss_exceedance: Vec<LossExceedance>,
    pub worst_outcome: WorstOutcome,
}

/// `(p_i, r_i)` with `r_i = sum_j f_j k_ij`.
pub fn portfolio_return_per_outcome(f: &[f64], space: &OutcomeSpace) -> Vec<(f64, f64)> {
    space
        .probabilities()
        .iter()
        .copied()
        .zip(space.portfolio_returns(f))
        .collect()
}

pub fn compute_report(f: &[f64], space: &OutcomeSpace) -> Result<AllocationReport> {
    compute_report_with_thresholds(f, space, &DEFAULT_LOSS_THRESHOLDS)
}

/// Like [`compute_report`] with a custom threshold grid. The worst loss is
/// added to the grid when the worst outcome is a loss; the curve is sorted by
/// threshold.
pub fn compute_report_with_thresholds(
    f: &[f64],
    space: &OutcomeSpace,
    thresholds: &[f64],
) -> Result<AllocationReport> {
    let expected_log_growth = growth(f, space)?;
    let outcomes = portfolio_return_per_outcome(f, space);

    let expected_arithmetic_gain = outcomes.iter().map(|(p, r)| p * r).sum();
    let probability_of_loss = outcomes
        .iter()
        .filter(|(_, r)| *r < 0.0)
        .map(|(p, _)| p)
        .sum();

    let worst_return = outcomes
        .iter()
        .map(|(_, r)| *r)
        .fold(f64::INFINITY, f64::min);
    let worst_outcome = WorstOutcome {
        portfolio_return: worst_return,
        probability: outcomes
            .iter()
            .filter(|(_, r)| *r <= worst_return + RETURN_COMPARISON_SLACK)
            .map(|(p, _)| p)
            .sum(),
    };

    let mut grid: Vec<f64> = thresholds.to_vec();
    if worst_return < 0.0 && !grid.iter().any(|t| (t + worst_return).abs() <= RETURN_COMPARISON_SLACK) {
        grid.push(-worst_return);
    }
    grid.sort_by(f64::total_cmp);
    let loss_exceedance = grid
        .into_iter()
        .map(|threshold| LossExceedance {
            threshold,
            probability: outcomes
                .iter()
                .filter(|(_, r)| *r <= -threshold + RETURN_COMPARISON_SLACK)
                .map(|(p, _)| p)
                .sum(),
        })
        .collect();

    Ok(AllocationReport {
        fractions: FractionVector::new(f.to_vec()),
        invested_total: f.iter().sum(),
        expected_arithmetic_gain,
        expected_log_growth,
        geometric_gain: expected_log_growth.exp() - 1.0,
        probability_of_loss,
        loss_exceedance,
        worst_outcome,
    })
}
