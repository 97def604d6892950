//! Inequality constraints `I(f) <= 0` on the allocation fractions.
//!
//! All four families are affine in `f`, so each constraint is fully
//! described by its value and a constant gradient.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, OutcomeSpace};

/// A fraction vector is feasible when every constraint value is at most this.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSpec {
    /// `f_j >= 0`.
    LongOnly { company: usize },
    /// `sum_j f_j <= 1 + leverage`.
    MaxLeverage { leverage: f64 },
    /// `f_j <= limit`.
    MaxAllocation { company: usize, limit: f64 },
    /// `sum_j f_j w_j >= probability * loss` where `w_j` is company j's
    /// worst probability-weighted scenario return. `loss` is negative.
    MaxLoss { probability: f64, loss: f64 },
}

impl ConstraintSpec {
    pub fn name(&self) -> String {
        match self {
            ConstraintSpec::LongOnly { company } => format!("long-only[{company}]"),
            ConstraintSpec::MaxLeverage { leverage } => format!("max-leverage({leverage})"),
            ConstraintSpec::MaxAllocation { company, limit } => {
                format!("max-allocation[{company}]({limit})")
            }
            ConstraintSpec::MaxLoss { probability, loss } => {
                format!("max-loss({probability}, {loss})")
            }
        }
    }
}

/// `min over scenarios of p * k` for one company.
pub fn worst_weighted_return(space: &OutcomeSpace, company: usize) -> f64 {
    space
        .marginal(company)
        .iter()
        .map(|(p, k)| p * k)
        .fold(f64::INFINITY, f64::min)
}

pub fn constraint_value(c: &ConstraintSpec, f: &[f64], space: &OutcomeSpace) -> f64 {
    assert_eq!(f.len(), space.num_companies());
    match *c {
        ConstraintSpec::LongOnly { company } => -f[company],
        ConstraintSpec::MaxLeverage { leverage } => f.iter().sum::<f64>() - 1.0 - leverage,
        ConstraintSpec::MaxAllocation { company, limit } => f[company] - limit,
        ConstraintSpec::MaxLoss { probability, loss } => {
            let w: Vec<f64> = (0..f.len()).map(|j| worst_weighted_return(space, j)).collect();
            -dot(f, &w) + probability * loss
        }
    }
}

pub fn constraint_gradient(c: &ConstraintSpec, space: &OutcomeSpace) -> DVector<f64> {
    let n = space.num_companies();
    match *c {
        ConstraintSpec::LongOnly { company } => {
            let mut g = DVector::zeros(n);
            g[company] = -1.0;
            g
        }
        ConstraintSpec::MaxLeverage { .. } => DVector::from_element(n, 1.0),
        ConstraintSpec::MaxAllocation { company, .. } => {
            let mut g = DVector::zeros(n);
            g[company] = 1.0;
            g
        }
        ConstraintSpec::MaxLoss { .. } => {
            DVector::from_iterator(n, (0..n).map(|j| -worst_weighted_return(space, j)))
        }
    }
}

/// `I(f) = gradient . f + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstraint {
    pub gradient: DVector<f64>,
    pub offset: f64,
}

impl AffineConstraint {
    pub fn value(&self, f: &[f64]) -> f64 {
        dot(self.gradient.as_slice(), f) + self.offset
    }
}

/// Which constraint families to apply to a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintPolicy {
    pub long_only: bool,
    pub max_leverage: Option<f64>,
    pub max_allocation: Option<f64>,
    /// `(P, K)`: probability and (negative) return of the tolerated loss.
    pub max_loss: Option<(f64, f64)>,
    /// Drops every constraint. Mutually exclusive with all other options.
    pub unconstrained: bool,
}

impl Default for ConstraintPolicy {
    fn default() -> Self {
        ConstraintPolicy {
            long_only: true,
            max_leverage: None,
            max_allocation: None,
            max_loss: None,
            unconstrained: false,
        }
    }
}

impl ConstraintPolicy {
    pub fn unconstrained() -> Self {
        ConstraintPolicy {
            long_only: false,
            unconstrained: true,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.unconstrained {
            if self.long_only
                || self.max_leverage.is_some()
                || self.max_allocation.is_some()
                || self.max_loss.is_some()
            {
                return Err(Error::InvalidPolicy(
                    "unconstrained excludes every other constraint option".into(),
                ));
            }
            return Ok(());
        }
        if let Some(l) = self.max_leverage {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidPolicy(format!(
                    "maximum leverage must be >= 0, got {l}"
                )));
            }
        }
        if let Some(m) = self.max_allocation {
            if !(m > 0.0 && m <= 1.0) {
                return Err(Error::InvalidPolicy(format!(
                    "maximum allocation must lie in (0, 1], got {m}"
                )));
            }
        }
        if let Some((p, k)) = self.max_loss {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidPolicy(format!(
                    "loss probability must lie in (0, 1], got {p}"
                )));
            }
            if !(k > -1.0 && k < 0.0) {
                return Err(Error::InvalidPolicy(format!(
                    "loss return must lie in (-1, 0), got {k}"
                )));
            }
            if !self.long_only {
                return Err(Error::InvalidPolicy(
                    "the maximum-loss constraint requires the long-only constraint".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSet {
    constraints: Vec<ConstraintSpec>,
}

impl ConstraintSet {
    pub fn empty() -> Self {
        ConstraintSet::default()
    }

    /// Checks indices and the family rules before accepting `constraints`.
    pub fn new(constraints: Vec<ConstraintSpec>, num_companies: usize) -> Result<Self> {
        let mut leverage = 0;
        let mut loss = 0;
        let mut long_only = vec![false; num_companies];
        for c in &constraints {
            match *c {
                ConstraintSpec::LongOnly { company } | ConstraintSpec::MaxAllocation { company, .. }
                    if company >= num_companies =>
                {
                    return Err(Error::InvalidPolicy(format!(
                        "{} references company {company} of {num_companies}",
                        c.name()
                    )));
                }
                ConstraintSpec::LongOnly { company } => long_only[company] = true,
                ConstraintSpec::MaxLeverage { .. } => leverage += 1,
                ConstraintSpec::MaxLoss { .. } => loss += 1,
                ConstraintSpec::MaxAllocation { .. } => {}
            }
        }
        if leverage > 1 || loss > 1 {
            return Err(Error::InvalidPolicy(
                "at most one leverage and one loss constraint are allowed".into(),
            ));
        }
        if loss == 1 && !long_only.iter().all(|&b| b) {
            return Err(Error::InvalidPolicy(
                "the maximum-loss constraint requires long-only on every company".into(),
            ));
        }
        Ok(ConstraintSet { constraints })
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ConstraintSpec> {
        self.constraints.iter()
    }

    pub fn as_slice(&self) -> &[ConstraintSpec] {
        &self.constraints
    }

    pub fn values(&self, f: &[f64], space: &OutcomeSpace) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| constraint_value(c, f, space))
            .collect()
    }

    pub fn is_feasible(&self, f: &[f64], space: &OutcomeSpace) -> bool {
        self.values(f, space)
            .iter()
            .all(|&v| v <= FEASIBILITY_TOLERANCE)
    }

    /// Gradient/offset form of every member, in order.
    pub fn affine(&self, space: &OutcomeSpace) -> Vec<AffineConstraint> {
        let zero = vec![0.0; space.num_companies()];
        self.constraints
            .iter()
            .map(|c| AffineConstraint {
                gradient: constraint_gradient(c, space),
                offset: constraint_value(c, &zero, space),
            })
            .collect()
    }

    pub fn has_long_only(&self) -> bool {
        self.constraints
            .iter()
            .any(|c| matches!(c, ConstraintSpec::LongOnly { .. }))
    }

    pub fn max_leverage(&self) -> Option<f64> {
        self.constraints.iter().find_map(|c| match c {
            ConstraintSpec::MaxLeverage { leverage } => Some(*leverage),
            _ => None,
        })
    }

    pub fn max_allocation(&self, company: usize) -> Option<f64> {
        self.constraints.iter().find_map(|c| match c {
            ConstraintSpec::MaxAllocation { company: j, limit } if *j == company => Some(*limit),
            _ => None,
        })
    }
}

/// Expands a policy into the ordered constraint list: every long-only by
/// company index, every max-allocation by company index, then leverage, then
/// loss.
pub fn build_constraint_set(policy: &ConstraintPolicy, num_companies: usize) -> Result<ConstraintSet> {
    policy.validate()?;
    if policy.unconstrained {
        return Ok(ConstraintSet::empty());
    }
    let mut constraints = Vec::new();
    if policy.long_only {
        constraints.extend((0..num_companies).map(|company| ConstraintSpec::LongOnly { company }));
    }
    if let Some(limit) = policy.max_allocation {
        constraints.extend(
            (0..num_companies).map(|company| ConstraintSpec::MaxAllocation { company, limit }),
        );
    }
    if let Some(leverage) = policy.max_leverage {
        constraints.push(ConstraintSpec::MaxLeverage { leverage });
    }
    if let Some((probability, loss)) = policy.max_loss {
        constraints.push(ConstraintSpec::MaxLoss { probability, loss });
    }
    ConstraintSet::new(constraints, num_companies)
}
