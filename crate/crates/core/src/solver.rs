//! Active-set enumeration over the inequality constraints.
//!
//! Every constraint is either active (`s = 0`, multiplier unknown) or
//! inactive (`lambda = 0`, slack unknown). Each of the `2^N_l` status
//! combinations gives a square nonlinear system in the fractions and one
//! unknown per constraint:
//!
//! ```text
//! alpha_j = dG/df_j - sum_l lambda_l dI_l/df_j = 0      (N_c equations)
//! beta_l  = -(I_l(f) + s_l)                    = 0      (N_l equations)
//! ```
//!
//! which is solved with Newton-Raphson from a uniform allocation. Systems
//! that fail numerically are kept as non-converged candidates and dropped
//! by [`filter_viable`].

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{AffineConstraint, ConstraintSet};
use crate::error::{Error, Result};
use crate::model::{growth_gradient, growth_hessian, FractionVector, OutcomeSpace};

/// Jacobians with a 1-norm condition estimate above this count as singular.
pub const MAX_CONDITION: f64 = 1e14;

/// Step halvings tried before giving up on a step that leaves the log domain.
pub const MAX_STEP_HALVINGS: u32 = 30;

const INITIAL_MULTIPLIER: f64 = 0.1;
const MIN_INITIAL_SLACK: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence threshold on the infinity norm of the KKT residual.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Fraction of the Newton step taken before any domain halving.
    pub step_damping: f64,
    /// Fractions with magnitude above this count as non-zero allocations.
    pub nonzero_threshold: f64,
    pub worker_count: usize,
    /// Largest number of constraints for which all masks are enumerated.
    pub max_constraints: usize,
    /// Also require `lambda >= 0` on active constraints when filtering.
    pub check_multiplier_signs: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-10,
            max_iterations: 100,
            step_damping: 1.0,
            nonzero_threshold: 1e-6,
            worker_count: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            max_constraints: 24,
            check_multiplier_signs: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be positive");
        }
        if !(self.step_damping > 0.0 && self.step_damping <= 1.0) {
            return bad("step_damping must lie in (0, 1]");
        }
        if !(self.nonzero_threshold > 0.0 && self.nonzero_threshold.is_finite()) {
            return bad("nonzero_threshold must be positive");
        }
        if self.worker_count == 0 {
            return bad("worker_count must be positive");
        }
        if self.max_constraints == 0 || self.max_constraints >= usize::BITS as usize {
            return bad("max_constraints must lie in [1, 63]");
        }
        Ok(())
    }
}

/// Active/inactive status of every constraint; bit `l` of the mask integer
/// is constraint `l`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StatusMask {
    active: Vec<bool>,
}

impl StatusMask {
    pub fn from_index(index: u64, num_constraints: usize) -> Self {
        StatusMask {
            active: (0..num_constraints).map(|l| (index >> l) & 1 == 1).collect(),
        }
    }

    pub fn from_bits(active: Vec<bool>) -> Self {
        StatusMask { active }
    }

    pub fn all_inactive(num_constraints: usize) -> Self {
        StatusMask {
            active: vec![false; num_constraints],
        }
    }

    pub fn index(&self) -> u64 {
        self.active
            .iter()
            .enumerate()
            .fold(0, |acc, (l, &a)| acc | ((a as u64) << l))
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn is_active(&self, l: usize) -> bool {
        self.active[l]
    }

    pub fn bits(&self) -> &[bool] {
        &self.active
    }
}

/// Bits in constraint order, `1` for active.
impl fmt::Display for StatusMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &a in &self.active {
            f.write_str(if a { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    SingularJacobian,
    IterationLimit,
    DomainViolation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSolution {
    pub fractions: FractionVector,
    /// Lagrange multipliers; zero for inactive constraints.
    pub multipliers: Vec<f64>,
    /// Slack variables; zero for active constraints.
    pub slacks: Vec<f64>,
    pub mask: StatusMask,
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: f64,
    pub failure: Option<FailureReason>,
}

impl CandidateSolution {
    pub fn nonzero_count(&self, threshold: f64) -> usize {
        self.fractions.iter().filter(|f| f.abs() > threshold).count()
    }
}

fn check_dimensions(
    f: &[f64],
    lambda: &[f64],
    slack: &[f64],
    mask: &StatusMask,
    space: &OutcomeSpace,
    constraints: &ConstraintSet,
) {
    assert_eq!(f.len(), space.num_companies(), "fraction count");
    assert_eq!(lambda.len(), constraints.len(), "multiplier count");
    assert_eq!(slack.len(), constraints.len(), "slack count");
    assert_eq!(mask.len(), constraints.len(), "mask length");
}

/// Stationarity rows `alpha` followed by constraint rows `beta`. Multipliers
/// of inactive and slacks of active constraints are ignored (taken as zero).
pub fn assemble_kkt_residual(
    f: &[f64],
    lambda: &[f64],
    slack: &[f64],
    mask: &StatusMask,
    space: &OutcomeSpace,
    constraints: &ConstraintSet,
) -> Result<DVector<f64>> {
    check_dimensions(f, lambda, slack, mask, space, constraints);
    let affine = constraints.affine(space);
    let unknowns = merge_unknowns(lambda, slack, mask);
    residual(f, &unknowns, mask, space, &affine)
}

pub fn assemble_kkt_jacobian(
    f: &[f64],
    lambda: &[f64],
    slack: &[f64],
    mask: &StatusMask,
    space: &OutcomeSpace,
    constraints: &ConstraintSet,
) -> Result<DMatrix<f64>> {
    check_dimensions(f, lambda, slack, mask, space, constraints);
    let affine = constraints.affine(space);
    jacobian(f, mask, space, &affine)
}

fn merge_unknowns(lambda: &[f64], slack: &[f64], mask: &StatusMask) -> Vec<f64> {
    (0..mask.len())
        .map(|l| if mask.is_active(l) { lambda[l] } else { slack[l] })
        .collect()
}

/// `unknowns[l]` is the multiplier of an active or the slack of an inactive
/// constraint.
fn residual(
    f: &[f64],
    unknowns: &[f64],
    mask: &StatusMask,
    space: &OutcomeSpace,
    affine: &[AffineConstraint],
) -> Result<DVector<f64>> {
    let n = f.len();
    let mut r = DVector::zeros(n + affine.len());
    r.rows_mut(0, n).copy_from(&growth_gradient(f, space)?);
    for (l, c) in affine.iter().enumerate() {
        if mask.is_active(l) {
            r.rows_mut(0, n).axpy(-unknowns[l], &c.gradient, 1.0);
            r[n + l] = -c.value(f);
        } else {
            r[n + l] = -(c.value(f) + unknowns[l]);
        }
    }
    Ok(r)
}

fn jacobian(
    f: &[f64],
    mask: &StatusMask,
    space: &OutcomeSpace,
    affine: &[AffineConstraint],
) -> Result<DMatrix<f64>> {
    let n = f.len();
    let size = n + affine.len();
    let mut j = DMatrix::zeros(size, size);
    // Constraints are affine, so the Hessian of the Lagrangian is the growth
    // Hessian alone.
    j.view_mut((0, 0), (n, n)).copy_from(&growth_hessian(f, space)?);
    for (l, c) in affine.iter().enumerate() {
        let row = n + l;
        for k in 0..n {
            j[(row, k)] = -c.gradient[k];
        }
        if mask.is_active(l) {
            for k in 0..n {
                j[(k, row)] = -c.gradient[k];
            }
        } else {
            j[(row, row)] = -1.0;
        }
    }
    Ok(j)
}

fn norm_1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn in_domain(f: &[f64], space: &OutcomeSpace) -> bool {
    space.iter().all(|(_, k)| {
        let w = 1.0 + k.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
        w > 0.0 && w.is_finite()
    })
}

/// Solves the KKT system of one status mask with Newton-Raphson.
///
/// Starts from the uniform allocation `1/N_c` (halved towards zero if that
/// point is outside the log domain), multipliers at 0.1 and slacks at
/// `max(-I(f0), 0.1)`. Numerical failures never raise; they come back as
/// `converged = false` with a [`FailureReason`].
pub fn newton_solve(
    mask: &StatusMask,
    space: &OutcomeSpace,
    constraints: &ConstraintSet,
    config: &SolverConfig,
) -> CandidateSolution {
    assert_eq!(mask.len(), constraints.len(), "mask length");
    let affine = constraints.affine(space);
    solve_with_affine(mask, space, &affine, config)
}

fn solve_with_affine(
    mask: &StatusMask,
    space: &OutcomeSpace,
    affine: &[AffineConstraint],
    config: &SolverConfig,
) -> CandidateSolution {
    let n = space.num_companies();
    let m = affine.len();

    let mut f = vec![1.0 / n as f64; n];
    let mut halvings = 0;
    while !in_domain(&f, space) && halvings < MAX_STEP_HALVINGS {
        f.iter_mut().for_each(|x| *x *= 0.5);
        halvings += 1;
    }
    let mut y: Vec<f64> = affine
        .iter()
        .enumerate()
        .map(|(l, c)| {
            if mask.is_active(l) {
                INITIAL_MULTIPLIER
            } else {
                (-c.value(&f)).max(MIN_INITIAL_SLACK)
            }
        })
        .collect();

    let finish = |f: Vec<f64>, y: Vec<f64>, iterations, residual_norm, failure: Option<FailureReason>| {
        let mut multipliers = vec![0.0; m];
        let mut slacks = vec![0.0; m];
        for l in 0..m {
            if mask.is_active(l) {
                multipliers[l] = y[l];
            } else {
                slacks[l] = y[l];
            }
        }
        CandidateSolution {
            fractions: FractionVector::new(f),
            multipliers,
            slacks,
            mask: mask.clone(),
            converged: failure.is_none(),
            iterations,
            residual_norm,
            failure,
        }
    };

    let mut iterations = 0;
    loop {
        let r = match residual(&f, &y, mask, space, affine) {
            Ok(r) => r,
            Err(_) => {
                return finish(f, y, iterations, f64::INFINITY, Some(FailureReason::DomainViolation))
            }
        };
        let r_norm = r.amax();
        if !r_norm.is_finite() {
            return finish(f, y, iterations, r_norm, Some(FailureReason::DomainViolation));
        }
        if r_norm <= config.tolerance {
            return finish(f, y, iterations, r_norm, None);
        }
        if iterations >= config.max_iterations {
            return finish(f, y, iterations, r_norm, Some(FailureReason::IterationLimit));
        }

        let j = match jacobian(&f, mask, space, affine) {
            Ok(j) => j,
            Err(_) => {
                return finish(f, y, iterations, r_norm, Some(FailureReason::DomainViolation))
            }
        };
        let j_norm = norm_1(&j);
        let lu = j.lu();
        let inverse = match lu.try_inverse() {
            Some(inv) => inv,
            None => {
                return finish(f, y, iterations, r_norm, Some(FailureReason::SingularJacobian))
            }
        };
        let condition = j_norm * norm_1(&inverse);
        if !(condition <= MAX_CONDITION) {
            return finish(f, y, iterations, r_norm, Some(FailureReason::SingularJacobian));
        }
        let step = match lu.solve(&(-&r)) {
            Some(s) => s,
            None => {
                return finish(f, y, iterations, r_norm, Some(FailureReason::SingularJacobian))
            }
        };

        let mut t = config.step_damping;
        let mut accepted = None;
        for _ in 0..=MAX_STEP_HALVINGS {
            let trial: Vec<f64> = (0..n).map(|k| f[k] + t * step[k]).collect();
            if in_domain(&trial, space) {
                accepted = Some(trial);
                break;
            }
            t *= 0.5;
        }
        let Some(next) = accepted else {
            return finish(f, y, iterations, r_norm, Some(FailureReason::DomainViolation));
        };
        f = next;
        for l in 0..m {
            y[l] += t * step[n + l];
        }
        iterations += 1;
    }
}

/// Solves one system per status mask, in mask-integer order. Systems run in
/// parallel on `config.worker_count` threads; the result is independent of
/// the worker count.
pub fn solve_all(
    space: &OutcomeSpace,
    constraints: &ConstraintSet,
    config: &SolverConfig,
) -> Result<Vec<CandidateSolution>> {
    config.validate()?;
    let m = constraints.len();
    if m > config.max_constraints {
        return Err(Error::EnumerationCapExceeded {
            constraints: m,
            cap: config.max_constraints,
        });
    }
    let affine = constraints.affine(space);
    let systems = 1u64 << m;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(|| {
        (0..systems)
            .into_par_iter()
            .map(|index| {
                let mask = StatusMask::from_index(index, m);
                solve_with_affine(&mask, space, &affine, config)
            })
            .collect()
    }))
}

/// Reason a candidate was rejected; `None` means viable.
pub fn rejection_reason(
    s: &CandidateSolution,
    space: &OutcomeSpace,
    constraints: &ConstraintSet,
    config: &SolverConfig,
) -> Option<&'static str> {
    if !s.converged {
        return Some("not converged");
    }
    let inactive_slack_ok = (0..s.mask.len()).all(|l| s.mask.is_active(l) || s.slacks[l] > 0.0);
    if !inactive_slack_ok {
        return Some("nonpositive slack on an inactive constraint");
    }
    if !constraints.is_feasible(&s.fractions, space) {
        return Some("infeasible");
    }
    if !in_domain(&s.fractions, space) {
        return Some("outside the growth domain");
    }
    if config.check_multiplier_signs
        && (0..s.mask.len()).any(|l| s.mask.is_active(l) && s.multipliers[l] < -config.tolerance)
    {
        return Some("negative multiplier on an active constraint");
    }
    None
}

/// Keeps converged, strictly-slack, feasible candidates.
pub fn filter_viable(
    solutions: &[CandidateSolution],
    space: &OutcomeSpace,
    constraints: &ConstraintSet,
    config: &SolverConfig,
) -> Result<Vec<CandidateSolution>> {
    let viable: Vec<CandidateSolution> = solutions
        .iter()
        .filter(|s| rejection_reason(s, space, constraints, config).is_none())
        .cloned()
        .collect();
    if viable.is_empty() {
        return Err(Error::NoViableSolution {
            attempted: solutions.len(),
            converged: solutions.iter().filter(|s| s.converged).count(),
        });
    }
    Ok(viable)
}

/// `sum_i p_i (1 + sum_j f_j k_ij)`.
pub fn expected_portfolio_value(f: &[f64], space: &OutcomeSpace) -> f64 {
    space
        .iter()
        .map(|(p, k)| p * (1.0 + k.iter().zip(f).map(|(a, b)| a * b).sum::<f64>()))
        .sum()
}

/// Among the solutions with the most non-zero allocations, the one with the
/// highest expected portfolio value. Ties go to the lowest mask index.
pub fn select_solution<'a>(
    viable: &'a [CandidateSolution],
    space: &OutcomeSpace,
    config: &SolverConfig,
) -> Option<&'a CandidateSolution> {
    let most = viable
        .iter()
        .map(|s| s.nonzero_count(config.nonzero_threshold))
        .max()?;
    let mut best: Option<(&CandidateSolution, f64)> = None;
    for s in viable
        .iter()
        .filter(|s| s.nonzero_count(config.nonzero_threshold) == most)
    {
        let value = expected_portfolio_value(&s.fractions, space);
        best = match best {
            Some((b, bv))
                if bv > value || (bv == value && b.mask.index() <= s.mask.index()) =>
            {
                Some((b, bv))
            }
            _ => Some((s, value)),
        };
    }
    best.map(|(s, _)| s)
}

/// Result of the full enumerate/filter/select sequence.
#[derive(Debug, Clone)]
pub struct SolveSummary {
    pub selected: CandidateSolution,
    pub systems_attempted: usize,
    pub systems_converged: usize,
    pub viable_count: usize,
}

pub fn solve(
    space: &OutcomeSpace,
    constraints: &ConstraintSet,
    config: &SolverConfig,
) -> Result<SolveSummary> {
    let all = solve_all(space, constraints, config)?;
    let viable = filter_viable(&all, space, constraints, config)?;
    let selected = select_solution(&viable, space, config)
        .expect("filter_viable never returns an empty list")
        .clone();
    Ok(SolveSummary {
        selected,
        systems_attempted: all.len(),
        systems_converged: all.iter().filter(|s| s.converged).count(),
        viable_count: viable.len(),
    })
}
