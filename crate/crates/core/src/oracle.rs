//! Independent reference computations used to cross-check the KKT solver
//! and the report statistics. None of these share code paths with
//! [`crate::solver`] or [`crate::stats`] beyond the input types.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::model::{Company, FractionVector, OutcomeSpace};
use crate::stats::{AllocationReport, LossExceedance, WorstOutcome};

pub const MAX_GRID_POINTS: u128 = 100_000_000;
pub const MAX_GRID_COMPANIES: usize = 4;

/// Grid points are accepted as feasible up to this constraint value, which
/// absorbs rounding in `lo + k * resolution`.
const GRID_FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub resolution: f64,
    /// Per-company `[lo, hi]`.
    pub bounds: Vec<(f64, f64)>,
}

impl GridSpec {
    pub fn uniform(resolution: f64, lo: f64, hi: f64, num_companies: usize) -> Self {
        GridSpec {
            resolution,
            bounds: vec![(lo, hi); num_companies],
        }
    }

    /// `[0, 1 + L]` per company (L = 1 without a leverage constraint),
    /// tightened by any per-company allocation cap.
    pub fn for_constraints(resolution: f64, constraints: &ConstraintSet, num_companies: usize) -> Self {
        let upper = 1.0 + constraints.max_leverage().unwrap_or(1.0);
        GridSpec {
            resolution,
            bounds: (0..num_companies)
                .map(|j| (0.0, constraints.max_allocation(j).map_or(upper, |m| m.min(upper))))
                .collect(),
        }
    }

    fn axis(&self, company: usize) -> Vec<f64> {
        let (lo, hi) = self.bounds[company];
        let steps = ((hi - lo) / self.resolution + 1e-9).floor() as usize;
        (0..=steps).map(|k| lo + k as f64 * self.resolution).collect()
    }
}

/// Exhaustive search for the feasible grid point with the largest growth.
/// Ties go to the lexicographically smallest point.
pub fn brute_force_maximize(
    space: &OutcomeSpace,
    constraints: &ConstraintSet,
    grid: &GridSpec,
) -> Result<FractionVector> {
    let n = space.num_companies();
    if n > MAX_GRID_COMPANIES {
        return Err(Error::InvalidConfig(format!(
            "grid search supports at most {MAX_GRID_COMPANIES} companies, got {n}"
        )));
    }
    if !(grid.resolution > 0.0) || grid.bounds.len() != n {
        return Err(Error::InvalidConfig(
            "grid needs a positive resolution and one interval per company".into(),
        ));
    }
    let axes: Vec<Vec<f64>> = (0..n).map(|j| grid.axis(j)).collect();
    let points = axes.iter().map(|a| a.len() as u128).product::<u128>();
    if points > MAX_GRID_POINTS {
        return Err(Error::GridTooLarge {
            points,
            limit: MAX_GRID_POINTS,
        });
    }
    let affine = constraints.affine(space);
    let outcomes: Vec<(f64, &[f64])> = space.iter().collect();

    let evaluate = |f: &[f64]| -> Option<f64> {
        if affine.iter().any(|c| c.value(f) > GRID_FEASIBILITY_SLACK) {
            return None;
        }
        let mut g = 0.0;
        for (p, k) in &outcomes {
            let w = 1.0 + k.iter().zip(f).map(|(a, b)| a * b).sum::<f64>();
            if w <= 0.0 {
                return None;
            }
            g += p * w.ln();
        }
        Some(g)
    };

    // Each task owns one value of the first coordinate and walks the rest in
    // lexicographic order.
    let best = (0..axes[0].len())
        .into_par_iter()
        .filter_map(|first| {
            let mut digits = vec![0usize; n];
            digits[0] = first;
            let mut f: Vec<f64> = digits.iter().enumerate().map(|(j, &d)| axes[j][d]).collect();
            let mut best: Option<(f64, Vec<usize>)> = None;
            loop {
                if let Some(g) = evaluate(&f) {
                    if best.as_ref().is_none_or(|(bg, _)| g > *bg) {
                        best = Some((g, digits.clone()));
                    }
                }
                let mut j = n;
                loop {
                    if j == 1 {
                        return best;
                    }
                    j -= 1;
                    digits[j] += 1;
                    if digits[j] < axes[j].len() {
                        f[j] = axes[j][digits[j]];
                        break;
                    }
                    digits[j] = 0;
                    f[j] = axes[j][0];
                }
            }
        })
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        });

    match best {
        Some((_, digits)) => Ok(FractionVector::new(
            digits.iter().enumerate().map(|(j, &d)| axes[j][d]).collect(),
        )),
        None => Err(Error::Validation("no feasible grid point".into())),
    }
}

/// Closed-form Kelly fraction of one asset that gains `gain` with
/// probability `p_gain` and loses `loss` otherwise.
pub fn analytic_kelly_single(p_gain: f64, gain: f64, loss: f64) -> f64 {
    (p_gain * gain - (1.0 - p_gain) * loss) / (gain * loss)
}

/// Sample mean of `ln(1 + sum_j f_j k_ij)` over `paths` outcomes drawn with
/// probabilities `p_i`. Deterministic for a given seed.
pub fn monte_carlo_growth(f: &[f64], space: &OutcomeSpace, paths: usize, seed: u64) -> Result<f64> {
    monte_carlo_growth_with_error(f, space, paths, seed).map(|(mean, _)| mean)
}

/// Sample mean and its standard error.
pub fn monte_carlo_growth_with_error(
    f: &[f64],
    space: &OutcomeSpace,
    paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if paths == 0 {
        return Err(Error::InvalidConfig("at least one path is required".into()));
    }
    let logs = space
        .wealth_factors(f)?
        .into_iter()
        .map(f64::ln)
        .collect::<Vec<_>>();
    let dist = WeightedIndex::new(space.probabilities())
        .map_err(|e| Error::Validation(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Welford accumulation.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for n in 1..=paths {
        let x = logs[dist.sample(&mut rng)];
        let delta = x - mean;
        mean += delta / n as f64;
        m2 += delta * (x - mean);
    }
    let std_error = if paths > 1 {
        (m2 / (paths - 1) as f64 / paths as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Ok((mean, std_error))
}

/// Report statistics computed by recursing directly over the companies'
/// scenarios, without the precomputed outcome space.
pub fn brute_force_report(
    companies: &[Company],
    f: &[f64],
    thresholds: &[f64],
) -> Result<AllocationReport> {
    assert_eq!(companies.len(), f.len());
    let mut rows = Vec::new();
    fn walk(companies: &[Company], f: &[f64], p: f64, r: f64, rows: &mut Vec<(f64, f64)>) {
        match companies.split_first() {
            None => rows.push((p, r)),
            Some((c, rest)) => {
                for s in c.scenarios() {
                    let k = (s.intrinsic_value() - c.market_cap()) / c.market_cap();
                    walk(rest, &f[1..], p * s.probability(), r + f[0] * k, rows);
                }
            }
        }
    }
    walk(companies, f, 1.0, 0.0, &mut rows);

    let mut log_growth = 0.0;
    for (i, &(p, r)) in rows.iter().enumerate() {
        if 1.0 + r <= 0.0 {
            return Err(Error::DomainViolation {
                outcome: i,
                wealth: 1.0 + r,
            });
        }
        log_growth += p * (1.0 + r).ln();
    }
    let worst = rows.iter().map(|&(_, r)| r).fold(f64::INFINITY, f64::min);
    let prob_where = |pred: &dyn Fn(f64) -> bool| -> f64 {
        rows.iter().filter(|&&(_, r)| pred(r)).map(|&(p, _)| p).sum()
    };
    let slack = crate::stats::RETURN_COMPARISON_SLACK;

    let mut grid = thresholds.to_vec();
    if worst < 0.0 && !grid.iter().any(|t| (t + worst).abs() <= slack) {
        grid.push(-worst);
    }
    grid.sort_by(f64::total_cmp);

    Ok(AllocationReport {
        fractions: FractionVector::new(f.to_vec()),
        invested_total: f.iter().sum(),
        expected_arithmetic_gain: rows.iter().map(|&(p, r)| p * r).sum(),
        expected_log_growth: log_growth,
        geometric_gain: log_growth.exp() - 1.0,
        probability_of_loss: prob_where(&|r| r < 0.0),
        loss_exceedance: grid
            .into_iter()
            .map(|t| LossExceedance {
                threshold: t,
                probability: prob_where(&|r| r <= -t + slack),
            })
            .collect(),
        worst_outcome: WorstOutcome {
            portfolio_return: worst,
            probability: prob_where(&|r| r <= worst + slack),
        },
    })
}
