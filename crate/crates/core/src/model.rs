//! Companies, scenarios and the joint outcome space, together with the
//! expected logarithmic growth function and its first two derivatives.
//!
//! Scenarios of different companies are treated as independent: the
//! probability of a joint outcome is the product of the probabilities of
//! its constituent scenarios.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of scenario (and outcome) probabilities.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Default cap on the number of joint outcomes.
pub const DEFAULT_OUTCOME_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    label: String,
    intrinsic_value: f64,
    probability: f64,
}

impl Scenario {
    pub fn new(label: impl Into<String>, intrinsic_value: f64, probability: f64) -> Result<Self> {
        let label = label.into();
        if !intrinsic_value.is_finite() || intrinsic_value < 0.0 {
            return Err(Error::Validation(format!(
                "scenario '{label}': intrinsic value must be finite and >= 0, got {intrinsic_value}"
            )));
        }
        if !(probability > 0.0 && probability <= 1.0) {
            return Err(Error::Validation(format!(
                "scenario '{label}': probability must lie in (0, 1], got {probability}"
            )));
        }
        Ok(Scenario {
            label,
            intrinsic_value,
            probability,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn intrinsic_value(&self) -> f64 {
        self.intrinsic_value
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }
}

/// A candidate company. Intrinsic values and market cap share one currency
/// unit; the currency label is informational since returns are ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct Company {
    name: String,
    currency: Option<String>,
    market_cap: f64,
    scenarios: Vec<Scenario>,
}

impl Company {
    /// Builds a validated company. At least one scenario must lie below the
    /// market cap.
    pub fn new(name: impl Into<String>, market_cap: f64, scenarios: Vec<Scenario>) -> Result<Self> {
        Self::build(name.into(), market_cap, scenarios, false)
    }

    /// Same as [`Company::new`] but without the downside-scenario rule.
    pub fn new_allowing_no_downside(
        name: impl Into<String>,
        market_cap: f64,
        scenarios: Vec<Scenario>,
    ) -> Result<Self> {
        Self::build(name.into(), market_cap, scenarios, true)
    }

    fn build(
        name: String,
        market_cap: f64,
        scenarios: Vec<Scenario>,
        allow_no_downside: bool,
    ) -> Result<Self> {
        if !market_cap.is_finite() || market_cap <= 0.0 {
            return Err(Error::Validation(format!(
                "company '{name}': market cap must be positive, got {market_cap}"
            )));
        }
        if scenarios.is_empty() {
            return Err(Error::Validation(format!(
                "company '{name}': at least one scenario is required"
            )));
        }
        let total: f64 = scenarios.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::Validation(format!(
                "company '{name}': scenario probabilities sum to {total}, expected 1"
            )));
        }
        if !allow_no_downside && !scenarios.iter().any(|s| s.intrinsic_value < market_cap) {
            return Err(Error::Validation(format!(
                "company '{name}': no downside scenario (every intrinsic value is at or above \
                 the market cap); model what can go wrong, e.g. an unknown total-loss scenario \
                 with a small probability"
            )));
        }
        Ok(Company {
            name,
            currency: None,
            market_cap,
            scenarios,
        })
    }

    pub fn with_currency(mut self, currency: impl Into<String>) -> Self {
        self.currency = Some(currency.into());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn currency(&self) -> Option<&str> {
        self.currency.as_deref()
    }

    pub fn market_cap(&self) -> f64 {
        self.market_cap
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    /// Relative return `(V - M) / M` of one scenario.
    ///
    /// Panics if `scenario_index` is out of range.
    pub fn scenario_return(&self, scenario_index: usize) -> f64 {
        scenario_return(self.scenarios[scenario_index].intrinsic_value, self.market_cap)
    }
}

pub fn scenario_return(intrinsic_value: f64, market_cap: f64) -> f64 {
    (intrinsic_value - market_cap) / market_cap
}

/// Allocation fractions, one per company, relative to total capital.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FractionVector(Vec<f64>);

impl FractionVector {
    pub fn new(fractions: Vec<f64>) -> Self {
        FractionVector(fractions)
    }

    pub fn zeros(n: usize) -> Self {
        FractionVector(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FractionVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FractionVector {
    fn from(v: Vec<f64>) -> Self {
        FractionVector(v)
    }
}

/// Marginal view of one company: (probability, return) per scenario.
pub type Marginal = Vec<(f64, f64)>;

/// Joint enumeration of all per-company scenarios.
///
/// Returns are stored row-major: outcome `i`, company `j` lives at
/// `i * num_companies + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSpace {
    num_companies: usize,
    probabilities: Vec<f64>,
    returns: Vec<f64>,
    marginals: Vec<Marginal>,
}

impl OutcomeSpace {
    pub fn num_companies(&self) -> usize {
        self.num_companies
    }

    pub fn num_outcomes(&self) -> usize {
        self.probabilities.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, outcome: usize) -> f64 {
        self.probabilities[outcome]
    }

    /// Per-company returns `k_ij` of outcome `i`.
    pub fn returns(&self, outcome: usize) -> &[f64] {
        let n = self.num_companies;
        &self.returns[outcome * n..(outcome + 1) * n]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.probabilities
            .iter()
            .copied()
            .zip(self.returns.chunks_exact(self.num_companies))
    }

    /// Scenario-level (probability, return) pairs of one company.
    pub fn marginal(&self, company: usize) -> &[(f64, f64)] {
        &self.marginals[company]
    }

    fn check_dimension(&self, f: &[f64]) {
        assert_eq!(
            f.len(),
            self.num_companies,
            "fraction vector length does not match the number of companies"
        );
    }

    /// Wealth factors `1 + sum_j f_j k_ij` for every outcome, failing on the
    /// first nonpositive one.
    pub fn wealth_factors(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_dimension(f);
        self.iter()
            .enumerate()
            .map(|(i, (_, k))| {
                let w = 1.0 + dot(f, k);
                if w > 0.0 && w.is_finite() {
                    Ok(w)
                } else {
                    Err(Error::DomainViolation {
                        outcome: i,
                        wealth: w,
                    })
                }
            })
            .collect()
    }

    /// Portfolio return `sum_j f_j k_ij` for every outcome.
    pub fn portfolio_returns(&self, f: &[f64]) -> Vec<f64> {
        self.check_dimension(f);
        self.iter().map(|(_, k)| dot(f, k)).collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn enumerate_outcomes(companies: &[Company]) -> Result<OutcomeSpace> {
    enumerate_outcomes_with_cap(companies, DEFAULT_OUTCOME_CAP)
}

/// Cartesian product of every company's scenarios. The first company varies
/// slowest.
pub fn enumerate_outcomes_with_cap(companies: &[Company], cap: usize) -> Result<OutcomeSpace> {
    if companies.is_empty() {
        return Err(Error::Validation("at least one company is required".into()));
    }
    let count = companies
        .iter()
        .try_fold(1u128, |acc, c| acc.checked_mul(c.scenarios.len() as u128))
        .unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(Error::OutcomeExplosion { count, cap });
    }
    let count = count as usize;
    let n = companies.len();

    let marginals: Vec<Marginal> = companies
        .iter()
        .map(|c| {
            c.scenarios
                .iter()
                .map(|s| (s.probability, scenario_return(s.intrinsic_value, c.market_cap)))
                .collect()
        })
        .collect();

    let mut probabilities = Vec::with_capacity(count);
    let mut returns = Vec::with_capacity(count * n);
    let mut digits = vec![0usize; n];
    for _ in 0..count {
        let mut p = 1.0;
        for (j, &d) in digits.iter().enumerate() {
            let (pj, kj) = marginals[j][d];
            p *= pj;
            returns.push(kj);
        }
        probabilities.push(p);

        for j in (0..n).rev() {
            digits[j] += 1;
            if digits[j] < marginals[j].len() {
                break;
            }
            digits[j] = 0;
        }
    }

    Ok(OutcomeSpace {
        num_companies: n,
        probabilities,
        returns,
        marginals,
    })
}

/// Expected log growth `G = sum_i p_i ln(1 + sum_j f_j k_ij)`.
pub fn growth(f: &[f64], space: &OutcomeSpace) -> Result<f64> {
    let w = space.wealth_factors(f)?;
    Ok(space.probabilities.iter().zip(&w).map(|(p, w)| p * w.ln()).sum())
}

/// `dG/df_j = sum_i p_i k_ij / (1 + sum_m f_m k_im)`.
pub fn growth_gradient(f: &[f64], space: &OutcomeSpace) -> Result<DVector<f64>> {
    let w = space.wealth_factors(f)?;
    let mut g = DVector::zeros(space.num_companies);
    for ((p, k), w) in space.iter().zip(&w) {
        let scale = p / w;
        for (gj, kj) in g.iter_mut().zip(k) {
            *gj += scale * kj;
        }
    }
    Ok(g)
}

/// `d2G/df_a df_b = -sum_i p_i k_ia k_ib / (1 + sum_m f_m k_im)^2`.
pub fn growth_hessian(f: &[f64], space: &OutcomeSpace) -> Result<DMatrix<f64>> {
    let w = space.wealth_factors(f)?;
    let n = space.num_companies;
    let mut h = DMatrix::zeros(n, n);
    for ((p, k), w) in space.iter().zip(&w) {
        let scale = p / (w * w);
        for a in 0..n {
            let ka = scale * k[a];
            for b in a..n {
                h[(a, b)] -= ka * k[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    Ok(h)
}
