#![allow(dead_code)]

use std::path::PathBuf;

use kelly_alloc::model::OutcomeSpace;
use kelly_alloc::{parse_portfolio, Company, ConstraintPolicy, ParseOptions, Scenario};
use rand::Rng;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("data")
        .join(name)
}

pub fn load(name: &str) -> Vec<Company> {
    let text = std::fs::read_to_string(data_path(name)).unwrap();
    parse_portfolio(&text, ParseOptions::default()).unwrap()
}

pub fn coin_flip(name: &str) -> Company {
    Company::new(
        name,
        1.0,
        vec![
            Scenario::new("down", 0.5, 0.5).unwrap(),
            Scenario::new("up", 2.0, 0.5).unwrap(),
        ],
    )
    .unwrap()
}

pub fn coin_flips(n: usize) -> Vec<Company> {
    (0..n).map(|i| coin_flip(&format!("C{i}"))).collect()
}

/// Random company with 2-3 scenarios: one downside in `[0, 0.9 M]`, the
/// rest in `[M, 3 M]`.
pub fn random_company<R: Rng>(rng: &mut R, name: &str) -> Company {
    let market_cap = rng.gen_range(1.0..1000.0);
    let n = rng.gen_range(2..=3);
    let mut weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let last = 1.0 - weights[..n - 1].iter().sum::<f64>();
    weights[n - 1] = last;
    let scenarios = (0..n)
        .map(|k| {
            let v = if k == 0 {
                market_cap * rng.gen_range(0.0..0.9)
            } else {
                market_cap * rng.gen_range(1.0..3.0)
            };
            Scenario::new(format!("s{k}"), v, weights[k]).unwrap()
        })
        .collect();
    Company::new(name, market_cap, scenarios).unwrap()
}

pub fn random_companies<R: Rng>(rng: &mut R, n: usize) -> Vec<Company> {
    (0..n).map(|i| random_company(rng, &format!("R{i}"))).collect()
}

/// Random fractions in `[-0.5, 1.5]`, shrunk until every wealth factor is at
/// least 0.1.
pub fn random_feasible_point<R: Rng>(rng: &mut R, space: &OutcomeSpace) -> Vec<f64> {
    let mut f: Vec<f64> = (0..space.num_companies())
        .map(|_| rng.gen_range(-0.5..1.5))
        .collect();
    loop {
        let min_wealth = space
            .iter()
            .map(|(_, k)| 1.0 + k.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        if min_wealth >= 0.1 {
            return f;
        }
        f.iter_mut().for_each(|x| *x *= 0.8);
    }
}

/// Random 1-3 company instance with long-only plus leverage `L` in `{0, 0.5}`
/// and, sometimes, an allocation cap or a loss limit.
pub fn random_instance<R: Rng>(rng: &mut R) -> (Vec<Company>, ConstraintPolicy) {
    let n = rng.gen_range(1..=3);
    let companies = random_companies(rng, n);
    let mut policy = ConstraintPolicy {
        max_leverage: Some(if rng.gen_bool(0.5) { 0.0 } else { 0.5 }),
        ..Default::default()
    };
    match rng.gen_range(0..3) {
        0 => policy.max_allocation = Some(rng.gen_range(0.1..0.6)),
        1 => policy.max_loss = Some((rng.gen_range(0.05..0.3), rng.gen_range(-0.5..-0.05))),
        _ => {}
    }
    (companies, policy)
}
