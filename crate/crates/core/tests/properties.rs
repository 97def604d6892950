mod common;

use kelly_alloc::model::{enumerate_outcomes, growth, growth_gradient, growth_hessian};
use kelly_alloc::oracle::brute_force_report;
use kelly_alloc::stats::{compute_report, DEFAULT_LOSS_THRESHOLDS};
use kelly_alloc::{parse_portfolio, serialize_portfolio, Company, ParseOptions, Scenario};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_companies, random_feasible_point};

fn scenario_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    // (value relative to market cap, weight); first scenario is a downside.
    (
        (0.0f64..0.95, 0.05f64..1.0),
        prop::collection::vec((0.5f64..4.0, 0.05f64..1.0), 0..3),
    )
        .prop_map(|(down, rest)| std::iter::once(down).chain(rest).collect())
}

fn company_from(name: &str, market_cap: f64, raw: &[(f64, f64)]) -> Company {
    let total: f64 = raw.iter().map(|(_, w)| w).sum();
    let scenarios = raw
        .iter()
        .enumerate()
        .map(|(k, (v, w))| Scenario::new(format!("s{k}"), v * market_cap, w / total).unwrap())
        .collect();
    Company::new(name, market_cap, scenarios).unwrap()
}

fn portfolio_strategy() -> impl Strategy<Value = Vec<Company>> {
    prop::collection::vec((1e-3f64..1e12, scenario_strategy()), 1..5).prop_map(|cs| {
        cs.iter()
            .enumerate()
            .map(|(i, (m, raw))| company_from(&format!("X{i}"), *m, raw))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outcome_probabilities_sum_to_one(companies in portfolio_strategy()) {
        let space = enumerate_outcomes(&companies).unwrap();
        let total: f64 = space.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        let expected: usize = companies.iter().map(|c| c.scenarios().len()).product();
        prop_assert_eq!(space.num_outcomes(), expected);
        for (_, k) in space.iter() {
            prop_assert!(k.iter().all(|&x| x >= -1.0));
        }
    }

    #[test]
    fn currency_rescaling_is_invisible(
        companies in portfolio_strategy(),
        scale in 1e-6f64..1e6,
        which in 0usize..4,
    ) {
        let j = which % companies.len();
        let mut scaled = companies.clone();
        let c = &companies[j];
        scaled[j] = Company::new(
            c.name(),
            c.market_cap() * scale,
            c.scenarios()
                .iter()
                .map(|s| Scenario::new(s.label(), s.intrinsic_value() * scale, s.probability()).unwrap())
                .collect(),
        )
        .unwrap();
        let a = enumerate_outcomes(&companies).unwrap();
        let b = enumerate_outcomes(&scaled).unwrap();
        let f = vec![0.1; companies.len()];
        for i in 0..a.num_outcomes() {
            for (x, y) in a.returns(i).iter().zip(b.returns(i)) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
        prop_assert!((growth(&f, &a).unwrap() - growth(&f, &b).unwrap()).abs() <= 1e-12);
        let ga = growth_gradient(&f, &a).unwrap();
        let gb = growth_gradient(&f, &b).unwrap();
        prop_assert!((ga - gb).amax() <= 1e-12);
        let ha = growth_hessian(&f, &a).unwrap();
        let hb = growth_hessian(&f, &b).unwrap();
        prop_assert!((ha - hb).amax() <= 1e-12);
    }

    #[test]
    fn permuting_companies_permutes_outputs(
        companies in portfolio_strategy(),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let n = companies.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let permuted: Vec<Company> = perm.iter().map(|&j| companies[j].clone()).collect();
        let a = enumerate_outcomes(&companies).unwrap();
        let b = enumerate_outcomes(&permuted).unwrap();
        let f: Vec<f64> = (0..n).map(|j| 0.05 + 0.1 * j as f64 / n as f64).collect();
        let fp: Vec<f64> = perm.iter().map(|&j| f[j]).collect();
        prop_assert!((growth(&f, &a).unwrap() - growth(&fp, &b).unwrap()).abs() <= 1e-12);
        let ga = growth_gradient(&f, &a).unwrap();
        let gb = growth_gradient(&fp, &b).unwrap();
        let ha = growth_hessian(&f, &a).unwrap();
        let hb = growth_hessian(&fp, &b).unwrap();
        for (p, &j) in perm.iter().enumerate() {
            prop_assert!((ga[j] - gb[p]).abs() <= 1e-12);
            for (q, &k) in perm.iter().enumerate() {
                prop_assert!((ha[(j, k)] - hb[(p, q)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn portfolio_documents_round_trip(companies in portfolio_strategy()) {
        let text = serialize_portfolio(&companies);
        let parsed = parse_portfolio(&text, ParseOptions::default()).unwrap();
        prop_assert_eq!(parsed, companies);
    }

    #[test]
    fn report_statistics(companies in portfolio_strategy(), seed in any::<u64>()) {
        let space = enumerate_outcomes(&companies).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = random_feasible_point(&mut rng, &space)
            .into_iter()
            .map(f64::abs)
            .collect();
        let f = {
            // abs() may leave the domain; fall back to a small allocation.
            if space.wealth_factors(&f).is_ok() { f } else { vec![0.01; f.len()] }
        };
        let r = compute_report(&f, &space).unwrap();

        prop_assert!((0.0..=1.0 + 1e-12).contains(&r.probability_of_loss));
        for e in &r.loss_exceedance {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&e.probability));
        }
        for w in r.loss_exceedance.windows(2) {
            prop_assert!(w[0].probability >= w[1].probability);
        }
        let by_company: f64 = (0..f.len())
            .map(|j| f[j] * space.marginal(j).iter().map(|(p, k)| p * k).sum::<f64>())
            .sum();
        prop_assert!((r.expected_arithmetic_gain - by_company).abs() <= 1e-12);
        if f.iter().any(|&x| x > 0.0) {
            prop_assert!(r.geometric_gain <= r.expected_arithmetic_gain + 1e-15);
        }
        let loss: f64 = space
            .iter()
            .filter(|(_, k)| k.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() < 0.0)
            .map(|(p, _)| p)
            .sum();
        prop_assert!((r.probability_of_loss - loss).abs() <= 1e-12);

        let oracle = brute_force_report(&companies, &f, &DEFAULT_LOSS_THRESHOLDS).unwrap();
        prop_assert!((oracle.expected_arithmetic_gain - r.expected_arithmetic_gain).abs() <= 1e-12);
        prop_assert!((oracle.expected_log_growth - r.expected_log_growth).abs() <= 1e-12);
        prop_assert!((oracle.probability_of_loss - r.probability_of_loss).abs() <= 1e-12);
        prop_assert_eq!(oracle.loss_exceedance.len(), r.loss_exceedance.len());
    }
}

#[test]
fn hessian_is_negative_semidefinite() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let n = 1 + (rand::Rng::gen_range(&mut rng, 0..4));
        let space = enumerate_outcomes(&random_companies(&mut rng, n)).unwrap();
        let f = random_feasible_point(&mut rng, &space);
        let hess = growth_hessian(&f, &space).unwrap();
        assert_eq!(hess, hess.transpose());
        for _ in 0..100 {
            let x = nalgebra_vector(&mut rng, n);
            let q = (x.transpose() * &hess * &x)[(0, 0)];
            assert!(q <= 1e-10, "x'Hx = {q}");
        }
    }
}

fn nalgebra_vector(rng: &mut ChaCha8Rng, n: usize) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_iterator(n, (0..n).map(|_| rand::Rng::gen_range(rng, -1.0..1.0)))
}
