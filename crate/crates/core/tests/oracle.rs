mod common;

use kelly_alloc::constraints::{build_constraint_set, ConstraintSet};
use kelly_alloc::model::{enumerate_outcomes, growth};
use kelly_alloc::oracle::{
    analytic_kelly_single, brute_force_maximize, monte_carlo_growth,
    monte_carlo_growth_with_error, GridSpec,
};
use kelly_alloc::solver::{newton_solve, solve};
use kelly_alloc::{Company, ConstraintPolicy, Error, Scenario, SolverConfig, StatusMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{coin_flip, coin_flips, random_instance};

const RESOLUTION: f64 = 0.01;

fn config(check_signs: bool) -> SolverConfig {
    SolverConfig {
        check_multiplier_signs: check_signs,
        ..Default::default()
    }
}

fn two_outcome(p_gain: f64, gain: f64, loss: f64) -> Company {
    Company::new(
        "X",
        1.0,
        vec![
            Scenario::new("down", 1.0 - loss, 1.0 - p_gain).unwrap(),
            Scenario::new("up", 1.0 + gain, p_gain).unwrap(),
        ],
    )
    .unwrap()
}

/// Stationarity of `G(f, f, f, f, f)` for five coin flips, written out over
/// the binomial count of winners.
fn symmetric_five_coin_derivative(f: f64) -> f64 {
    let mut d = 0.0;
    for outcome in 0u32..32 {
        let ks: Vec<f64> = (0..5)
            .map(|b| if outcome >> b & 1 == 1 { 1.0 } else { -0.5 })
            .collect();
        let total: f64 = ks.iter().sum();
        d += ks[0] / (1.0 + f * total) / 32.0;
    }
    d
}

#[test]
fn five_coin_optimum_by_bisection() {
    let (mut lo, mut hi) = (0.0, 0.399);
    assert!(symmetric_five_coin_derivative(lo) > 0.0);
    assert!(symmetric_five_coin_derivative(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if symmetric_five_coin_derivative(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    assert!((root - 0.345_121_924_756_060_2).abs() < 1e-15, "{root}");

    let space = enumerate_outcomes(&coin_flips(5)).unwrap();
    let s = newton_solve(
        &StatusMask::all_inactive(0),
        &space,
        &ConstraintSet::empty(),
        &config(false),
    );
    for f in s.fractions.iter() {
        assert!((f - root).abs() < 1e-9);
    }
}

#[test]
fn analytic_kelly_examples() {
    assert!((analytic_kelly_single(0.5, 1.0, 0.5) - 0.5).abs() < 1e-15);
    assert_eq!(analytic_kelly_single(0.5, 0.5, 0.5), 0.0);
    let leveraged = analytic_kelly_single(0.999, 1.0, 0.5);
    assert!((leveraged - 1.997).abs() < 1e-12, "{leveraged}");
}

#[test]
fn analytic_kelly_matches_unconstrained_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let gain = rng.gen_range(0.1..2.0);
        let loss = rng.gen_range(0.1..0.9);
        let p = rng.gen_range(0.05..0.95);
        let space = enumerate_outcomes(&[two_outcome(p, gain, loss)]).unwrap();
        let s = newton_solve(
            &StatusMask::all_inactive(0),
            &space,
            &ConstraintSet::empty(),
            &config(false),
        );
        assert!(s.converged, "p={p} gain={gain} loss={loss}: {:?}", s.failure);
        let expected = analytic_kelly_single(p, gain, loss);
        assert!(
            (s.fractions[0] - expected).abs() <= 1e-8,
            "{} vs {expected}",
            s.fractions[0]
        );
    }
}

#[test]
fn analytic_kelly_matches_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut checked = 0;
    while checked < 100 {
        let gain = rng.gen_range(0.1..2.0);
        let loss = rng.gen_range(0.1..0.9);
        let p = rng.gen_range(0.05..0.95);
        if p * gain <= (1.0 - p) * loss {
            continue;
        }
        let space = enumerate_outcomes(&[two_outcome(p, gain, loss)]).unwrap();
        let hi = (1.0 / loss).min(20.0);
        let grid = GridSpec::uniform(RESOLUTION, 0.0, hi, 1);
        let best = brute_force_maximize(&space, &ConstraintSet::empty(), &grid).unwrap();
        let expected = analytic_kelly_single(p, gain, loss);
        assert!(
            (best[0] - expected).abs() <= RESOLUTION + 1e-12,
            "grid {} vs {expected}",
            best[0]
        );
        checked += 1;
    }
}

#[test]
fn grid_examples() {
    let one = enumerate_outcomes(&[coin_flip("A")]).unwrap();
    let best = brute_force_maximize(&one, &ConstraintSet::empty(), &GridSpec::uniform(0.01, 0.0, 2.0, 1))
        .unwrap();
    assert!((best[0] - 0.5).abs() < 1e-12);

    let two = enumerate_outcomes(&coin_flips(2)).unwrap();
    let policy = ConstraintPolicy {
        max_leverage: Some(0.0),
        ..Default::default()
    };
    let set = build_constraint_set(&policy, 2).unwrap();
    let best = brute_force_maximize(&two, &set, &GridSpec::for_constraints(0.01, &set, 2)).unwrap();
    assert!((best[0] - best[1]).abs() <= 0.01 + 1e-12, "{:?}", best);

    let flat = enumerate_outcomes(&[two_outcome(0.5, 0.5, 0.5)]).unwrap();
    let best =
        brute_force_maximize(&flat, &ConstraintSet::empty(), &GridSpec::uniform(0.01, 0.0, 1.0, 1))
            .unwrap();
    assert_eq!(best[0], 0.0);
}

#[test]
fn grid_guards() {
    let space = enumerate_outcomes(&coin_flips(4)).unwrap();
    let err = brute_force_maximize(
        &space,
        &ConstraintSet::empty(),
        &GridSpec::uniform(0.001, 0.0, 1.0, 4),
    )
    .unwrap_err();
    assert!(matches!(err, Error::GridTooLarge { .. }), "{err:?}");

    let five = enumerate_outcomes(&coin_flips(5)).unwrap();
    assert!(brute_force_maximize(
        &five,
        &ConstraintSet::empty(),
        &GridSpec::uniform(0.5, 0.0, 1.0, 5)
    )
    .is_err());
}

#[test]
fn viability_without_sign_check_can_pick_non_maximizers() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut diverged = 0;
    for _ in 0..50 {
        let (companies, policy) = random_instance(&mut rng);
        let space = enumerate_outcomes(&companies).unwrap();
        let set = build_constraint_set(&policy, companies.len()).unwrap();
        let loose = solve(&space, &set, &config(false)).unwrap().selected;
        let strict = solve(&space, &set, &config(true)).unwrap().selected;
        let g_loose = growth(&loose.fractions, &space).unwrap();
        let g_strict = growth(&strict.fractions, &space).unwrap();
        // The sign-checked selection is the constrained maximizer.
        assert!(g_strict >= g_loose - 1e-12);
        if g_strict > g_loose + 1e-9 {
            diverged += 1;
        }
    }
    println!("selections below the maximum without the sign check: {diverged}/50");
}

#[test]
fn looser_leverage_never_lowers_growth() {
    let space = enumerate_outcomes(&coin_flips(3)).unwrap();
    let mut last = f64::NEG_INFINITY;
    for leverage in [0.0, 0.25, 0.5, 1.0] {
        let policy = ConstraintPolicy {
            max_leverage: Some(leverage),
            ..Default::default()
        };
        let set = build_constraint_set(&policy, 3).unwrap();
        let s = solve(&space, &set, &config(true)).unwrap().selected;
        let g = growth(&s.fractions, &space).unwrap();
        assert!(g >= last - 1e-12, "L={leverage}: {g} < {last}");
        last = g;
    }
}

#[test]
fn monte_carlo_estimates_growth() {
    let space = enumerate_outcomes(&[coin_flip("A")]).unwrap();
    let exact = growth(&[0.5], &space).unwrap();
    assert!((exact - 0.05889).abs() < 1e-5);
    let (mean, se) = monte_carlo_growth_with_error(&[0.5], &space, 1_000_000, 1).unwrap();
    assert!((mean - exact).abs() <= 3.0 * se, "{mean} +- {se} vs {exact}");
}

#[test]
fn monte_carlo_converges() {
    let companies = coin_flips(3);
    let space = enumerate_outcomes(&companies).unwrap();
    let f = [0.2, 0.3, 0.1];
    let exact = growth(&f, &space).unwrap();
    let mut errors = Vec::new();
    for paths in [1_000, 100_000, 10_000_000] {
        let (mean, se) = monte_carlo_growth_with_error(&f, &space, paths, 5).unwrap();
        assert!((mean - exact).abs() <= 4.0 * se, "{paths}: {mean} +- {se}");
        errors.push(se);
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]));
    assert!(errors[2] < 1e-4);
}

#[test]
fn monte_carlo_is_reproducible() {
    let space = enumerate_outcomes(&coin_flips(2)).unwrap();
    let a = monte_carlo_growth(&[0.3, 0.2], &space, 10_000, 99).unwrap();
    let b = monte_carlo_growth(&[0.3, 0.2], &space, 10_000, 99).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    assert_eq!(monte_carlo_growth(&[0.0, 0.0], &space, 1000, 3).unwrap(), 0.0);
    assert!(monte_carlo_growth(&[3.0, 0.0], &space, 10, 3).is_err());
    assert!(monte_carlo_growth(&[0.1, 0.0], &space, 0, 3).is_err());
}
