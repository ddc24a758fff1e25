use exchange_lab_core::class_g::{g_expression, sample_s_mu};
use exchange_lab_core::distribution::{distance, Metric};
use exchange_lab_core::exact::{binomial, positive_compositions, product_sum, stars_bars};
use exchange_lab_core::integrate::{integrate_fixed, Phase};
use exchange_lab_core::meanfield::{q1_apply, q2_apply};
use exchange_lab_core::sim::{init_state, step, thinning_bound, Allocation};
use exchange_lab_core::{ModelParams, RateFunction, WealthDistribution};
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rate_strategy() -> impl Strategy<Value = RateFunction> {
    prop_oneof![
        Just(RateFunction::f_star()),
        Just(RateFunction::f_abs()),
        (0.1f64..5.0).prop_map(|c| RateFunction::constant(c).unwrap()),
    ]
}

/// A well-truncated unit-mass distribution.
fn dist_strategy() -> impl Strategy<Value = WealthDistribution> {
    (-20i64..=-2, prop::collection::vec(0.0f64..1.0, 5..50)).prop_map(|(lo, mut w)| {
        let last = w.len() - 1;
        w[0] = 0.0;
        w[last] = 0.0;
        w[1] += 1e-3;
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        // Keep 0 inside the window.
        let lo = lo.max(-(last as i64) + 1);
        WealthDistribution::new(lo, w).unwrap()
    })
}

proptest! {
    #[test]
    fn pascal_rule(m in 1i64..60, k in 1i64..60) {
        prop_assert_eq!(binomial(m, k), binomial(m - 1, k - 1) + binomial(m - 1, k));
    }

    #[test]
    fn stars_bars_recursion(a in 0u64..25, b in 1u64..8) {
        let by_last: BigInt = (0..=a).map(|y| stars_bars(a - y, b - 1)).sum();
        prop_assert_eq!(stars_bars(a, b), by_last);
    }

    #[test]
    fn product_sum_recursion(n in 0i64..30, r in 1u64..7) {
        let by_last: BigInt = (0..=n).map(|x| product_sum(n - x, r - 1) * x).sum();
        prop_assert_eq!(product_sum(n, r), by_last);
    }

    #[test]
    fn positive_compositions_shift(m in 0i64..30, k in 0u64..8) {
        prop_assert_eq!(positive_compositions(m + k as i64, k), stars_bars(m as u64, k));
    }

    #[test]
    fn operators_conserve(p in dist_strategy(), f in rate_strategy()) {
        let q1 = q1_apply(&p, &f);
        prop_assert!(q1.total().abs() <= 1e-12);
        prop_assert!(q1.first_moment().abs() <= 1e-12);
        let q2 = q2_apply(&p, &f).unwrap();
        prop_assert!(q2.total().abs() <= 1e-12);
        prop_assert!(q2.first_moment().abs() <= 1e-12);
        prop_assert!(q2.debt_moment().abs() <= 1e-12);
    }

    #[test]
    fn debt_rate_nonnegative_for_monotone_rates(
        seed in any::<u64>(),
        mu in 1u64..4,
        c in 0.2f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(p) = sample_s_mu(mu, 10, &mut rng) {
            for f in [RateFunction::f_star(), RateFunction::constant(c).unwrap()] {
                prop_assert!(g_expression(&p, &f) >= -1e-12);
            }
        }
    }

    #[test]
    fn simulator_bookkeeping(
        n in 2usize..40,
        mu in 1u64..4,
        nu in 1u64..3,
        seed in any::<u64>(),
        f in rate_strategy(),
    ) {
        let params = ModelParams::finite(n, mu, nu, f.clone()).unwrap();
        let mut state = init_state(&params, &Allocation::Uniform).unwrap();
        let f_max = thinning_bound(&f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..2000 {
            step(&mut state, &f, f_max, &mut rng);
            prop_assert!(state.check_invariants().is_ok());
        }
        let debt: i64 = state.wealth().iter().map(|&s| (-s).max(0)).sum();
        prop_assert!(debt as u64 <= params.bank_initial().unwrap());
    }

    #[test]
    fn distance_is_a_metric(p in dist_strategy(), q in dist_strategy(), r in dist_strategy()) {
        for m in [Metric::L2, Metric::Tv] {
            prop_assert!((distance(&p, &q, m) - distance(&q, &p, m)).abs() < 1e-15);
            prop_assert!(distance(&p, &r, m) <= distance(&p, &q, m) + distance(&q, &r, m) + 1e-12);
            prop_assert!(distance(&p, &p, m) == 0.0);
        }
    }
}

#[test]
fn rk4_is_fourth_order() {
    let p = WealthDistribution::delta_on(1, -40, 60).unwrap();
    let f = RateFunction::f_star();
    for phase in [Phase::One, Phase::Two] {
        let start = match phase {
            Phase::One => p.clone(),
            // Any state with debt works for the order check.
            Phase::Two => integrate_fixed(&p, &f, Phase::One, 3.0, 0.01).unwrap(),
        };
        let run = |dt: f64| integrate_fixed(&start, &f, phase, 4.0, dt).unwrap();
        let (a, b, c) = (run(0.1), run(0.05), run(0.025));
        let ratio = distance(&a, &b, Metric::L2) / distance(&b, &c, Metric::L2);
        assert!((14.0..18.0).contains(&ratio), "{phase}: ratio {ratio}");
    }
}
