use std::collections::BTreeMap;

use exchange_lab_core::exact::{
    config_count, enumerate_stationary, limiting_marginal, transition_rate, varphi,
    Configuration, ExactDistribution, ENUMERATION_BOUND,
};
use exchange_lab_core::{Error, RateFunction};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Every configuration reachable by a single dollar move out of `xi`.
fn neighbours(xi: &Configuration) -> Vec<Configuration> {
    let n = xi.0.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let mut v = xi.0.clone();
                v[i] -= 1;
                v[j] += 1;
                out.push(Configuration(v));
            }
        }
    }
    out
}

fn assert_global_balance(d: &ExactDistribution, f: &RateFunction) {
    let index: BTreeMap<Vec<i64>, usize> = d
        .configs
        .iter()
        .enumerate()
        .map(|(k, c)| (c.0.clone(), k))
        .collect();
    for (k, xi) in d.configs.iter().enumerate() {
        let mut inflow = BigRational::zero();
        let mut outflow = BigRational::zero();
        for nb in neighbours(xi) {
            let Some(&m) = index.get(&nb.0) else {
                assert!(!nb.is_reachable(d.bank) || nb.total() != d.money);
                continue;
            };
            inflow += &d.weights[m] * transition_rate(&nb, xi, d.bank, f).unwrap();
            outflow += &d.weights[k] * transition_rate(xi, &nb, d.bank, f).unwrap();
        }
        assert_eq!(inflow, outflow, "balance fails at {:?}", xi.0);
    }
}

#[test]
fn stationary_law_balances_the_generator() {
    let rates = [
        RateFunction::f_star(),
        RateFunction::f_abs(),
        RateFunction::constant(0.5).unwrap(),
        RateFunction::table([(-1, 0.5), (0, 2.0), (2, 0.25)].into_iter().collect(), 1.0).unwrap(),
    ];
    for f in &rates {
        for (n, money, bank) in [(2, 2, 1), (3, 2, 2), (3, 4, 1), (4, 1, 3)] {
            let d = enumerate_stationary(n, money, bank, f).unwrap();
            assert_global_balance(&d, f);
        }
    }
}

#[test]
fn reachable_set_has_the_counted_size() {
    for n in 1..=4usize {
        for money in 0..=5i64 {
            for bank in 0..=3u64 {
                if money == 0 && n == 1 && bank == 0 {
                    continue;
                }
                let d = enumerate_stationary(n, money, bank, &RateFunction::unit()).unwrap();
                assert_eq!(BigInt::from(d.configs.len()), config_count(n as u64, money, bank));
                // Constant rates weight all configurations equally.
                let first = &d.weights[0];
                assert!(d.weights.iter().all(|w| w == first));
            }
        }
    }
}

#[test]
fn marginals_sum_to_one() {
    for (n, money, bank) in [(1, 3, 2), (2, 2, 1), (3, 5, 4), (4, 6, 2)] {
        let total: BigRational = (-(bank as i64)..=money + bank as i64)
            .map(|k| limiting_marginal(k, n, money, bank).unwrap())
            .fold(BigRational::zero(), |a, b| a + b);
        assert_eq!(total, BigRational::one());
    }
}

#[test]
fn varphi_matches_enumeration_beyond_the_grid() {
    for (n, money, bank) in [(5, 7, 3), (6, 4, 5), (3, 12, 6)] {
        let d = enumerate_stationary(n, money, bank, &RateFunction::f_star()).unwrap();
        assert_eq!(d.normalizer, BigRational::from_integer(varphi(n as u64, money, bank)));
    }
}

#[test]
fn size_guard_names_the_bound() {
    let err = enumerate_stationary(20, 40, 20, &RateFunction::f_star()).unwrap_err();
    match err {
        Error::TooLarge { bound, .. } => assert_eq!(bound, ENUMERATION_BOUND),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn single_agent_holds_everything() {
    let d = enumerate_stationary(1, 4, 2, &RateFunction::f_star()).unwrap();
    assert_eq!(d.marginal_table(), vec![(4, BigRational::one())]);
    assert_eq!(limiting_marginal(4, 1, 4, 2).unwrap(), BigRational::one());
}
