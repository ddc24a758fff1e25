//! Closed-form normalizer and per-agent marginal for `f_star`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::combinatorics::{binomial, positive_compositions, product_sum, stars_bars};
use crate::error::{Error, Result};

/// Sum of `theta` over configurations of `n` agents holding `money` in total,
/// with total debt exactly `a` carried by exactly `b` agents at `<= 0` dollars:
/// `C(n, b) * stars_bars(a, b) * product_sum(money + a, n - b)`.
pub fn phi_count(a: u64, b: u64, n: u64, money: i64, bank: u64) -> BigInt {
    if b > n || a > bank {
        return BigInt::zero();
    }
    binomial(n as i64, b as i64) * stars_bars(a, b) * product_sum(money + a as i64, n - b)
}

/// `varphi(N, M, B_*) = sum_{a=0}^{B_*} sum_{b=0}^{N} phi_count(a, b, N, M, B_*)`.
///
/// The `b` range runs up to `N` (not `N - 1`): the `b = N` term is the
/// all-non-positive configuration, needed when `M <= 0` in the sub-calls made
/// by [`limiting_marginal`].
pub fn varphi(n: u64, money: i64, bank: u64) -> BigInt {
    let mut total = BigInt::zero();
    for a in 0..=bank {
        for b in 0..=n {
            total += phi_count(a, b, n, money, bank);
        }
    }
    total
}

/// Number of reachable configurations (sum `money`, total debt `<= bank`).
pub fn config_count(n: u64, money: i64, bank: u64) -> BigInt {
    let mut total = BigInt::zero();
    for a in 0..=bank {
        for b in 0..=n {
            total += binomial(n as i64, b as i64)
                * stars_bars(a, b)
                * positive_compositions(money + a as i64, n - b);
        }
    }
    total
}

/// Stationary probability that a given agent holds `k` dollars, from the
/// closed form:
/// `k varphi(N-1, M-k, B) / varphi(N, M, B)` for `k > 0`,
/// `varphi(N-1, M-k, B+k) / varphi(N, M, B)` for `-B <= k <= 0`, else `0`.
///
/// Also valid for a single agent (`varphi(0, m, b) = [m == 0]`).
pub fn limiting_marginal(k: i64, n: u64, money: i64, bank: u64) -> Result<BigRational> {
    let norm = normalizer(n, money, bank)?;
    Ok(marginal_with(k, n, money, bank, &norm))
}

/// [`limiting_marginal`] for every `k` in `[-B, M + B]`.
pub fn limiting_marginal_table(n: u64, money: i64, bank: u64) -> Result<Vec<(i64, BigRational)>> {
    let norm = normalizer(n, money, bank)?;
    Ok((-(bank as i64)..=money + bank as i64)
        .map(|k| (k, marginal_with(k, n, money, bank, &norm)))
        .collect())
}

fn normalizer(n: u64, money: i64, bank: u64) -> Result<BigInt> {
    if n == 0 {
        return Err(Error::InvalidParams("need at least one agent".into()));
    }
    let norm = varphi(n, money, bank);
    if !norm.is_positive() {
        return Err(Error::InvalidParams(format!(
            "no reachable configuration for N = {n}, M = {money}, B = {bank}"
        )));
    }
    Ok(norm)
}

fn marginal_with(k: i64, n: u64, money: i64, bank: u64, norm: &BigInt) -> BigRational {
    let b = bank as i64;
    let num = if k > money + b || k < -b {
        BigInt::zero()
    } else if k > 0 {
        varphi(n - 1, money - k, bank) * k
    } else {
        varphi(n - 1, money - k, (b + k) as u64)
    };
    BigRational::new(num, norm.clone())
}
