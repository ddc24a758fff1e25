//! Exact binomial sums behind the closed-form normalizer.

use num_bigint::BigInt;
use num_traits::{One, Zero};

/// Binomial coefficient with the conventions the closed form relies on:
/// `C(-1, -1) = 1`, `C(m, k) = 0` for `k < 0` otherwise, and `C(m, k) = 0`
/// whenever `m < k` with `k >= 0`.
pub fn binomial(m: i64, k: i64) -> BigInt {
    if m == -1 && k == -1 {
        return BigInt::one();
    }
    if k < 0 || m < k {
        return BigInt::zero();
    }
    let k = k.min(m - k);
    let mut acc = BigInt::one();
    for i in 1..=k {
        acc *= m - k + i;
        acc /= i;
    }
    acc
}

/// Number of `y in N^b` with `y_1 + ... + y_b = a`: `C(a + b - 1, b - 1)`,
/// and the empty-sum count `[a == 0]` when `b = 0`.
pub fn stars_bars(a: u64, b: u64) -> BigInt {
    if b == 0 {
        return if a == 0 { BigInt::one() } else { BigInt::zero() };
    }
    binomial(a as i64 + b as i64 - 1, b as i64 - 1)
}

/// `s(n, r) = sum_{i=1}^{n} i C(n - i + r - 1, 2r - 1)` by direct summation.
pub fn weighted_sum_s(n: u64, r: u64) -> BigInt {
    weighted_sum(n, r, 2 * r as i64 - 1)
}

/// `u(n, r) = sum_{i=1}^{n} i C(n - i + r - 1, 2r)` by direct summation.
pub fn weighted_sum_u(n: u64, r: u64) -> BigInt {
    weighted_sum(n, r, 2 * r as i64)
}

fn weighted_sum(n: u64, r: u64, k: i64) -> BigInt {
    assert!(r >= 1, "weighted sums need r >= 1");
    let (n, r) = (n as i64, r as i64);
    (1..=n)
        .map(|i| binomial(n - i + r - 1, k) * i)
        .fold(BigInt::zero(), |a, b| a + b)
}

/// Closed form `C(n + r, 2r + 1)` of [`weighted_sum_s`].
pub fn weighted_sum_s_closed(n: u64, r: u64) -> BigInt {
    binomial(n as i64 + r as i64, 2 * r as i64 + 1)
}

/// Closed form `C(n + r, 2r + 2)` of [`weighted_sum_u`].
pub fn weighted_sum_u_closed(n: u64, r: u64) -> BigInt {
    binomial(n as i64 + r as i64, 2 * r as i64 + 2)
}

/// `sum over x in N^r with x_1 + ... + x_r = n of x_1 x_2 ... x_r`, which is
/// `C(n + r - 1, 2r - 1)` for `r >= 1`. For `r = 0` it is the empty product
/// over the single empty composition of `0`; negative `n` has no compositions.
pub fn product_sum(n: i64, r: u64) -> BigInt {
    if n < 0 {
        return BigInt::zero();
    }
    if r == 0 {
        return if n == 0 { BigInt::one() } else { BigInt::zero() };
    }
    binomial(n + r as i64 - 1, 2 * r as i64 - 1)
}

/// Compositions of `m` into `k` strictly positive parts.
pub fn positive_compositions(m: i64, k: u64) -> BigInt {
    if m < 0 {
        return BigInt::zero();
    }
    if k == 0 {
        return if m == 0 { BigInt::one() } else { BigInt::zero() };
    }
    binomial(m - 1, k as i64 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn binomial_conventions() {
        assert_eq!(binomial(-1, -1), big(1));
        assert_eq!(binomial(3, -1), big(0));
        assert_eq!(binomial(-1, 0), big(0));
        assert_eq!(binomial(2, 3), big(0));
        assert_eq!(binomial(5, 2), big(10));
        assert_eq!(binomial(0, 0), big(1));
        assert_eq!(
            binomial(100, 49).to_string(),
            "98913082887808032681188722800"
        );
    }

    #[test]
    fn stars_bars_examples() {
        assert_eq!(stars_bars(2, 2), big(3));
        assert_eq!(stars_bars(0, 0), big(1));
        assert_eq!(stars_bars(3, 1), big(1));
        assert_eq!(stars_bars(3, 0), big(0));
    }

    #[test]
    fn weighted_sum_examples() {
        assert_eq!(weighted_sum_s(2, 1), big(1));
        assert_eq!(weighted_sum_s_closed(2, 1), big(1));
        for r in 1..5 {
            assert_eq!(weighted_sum_s(0, r), big(0));
            assert_eq!(weighted_sum_s_closed(0, r), big(0));
        }
        assert_eq!(weighted_sum_u(3, 1), big(1));
        assert_eq!(weighted_sum_u_closed(3, 1), big(1));
    }

    #[test]
    fn product_sum_examples() {
        assert_eq!(product_sum(4, 2), big(10));
        assert_eq!(product_sum(5, 1), big(5));
        assert_eq!(product_sum(0, 3), big(0));
        assert_eq!(product_sum(0, 0), big(1));
        assert_eq!(product_sum(2, 0), big(0));
        assert_eq!(product_sum(-1, 2), big(0));
    }
}
