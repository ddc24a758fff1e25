//! Probability mass functions over an integer wealth window.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rate::RateFunction;

/// Negativity slack for entries produced by the integrators.
pub const EPS_POS: f64 = 1e-12;
/// Default bound on boundary entries for a well-truncated distribution.
pub const TAIL_TOL: f64 = 1e-10;

/// Dense pmf `p_n` for `n` in `window_min..=window_max`, with
/// `window_min <= 0 <= window_max`. Entries outside the window are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthDistribution {
    window_min: i64,
    probs: Vec<f64>,
}

impl WealthDistribution {
    pub fn new(window_min: i64, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty window".into()));
        }
        let window_max = window_min + probs.len() as i64 - 1;
        if window_min > 0 || window_max < 0 {
            return Err(Error::InvalidDistribution(format!(
                "window [{window_min}, {window_max}] must contain 0"
            )));
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "non-finite entry at n = {}",
                window_min + i as i64
            )));
        }
        Ok(Self { window_min, probs })
    }

    pub fn zeros(window_min: i64, window_max: i64) -> Result<Self> {
        if window_max < window_min {
            return Err(Error::InvalidDistribution(format!(
                "empty window [{window_min}, {window_max}]"
            )));
        }
        Self::new(window_min, vec![0.0; (window_max - window_min + 1) as usize])
    }

    /// Point mass at `n`, on the smallest window containing `0` and `n`.
    pub fn delta(n: i64) -> Self {
        Self::delta_on(n, n.min(0), n.max(0)).expect("window contains n and 0")
    }

    pub fn delta_on(n: i64, window_min: i64, window_max: i64) -> Result<Self> {
        let mut d = Self::zeros(window_min, window_max)?;
        if !d.contains(n) {
            return Err(Error::InvalidDistribution(format!(
                "n = {n} lies outside [{window_min}, {window_max}]"
            )));
        }
        d.set(n, 1.0);
        Ok(d)
    }

    /// Builds a distribution from `(n, p_n)` pairs on the smallest window
    /// containing `0` and every listed `n`. Repeated `n` accumulate.
    pub fn from_pairs(pairs: &[(i64, f64)]) -> Result<Self> {
        let lo = pairs.iter().map(|&(n, _)| n).min().unwrap_or(0).min(0);
        let hi = pairs.iter().map(|&(n, _)| n).max().unwrap_or(0).max(0);
        let mut d = Self::zeros(lo, hi)?;
        for &(n, p) in pairs {
            if !p.is_finite() {
                return Err(Error::InvalidDistribution(format!("non-finite p_{n}")));
            }
            d.probs[(n - lo) as usize] += p;
        }
        Ok(d)
    }

    pub fn window_min(&self) -> i64 {
        self.window_min
    }

    pub fn window_max(&self) -> i64 {
        self.window_min + self.probs.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn contains(&self, n: i64) -> bool {
        n >= self.window_min && n <= self.window_max()
    }

    pub fn get(&self, n: i64) -> f64 {
        if self.contains(n) {
            self.probs[(n - self.window_min) as usize]
        } else {
            0.0
        }
    }

    /// Panics if `n` is outside the window.
    pub fn set(&mut self, n: i64, p: f64) {
        assert!(self.contains(n), "n = {n} outside window");
        let i = (n - self.window_min) as usize;
        self.probs[i] = p;
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let lo = self.window_min;
        self.probs.iter().enumerate().map(move |(i, &p)| (lo + i as i64, p))
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn moments(&self) -> (f64, f64) {
        (self.mass(), self.mean())
    }

    /// Average debt per agent, `-sum_{n <= -1} n p_n`.
    pub fn debt(&self) -> f64 {
        self.iter()
            .take_while(|&(n, _)| n < 0)
            .map(|(n, p)| -(n as f64) * p)
            .sum()
    }

    /// `sum_n f(n) p_n` over the window.
    pub fn mean_rate(&self, f: &RateFunction) -> f64 {
        self.iter().map(|(n, p)| f.eval(n) * p).sum()
    }

    /// Largest absolute value of the two boundary entries.
    pub fn boundary_mass(&self) -> f64 {
        let first = self.probs[0].abs();
        let last = self.probs[self.probs.len() - 1].abs();
        first.max(last)
    }

    pub fn is_well_truncated(&self, tol: f64) -> bool {
        self.boundary_mass() < tol
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.mass() - 1.0).abs() <= tol
    }

    /// Smallest entry and where it sits.
    pub fn min_entry(&self) -> (i64, f64) {
        self.iter()
            .fold((self.window_min, f64::INFINITY), |acc, (n, p)| {
                if p < acc.1 {
                    (n, p)
                } else {
                    acc
                }
            })
    }

    pub fn check_nonnegative(&self, slack: f64) -> Result<()> {
        let (n, p) = self.min_entry();
        if p < -slack {
            Err(Error::InvalidDistribution(format!(
                "p_{n} = {p:e} is negative beyond slack {slack:e}"
            )))
        } else {
            Ok(())
        }
    }

    /// Copy on a new window; entries dropped from the old window must be zero.
    pub fn rewindow(&self, window_min: i64, window_max: i64) -> Result<Self> {
        let mut out = Self::zeros(window_min, window_max)?;
        for (n, p) in self.iter() {
            if out.contains(n) {
                out.set(n, p);
            } else if p != 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "p_{n} = {p:e} would be dropped by window [{window_min}, {window_max}]"
                )));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L2,
    Tv,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(Metric::L2),
            "tv" => Ok(Metric::Tv),
            other => Err(Error::InvalidParams(format!("unknown metric `{other}`"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::L2 => "l2",
            Metric::Tv => "tv",
        })
    }
}

/// Distance between two pmfs on the union of their windows.
pub fn distance(p: &WealthDistribution, q: &WealthDistribution, metric: Metric) -> f64 {
    let lo = p.window_min().min(q.window_min());
    let hi = p.window_max().max(q.window_max());
    let diffs = (lo..=hi).map(|n| p.get(n) - q.get(n));
    match metric {
        Metric::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
        Metric::Tv => 0.5 * diffs.map(f64::abs).sum::<f64>(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn moments_examples() {
        assert_eq!(WealthDistribution::delta(0).moments(), (1.0, 0.0));
        assert_eq!(WealthDistribution::delta(1).moments(), (1.0, 1.0));
        let p = WealthDistribution::from_pairs(&[(-1, 0.25), (3, 0.75)]).unwrap();
        assert_eq!(p.moments(), (1.0, 2.0));
    }

    #[test]
    fn debt_examples() {
        assert_eq!(WealthDistribution::delta(0).debt(), 0.0);
        assert_eq!(WealthDistribution::delta(-1).debt(), 1.0);
        let p = WealthDistribution::from_pairs(&[(-2, 0.5), (2, 0.5)]).unwrap();
        assert_eq!(p.debt(), 1.0);
    }

    #[test]
    fn mean_rate_examples() {
        let f = RateFunction::f_star();
        assert_eq!(WealthDistribution::delta(0).mean_rate(&f), 1.0);
        assert_eq!(WealthDistribution::delta(2).mean_rate(&f), 0.5);
        let third = 1.0 / 3.0;
        let p = WealthDistribution::from_pairs(&[(-1, third), (0, third), (1, third)]).unwrap();
        assert!((p.mean_rate(&f) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distance_examples() {
        let d0 = WealthDistribution::delta(0);
        let d1 = WealthDistribution::delta(1);
        assert_eq!(distance(&d0, &d0, Metric::L2), 0.0);
        assert_eq!(distance(&d0, &d1, Metric::Tv), 1.0);
        assert_eq!(distance(&d0, &d1, Metric::L2), 2f64.sqrt());
    }

    #[test]
    fn window_must_contain_zero() {
        assert!(WealthDistribution::new(1, vec![1.0]).is_err());
        assert!(WealthDistribution::new(-3, vec![1.0]).is_err());
        assert!(WealthDistribution::new(0, vec![]).is_err());
        assert!(WealthDistribution::new(0, vec![f64::NAN]).is_err());
        assert!(WealthDistribution::delta_on(5, -2, 2).is_err());
    }

    #[test]
    fn rewindow_keeps_mass_and_refuses_to_drop_it() {
        let p = WealthDistribution::from_pairs(&[(-1, 0.5), (2, 0.5)]).unwrap();
        let wide = p.rewindow(-10, 10).unwrap();
        assert_eq!(wide.moments(), p.moments());
        assert!(p.rewindow(0, 2).is_err());
    }

    fn arb_dist() -> impl Strategy<Value = WealthDistribution> {
        (-6i64..=0, prop::collection::vec(0.0f64..1.0, 7..14))
            .prop_map(|(lo, v)| WealthDistribution::new(lo, v).unwrap())
    }

    proptest! {
        #[test]
        fn distance_is_a_symmetric_nonnegative_metric(p in arb_dist(), q in arb_dist()) {
            for m in [Metric::L2, Metric::Tv] {
                let a = distance(&p, &q, m);
                let b = distance(&q, &p, m);
                prop_assert!(a >= 0.0);
                prop_assert_eq!(a, b);
                prop_assert!(distance(&p, &p, m) <= 1e-15);
            }
        }

        #[test]
        fn no_debt_without_negative_support(v in prop::collection::vec(0.0f64..1.0, 1..20)) {
            let p = WealthDistribution::new(0, v).unwrap();
            prop_assert_eq!(p.debt(), 0.0);
        }
    }
}
