//! Brute-force enumeration of the reversible stationary law.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::closed_form::config_count;
use crate::error::{Error, Result};
use crate::rate::{RateFunction, RateKind};

/// Largest configuration count [`enumerate_stationary`] will attempt.
pub const ENUMERATION_BOUND: u64 = 10_000_000;

/// Wealth of every agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration(pub Vec<i64>);

impl Configuration {
    pub fn total(&self) -> i64 {
        self.0.iter().sum()
    }

    pub fn debt(&self) -> u64 {
        self.0.iter().map(|&v| (-v).max(0) as u64).sum()
    }

    /// Reachable under a bank of size `bank`: total debt at most `bank`.
    pub fn is_reachable(&self, bank: u64) -> bool {
        self.debt() <= bank
    }
}

/// Cumulative weights `w(v) = prod_{j=-B}^{v} 1 / f(j)` for `v` in
/// `[-B, hi]`, so that `theta(xi) = prod_i w(xi(i))`.
#[derive(Debug, Clone)]
pub struct ThetaTable {
    bank: i64,
    weights: Vec<BigRational>,
}

impl ThetaTable {
    pub fn new(f: &RateFunction, bank: u64, hi: i64) -> Result<Self> {
        let lo = -(bank as i64);
        let mut weights = Vec::with_capacity((hi - lo + 1).max(0) as usize);
        let mut acc = BigRational::one();
        for j in lo..=hi {
            acc /= f.eval_exact(j)?;
            weights.push(acc.clone());
        }
        Ok(Self {
            bank: bank as i64,
            weights,
        })
    }

    pub fn weight(&self, v: i64) -> &BigRational {
        &self.weights[(v + self.bank) as usize]
    }

    pub fn theta(&self, xi: &Configuration) -> BigRational {
        xi.0.iter()
            .fold(BigRational::one(), |acc, &v| acc * self.weight(v))
    }
}

/// `theta(xi) = prod_i prod_{j=-B}^{xi(i)} 1 / f(j)` for a bank of size `bank`.
pub fn theta_weight(xi: &Configuration, bank: u64, f: &RateFunction) -> Result<BigRational> {
    if let Some(&v) = xi.0.iter().find(|&&v| v < -(bank as i64)) {
        return Err(Error::InvalidParams(format!(
            "entry {v} is below -B = -{bank}"
        )));
    }
    if matches!(f.kind(), RateKind::FStar) {
        // Product of the positive entries.
        let prod = xi
            .0
            .iter()
            .filter(|&&v| v > 0)
            .fold(BigInt::one(), |acc, &v| acc * v);
        return Ok(BigRational::from_integer(prod));
    }
    let hi = xi.0.iter().copied().max().unwrap_or(0);
    Ok(ThetaTable::new(f, bank, hi)?.theta(xi))
}

/// Exact jump rate `q(from, to)` of the N-agent chain: `f(from(i)) / N` when
/// `to = from - e_i + e_j` for some `i != j` and both states are reachable,
/// zero otherwise.
pub fn transition_rate(
    from: &Configuration,
    to: &Configuration,
    bank: u64,
    f: &RateFunction,
) -> Result<BigRational> {
    let n = from.0.len();
    if to.0.len() != n || !from.is_reachable(bank) || !to.is_reachable(bank) {
        return Ok(BigRational::zero());
    }
    let diffs: Vec<(usize, i64)> = from
        .0
        .iter()
        .zip(&to.0)
        .enumerate()
        .filter_map(|(k, (a, b))| (a != b).then_some((k, b - a)))
        .collect();
    match diffs.as_slice() {
        [(i, -1), (_, 1)] | [(_, 1), (i, -1)] => {
            Ok(f.eval_exact(from.0[*i])? / BigRational::from_integer(BigInt::from(n)))
        }
        _ => Ok(BigRational::zero()),
    }
}

/// The stationary law `pi(xi) = theta(xi) / sum theta` over all reachable
/// configurations.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub n_agents: usize,
    pub money: i64,
    pub bank: u64,
    pub configs: Vec<Configuration>,
    pub weights: Vec<BigRational>,
    pub normalizer: BigRational,
}

impl ExactDistribution {
    pub fn probability(&self, idx: usize) -> BigRational {
        &self.weights[idx] / &self.normalizer
    }

    /// Probability that the first agent holds `n` dollars.
    pub fn marginal(&self, n: i64) -> BigRational {
        let mass = self
            .configs
            .iter()
            .zip(&self.weights)
            .filter(|(c, _)| c.0[0] == n)
            .fold(BigRational::zero(), |acc, (_, w)| acc + w);
        mass / &self.normalizer
    }

    /// Every non-zero value of the first agent's marginal, in increasing `n`.
    pub fn marginal_table(&self) -> Vec<(i64, BigRational)> {
        let mut acc: BTreeMap<i64, BigRational> = BTreeMap::new();
        for (c, w) in self.configs.iter().zip(&self.weights) {
            *acc.entry(c.0[0]).or_insert_with(BigRational::zero) += w;
        }
        acc.into_iter()
            .map(|(n, w)| (n, w / &self.normalizer))
            .collect()
    }
}

/// Enumerates every configuration of `n_agents` agents with total `money` and
/// total debt at most `bank`, weighting each by `theta`.
pub fn enumerate_stationary(
    n_agents: usize,
    money: i64,
    bank: u64,
    f: &RateFunction,
) -> Result<ExactDistribution> {
    if n_agents == 0 {
        return Err(Error::InvalidParams("need at least one agent".into()));
    }
    let estimate = config_count(n_agents as u64, money, bank);
    if estimate.to_u64().is_none_or(|c| c > ENUMERATION_BOUND) {
        return Err(Error::TooLarge {
            estimate: estimate.to_string(),
            bound: ENUMERATION_BOUND,
        });
    }
    if estimate.is_zero() {
        return Err(Error::InvalidParams(format!(
            "no reachable configuration for N = {n_agents}, M = {money}, B = {bank}"
        )));
    }
    let table = ThetaTable::new(f, bank, money + bank as i64)?;
    let mut configs = Vec::with_capacity(estimate.to_usize().unwrap_or(0));
    let mut current = Vec::with_capacity(n_agents);
    fill(&mut current, n_agents, money, bank, &mut configs);

    let weights: Vec<BigRational> = configs.iter().map(|c| table.theta(c)).collect();
    let normalizer = weights.iter().fold(BigRational::zero(), |acc, w| acc + w);
    Ok(ExactDistribution {
        n_agents,
        money,
        bank,
        configs,
        weights,
        normalizer,
    })
}

fn fill(
    current: &mut Vec<i64>,
    n_agents: usize,
    remaining: i64,
    budget: u64,
    out: &mut Vec<Configuration>,
) {
    if current.len() + 1 == n_agents {
        if -remaining <= budget as i64 {
            current.push(remaining);
            out.push(Configuration(current.clone()));
            current.pop();
        }
        return;
    }
    let b = budget as i64;
    for v in -b..=remaining + b {
        let used = (-v).max(0) as u64;
        current.push(v);
        fill(current, n_agents, remaining - v, budget - used, out);
        current.pop();
    }
}
