//! Mean-field operators of the two-phase dynamics.
//!
//! Phase I (bank has cash):
//! `Q1[p]_n = f(n+1) p_{n+1} + lambda p_{n-1} - f(n) p_n - lambda p_n`,
//! `lambda = sum_n f(n) p_n`.
//!
//! Phase II (bank cash is a fast process, empty with probability `q0`):
//!
//! ```text
//! n <= -1: (1-q0) [f(n+1) p_{n+1} - f(n) p_n] + gamma (p_{n-1} - p_n)
//! n  =  0: f(1) p_1 - (1-q0) f(0) p_0         + gamma (p_{-1} - p_0)
//! n >=  1: f(n+1) p_{n+1} - f(n) p_n           + gamma (p_{n-1} - p_n)
//! ```
//!
//! with `gamma = r~ + (d~ + f(0) p_0)(1 - q0)` and
//! `q0 = 1 - r~ d / ((r + p_0)(d~ + f(0) p_0))`. For `f(0) = 1` these are the
//! usual expressions; keeping `f(0)` explicit preserves mass, mean and debt
//! for any positive `f`.
//!
//! Neighbours outside the window are treated as zero.

use serde::Serialize;

use crate::distribution::{WealthDistribution, TAIL_TOL};
use crate::error::{Error, Result};
use crate::rate::RateFunction;

/// Derivative vector on the window of its input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorOutput {
    window_min: i64,
    values: Vec<f64>,
    /// Input boundary entries were at or above the truncation tolerance.
    pub truncation_warning: bool,
}

impl OperatorOutput {
    pub fn window_min(&self) -> i64 {
        self.window_min
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, n: i64) -> f64 {
        let i = n - self.window_min;
        if i < 0 || i as usize >= self.values.len() {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let lo = self.window_min;
        self.values.iter().enumerate().map(move |(i, &v)| (lo + i as i64, v))
    }

    /// `sum_n out_n`
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `sum_n n out_n`
    pub fn first_moment(&self) -> f64 {
        self.iter().map(|(n, v)| n as f64 * v).sum()
    }

    /// `sum_{n <= -1} n out_n`, minus the derivative of the mean debt.
    pub fn debt_moment(&self) -> f64 {
        self.iter()
            .take_while(|&(n, _)| n < 0)
            .map(|(n, v)| n as f64 * v)
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Aggregate rates that drive Phase II.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedRates {
    /// Mass of rich agents, `sum_{n >= 1} p_n`.
    pub r: f64,
    /// Mass of indebted agents, `sum_{n <= -1} p_n`.
    pub d: f64,
    /// `sum_{n >= 1} f(n) p_n`
    pub r_tilde: f64,
    /// `sum_{n <= -1} f(n) p_n`
    pub d_tilde: f64,
    pub p0: f64,
    /// `f(0)`
    pub f0: f64,
    /// Probability that the bank is empty.
    pub q0: f64,
    /// Rate at which an agent receives a dollar.
    pub gamma: f64,
}

impl DerivedRates {
    pub fn compute(p: &WealthDistribution, f: &RateFunction) -> Result<Self> {
        let fvals: Vec<f64> = p.iter().map(|(n, _)| f.eval(n)).collect();
        Self::from_slices(p.window_min(), p.probs(), &fvals)
    }

    fn from_slices(window_min: i64, probs: &[f64], fvals: &[f64]) -> Result<Self> {
        let zero = (-window_min) as usize;
        let (mut r, mut d, mut r_tilde, mut d_tilde) = (0.0, 0.0, 0.0, 0.0);
        for (i, (&p, &fv)) in probs.iter().zip(fvals).enumerate() {
            match i.cmp(&zero) {
                std::cmp::Ordering::Less => {
                    d += p;
                    d_tilde += fv * p;
                }
                std::cmp::Ordering::Greater => {
                    r += p;
                    r_tilde += fv * p;
                }
                std::cmp::Ordering::Equal => {}
            }
        }
        let p0 = probs[zero];
        let f0 = fvals[zero];
        let q0 = if d == 0.0 {
            // No indebted agents: the bank never refills once empty.
            1.0
        } else {
            let receivers = r + p0;
            let borrowers = d_tilde + f0 * p0;
            if receivers <= 0.0 || borrowers <= 0.0 {
                return Err(Error::Degenerate(format!(
                    "bank vacancy undefined: r + p0 = {receivers:e}, d~ + f(0) p0 = {borrowers:e} with d = {d:e}"
                )));
            }
            // Fixed by debt conservation. It drops below 0 when refills
            // outpace lending, i.e. the ceiling cannot be held (never for
            // f_star); the raw value is kept so conservation stays exact.
            1.0 - r_tilde * d / (receivers * borrowers)
        };
        let gamma = r_tilde + (d_tilde + f0 * p0) * (1.0 - q0);
        Ok(Self {
            r,
            d,
            r_tilde,
            d_tilde,
            p0,
            f0,
            q0,
            gamma,
        })
    }
}

/// `q0` for a unit-mass distribution.
pub fn bank_vacancy(p: &WealthDistribution, f: &RateFunction) -> Result<f64> {
    Ok(DerivedRates::compute(p, f)?.q0)
}

/// Operator kernel on a fixed window with cached rate values.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    window_min: i64,
    fvals: Vec<f64>,
}

impl Kernel {
    pub(crate) fn new(window_min: i64, len: usize, f: &RateFunction) -> Self {
        Self {
            window_min,
            fvals: (0..len).map(|i| f.eval(window_min + i as i64)).collect(),
        }
    }

    pub(crate) fn q1(&self, p: &[f64], out: &mut [f64]) {
        let f = &self.fvals;
        let len = p.len();
        let lambda: f64 = p.iter().zip(f).map(|(a, b)| a * b).sum();
        for i in 0..len {
            let up = if i + 1 < len { f[i + 1] * p[i + 1] } else { 0.0 };
            let down = if i > 0 { p[i - 1] } else { 0.0 };
            out[i] = up + lambda * down - f[i] * p[i] - lambda * p[i];
        }
    }

    pub(crate) fn q2(&self, p: &[f64], out: &mut [f64]) -> Result<DerivedRates> {
        let rates = DerivedRates::from_slices(self.window_min, p, &self.fvals)?;
        let f = &self.fvals;
        let len = p.len();
        let zero = (-self.window_min) as usize;
        let lend = 1.0 - rates.q0;
        let gamma = rates.gamma;
        for i in 0..len {
            let up = if i + 1 < len { f[i + 1] * p[i + 1] } else { 0.0 };
            let down = if i > 0 { p[i - 1] } else { 0.0 };
            let receive = gamma * (down - p[i]);
            out[i] = match i.cmp(&zero) {
                std::cmp::Ordering::Less => lend * (up - f[i] * p[i]) + receive,
                std::cmp::Ordering::Equal => up - lend * f[i] * p[i] + receive,
                std::cmp::Ordering::Greater => up - f[i] * p[i] + receive,
            };
        }
        Ok(rates)
    }
}

fn output(p: &WealthDistribution, values: Vec<f64>) -> OperatorOutput {
    OperatorOutput {
        window_min: p.window_min(),
        values,
        truncation_warning: !p.is_well_truncated(TAIL_TOL),
    }
}

/// Phase-I operator `Q1[p]`.
pub fn q1_apply(p: &WealthDistribution, f: &RateFunction) -> OperatorOutput {
    let kernel = Kernel::new(p.window_min(), p.len(), f);
    let mut out = vec![0.0; p.len()];
    kernel.q1(p.probs(), &mut out);
    output(p, out)
}

/// Phase-II operator `Q2[p]`.
pub fn q2_apply(p: &WealthDistribution, f: &RateFunction) -> Result<OperatorOutput> {
    let kernel = Kernel::new(p.window_min(), p.len(), f);
    let mut out = vec![0.0; p.len()];
    kernel.q2(p.probs(), &mut out)?;
    Ok(output(p, out))
}
