//! Randomized membership probe for the class of rate functions under which
//! the Phase-I mean debt never decreases.
//!
//! A rate `f` belongs to the class when, for every `p` in `S_mu`,
//!
//! ```text
//! sum_{n<=0} f(n) p_n * sum_{n>=0} p_n - (sum_{n>=1} f(n) p_n) * sum_{n<=-1} p_n >= 0.
//! ```
//!
//! The probe samples `S_mu` at random. A violation is decisive; a pass is
//! only evidence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::distribution::WealthDistribution;
use crate::rate::RateFunction;

/// Violations must be below this to count.
pub const VIOLATION_TOL: f64 = 1e-12;
/// Default half-width `W` of the sampling window `[-W, W + 2 mu]`.
pub const DEFAULT_HALF_WIDTH: i64 = 10;

/// The class inequality's left-hand side; it also equals the Phase-I debt
/// derivative `d/dt D[p]` when `p` has unit mass.
pub fn g_expression(p: &WealthDistribution, f: &RateFunction) -> f64 {
    let mut nonpos_rate = 0.0;
    let mut nonneg_mass = 0.0;
    let mut rich_rate = 0.0;
    let mut indebted_mass = 0.0;
    for (n, pn) in p.iter() {
        let fp = f.eval(n) * pn;
        if n <= 0 {
            nonpos_rate += fp;
        }
        if n >= 0 {
            nonneg_mass += pn;
        }
        if n >= 1 {
            rich_rate += fp;
        }
        if n <= -1 {
            indebted_mass += pn;
        }
    }
    nonpos_rate * nonneg_mass - rich_rate * indebted_mass
}

/// Draws one finite-support member of `S_mu` on `[-half_width, half_width + 2 mu]`.
///
/// Weights are i.i.d. exponential, normalized, then mass is moved between the
/// two extreme bins to put the mean at `mu` exactly. Returns `None` when that
/// shift would make an extreme bin negative.
pub fn sample_s_mu<R: Rng + ?Sized>(
    mu: u64,
    half_width: i64,
    rng: &mut R,
) -> Option<WealthDistribution> {
    let lo = -half_width;
    let hi = half_width + 2 * mu as i64;
    let mut w: Vec<f64> = (lo..=hi).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let mean: f64 = w
        .iter()
        .enumerate()
        .map(|(i, p)| (lo + i as i64) as f64 * p)
        .sum();
    let shift = (mu as f64 - mean) / (hi - lo) as f64;
    let last = w.len() - 1;
    w[0] -= shift;
    w[last] += shift;
    if w[0] < 0.0 || w[last] < 0.0 {
        return None;
    }
    WealthDistribution::new(lo, w).ok()
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ProbeReport {
    /// No violation among `samples` accepted draws. Evidence, not proof.
    Pass { samples: usize, rejected: usize },
    Counterexample {
        sample_index: usize,
        margin: f64,
        distribution: WealthDistribution,
    },
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        matches!(self, ProbeReport::Pass { .. })
    }

    pub fn summary(&self) -> String {
        match self {
            ProbeReport::Pass { samples, .. } => format!(
                "no violation in {samples} random samples (evidence of membership, not a proof)"
            ),
            ProbeReport::Counterexample {
                sample_index,
                margin,
                ..
            } => format!("counterexample at sample {sample_index}: expression = {margin:e} < 0"),
        }
    }
}

pub fn class_g_probe(f: &RateFunction, mu: u64, num_samples: usize, seed: u64) -> ProbeReport {
    class_g_probe_with_width(f, mu, num_samples, seed, DEFAULT_HALF_WIDTH)
}

pub fn class_g_probe_with_width(
    f: &RateFunction,
    mu: u64,
    num_samples: usize,
    seed: u64,
    half_width: i64,
) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0;
    let mut rejected = 0;
    while accepted < num_samples {
        let Some(p) = sample_s_mu(mu, half_width, &mut rng) else {
            rejected += 1;
            continue;
        };
        let margin = g_expression(&p, f);
        if margin < -VIOLATION_TOL {
            return ProbeReport::Counterexample {
                sample_index: accepted,
                margin,
                distribution: p,
            };
        }
        accepted += 1;
    }
    ProbeReport::Pass {
        samples: accepted,
        rejected,
    }
}
