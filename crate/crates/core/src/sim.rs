//! Finite-N stochastic simulation of the biased exchange rule with a
//! collective debt limit.
//!
//! Events are sampled by uniformization: candidate givers arrive at a
//! constant total rate, each candidate `i` is picked uniformly and kept with
//! probability `f(S_i) / f_max`. Kept candidates are the binary exchanges;
//! because the candidate clock does not depend on the state, averages over
//! candidate ticks are time averages of the continuous-time chain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::distribution::WealthDistribution;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::rate::RateFunction;

/// Identity of the pseudo-random generator, recorded in run manifests.
pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";

/// Full recomputation period of the bank identity in debug builds.
const DRIFT_CHECK_PERIOD: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Allocation {
    /// Every agent starts with `mu` dollars.
    Uniform,
    Explicit(Vec<i64>),
}

/// Agent wealth plus bank bookkeeping.
///
/// Invariants: `sum S_i = N mu`, `B_c = B_* - sum max(0, -S_i)`, `B_c >= 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SystemState {
    wealth: Vec<i64>,
    bank_cash: u64,
    bank_initial: u64,
    total_money: i64,
    events_total: u64,
    events_blocked: u64,
    candidates_thinned: u64,
    first_empty_event: Option<u64>,
}

impl SystemState {
    pub fn wealth(&self) -> &[i64] {
        &self.wealth
    }

    pub fn n_agents(&self) -> usize {
        self.wealth.len()
    }

    /// Bank cash `B_c`.
    pub fn bank_cash(&self) -> u64 {
        self.bank_cash
    }

    /// Initial bank holdings `B_*`.
    pub fn bank_initial(&self) -> u64 {
        self.bank_initial
    }

    /// Outstanding debt `B_d = B_* - B_c`.
    pub fn bank_debt(&self) -> u64 {
        self.bank_initial - self.bank_cash
    }

    /// Accepted candidates, blocked ones included.
    pub fn events_total(&self) -> u64 {
        self.events_total
    }

    pub fn events_blocked(&self) -> u64 {
        self.events_blocked
    }

    pub fn candidates_thinned(&self) -> u64 {
        self.candidates_thinned
    }

    /// Event index at which the bank first ran out of cash.
    pub fn first_empty_event(&self) -> Option<u64> {
        self.first_empty_event
    }

    /// Recomputes every invariant from scratch.
    pub fn check_invariants(&self) -> Result<()> {
        let sum: i64 = self.wealth.iter().sum();
        if sum != self.total_money {
            return Err(Error::InvalidAllocation(format!(
                "money not conserved: sum = {sum}, expected {}",
                self.total_money
            )));
        }
        let debt: u64 = self.wealth.iter().map(|&s| (-s).max(0) as u64).sum();
        if debt > self.bank_initial || self.bank_cash != self.bank_initial - debt {
            return Err(Error::InvalidAllocation(format!(
                "bank identity broken: B_c = {}, B_* = {}, debt = {debt}",
                self.bank_cash, self.bank_initial
            )));
        }
        Ok(())
    }
}

pub fn init_state(params: &ModelParams, allocation: &Allocation) -> Result<SystemState> {
    params.validate()?;
    let n = params
        .n_agents
        .ok_or_else(|| Error::InvalidParams("simulation needs an agent count".into()))?;
    let total_money = params.total_money()?;
    let bank_initial = params.bank_initial()?;
    let wealth = match allocation {
        Allocation::Uniform => vec![params.mu as i64; n],
        Allocation::Explicit(w) => {
            if w.len() != n {
                return Err(Error::InvalidAllocation(format!(
                    "{} entries for {n} agents",
                    w.len()
                )));
            }
            if let Some(i) = w.iter().position(|&s| s < 0) {
                return Err(Error::InvalidAllocation(format!(
                    "agent {i} starts in debt ({})",
                    w[i]
                )));
            }
            let sum: i64 = w.iter().sum();
            if sum != total_money {
                return Err(Error::InvalidAllocation(format!(
                    "allocation sums to {sum}, expected N mu = {total_money}"
                )));
            }
            w.clone()
        }
    };
    Ok(SystemState {
        wealth,
        bank_cash: bank_initial,
        bank_initial,
        total_money,
        events_total: 0,
        events_blocked: 0,
        candidates_thinned: 0,
        first_empty_event: None,
    })
}

/// Result of one candidate tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Transfer { giver: usize, receiver: usize },
    /// Candidate rejected by thinning; state unchanged.
    Thinned { candidate: usize },
    /// Giver has no dollar and the bank has no cash; state unchanged.
    Blocked { giver: usize },
}

impl StepOutcome {
    /// Whether the tick counts as a binary exchange.
    pub fn is_exchange(&self) -> bool {
        !matches!(self, StepOutcome::Thinned { .. })
    }
}

/// Upper bound of `f` used for thinning.
pub fn thinning_bound(f: &RateFunction) -> Result<f64> {
    f.sup().ok_or_else(|| Error::UnsupportedRate {
        rate: f.name(),
        reason: "f is unbounded, no thinning bound exists".into(),
    })
}

fn uniform_index<R: Rng + ?Sized>(rng: &mut R, n: usize) -> usize {
    // Sample as u64 so the stream does not depend on the platform word size.
    rng.random_range(0..n as u64) as usize
}

/// One uniformized candidate tick.
pub fn step<R: Rng + ?Sized>(
    state: &mut SystemState,
    f: &RateFunction,
    f_max: f64,
    rng: &mut R,
) -> StepOutcome {
    let n = state.wealth.len();
    let giver = uniform_index(rng, n);
    let s_giver = state.wealth[giver];
    let accept = f.eval(s_giver) / f_max;
    if accept < 1.0 && rng.random::<f64>() >= accept {
        state.candidates_thinned += 1;
        return StepOutcome::Thinned { candidate: giver };
    }
    state.events_total += 1;
    let k = uniform_index(rng, n - 1);
    let receiver = if k < giver { k } else { k + 1 };

    if s_giver <= 0 && state.bank_cash == 0 {
        state.events_blocked += 1;
        return StepOutcome::Blocked { giver };
    }
    if s_giver <= 0 {
        state.bank_cash -= 1;
    }
    if state.wealth[receiver] < 0 {
        state.bank_cash += 1;
    }
    state.wealth[giver] -= 1;
    state.wealth[receiver] += 1;
    if state.bank_cash == 0 && state.first_empty_event.is_none() {
        state.first_empty_event = Some(state.events_total);
    }
    StepOutcome::Transfer { giver, receiver }
}

/// Per-wealth agent counts with lazily accumulated time integrals.
#[derive(Debug, Clone)]
struct OccupancyTracker {
    offset: i64,
    counts: Vec<u64>,
    integral: Vec<u128>,
    last_tick: Vec<u64>,
    ticks: u64,
}

impl OccupancyTracker {
    fn new(wealth: &[i64]) -> Self {
        let lo = wealth.iter().copied().min().unwrap_or(0).min(0);
        let hi = wealth.iter().copied().max().unwrap_or(0).max(0);
        let len = (hi - lo + 1) as usize;
        let mut t = Self {
            offset: lo,
            counts: vec![0; len],
            integral: vec![0; len],
            last_tick: vec![0; len],
            ticks: 0,
        };
        for &s in wealth {
            t.counts[(s - lo) as usize] += 1;
        }
        t
    }

    fn slot(&mut self, n: i64) -> usize {
        if n < self.offset {
            let grow = (self.offset - n) as usize;
            self.counts.splice(0..0, std::iter::repeat_n(0, grow));
            self.integral.splice(0..0, std::iter::repeat_n(0, grow));
            self.last_tick
                .splice(0..0, std::iter::repeat_n(self.ticks, grow));
            self.offset = n;
        }
        let i = (n - self.offset) as usize;
        if i >= self.counts.len() {
            let new_len = i + 1;
            self.counts.resize(new_len, 0);
            self.integral.resize(new_len, 0);
            self.last_tick.resize(new_len, self.ticks);
        }
        i
    }

    fn settle(&mut self, i: usize, upto: u64) {
        let elapsed = upto - self.last_tick[i];
        self.integral[i] += self.counts[i] as u128 * elapsed as u128;
        self.last_tick[i] = upto;
    }

    /// Moves one agent from wealth `from` to `to` during the current tick.
    fn moved(&mut self, from: i64, to: i64) {
        let before = self.ticks;
        let a = self.slot(from);
        self.settle(a, before);
        self.counts[a] -= 1;
        let b = self.slot(to);
        self.settle(b, before);
        self.counts[b] += 1;
    }

    fn tick(&mut self) {
        self.ticks += 1;
    }

    fn average(&self, n_agents: usize) -> WealthDistribution {
        let denom = self.ticks as f64 * n_agents as f64;
        let probs = (0..self.counts.len())
            .map(|i| {
                let total = self.integral[i]
                    + self.counts[i] as u128 * (self.ticks - self.last_tick[i]) as u128;
                total as f64 / denom
            })
            .collect();
        WealthDistribution::new(self.offset, probs).expect("tracker window contains 0")
    }
}

/// Stateful driver owning the agent state, the generator and the occupancy
/// accumulator.
#[derive(Debug, Clone)]
pub struct Simulator {
    params: ModelParams,
    f_max: f64,
    state: SystemState,
    rng: ChaCha8Rng,
    occupancy: OccupancyTracker,
}

impl Simulator {
    pub fn new(params: &ModelParams, allocation: &Allocation, seed: u64) -> Result<Self> {
        let f_max = thinning_bound(&params.rate)?;
        let state = init_state(params, allocation)?;
        let occupancy = OccupancyTracker::new(&state.wealth);
        Ok(Self {
            params: params.clone(),
            f_max,
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
            occupancy,
        })
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// One candidate tick.
    pub fn step(&mut self) -> StepOutcome {
        let outcome = step(&mut self.state, &self.params.rate, self.f_max, &mut self.rng);
        if let StepOutcome::Transfer { giver, receiver } = outcome {
            let g = self.state.wealth[giver];
            let r = self.state.wealth[receiver];
            self.occupancy.moved(g + 1, g);
            self.occupancy.moved(r - 1, r);
        }
        self.occupancy.tick();
        if cfg!(debug_assertions)
            && outcome.is_exchange()
            && self.state.events_total % DRIFT_CHECK_PERIOD == 0
        {
            if let Err(e) = self.state.check_invariants() {
                panic!("bank bookkeeping drifted: {e}");
            }
        }
        outcome
    }

    /// Ticks until one binary exchange (transfer or blocked) happens.
    pub fn exchange(&mut self) -> StepOutcome {
        loop {
            let outcome = self.step();
            if outcome.is_exchange() {
                return outcome;
            }
        }
    }

    /// Current empirical distribution.
    pub fn histogram(&self) -> WealthDistribution {
        empirical_distribution(&self.state)
    }

    /// Per-agent occupancy averaged over all candidate ticks so far
    /// (equivalently over continuous time).
    pub fn occupancy(&self) -> WealthDistribution {
        if self.occupancy.ticks == 0 {
            return self.histogram();
        }
        self.occupancy.average(self.state.n_agents())
    }

    pub fn into_state(self) -> SystemState {
        self.state
    }
}

/// `probs[n] = #{i : S_i = n} / N` on the occupied window (widened to hold 0).
pub fn empirical_distribution(state: &SystemState) -> WealthDistribution {
    let w = &state.wealth;
    let lo = w.iter().copied().min().unwrap_or(0).min(0);
    let hi = w.iter().copied().max().unwrap_or(0).max(0);
    let mut counts = vec![0u64; (hi - lo + 1) as usize];
    for &s in w {
        counts[(s - lo) as usize] += 1;
    }
    let n = w.len() as f64;
    WealthDistribution::new(lo, counts.into_iter().map(|c| c as f64 / n).collect())
        .expect("window contains 0")
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub final_state: SystemState,
    /// Empirical distribution of the final state.
    pub histogram: WealthDistribution,
    /// Time-averaged per-agent occupancy over the whole run.
    pub occupancy: WealthDistribution,
    /// `(event index, empirical distribution)`, in event order.
    pub snapshots: Vec<(u64, WealthDistribution)>,
    pub seed: u64,
    pub params: ModelParams,
    pub generator: &'static str,
}

/// Runs `num_events` binary exchanges from the uniform allocation.
pub fn run(
    params: &ModelParams,
    num_events: u64,
    seed: u64,
    snapshot_every: Option<u64>,
) -> Result<SimResult> {
    run_from(params, &Allocation::Uniform, num_events, seed, snapshot_every)
}

pub fn run_from(
    params: &ModelParams,
    allocation: &Allocation,
    num_events: u64,
    seed: u64,
    snapshot_every: Option<u64>,
) -> Result<SimResult> {
    let mut sim = Simulator::new(params, allocation, seed)?;
    let every = snapshot_every.filter(|&k| k > 0);
    let mut snapshots = Vec::new();
    if every.is_some() {
        snapshots.push((0, sim.histogram()));
    }
    for event in 1..=num_events {
        sim.exchange();
        if let Some(k) = every {
            if event % k == 0 {
                snapshots.push((event, sim.histogram()));
            }
        }
    }
    let histogram = sim.histogram();
    let occupancy = sim.occupancy();
    Ok(SimResult {
        final_state: sim.into_state(),
        histogram,
        occupancy,
        snapshots,
        seed,
        params: params.clone(),
        generator: GENERATOR,
    })
}

/// Independent replicas, one per seed, run on at most `threads` workers.
/// Results come back in seed order.
pub fn run_replicas(
    params: &ModelParams,
    num_events: u64,
    seeds: &[u64],
    snapshot_every: Option<u64>,
    threads: Option<usize>,
) -> Result<Vec<SimResult>> {
    let job = || {
        seeds
            .par_iter()
            .map(|&seed| run(params, num_events, seed, snapshot_every))
            .collect::<Result<Vec<_>>>()
    };
    match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

/// Equal-weight average of distributions on the union of their windows.
pub fn average_distributions(dists: &[WealthDistribution]) -> Result<WealthDistribution> {
    if dists.is_empty() {
        return Err(Error::InvalidDistribution("nothing to average".into()));
    }
    let lo = dists.iter().map(|d| d.window_min()).min().unwrap_or(0);
    let hi = dists.iter().map(|d| d.window_max()).max().unwrap_or(0);
    let k = dists.len() as f64;
    let probs = (lo..=hi)
        .map(|n| dists.iter().map(|d| d.get(n)).sum::<f64>() / k)
        .collect();
    WealthDistribution::new(lo, probs)
}
