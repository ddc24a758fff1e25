//! Fixed-step RK4 integration of the two-phase mean-field dynamics.
//!
//! Phase I runs `Q1` until the mean debt first reaches `mu nu`; the crossing
//! time `t_star` is bracketed by the step that crosses it and then pinned by
//! regula falsi on the length of a partial RK4 step. Phase II runs `Q2` from
//! there. Steps are shortened to land exactly on requested snapshot times.

use serde::Serialize;

use crate::distribution::{distance, Metric, WealthDistribution, EPS_POS, TAIL_TOL};
use crate::error::{Error, Result};
use crate::meanfield::{DerivedRates, Kernel};
use crate::params::ModelParams;
use crate::rate::RateFunction;

/// Negative entries beyond this abort the run.
pub const INSTABILITY_SLACK: f64 = 100.0 * EPS_POS;
/// Debt may drop by at most this much per Phase-I step before a warning.
pub const DEBT_DROP_TOL: f64 = 1e-10;
/// Phase II must start this close to the debt ceiling.
pub const PHASE2_ENTRY_TOL: f64 = 1e-6;
/// Tolerance on `|D - mu nu|` when pinning `t_star`.
const T_STAR_DEBT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    #[serde(rename = "I")]
    One,
    #[serde(rename = "II")]
    Two,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::One => "I",
            Phase::Two => "II",
        })
    }
}

#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub dt: f64,
    /// Times at which full distributions are kept.
    pub snapshot_times: Vec<f64>,
    /// If set, every diagnostic row carries the l2 distance to it.
    pub reference: Option<WealthDistribution>,
    /// Runs fail once `|mass - 1|` exceeds this.
    pub mass_defect_limit: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            snapshot_times: Vec::new(),
            reference: None,
            mass_defect_limit: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub phase: Phase,
    pub mass_defect: f64,
    pub mean_defect: f64,
    pub debt: f64,
    pub min_entry: f64,
    pub boundary_mass: f64,
    pub l2_to_reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OdeWarning {
    /// Mean debt dropped during Phase I: `f` is likely outside the
    /// debt-monotone class.
    DebtDecreased { t: f64, drop: f64 },
    /// The bank-vacancy probability left [0, 1]: refills outpace lending and
    /// the debt ceiling is not self-sustaining for this rate.
    NegativeVacancy { t: f64, q0: f64 },
    /// Boundary entries reached the truncation tolerance.
    Truncation { t: f64, boundary_mass: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySegment {
    pub phase: Phase,
    pub snapshots: Vec<(f64, WealthDistribution)>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub warnings: Vec<OdeWarning>,
    pub final_time: f64,
    pub final_state: WealthDistribution,
}

#[derive(Debug, Clone, Serialize)]
pub struct Phase1Outcome {
    pub segment: TrajectorySegment,
    pub t_star: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoPhaseTrajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<WealthDistribution>,
    pub phase_labels: Vec<Phase>,
    pub t_star: f64,
    pub diagnostics: Vec<StepDiagnostics>,
    pub warnings: Vec<OdeWarning>,
    pub final_state: WealthDistribution,
}

impl TwoPhaseTrajectory {
    pub fn snapshot_at(&self, t: f64) -> Option<&WealthDistribution> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() < 1e-12)
            .map(|i| &self.snapshots[i])
    }
}

/// Classic RK4 stepper over a fixed window.
struct Stepper {
    kernel: Kernel,
    phase: Phase,
    k: [Vec<f64>; 4],
    scratch: Vec<f64>,
}

impl Stepper {
    fn new(phase: Phase, window_min: i64, len: usize, f: &RateFunction) -> Self {
        Self {
            kernel: Kernel::new(window_min, len, f),
            phase,
            k: std::array::from_fn(|_| vec![0.0; len]),
            scratch: vec![0.0; len],
        }
    }

    fn rhs(kernel: &Kernel, phase: Phase, p: &[f64], out: &mut [f64]) -> Result<()> {
        match phase {
            Phase::One => {
                kernel.q1(p, out);
                Ok(())
            }
            Phase::Two => kernel.q2(p, out).map(|_| ()),
        }
    }

    fn step(&mut self, p: &[f64], h: f64, out: &mut [f64]) -> Result<()> {
        let [k1, k2, k3, k4] = &mut self.k;
        let s = &mut self.scratch;
        Self::rhs(&self.kernel, self.phase, p, k1)?;
        for i in 0..p.len() {
            s[i] = p[i] + 0.5 * h * k1[i];
        }
        Self::rhs(&self.kernel, self.phase, s, k2)?;
        for i in 0..p.len() {
            s[i] = p[i] + 0.5 * h * k2[i];
        }
        Self::rhs(&self.kernel, self.phase, s, k3)?;
        for i in 0..p.len() {
            s[i] = p[i] + h * k3[i];
        }
        Self::rhs(&self.kernel, self.phase, s, k4)?;
        for i in 0..p.len() {
            out[i] = p[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(())
    }
}

fn debt_of(window_min: i64, p: &[f64]) -> f64 {
    p.iter()
        .enumerate()
        .take_while(|(i, _)| window_min + (*i as i64) < 0)
        .map(|(i, &v)| -((window_min + i as i64) as f64) * v)
        .sum()
}

fn make_dist(window_min: i64, p: &[f64]) -> WealthDistribution {
    WealthDistribution::new(window_min, p.to_vec()).expect("window unchanged")
}

/// Integrates one phase with no event detection for `span` time units;
/// the final partial step is shortened to land on `span`.
pub fn integrate_fixed(
    p: &WealthDistribution,
    f: &RateFunction,
    phase: Phase,
    span: f64,
    dt: f64,
) -> Result<WealthDistribution> {
    check_dt(dt)?;
    let mut stepper = Stepper::new(phase, p.window_min(), p.len(), f);
    let mut cur = p.probs().to_vec();
    let mut next = vec![0.0; cur.len()];
    let steps = (span / dt).round() as u64;
    for _ in 0..steps {
        stepper.step(&cur, dt, &mut next)?;
        std::mem::swap(&mut cur, &mut next);
    }
    let rest = span - steps as f64 * dt;
    if rest > 1e-12 * dt {
        stepper.step(&cur, rest, &mut next)?;
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(make_dist(p.window_min(), &cur))
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("dt must be positive, got {dt}")))
    }
}

/// Shared bookkeeping for both phases.
struct Recorder<'a> {
    mu: f64,
    opts: &'a OdeOptions,
    phase: Phase,
    window_min: i64,
    snapshots: Vec<(f64, WealthDistribution)>,
    diagnostics: Vec<StepDiagnostics>,
    warnings: Vec<OdeWarning>,
    truncation_reported: bool,
    pending: Vec<f64>,
    // Time is `anchor + steps * dt`, re-anchored at every shortened step, so
    // it does not accumulate rounding drift.
    anchor: f64,
    steps: u64,
}

impl<'a> Recorder<'a> {
    fn new(mu: f64, opts: &'a OdeOptions, phase: Phase, window_min: i64, after: f64, upto: f64) -> Self {
        let mut pending: Vec<f64> = opts
            .snapshot_times
            .iter()
            .copied()
            .filter(|&s| s > after && s <= upto)
            .collect();
        pending.sort_by(|a, b| b.total_cmp(a));
        pending.dedup();
        Self {
            mu,
            opts,
            phase,
            window_min,
            snapshots: Vec::new(),
            diagnostics: Vec::new(),
            warnings: Vec::new(),
            truncation_reported: false,
            pending,
            anchor: if after.is_finite() { after } else { 0.0 },
            steps: 0,
        }
    }

    fn next_snapshot(&self) -> Option<f64> {
        self.pending.last().copied()
    }

    /// Validates and logs the state at time `t`.
    fn record(&mut self, t: f64, p: &[f64]) -> Result<StepDiagnostics> {
        let dist = make_dist(self.window_min, p);
        let (n_min, min_entry) = dist.min_entry();
        if min_entry < -INSTABILITY_SLACK {
            return Err(Error::Instability {
                t,
                n: n_min,
                min_entry,
            });
        }
        let (mass, mean) = dist.moments();
        let mass_defect = mass - 1.0;
        if mass_defect.abs() > self.opts.mass_defect_limit {
            return Err(Error::MassDefect {
                t,
                defect: mass_defect,
                limit: self.opts.mass_defect_limit,
            });
        }
        let boundary_mass = dist.boundary_mass();
        if boundary_mass >= TAIL_TOL && !self.truncation_reported {
            self.truncation_reported = true;
            self.warnings.push(OdeWarning::Truncation { t, boundary_mass });
        }
        let diag = StepDiagnostics {
            t,
            phase: self.phase,
            mass_defect,
            mean_defect: mean - self.mu,
            debt: dist.debt(),
            min_entry,
            boundary_mass,
            l2_to_reference: self
                .opts
                .reference
                .as_ref()
                .map(|r| distance(&dist, r, Metric::L2)),
        };
        self.diagnostics.push(diag);
        if let Some(s) = self.next_snapshot() {
            if (s - t).abs() <= 1e-9 * self.opts.dt {
                self.pending.pop();
                self.snapshots.push((s, dist));
            }
        }
        Ok(diag)
    }

    fn now(&self) -> f64 {
        self.anchor + self.steps as f64 * self.opts.dt
    }

    /// Next step as `(h, t_new, landed)`: a full step, or a shortened one
    /// ending exactly on the next snapshot or `stop`.
    fn plan(&self, stop: f64) -> (f64, f64, bool) {
        let dt = self.opts.dt;
        let t = self.now();
        let target = self.next_snapshot().map_or(stop, |s| s.min(stop));
        let full = self.anchor + (self.steps + 1) as f64 * dt;
        if full >= target - 1e-9 * dt {
            (target - t, target, true)
        } else {
            (full - t, full, false)
        }
    }

    fn commit(&mut self, t_new: f64, landed: bool) {
        if landed {
            self.anchor = t_new;
            self.steps = 0;
        } else {
            self.steps += 1;
        }
    }

    fn finish(self, final_time: f64, p: &[f64]) -> TrajectorySegment {
        TrajectorySegment {
            phase: self.phase,
            snapshots: self.snapshots,
            diagnostics: self.diagnostics,
            warnings: self.warnings,
            final_time,
            final_state: make_dist(self.window_min, p),
        }
    }
}

fn check_phase1_entry(p: &WealthDistribution, mu: f64) -> Result<()> {
    p.check_nonnegative(EPS_POS)?;
    let (mass, mean) = p.moments();
    if (mass - 1.0).abs() > 1e-9 || (mean - mu).abs() > 1e-9 * mu.max(1.0) {
        return Err(Error::InvalidDistribution(format!(
            "Phase I needs p in S_mu+: mass = {mass}, mean = {mean}, mu = {mu}"
        )));
    }
    if let Some((n, v)) = p.iter().find(|&(n, v)| n < 0 && v > EPS_POS) {
        return Err(Error::InvalidDistribution(format!(
            "Phase I needs a debt-free start, but p_{n} = {v:e}"
        )));
    }
    Ok(())
}

/// Phase I from `p0` (debt-free, mass 1, mean `mu`) until the mean debt
/// reaches `mu nu`. The returned segment ends exactly at `t_star`.
pub fn integrate_phase1(
    p0: &WealthDistribution,
    params: &ModelParams,
    t_max: f64,
    opts: &OdeOptions,
) -> Result<Phase1Outcome> {
    params.validate()?;
    check_dt(opts.dt)?;
    let mu = params.mu as f64;
    let target = params.debt_limit();
    check_phase1_entry(p0, mu)?;

    let lo = p0.window_min();
    let mut stepper = Stepper::new(Phase::One, lo, p0.len(), &params.rate);
    let mut rec = Recorder::new(mu, opts, Phase::One, lo, f64::NEG_INFINITY, t_max);
    let mut cur = p0.probs().to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut t = 0.0;
    let mut debt = rec.record(t, &cur)?.debt;

    loop {
        if t >= t_max {
            return Err(Error::Phase1Timeout {
                t_max,
                final_debt: debt,
                target,
            });
        }
        let (h, t_new, landed) = rec.plan(t_max);
        stepper.step(&cur, h, &mut next)?;
        let new_debt = debt_of(lo, &next);

        if new_debt >= target {
            let (tau, state) = pin_crossing(&mut stepper, &cur, h, debt, new_debt, target, lo)?;
            let t_star = t + tau;
            // A snapshot scheduled exactly at the landing point belongs here.
            rec.record(t_star, &state)?;
            return Ok(Phase1Outcome {
                segment: rec.finish(t_star, &state),
                t_star,
            });
        }
        if new_debt < debt - DEBT_DROP_TOL {
            rec.warnings.push(OdeWarning::DebtDecreased {
                t: t_new,
                drop: debt - new_debt,
            });
        }
        rec.commit(t_new, landed);
        t = t_new;
        std::mem::swap(&mut cur, &mut next);
        debt = rec.record(t, &cur)?.debt;
    }
}

/// Finds the partial step `tau in (0, h]` with `D(rk4(p, tau)) = target`.
fn pin_crossing(
    stepper: &mut Stepper,
    p: &[f64],
    h: f64,
    d_lo: f64,
    d_hi: f64,
    target: f64,
    window_min: i64,
) -> Result<(f64, Vec<f64>)> {
    let mut out = vec![0.0; p.len()];
    let (mut a, mut ga) = (0.0, d_lo - target);
    let (mut b, mut gb) = (h, d_hi - target);
    if gb.abs() <= T_STAR_DEBT_TOL {
        stepper.step(p, h, &mut out)?;
        return Ok((h, out));
    }
    let mut side = 0i8;
    let mut best = (b, gb);
    for _ in 0..100 {
        // Illinois variant of regula falsi.
        let c = (a * gb - b * ga) / (gb - ga);
        stepper.step(p, c, &mut out)?;
        let gc = debt_of(window_min, &out) - target;
        if gc.abs() < best.1.abs() {
            best = (c, gc);
        }
        if gc.abs() <= T_STAR_DEBT_TOL || (b - a).abs() < 1e-15 {
            break;
        }
        if gc > 0.0 {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
    }
    stepper.step(p, best.0, &mut out)?;
    Ok((best.0, out))
}

/// Phase II from `p` at time `t_start` up to `t_end`. The mean debt of `p`
/// must equal `mu nu` within `PHASE2_ENTRY_TOL`.
pub fn integrate_phase2(
    p: &WealthDistribution,
    params: &ModelParams,
    t_start: f64,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<TrajectorySegment> {
    params.validate()?;
    check_dt(opts.dt)?;
    let target = params.debt_limit();
    let debt = p.debt();
    if (debt - target).abs() > PHASE2_ENTRY_TOL {
        return Err(Error::InvalidDistribution(format!(
            "Phase II needs mean debt {target}, got {debt}"
        )));
    }
    let lo = p.window_min();
    let mut stepper = Stepper::new(Phase::Two, lo, p.len(), &params.rate);
    let mut rec = Recorder::new(params.mu as f64, opts, Phase::Two, lo, t_start, t_end);
    let mut cur = p.probs().to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut t = t_start;
    let mut vacancy_reported = false;
    while t_end - t > 1e-12 * opts.dt {
        let (h, t_new, landed) = rec.plan(t_end);
        stepper.step(&cur, h, &mut next)?;
        rec.commit(t_new, landed);
        t = t_new;
        std::mem::swap(&mut cur, &mut next);
        rec.record(t, &cur)?;
        if !vacancy_reported {
            let q0 = DerivedRates::compute(&make_dist(lo, &cur), &params.rate)?.q0;
            if q0 < 0.0 {
                vacancy_reported = true;
                rec.warnings.push(OdeWarning::NegativeVacancy { t, q0 });
            }
        }
    }
    Ok(rec.finish(t, &cur))
}

/// Phase I followed by Phase II, up to `t_end`.
pub fn run_two_phase(
    params: &ModelParams,
    p_init: &WealthDistribution,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<TwoPhaseTrajectory> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidParams(format!("t_end must be positive, got {t_end}")));
    }
    let phase1 = integrate_phase1(p_init, params, t_end, opts)?;
    let t_star = phase1.t_star;
    let phase2 = integrate_phase2(&phase1.segment.final_state, params, t_star, t_end, opts)?;

    let mut times = Vec::new();
    let mut snapshots = Vec::new();
    let mut phase_labels = Vec::new();
    let has_t_star = phase1.segment.snapshots.iter().any(|(t, _)| *t == t_star);
    for (t, d) in phase1.segment.snapshots {
        times.push(t);
        snapshots.push(d);
        phase_labels.push(Phase::One);
    }
    if !has_t_star {
        times.push(t_star);
        snapshots.push(phase1.segment.final_state.clone());
        phase_labels.push(Phase::One);
    }
    for (t, d) in phase2.snapshots {
        times.push(t);
        snapshots.push(d);
        phase_labels.push(Phase::Two);
    }
    let mut diagnostics = phase1.segment.diagnostics;
    diagnostics.extend(phase2.diagnostics);
    let mut warnings = phase1.segment.warnings;
    warnings.extend(phase2.warnings);
    Ok(TwoPhaseTrajectory {
        times,
        snapshots,
        phase_labels,
        t_star,
        diagnostics,
        warnings,
        final_state: phase2.final_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::mean_field(1, 1, RateFunction::f_star()).unwrap()
    }

    fn start() -> WealthDistribution {
        WealthDistribution::delta_on(1, -150, 200).unwrap()
    }

    #[test]
    fn phase1_reaches_debt_ceiling() {
        let out = integrate_phase1(&start(), &params(), 100.0, &OdeOptions::default()).unwrap();
        assert!(out.t_star > 0.0 && out.t_star.is_finite());
        assert!((out.segment.final_state.debt() - 1.0).abs() < 1e-6);
        assert!(out.segment.warnings.is_empty());
        let mut prev = 0.0;
        for d in &out.segment.diagnostics {
            assert!(d.mass_defect.abs() < 1e-8 && d.mean_defect.abs() < 1e-8);
            assert!(d.debt >= prev - 1e-14);
            prev = d.debt;
        }
    }

    #[test]
    fn phase1_timeout() {
        let err = integrate_phase1(&start(), &params(), 0.5, &OdeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Phase1Timeout { .. }));
    }

    #[test]
    fn phase1_rejects_indebted_start() {
        let p = WealthDistribution::from_pairs(&[(-1, 0.5), (3, 0.5)])
            .unwrap()
            .rewindow(-10, 10)
            .unwrap();
        assert!(integrate_phase1(&p, &params(), 10.0, &OdeOptions::default()).is_err());
    }

    #[test]
    fn phase2_rejects_wrong_debt() {
        let err =
            integrate_phase2(&start(), &params(), 0.0, 1.0, &OdeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidDistribution(_)));
    }

    #[test]
    fn bad_dt() {
        let opts = OdeOptions {
            dt: 0.0,
            ..Default::default()
        };
        assert!(integrate_phase1(&start(), &params(), 10.0, &opts).is_err());
    }

    #[test]
    fn snapshots_land_on_requested_times() {
        let opts = OdeOptions {
            snapshot_times: vec![0.0, 0.505, 1.0, 7.25, 12.0],
            ..Default::default()
        };
        let traj = run_two_phase(&params(), &start(), 12.0, &opts).unwrap();
        for t in [0.0, 0.505, 1.0, 7.25, 12.0] {
            assert!(traj.snapshot_at(t).is_some(), "missing snapshot at {t}");
        }
        for (t, ph) in traj.times.iter().zip(&traj.phase_labels) {
            assert_eq!(*ph == Phase::One, *t <= traj.t_star);
        }
    }

    #[test]
    fn unstable_step_is_reported() {
        let opts = OdeOptions {
            dt: 3.0,
            ..Default::default()
        };
        let err = integrate_phase1(&start(), &params(), 100.0, &opts).unwrap_err();
        assert!(
            matches!(err, Error::Instability { .. } | Error::MassDefect { .. }),
            "{err:?}"
        );
    }
}
