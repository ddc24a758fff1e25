use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use exchange_lab_core::equilibrium::{default_window, BASE_WINDOW};
use exchange_lab_core::exact::{enumerate_stationary, limiting_marginal_table};
use exchange_lab_core::integrate::{run_two_phase, OdeOptions, Phase};
use exchange_lab_core::sim::{average_distributions, run_replicas, GENERATOR};
use exchange_lab_core::{
    distance, equilibrium_distribution, solve_equilibrium, ModelParams, RateFunction, RateKind,
    WealthDistribution,
};
use num_rational::BigRational;
use num_traits::Zero;
use serde_json::json;

use crate::cli::{
    CompareArgs, EquilibriumArgs, ExactArgs, ExactMethod, OdeArgs, ReplayArgs, SimulateArgs,
};
use crate::io::{self, RunManifest};
use crate::svg::{self, Series};

/// Bad flag values that the parser cannot catch; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

macro_rules! usage {
    ($($arg:tt)*) => {
        return Err(UsageError(format!($($arg)*)).into())
    };
}

/// Environment variable capping replica worker threads.
pub const THREADS_ENV: &str = "EXCHANGE_LAB_THREADS";

pub struct RunContext<'a> {
    pub argv: &'a [OsString],
    pub started: u64,
}

impl RunContext<'_> {
    fn manifest(
        &self,
        command: &str,
        generator: Option<&'static str>,
        params: serde_json::Value,
        seed: Option<u64>,
        outputs: &[&Path],
        derived: serde_json::Value,
    ) -> RunManifest {
        RunManifest {
            command: command.into(),
            argv: self
                .argv
                .iter()
                .map(|a| a.to_string_lossy().into_owned())
                .collect(),
            tool_version: env!("CARGO_PKG_VERSION"),
            generator,
            params,
            seed,
            started_unix: self.started,
            finished_unix: io::unix_now(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            derived,
        }
    }
}

/// Prints a line to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.context("writing to stdout"),
    }
}

fn write_svg(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn params_json(p: &ModelParams) -> serde_json::Value {
    json!({
        "mu": p.mu,
        "nu": p.nu,
        "agents": p.n_agents,
        "rate": p.rate.to_string(),
    })
}

fn is_f_star(f: &RateFunction) -> bool {
    matches!(f.kind(), RateKind::FStar)
}

pub fn equilibrium(args: &EquilibriumArgs, ctx: &RunContext<'_>) -> Result<()> {
    let sol = solve_equilibrium(args.mu, args.nu)?;
    let window = args.window.unwrap_or_else(|| default_window(&sol));
    let p = equilibrium_distribution(&sol, &args.f, window)?;
    let (mass, mean) = p.moments();
    let doc = json!({
        "mu": sol.mu,
        "nu": sol.nu,
        "beta_plus": sol.beta_plus,
        "beta_minus": sol.beta_minus,
        "p0_star": sol.p0_star,
        "quartic": sol.quartic,
        "quartic_residual": sol.quartic_residual(),
        "residuals": sol.residuals,
        "admissible_roots_found": sol.admissible_roots_found,
        "rate": args.f.to_string(),
        "window": [window.0, window.1],
        "window_sums": { "mass": mass, "mean": mean, "debt": p.debt() },
    });
    if let Some(out) = &args.out {
        io::write_histogram(out, &p)?;
        let mut outputs = vec![out.as_path()];
        if let Some(svg_path) = &args.svg {
            let bars: Vec<(i64, f64)> = p.iter().filter(|(n, _)| (-15..=25).contains(n)).collect();
            write_svg(svg_path, &svg::bar_chart("equilibrium distribution", &bars, None))?;
            outputs.push(svg_path);
        }
        let params = json!({ "mu": args.mu, "nu": args.nu, "rate": args.f.to_string() });
        let m = ctx.manifest("equilibrium", None, params, None, &outputs, doc.clone());
        io::write_json(&io::manifest_path(out), &m)?;
    }
    emit(&serde_json::to_string_pretty(&doc)?)
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let Ok(n) = v.trim().parse::<usize>() else {
                usage!("{THREADS_ENV} must be a positive integer, got {v:?}");
            };
            if n == 0 {
                usage!("{THREADS_ENV} must be at least 1");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

pub fn simulate(args: &SimulateArgs, ctx: &RunContext<'_>) -> Result<()> {
    let params = ModelParams::finite(args.agents, args.mu, args.nu, args.f.clone())?;
    if args.replicas == 0 {
        usage!("--replicas must be at least 1");
    }
    let seeds: Vec<u64> = (0..args.replicas as u64)
        .map(|i| args.seed.wrapping_add(i))
        .collect();
    let results = run_replicas(&params, args.events, &seeds, args.snapshot_every, thread_cap()?)?;

    let finals: Vec<WealthDistribution> = results.iter().map(|r| r.histogram.clone()).collect();
    let histogram = average_distributions(&finals)?;
    let occupancies: Vec<WealthDistribution> =
        results.iter().map(|r| r.occupancy.clone()).collect();
    let occupancy = average_distributions(&occupancies)?;

    let out = &args.out;
    io::write_histogram(out, &histogram)?;
    let occupancy_path = io::sibling(out, "occupancy.csv");
    io::write_histogram(&occupancy_path, &occupancy)?;
    let mut outputs: Vec<PathBuf> = vec![out.clone(), occupancy_path];

    if args.snapshot_every.is_some_and(|k| k > 0) {
        let count = results[0].snapshots.len();
        let mut merged = Vec::with_capacity(count);
        for k in 0..count {
            let at: Vec<WealthDistribution> =
                results.iter().map(|r| r.snapshots[k].1.clone()).collect();
            merged.push((results[0].snapshots[k].0, average_distributions(&at)?));
        }
        let rows: Vec<(u64, &WealthDistribution)> = merged.iter().map(|(e, d)| (*e, d)).collect();
        let path = io::sibling(out, "snapshots.csv");
        io::write_long(&path, "event", &rows)?;
        outputs.push(path);
    }
    if let Some(svg_path) = &args.svg {
        let bars: Vec<(i64, f64)> = histogram.iter().filter(|(_, v)| *v > 0.0).collect();
        let overlay_pts: Option<Vec<(f64, f64)>> = if is_f_star(&args.f) {
            let sol = solve_equilibrium(args.mu, args.nu)?;
            let p = equilibrium_distribution(&sol, &args.f, default_window(&sol))?;
            let (lo, hi) = (histogram.window_min(), histogram.window_max());
            Some((lo..=hi).map(|n| (n as f64, p.get(n))).collect())
        } else {
            None
        };
        let overlay = overlay_pts.as_deref().map(|pts| Series {
            label: "equilibrium",
            points: pts,
            color: "crimson",
        });
        write_svg(svg_path, &svg::bar_chart("empirical wealth distribution", &bars, overlay))?;
        outputs.push(svg_path.clone());
    }

    let replicas: Vec<serde_json::Value> = results
        .iter()
        .map(|r| {
            let s = &r.final_state;
            json!({
                "seed": r.seed,
                "first_empty_event": s.first_empty_event(),
                "events": s.events_total(),
                "blocked_events": s.events_blocked(),
                "thinned_candidates": s.candidates_thinned(),
                "bank_cash": s.bank_cash(),
                "bank_debt": s.bank_debt(),
            })
        })
        .collect();
    let derived = json!({ "events": args.events, "replicas": replicas });
    let out_refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    let m = ctx.manifest(
        "simulate",
        Some(GENERATOR),
        params_json(&params),
        Some(args.seed),
        &out_refs,
        derived,
    );
    io::write_json(&io::manifest_path(out), &m)?;
    let blocked: u64 = results.iter().map(|r| r.final_state.events_blocked()).sum();
    emit(&format!(
        "simulated {} exchange(s) x {} replica(s); blocked = {blocked}; histogram -> {}",
        args.events,
        args.replicas,
        out.display()
    ))
}

pub fn ode(args: &OdeArgs, ctx: &RunContext<'_>) -> Result<()> {
    let params = ModelParams::mean_field(args.mu, args.nu, args.f.clone())?;
    if !(args.dt > 0.0) || !(args.t_end > 0.0) {
        usage!("--dt and --t-end must be positive");
    }
    let sol = if is_f_star(&args.f) {
        Some(solve_equilibrium(args.mu, args.nu)?)
    } else {
        None
    };
    let window = args
        .window
        .or_else(|| sol.as_ref().map(default_window))
        .unwrap_or(BASE_WINDOW);
    let reference = match &sol {
        Some(s) => Some(equilibrium_distribution(s, &args.f, window)?),
        None => None,
    };
    let snapshot_times = match &args.snapshots {
        Some(ts) => ts.clone(),
        None => (0..=args.t_end.floor() as u64).map(|t| t as f64).collect(),
    };
    let p_init = WealthDistribution::delta_on(args.mu as i64, window.0, window.1)?;
    let opts = OdeOptions {
        dt: args.dt,
        snapshot_times,
        reference: reference.clone(),
        ..Default::default()
    };
    let traj = run_two_phase(&params, &p_init, args.t_end, &opts)?;

    let out = &args.out;
    let rows: Vec<(f64, &WealthDistribution)> =
        traj.times.iter().copied().zip(traj.snapshots.iter()).collect();
    io::write_long(out, "t", &rows)?;
    let summary = io::sibling(out, "summary.csv");
    io::write_summary(&summary, &traj.diagnostics)?;
    let mut outputs = vec![out.clone(), summary];

    let final_l2 = reference
        .as_ref()
        .map(|r| distance(&traj.final_state, r, exchange_lab_core::Metric::L2));
    if let Some(svg_path) = &args.svg {
        let pts: Vec<(f64, f64)> = traj
            .diagnostics
            .iter()
            .filter_map(|d| d.l2_to_reference.map(|l| (d.t, l)))
            .collect();
        let debt: Vec<(f64, f64)> = traj.diagnostics.iter().map(|d| (d.t, d.debt)).collect();
        let body = if pts.is_empty() {
            svg::line_chart(
                "mean debt",
                &[Series { label: "debt", points: &debt, color: "black" }],
                false,
            )
        } else {
            svg::line_chart(
                "l2 distance to equilibrium",
                &[Series { label: "l2", points: &pts, color: "black" }],
                true,
            )
        };
        write_svg(svg_path, &body)?;
        outputs.push(svg_path.clone());
    }

    let phase_two_start = traj
        .phase_labels
        .iter()
        .position(|p| *p == Phase::Two)
        .map(|i| traj.times[i]);
    let derived = json!({
        "t_star": traj.t_star,
        "first_phase_two_snapshot": phase_two_start,
        "final_l2_to_equilibrium": final_l2,
        "window": [window.0, window.1],
        "dt": args.dt,
        "t_end": args.t_end,
        "warnings": traj.warnings,
        "equilibrium": sol.as_ref().map(|s| json!({
            "beta_plus": s.beta_plus, "beta_minus": s.beta_minus, "p0_star": s.p0_star,
        })),
    });
    let out_refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    let m = ctx.manifest("ode", None, params_json(&params), None, &out_refs, derived);
    io::write_json(&io::manifest_path(out), &m)?;
    for w in &traj.warnings {
        eprintln!("warning: {}", serde_json::to_string(w)?);
    }
    match final_l2 {
        Some(l2) => emit(&format!("t_star = {}; final l2 to equilibrium = {l2:e}", traj.t_star)),
        None => emit(&format!("t_star = {}", traj.t_star)),
    }
}

pub fn exact(args: &ExactArgs, ctx: &RunContext<'_>) -> Result<()> {
    if args.agents == 0 {
        usage!("--agents must be at least 1");
    }
    let rows: Vec<(i64, BigRational)> = match args.method {
        ExactMethod::Enumerate => {
            enumerate_stationary(args.agents, args.money, args.bank, &args.f)?.marginal_table()
        }
        ExactMethod::ClosedForm => {
            if !is_f_star(&args.f) {
                usage!("the closed form exists only for the fstar rate; use --method enumerate");
            }
            limiting_marginal_table(args.agents as u64, args.money, args.bank)?
                .into_iter()
                .filter(|(_, p)| !p.is_zero())
                .collect()
        }
    };
    io::write_exact(&args.out, &rows)?;
    let params = json!({
        "agents": args.agents,
        "money": args.money,
        "bank": args.bank,
        "rate": args.f.to_string(),
        "method": args.method.to_string(),
    });
    let derived = json!({ "rows": rows.len() });
    let m = ctx.manifest("exact", None, params, None, &[args.out.as_path()], derived);
    io::write_json(&io::manifest_path(&args.out), &m)?;
    emit(&format!("{} nonzero row(s) -> {}", rows.len(), args.out.display()))
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let a = io::read_histogram(&args.a)?;
    let b = io::read_histogram(&args.b)?;
    let d = distance(&a, &b, args.metric);
    emit(&d.to_string())?;
    if let Some(path) = &args.json {
        let doc = json!({
            "a": args.a.display().to_string(),
            "b": args.b.display().to_string(),
            "metric": args.metric.to_string(),
            "distance": d,
        });
        io::write_json(path, &doc)?;
    }
    Ok(())
}

/// Argument vector of a previous run, with `--out` optionally redirected.
pub fn replay_args(args: &ReplayArgs) -> Result<Vec<OsString>> {
    let text = fs::read_to_string(&args.manifest)
        .with_context(|| format!("reading {}", args.manifest.display()))?;
    let doc: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a manifest", args.manifest.display()))?;
    let argv: Vec<String> = doc
        .get("argv")
        .and_then(|v| serde_json::from_value(v.clone()).ok())
        .with_context(|| format!("{}: missing argv", args.manifest.display()))?;
    if argv.get(1).is_some_and(|c| c == "replay") {
        usage!("refusing to replay a replay");
    }
    let mut argv: Vec<OsString> = argv.into_iter().map(OsString::from).collect();
    if let Some(out) = &args.out {
        let mut replaced = false;
        for i in 0..argv.len() {
            if argv[i] == "--out" && i + 1 < argv.len() {
                argv[i + 1] = out.clone().into_os_string();
                replaced = true;
            } else if argv[i].to_string_lossy().starts_with("--out=") {
                argv[i] = OsString::from(format!("--out={}", out.display()));
                replaced = true;
            }
        }
        if !replaced {
            argv.push("--out".into());
            argv.push(out.clone().into_os_string());
        }
    }
    Ok(argv)
}
