//! Phase-II equilibrium in closed form.
//!
//! The equilibrium is two-sided geometric around a center mass `p0`:
//! `p_n = p0 beta_plus^n / (f(n)...f(1) f(0))` for `n >= 0` and
//! `p_n = p0 beta_minus^(-n) / (f(n)...f(-1) f(0))` for `n <= 0`. For
//! `f_star` the mass, mean and debt constraints reduce to a quartic in
//! `beta_plus`; `p0` and `beta_minus` follow by back-substitution.

use serde::Serialize;

use crate::distribution::WealthDistribution;
use crate::error::{Error, Result};
use crate::rate::RateFunction;

/// Points in the sign-change scan of (0, 1).
pub const SCAN_POINTS: usize = 1000;
/// Roots closer than this are merged.
pub const ROOT_DEDUP: f64 = 1e-10;
/// Largest accepted constraint residual.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Largest tail mass allowed beyond the evaluation window.
pub const WINDOW_TAIL_TOL: f64 = 1e-12;
/// The evaluation window always covers at least this range.
pub const BASE_WINDOW: (i64, i64) = (-150, 200);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSolution {
    pub mu: u64,
    pub nu: u64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub p0_star: f64,
    /// `c0..c4`, lowest degree first.
    pub quartic: [f64; 5],
    /// Mass, mean and debt defects from the closed-form sums.
    pub residuals: [f64; 3],
    pub admissible_roots_found: usize,
}

impl EquilibriumSolution {
    pub fn quartic_residual(&self) -> f64 {
        eval_poly(&self.quartic, self.beta_plus)
    }
}

pub fn quartic_coefficients(mu: u64, nu: u64) -> [f64; 5] {
    let mu = mu as f64;
    let nu = nu as f64;
    let a = 1.0 / (mu * (1.0 + nu));
    let b = nu / (1.0 + nu);
    let a2 = a * a;
    [
        1.0 - b - a,
        a2 + 2.0 * b - 3.0,
        2.0 * a2 + 4.0,
        a2 - 2.0 * b - 3.0,
        a + b + 1.0,
    ]
}

pub fn eval_poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

fn eval_poly_deriv(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, &ci)| acc * x + i as f64 * ci)
}

/// Real roots of `c` strictly inside (0, 1), found by scanning for sign
/// changes, bisecting, and polishing with Newton.
pub fn roots_in_unit_interval(c: &[f64]) -> Vec<f64> {
    let mut roots: Vec<f64> = Vec::new();
    let xs: Vec<f64> = (1..SCAN_POINTS).map(|i| i as f64 / SCAN_POINTS as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| eval_poly(c, x)).collect();
    for i in 0..xs.len() {
        if vals[i] == 0.0 {
            roots.push(xs[i]);
            continue;
        }
        if i + 1 < xs.len() && vals[i] * vals[i + 1] < 0.0 {
            roots.push(bisect_newton(c, xs[i], xs[i + 1]));
        }
    }
    // The first and last cells touch the open endpoints.
    let (v_lo, v_hi) = (eval_poly(c, 1e-15), eval_poly(c, 1.0 - 1e-15));
    if v_lo * vals[0] < 0.0 {
        roots.push(bisect_newton(c, 1e-15, xs[0]));
    }
    if v_hi * vals[vals.len() - 1] < 0.0 {
        roots.push(bisect_newton(c, xs[xs.len() - 1], 1.0 - 1e-15));
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < ROOT_DEDUP);
    roots
}

fn bisect_newton(c: &[f64], mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = eval_poly(c, lo);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let fm = eval_poly(c, mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..20 {
        let d = eval_poly_deriv(c, x);
        if d == 0.0 {
            break;
        }
        let next = x - eval_poly(c, x) / d;
        if !(lo..=hi).contains(&next) {
            break;
        }
        let done = (next - x).abs() <= 1e-16 * x.abs();
        x = next;
        if done {
            break;
        }
    }
    x
}

/// `p0` from the combined mean and debt constraints.
pub fn p0_from_beta_plus(mu: u64, nu: u64, beta_plus: f64) -> f64 {
    let b = beta_plus;
    (1.0 - b).powi(3) * mu as f64 * (1.0 + nu as f64) / (b * b + b)
}

/// The root in (0, 1) of `beta/(1 - beta)^2 = mu nu / p0`.
pub fn beta_minus_from_p0(mu: u64, nu: u64, p0: f64) -> f64 {
    let s = p0 / (mu * nu) as f64;
    let t = 2.0 + s;
    // Smaller root of beta^2 - t beta + 1, written to avoid cancellation.
    2.0 / (t + (t * t - 4.0).sqrt())
}

/// Mass, mean and debt defects of the `f_star` ansatz via geometric series.
pub fn closed_form_residuals(mu: u64, nu: u64, beta_plus: f64, beta_minus: f64, p0: f64) -> [f64; 3] {
    let (bp, bm) = (beta_plus, beta_minus);
    let rich = bp / (1.0 - bp).powi(2);
    let rich_mean = (bp * bp + bp) / (1.0 - bp).powi(3);
    let poor = bm / (1.0 - bm);
    let poor_mean = bm / (1.0 - bm).powi(2);
    [
        p0 * (1.0 + rich + poor) - 1.0,
        p0 * (rich_mean - poor_mean) - mu as f64,
        p0 * poor_mean - (mu * nu) as f64,
    ]
}

pub fn solve_equilibrium(mu: u64, nu: u64) -> Result<EquilibriumSolution> {
    if mu < 1 || nu < 1 {
        return Err(Error::InvalidParams(format!(
            "mu and nu must be >= 1, got ({mu}, {nu})"
        )));
    }
    let quartic = quartic_coefficients(mu, nu);
    let roots = roots_in_unit_interval(&quartic);
    let mut admissible = Vec::new();
    for &bp in &roots {
        let p0 = p0_from_beta_plus(mu, nu, bp);
        if !(p0 > 0.0 && p0 < 1.0) {
            continue;
        }
        let bm = beta_minus_from_p0(mu, nu, p0);
        if !(bm > 0.0 && bm < 1.0) {
            continue;
        }
        let residuals = closed_form_residuals(mu, nu, bp, bm, p0);
        if residuals.iter().all(|r| r.abs() <= RESIDUAL_TOL) {
            admissible.push((bp, bm, p0, residuals));
        }
    }
    match admissible.len() {
        0 => Err(Error::NoEquilibrium { mu, nu, roots }),
        1 => {
            let (beta_plus, beta_minus, p0_star, residuals) = admissible[0];
            Ok(EquilibriumSolution {
                mu,
                nu,
                beta_plus,
                beta_minus,
                p0_star,
                quartic,
                residuals,
                admissible_roots_found: 1,
            })
        }
        _ => Err(Error::AmbiguousEquilibrium {
            mu,
            nu,
            roots: admissible.iter().map(|a| a.0).collect(),
        }),
    }
}

/// `BASE_WINDOW` widened until the `f_star` tails drop below `1e-16`.
pub fn default_window(sol: &EquilibriumSolution) -> (i64, i64) {
    let mut hi = BASE_WINDOW.1;
    while (hi as f64) * sol.p0_star * sol.beta_plus.powi(hi as i32) > 1e-16 {
        hi += 50;
    }
    let mut lo = BASE_WINDOW.0;
    while sol.p0_star * sol.beta_minus.powi((-lo) as i32) > 1e-16 {
        lo -= 50;
    }
    (lo, hi)
}

/// Builds the ansatz for `f` on `window`. Requires `f(0) = 1`.
pub fn equilibrium_distribution(
    sol: &EquilibriumSolution,
    f: &RateFunction,
    window: (i64, i64),
) -> Result<WealthDistribution> {
    let (lo, hi) = window;
    if lo > -1 || hi < 1 {
        return Err(Error::InvalidParams(format!(
            "window [{lo}, {hi}] must contain -1..=1"
        )));
    }
    if f.eval(0) != 1.0 {
        return Err(Error::InvalidRate(format!(
            "ansatz needs f(0) = 1, got {}",
            f.eval(0)
        )));
    }
    let len = (hi - lo + 1) as usize;
    let zero = (-lo) as usize;
    let mut w = vec![0.0; len];
    w[zero] = sol.p0_star;
    for n in 1..=hi {
        let i = zero + n as usize;
        w[i] = w[i - 1] * sol.beta_plus / f.eval(n);
    }
    for n in (lo..0).rev() {
        let i = (n - lo) as usize;
        w[i] = w[i + 1] * sol.beta_minus / f.eval(n);
    }
    if let Some(n) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonNormalizable(format!(
            "weight at n = {} overflows",
            lo + n as i64
        )));
    }
    let tail = tail_estimate(w[len - 1], w[len - 2], "upper")?
        + tail_estimate(w[0], w[1], "lower")?;
    if tail >= WINDOW_TAIL_TOL {
        return Err(Error::WindowTooSmall {
            min: lo,
            max: hi,
            tail,
        });
    }
    WealthDistribution::new(lo, w)
}

/// Geometric extrapolation of the mass beyond an edge entry.
fn tail_estimate(edge: f64, inner: f64, side: &str) -> Result<f64> {
    if edge == 0.0 {
        return Ok(0.0);
    }
    let ratio = edge / inner;
    if !(ratio < 1.0) {
        return Err(Error::NonNormalizable(format!(
            "{side} tail ratio {ratio:.6} at the window edge is not below 1"
        )));
    }
    Ok(edge * ratio / (1.0 - ratio))
}

/// Mass, mean and debt defects of the ansatz summed over `window`.
pub fn constraint_residuals(
    sol: &EquilibriumSolution,
    f: &RateFunction,
    window: (i64, i64),
) -> Result<[f64; 3]> {
    let p = equilibrium_distribution(sol, f, window)?;
    let (mass, mean) = p.moments();
    Ok([
        mass - 1.0,
        mean - sol.mu as f64,
        p.debt() - (sol.mu * sol.nu) as f64,
    ])
}
