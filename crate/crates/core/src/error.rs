use thiserror::Error;

/// Errors raised by the model engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid rate function: {0}")]
    InvalidRate(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("unsupported rate function `{rate}`: {reason}")]
    UnsupportedRate { rate: String, reason: String },

    #[error("search space too large: estimated {estimate} configurations exceeds the bound of {bound}")]
    TooLarge { estimate: String, bound: u64 },

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("phase I did not terminate by t = {t_max}: final mean debt {final_debt} < target {target}")]
    Phase1Timeout {
        t_max: f64,
        final_debt: f64,
        target: f64,
    },

    #[error("numerical instability at t = {t}: entry {min_entry:e} at n = {n} is below the negativity slack; try a smaller dt")]
    Instability { t: f64, n: i64, min_entry: f64 },

    #[error("mass defect {defect:e} at t = {t} exceeds the limit {limit:e}")]
    MassDefect { t: f64, defect: f64, limit: f64 },

    #[error("no admissible equilibrium for mu = {mu}, nu = {nu} (real roots of the quartic in (0,1): {roots:?})")]
    NoEquilibrium { mu: u64, nu: u64, roots: Vec<f64> },

    #[error("ambiguous equilibrium for mu = {mu}, nu = {nu}: admissible roots {roots:?}")]
    AmbiguousEquilibrium { mu: u64, nu: u64, roots: Vec<f64> },

    #[error("equilibrium ansatz is not normalizable: {0} (such a p* has no chance to be a probability mass function)")]
    NonNormalizable(String),

    #[error("window [{min}, {max}] too small: estimated tail mass {tail:e} beyond it")]
    WindowTooSmall { min: i64, max: i64, tail: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
