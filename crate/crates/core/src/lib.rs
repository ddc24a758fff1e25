//! Numerical tools for a dollar-exchange economy with a rate-biased giver
//! and a central bank that lends until its cash runs out.
//!
//! Four engines share the same parameter and distribution types:
//! an agent-based simulator ([`sim`]), exact finite-N stationary laws
//! ([`exact`]), the two-phase mean-field ODE ([`meanfield`], [`integrate`])
//! and its closed-form equilibrium ([`equilibrium`]).

pub mod class_g;
pub mod distribution;
pub mod equilibrium;
pub mod error;
pub mod exact;
pub mod integrate;
pub mod meanfield;
pub mod params;
pub mod rate;
pub mod sim;

pub use distribution::{distance, Metric, WealthDistribution};
pub use equilibrium::{equilibrium_distribution, solve_equilibrium, EquilibriumSolution};
pub use error::{Error, Result};
pub use integrate::{run_two_phase, OdeOptions, Phase, TwoPhaseTrajectory};
pub use params::ModelParams;
pub use rate::{RateFunction, RateKind};
pub use sim::{Allocation, SimResult, Simulator, SystemState};
