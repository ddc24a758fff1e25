//! Exact stationary laws of the finite-N chain.
//!
//! The chain is reversible with weights
//! `theta(xi) = prod_i prod_{j=-B_*}^{xi(i)} 1 / f(j)`; for `f_star` this is
//! the product of the positive entries of `xi`, and the normalizer has a
//! closed form as a triple binomial sum. Everything here is exact
//! (big integers and rationals).

mod closed_form;
mod combinatorics;
mod stationary;

pub use closed_form::{config_count, limiting_marginal, limiting_marginal_table, phi_count, varphi};
pub use combinatorics::{
    binomial, positive_compositions, product_sum, stars_bars, weighted_sum_s,
    weighted_sum_s_closed, weighted_sum_u, weighted_sum_u_closed,
};
pub use stationary::{
    enumerate_stationary, theta_weight, transition_rate, Configuration, ExactDistribution,
    ThetaTable, ENUMERATION_BOUND,
};
