use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rate::RateFunction;

/// Model parameters: average wealth `mu`, bank ratio `nu`, optional agent
/// count and the giver-rate function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: u64,
    pub nu: u64,
    pub n_agents: Option<usize>,
    pub rate: RateFunction,
}

impl ModelParams {
    /// Mean-field parameters (no agent count).
    pub fn mean_field(mu: u64, nu: u64, rate: RateFunction) -> Result<Self> {
        let p = Self {
            mu,
            nu,
            n_agents: None,
            rate,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn finite(n_agents: usize, mu: u64, nu: u64, rate: RateFunction) -> Result<Self> {
        let p = Self {
            mu,
            nu,
            n_agents: Some(n_agents),
            rate,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu < 1 {
            return Err(Error::InvalidParams("mu must be >= 1".into()));
        }
        if self.nu < 1 {
            return Err(Error::InvalidParams("nu must be >= 1".into()));
        }
        if let Some(n) = self.n_agents {
            if n < 2 {
                return Err(Error::InvalidParams(format!("need at least 2 agents, got {n}")));
            }
            self.total_money()?;
            self.bank_initial()?;
        }
        Ok(())
    }

    /// Debt ceiling per agent in the mean-field picture, `mu * nu`.
    pub fn debt_limit(&self) -> f64 {
        (self.mu * self.nu) as f64
    }

    /// Total agent money `N mu`.
    pub fn total_money(&self) -> Result<i64> {
        let n = self.require_agents()?;
        (n as u64)
            .checked_mul(self.mu)
            .and_then(|v| i64::try_from(v).ok())
            .ok_or_else(|| Error::InvalidParams("N * mu overflows".into()))
    }

    /// Initial bank holdings `B_* = N mu nu`.
    pub fn bank_initial(&self) -> Result<u64> {
        let n = self.require_agents()?;
        (n as u64)
            .checked_mul(self.mu)
            .and_then(|v| v.checked_mul(self.nu))
            .filter(|&v| i64::try_from(v).is_ok())
            .ok_or_else(|| Error::InvalidParams("N * mu * nu overflows".into()))
    }

    fn require_agents(&self) -> Result<usize> {
        self.n_agents
            .ok_or_else(|| Error::InvalidParams("agent count required".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ModelParams::finite(1, 1, 1, RateFunction::f_star()).is_err());
        assert!(ModelParams::finite(2, 0, 1, RateFunction::f_star()).is_err());
        assert!(ModelParams::mean_field(1, 0, RateFunction::f_star()).is_err());
        let p = ModelParams::finite(3, 2, 1, RateFunction::f_star()).unwrap();
        assert_eq!(p.total_money().unwrap(), 6);
        assert_eq!(p.bank_initial().unwrap(), 6);
        assert!(ModelParams::finite(usize::MAX, 2, 2, RateFunction::f_star()).is_err());
    }
}
