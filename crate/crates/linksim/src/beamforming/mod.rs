//! Downlink sum-rate maximization.
//!
//! Four schemes share one engine: WMMSE precoding on whatever effective
//! channels the surface state induces, with the surface block (when present)
//! updated by minimizing the same weighted-MSE surrogate. The alternation is
//! exact block-coordinate descent on the surrogate, which is what makes every
//! returned rate trajectory monotone.

mod active;
mod oracle;
mod passive;
mod surrogate;
mod wmmse;

pub use active::optimize_active;
pub use oracle::{brute_force_oracle, enumeration_count};
pub use passive::{co_phasing_init, optimize_passive, random_phase_scheme};
pub use wmmse::wmmse_precoder;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::RisState;
use crate::numerics::ComplexMatrix;

/// Iteration limits and tolerances shared by all schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// Maximum outer (alternating) iterations for surface-aided schemes.
    pub max_outer_iters: usize,
    /// Maximum inner WMMSE iterations per precoder solve.
    pub max_wmmse_iters: usize,
    /// Relative sum-rate change below which iteration stops.
    pub convergence_tol: f64,
    /// Diagonal loading added to every precoder normal matrix.
    pub regularization: f64,
    /// Extra random initializations tried on top of the deterministic one;
    /// the best final rate wins. Zero keeps the scheme fully deterministic
    /// per instance.
    pub restarts: usize,
    /// Seed for the restart phase draws (only used when `restarts > 0`).
    pub restart_seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 100,
            max_wmmse_iters: 200,
            convergence_tol: 1e-4,
            regularization: 0.0,
            restarts: 0,
            restart_seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 {
            return Err(Error::invalid("max_outer_iters must be >= 1"));
        }
        if self.max_wmmse_iters == 0 {
            return Err(Error::invalid("max_wmmse_iters must be >= 1"));
        }
        if !(self.convergence_tol > 0.0) || !self.convergence_tol.is_finite() {
            return Err(Error::invalid("convergence_tol must be positive"));
        }
        if self.regularization < 0.0 || !self.regularization.is_finite() {
            return Err(Error::invalid("regularization must be >= 0"));
        }
        Ok(())
    }
}

/// Outcome of one optimization run.
#[derive(Debug, Clone)]
pub struct BeamformingSolution {
    /// `bs_antennas x users` precoder; column `k` serves user `k`.
    pub precoder: ComplexMatrix,
    pub ris: RisState,
    /// Sum rate at the returned iterate, bps/Hz.
    pub achieved_sum_rate: f64,
    /// Outer iterations actually executed.
    pub iterations_used: usize,
    /// Sum rate before iterating, then after each outer iteration.
    pub rate_trajectory: Vec<f64>,
}

/// Relative change used by every convergence check.
pub(crate) fn relative_change(current: f64, previous: f64) -> f64 {
    (current - previous).abs() / previous.abs().max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        OptimizerConfig::default().validate().unwrap();
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let mut cfg = OptimizerConfig::default();
        cfg.max_outer_iters = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = OptimizerConfig::default();
        cfg.convergence_tol = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = OptimizerConfig::default();
        cfg.regularization = -1.0;
        assert!(cfg.validate().is_err());
    }
}
