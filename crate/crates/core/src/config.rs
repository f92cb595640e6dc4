use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerances used by membership tests, solvers and certificates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Optimality slack of the price-determining problem.
    pub sol: f64,
    /// Equality slack between price conjectures.
    pub eq: f64,
    /// Largest deviation gain still accepted as "no profitable deviation".
    pub dev: f64,
    /// Largest violation of the potential identity still accepted.
    pub pot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            sol: 1e-6,
            eq: 1e-9,
            dev: 1e-6,
            pot: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Coarse-to-fine passes; the first pass uses stride `2^grid_refinements`.
    pub grid_refinements: u32,
    /// Candidates kept per refinement pass, and starts for block ascent.
    pub multistarts: usize,
    pub seed: u64,
    pub tol: Tolerances,
    pub max_br_iterations: usize,
    pub br_damping: f64,
    /// Lipschitz bound `L` used for the `L * step` certificate slack.
    pub lipschitz: f64,
    /// Joint grid size above which the surrogate search switches to block ascent.
    pub joint_budget: u128,
    /// Per-player deviation scan size above which certificates become inconclusive.
    pub deviation_budget: u128,
    /// Largest joint grid `enumerate_equilibria` accepts.
    pub enumeration_budget: u128,
    /// Samples drawn by potential verification.
    pub potential_samples: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid_refinements: 0,
            multistarts: 1,
            seed: 0,
            tol: Tolerances::default(),
            max_br_iterations: 200,
            br_damping: 1.0,
            lipschitz: 0.0,
            joint_budget: 4_000_000,
            deviation_budget: 2_000_000,
            enumeration_budget: 200_000,
            potential_samples: 1000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.tol;
        for (name, v) in [("sol", t.sol), ("eq", t.eq), ("dev", t.dev), ("pot", t.pot)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::schema(format!("tol.{name}"), "tolerances must be positive"));
            }
        }
        if self.multistarts < 1 {
            return Err(Error::schema("multistarts", "must be at least 1"));
        }
        if !(self.br_damping > 0.0 && self.br_damping <= 1.0) {
            return Err(Error::schema("br_damping", "must lie in (0, 1]"));
        }
        if !(self.lipschitz >= 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::schema("lipschitz", "must be finite and nonnegative"));
        }
        if self.grid_refinements > 16 {
            return Err(Error::schema("grid_refinements", "at most 16 passes"));
        }
        Ok(())
    }
}
