//! First eigenpair of the p(x)-Laplacian in norm form, the functionals it is
//! built from, constant-exponent reference values and the concentration probe
//! for the inhomogeneous quotient.

mod banded;
mod descent;
mod functionals;
mod probe;
mod reference;

use serde::{Deserialize, Serialize};

use crate::discretize::GridFunction;
use crate::error::{Error, Result};

pub use descent::{descend, initial_guess, solve_first_eigenpair, DescentRun};
pub use functionals::{
    el_residual, energy_ratio, function_norm, function_norm_action, gradient_norm,
    gradient_norm_action, rayleigh_ratio,
};
pub use probe::{concentration_probe, inhomogeneous_ratio, plateau_bump, ProbeRow, ProbeTable};
pub use reference::{
    constant_p_first_eigenvalue_1d, constant_p_higher_eigenvalue_1d, higher_eigenvalue,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub initial_step: f64,
    /// Step shrink factor in `(0, 1)`.
    pub backtrack: f64,
    /// Relative change of λ between accepted steps.
    pub tol_lambda: f64,
    pub tol_residual: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            initial_step: 0.5,
            backtrack: 0.5,
            tol_lambda: 1e-9,
            tol_residual: 1e-6,
            max_iter: 50_000,
            restarts: 3,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return bad(format!("initial_step = {}", self.initial_step));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad(format!("backtrack = {} not in (0, 1)", self.backtrack));
        }
        if !(self.tol_lambda > 0.0) || !(self.tol_residual > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.restarts < 1 {
            return bad("restarts must be at least 1".into());
        }
        Ok(())
    }
}

/// Normalised first eigenpair, `k(u) = 1` and `λ = K(u)`.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub lambda: f64,
    pub u: GridFunction,
    pub el_residual: f64,
    /// Residual at the (normalised) starting point of the selected restart.
    pub initial_residual: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub best_restart: usize,
    pub seed: u64,
    pub converged: bool,
}
