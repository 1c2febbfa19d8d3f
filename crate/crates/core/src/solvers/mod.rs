//! Resolvents, the proximal point iteration (Algorithm P), and grid oracles.

mod algorithm;
pub(crate) mod oracle;
mod resolvent;
mod trace;

pub use algorithm::{algorithm_p, probe_grid};
pub use oracle::{
    brute_force_ep, brute_force_vip, ep_residual, ep_solutions_on_grid, verify_inclusion_vip_ep,
    vip_residual, vip_solutions_on_grid, InclusionReport, OracleOptions, SolutionSet, Tolerance,
    CAP_SAFETY, SET_TOLERANCE_SPACINGS,
};
pub use resolvent::{resolvent, ResolventOutput, ResolventProblem};
pub use trace::{IterationRecord, SolverTrace, Status, Summary, CSV_HEADER};

use crate::error::{Error, Result};

/// Rule generating the proximal parameters `λ_k`.
#[derive(Clone, Debug, PartialEq)]
pub enum LambdaSchedule {
    /// `λ_k = c`.
    Constant(f64),
    /// `λ_k = c / √(k+1)`.
    Harmonic(f64),
    /// The listed values, then the last one held for all later `k`.
    Explicit(Vec<f64>),
}

impl LambdaSchedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            LambdaSchedule::Constant(c) => *c,
            LambdaSchedule::Harmonic(c) => c / ((k + 1) as f64).sqrt(),
            LambdaSchedule::Explicit(v) => v[k.min(v.len() - 1)],
        }
    }

    /// Checks positivity and that `Σ λ_k² = ∞`.
    ///
    /// A positive constant gives a divergent sum of constants, the harmonic rule gives
    /// `c² Σ 1/(k+1)`, and an explicit list is held at its positive last value.
    pub fn validate(&self) -> Result<()> {
        let positive = |c: f64| c.is_finite() && c > 0.0;
        match self {
            LambdaSchedule::Constant(c) | LambdaSchedule::Harmonic(c) if positive(*c) => Ok(()),
            LambdaSchedule::Constant(c) | LambdaSchedule::Harmonic(c) => Err(Error::InvalidConfig(
                format!("lambda coefficient must be positive and finite, got {c}"),
            )),
            LambdaSchedule::Explicit(v) if v.is_empty() => {
                Err(Error::InvalidConfig("explicit lambda list is empty".into()))
            }
            LambdaSchedule::Explicit(v) => match v.iter().position(|&c| !positive(c)) {
                Some(i) => Err(Error::InvalidConfig(format!(
                    "explicit lambda[{i}] = {} is not positive",
                    v[i]
                ))),
                None => Ok(()),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerSolver {
    /// Projected extragradient on `λA_F − exp⁻¹ z`.
    Extragradient,
    /// Grid maximizer of the regularized residual on `Q ∩ B(z, D_κ/4)`, refined by a
    /// compass search on the local gap.
    OracleGrid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub lambda: LambdaSchedule,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub inner: InnerSolver,
    /// Natural-residual tolerance of the extragradient solver, relative to
    /// `1 + λ‖A_F(x)‖`; also the final step size of the compass refinement.
    pub inner_tol: f64,
    pub step_tol: f64,
    pub residual_tol: f64,
    /// Target spacing of the residual probe grid.
    pub probe_spacing: f64,
    pub probe_max_points: usize,
    /// Points per dimension of the oracle-grid inner solver.
    pub oracle_resolution: usize,
    pub lipschitz_radius: f64,
    pub lipschitz_samples: usize,
    /// Halve `λ_k` up to `MAX_SHRINKS` times when the step condition fails.
    pub auto_shrink: bool,
    /// Caller's assertion that `x₀` is within `D_κ/8` of the solution set.
    pub assume_proximity: bool,
    pub seed: u64,
}

/// Maximum number of halvings under `auto_shrink`.
pub const MAX_SHRINKS: usize = 10;

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: LambdaSchedule::Constant(1.0),
            max_outer_iters: 500,
            max_inner_iters: 5000,
            inner: InnerSolver::Extragradient,
            inner_tol: 1e-10,
            step_tol: 1e-8,
            residual_tol: 1e-6,
            probe_spacing: 1e-2,
            probe_max_points: 20_000,
            oracle_resolution: 41,
            lipschitz_radius: 1e-3,
            lipschitz_samples: 32,
            auto_shrink: false,
            assume_proximity: false,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.lambda.validate()?;
        let positive = [
            ("inner_tol", self.inner_tol),
            ("step_tol", self.step_tol),
            ("residual_tol", self.residual_tol),
            ("probe_spacing", self.probe_spacing),
            ("lipschitz_radius", self.lipschitz_radius),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("max_outer_iters", self.max_outer_iters),
            ("max_inner_iters", self.max_inner_iters),
            ("probe_max_points", self.probe_max_points),
            ("lipschitz_samples", self.lipschitz_samples),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if self.oracle_resolution < 3 {
            return Err(Error::InvalidConfig("oracle_resolution must be at least 3".into()));
        }
        Ok(())
    }
}
