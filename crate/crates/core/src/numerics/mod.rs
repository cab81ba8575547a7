//! Uniformization, steady-state and linear-equation solvers.

mod linear;
mod poisson;
mod steady;
mod transient;

pub use linear::solve_reachability;
pub use poisson::PoissonWeights;
pub use steady::{is_irreducible, steady_state};
pub use transient::{
    cumulative_reward, cumulative_reward_vector, transient_backward, transient_distribution, transient_from,
    UniformizedChain,
};

/// Accuracy and effort limits for the numerical engines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericOptions {
    /// Poisson truncation error bound for uniformization.
    pub eps: f64,
    /// Largest uniformization step count before giving up.
    pub max_iterations: usize,
    /// Residual bound for steady-state and linear solves.
    pub tolerance: f64,
    /// Sweep limit for the iterative solvers.
    pub max_sweeps: usize,
}

impl Default for NumericOptions {
    fn default() -> Self {
        NumericOptions {
            eps: 1e-10,
            max_iterations: 100_000_000,
            tolerance: 1e-12,
            max_sweeps: 1_000_000,
        }
    }
}

impl NumericOptions {
    pub fn with_eps(eps: f64) -> Self {
        NumericOptions {
            eps,
            ..Default::default()
        }
    }
}
