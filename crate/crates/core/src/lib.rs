//! Equilibrium solvers for a two-population relative-performance portfolio game.
//!
//! Agents in both populations trade a single risky exposure under exponential
//! utility and benchmark their terminal wealth against a weighted average of
//! the two population means. Population 1 carries idiosyncratic Poisson jump
//! risk; population 2 carries Poisson jumps that are common to the whole
//! population. Both share a Brownian common noise.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: type vectors, population distributions and reproducible sampling.
//! - [`best_response`]: the first-order condition `g(π, u, v, ζ)`, its unique root,
//!   implicit-function partials and the value-function time factor.
//! - [`fixed_point`]: damped fixed-point iteration on the three loadings `(x₁, x₂, y)`.
//! - [`mfe`]: the mean-field equilibrium on a frozen type sample, contraction
//!   diagnostics and the closed-form jump-free solutions.
//! - [`nash`]: the `N₁ + N₂` player Nash equilibrium and deviation checks.
//! - [`sim`]: terminal-law-exact Monte Carlo of wealth and relative utility.
//! - [`experiments`]: surfaces, convergence studies and sensitivity sweeps.
//! - [`config`] and [`report`]: the plain-text config format and CSV/SVG output.

pub mod best_response;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fixed_point;
pub mod mfe;
pub mod model;
pub mod nash;
pub mod report;
pub mod rng;
pub mod sim;

pub use best_response::{
    best_response_partials, g_value, solve_best_response, value_factor, BestResponseInput,
};
pub use error::{Error, Result};
pub use fixed_point::{FixedPointSettings, FixedPointSolution, TraceRow};
pub use mfe::{FrozenMfe, MfeProblem};
pub use model::{
    sample_roster, sample_type_vector, AgentRoster, EquilibriumMeans, Marginal, Population,
    PopulationSpec, TypeVector,
};
pub use nash::{solve_nash, NashProblem, NashSolution};
pub use sim::{simulate_wealth, PathBundle, SimConfig};
pub use config::Config;
pub use experiments::Scenario;
