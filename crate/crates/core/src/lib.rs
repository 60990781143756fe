//! Optimal dividend barriers for an insurance surplus that evolves as a
//! Brownian motion with drift minus compound-Poisson hyperexponential claims,
//! when ruin by creeping (hitting zero with no deficit) pays a salvage value.
//!
//! The analytic side builds both scale functions exactly by partial fractions,
//! selects the barrier from the crossing of the `A_S` and `theta_S` curves,
//! assembles the value function in closed form, and verifies the
//! variational-inequality optimality conditions on a grid. An independent
//! Monte Carlo simulator with Brownian-bridge creeping detection
//! cross-validates the analytic values.

pub mod config;
pub mod error;
pub mod expsum;
pub mod model;
pub mod report;
mod roots;
pub mod scale;
pub mod simulate;
pub mod threshold;
pub mod value;

pub use error::{Error, Result};
pub use expsum::{ExpPolySum, Term};
pub use model::{AssumptionReport, JumpComponent, LevyModel, Process};
pub use report::{solve_model, solve_parts, SolveReport};
pub use scale::{apply_generator, build_scale_pair, ScalePair};
pub use simulate::{compare_strategies, simulate_batch, SimConfig, SimOutcome};
pub use threshold::{solve_threshold, ThresholdSolution};
pub use value::{build_value, ValueFunction};
