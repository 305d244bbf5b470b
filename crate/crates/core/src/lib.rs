//! Simulation and property checking for the truncated discrete
//! collision-induced breakage equation.
//!
//! A population of clusters, `w_i` being the concentration of clusters made
//! of `i` monomers, evolves through binary collisions at rate `a(i,j)`. In
//! each collision a cluster may shatter into smaller fragments distributed
//! according to `b(i,j;k)`, or more generally the colliding pair is turned
//! into products according to a breakup table `B(s;i,j)`. Sizes are capped at
//! a truncation size `l`, and only pairs whose combined size fits below the
//! cap collide, which keeps total mass exactly conserved.
//!
//! Modules:
//! * [`kernels`]: collision kernels, daughter distributions, breakup tables;
//! * [`state`]: cluster states, initial data, moments and weights;
//! * [`rhs`]: right-hand side evaluation;
//! * [`integrator`]: adaptive Dormand–Prince time stepping;
//! * [`verify`]: conservation laws and inequalities as executable checks;
//! * [`scenario`] and [`config`]: runnable scenario descriptions;
//! * [`cli`]: the `simulate`, `verify`, `converge` and `validate` commands.

pub mod cli;
pub mod config;
pub mod integrator;
pub mod kernels;
pub mod rhs;
pub mod scenario;
pub mod state;
pub mod sum;
pub mod verify;

pub use integrator::{integrate, IntegrationConfig, Trajectory};
pub use kernels::{BreakupTable, CollisionKernel, DaughterDistribution};
pub use rhs::{rhs_b_form, rhs_breakup_form};
pub use state::{ClusterState, InitialData, MomentWeight};
