//! Feasibility, simulation and impossibility certificates for relativistic
//! quantum summoning tasks in Minkowski space.
//!
//! A task hands an unknown state to Alice at a start point `s` and lists
//! call/return point pairs `(c_i, r_i)`. Depending on the call regime the
//! state must be produced at the return point of the (or one of the) called
//! pairs. The crate decides which configurations admit a strategy, runs the
//! teleportation-chain protocol as a discrete-event simulation, and searches
//! exhaustively over causal strategies to certify infeasibility.

pub mod cli;
pub mod exec;
pub mod feasibility;
pub mod fixtures;
pub mod generate;
pub mod geometry;
pub mod oracle;
pub mod protocol;
pub mod render;
pub mod task;

pub use exec::Exec;
pub use geometry::{causal_leq, interval2, CausalDiamond, SpacetimePoint, DEFAULT_TOL};
pub use task::{CallPattern, SummoningTask, TaskMode};
