//! Distributed SGD methods (canonical Local SGD, Minibatch SGD, Hero SGD,
//! Dual Local SGD, Decaying Local SGD and its asynchronous variant) simulated
//! under a computation/communication time model.
//!
//! The crate is organised bottom-up:
//!
//! * [`problems`] : objectives with known constants and per-worker
//!   stochastic-gradient oracles driven by counter-based RNG streams.
//! * [`schedules`] : global/local step-size rules and the parameter
//!   prescriptions that guarantee ε-stationarity or ε-optimality.
//! * [`methods`] : round-by-round execution, emitting [`RoundTrace`] records
//!   and optionally a [`ComputationTree`].
//! * [`timemodel`] : simulated wall-clock accounting (`h` seconds per
//!   gradient, `τ` seconds per synchronisation).
//! * [`complexity`] : closed-form time-complexity evaluators.
//! * [`ctree`] : computation-tree recording, `dist`/`repr` queries and
//!   validation of the four main-branch conditions.
//! * [`harness`] : step-size grid tuning, multi-seed percentile summaries and
//!   theory-vs-simulation comparison.

pub mod complexity;
pub mod ctree;
mod error;
pub mod harness;
pub mod methods;
pub mod problems;
pub mod schedules;
pub mod timemodel;

pub use ctree::{ComputationTree, ConditionReport, NodeId};
pub use error::{Error, Result};
pub use methods::{run, MethodConfig, RoundTrace, RunOutput, Variant};
pub use problems::{GradSample, ProblemSpec, StreamCursor};
pub use schedules::ScheduleParams;
pub use timemodel::TimeModel;
