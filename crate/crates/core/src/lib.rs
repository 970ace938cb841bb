//! Off-policy policy evaluation with linear function approximation and
//! emphatic traces.
//!
//! The crate covers four layers:
//!
//! * [`mdp`] and [`envs`]: finite models, exact solutions and the diagnostic
//!   environments;
//! * [`traces`] and [`learners`]: follow-on and n-step emphatic traces, the
//!   n-step TD and V-trace targets, and the streaming update rules;
//! * [`stability`]: expected key matrices and Monte-Carlo estimates of the
//!   expected update;
//! * [`harness`]: seeded evaluation runs, sweeps and CSV/JSON output.

pub mod envs;
pub mod error;
pub mod harness;
pub mod learners;
pub mod mdp;
pub mod stability;
pub mod traces;

pub use envs::{build_env, BehaviorStream, EnvConfig, Environment};
pub use error::{Error, Result};
pub use harness::{aggregate, run_evaluation, sweep, Aggregate, RunConfig, RunRecord, SweepResult};
pub use learners::{
    AlgorithmName, AlgorithmSpec, LinearValueFn, Scheme, SoftmaxPolicy, StreamingLearner,
};
pub use mdp::{Policy, TabularMdp, Trajectory, Transition};
pub use stability::{key_matrix, KeyMatrixReport, Variant};
pub use traces::{EmphasisState, RhoTransform, TraceKind, TraceWeights};
