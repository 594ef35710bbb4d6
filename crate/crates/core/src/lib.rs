//! Carbon-aware flexible job-shop scheduling.
//!
//! The crate is organised bottom-up:
//!
//! * [`instances`]: problem data, the synthetic generator, the standard text
//!   format with its emission sidecar, and dataset splits.
//! * [`env`]: the decision-step scheduling environment (makespan, emission,
//!   lower bounds, CSV and SVG output).
//! * [`heuristics`]: FIFO/SPT/MOR/MWKR dispatching rules and a random policy.
//! * [`oracle`]: exact branch and bound for small instances and a schedule
//!   checker.
//! * [`neural`]: dense layers with hand-written gradients, Adam, softmax and
//!   the checkpoint format.
//! * [`encoders`]: graph snapshot + message passing, state prompts with
//!   impact hints, text encoders, and gated fusion.
//! * [`trainer`]: the policy, dual-objective rewards, PPO and the training
//!   loop with validation rollback.
//! * [`bench`]: configuration, dataset generation and the experiment
//!   commands behind the `luca` binary.
//!
//! The guide under `book/` walks through each layer; its code samples are
//! compiled and run as doctests.

pub mod bench;
pub mod encoders;
pub mod env;
pub mod error;
pub mod exact_sum;
pub mod heuristics;
pub mod instances;
pub mod neural;
pub mod oracle;
pub mod trainer;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/instances.md")]
    pub struct Instances;
    #[doc = include_str!("../../../book/src/environment.md")]
    pub struct Environment;
    #[doc = include_str!("../../../book/src/baselines.md")]
    pub struct Baselines;
    #[doc = include_str!("../../../book/src/prompts.md")]
    pub struct Prompts;
    #[doc = include_str!("../../../book/src/encoders.md")]
    pub struct Encoders;
    #[doc = include_str!("../../../book/src/training.md")]
    pub struct Training;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
