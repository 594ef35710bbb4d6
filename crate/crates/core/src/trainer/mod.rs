//! Policy learning.
//!
//! A state is embedded by the graph encoder and the text encoder, fused, and
//! every legal action is scored by the actor; a critic estimates the state
//! value. Rewards are the negated increases of the makespan lower bound and
//! of emission. Returns are z-scored per objective over the batch and mixed
//! by `lambda`. Updates use the clipped PPO objective with exact
//! hand-written gradients through every component.

mod policy;
mod ppo;
mod rewards;
mod train;

pub use policy::{
    backward, evaluate, grid_distribution, observe, score_actions, Mode, Observation, PolicyParams, StepEval,
    ACTION_FEATURES, ACTOR_INPUT, HEAD, HIDDEN,
};
pub use ppo::{
    clipped_surrogate, compute_targets, ppo_loss, ppo_update, LossReport, Normalize, PpoHyper, RewardConfig,
    StepRecord, Targets, Trajectory,
};
pub use rewards::{advantages, combine_rewards, discounted_returns, episode_offset, immediate_rewards, zscore};
pub use train::{
    load_policy, rollout, run_log_csv, train, validate, Episode, IterationLog, RolloutContext, Selection,
    TrainConfig, TrainHooks, TrainOutcome, Validation, RUN_LOG_HEADER,
};
