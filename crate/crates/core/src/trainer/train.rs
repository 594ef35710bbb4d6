use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::policy::{evaluate, observe, Mode, PolicyParams};
use super::ppo::{compute_targets, ppo_update, LossReport, Normalize, PpoHyper, RewardConfig, StepRecord, Trajectory};
use super::rewards::immediate_rewards;
use crate::encoders::{build_state_prompt, ImpactStore, PromptOptions, TextEncoder, Threshold, TEXT_DIM};
use crate::env::{ScheduleEntry, State};
use crate::error::{Error, Result};
use crate::instances::Instance;
use crate::neural::{save_checkpoint, Adam};

/// How the policy picks an action.
pub enum Selection<'a> {
    Greedy,
    Sample(&'a mut ChaCha8Rng),
}

/// Shared inputs of a rollout.
pub struct RolloutContext<'a> {
    pub encoder: &'a dyn TextEncoder,
    pub mode: Mode,
    pub prompt: PromptOptions,
}

/// Result of a policy rollout.
#[derive(Debug, Clone)]
pub struct Episode {
    pub trajectory: Trajectory,
    pub schedule: Vec<ScheduleEntry>,
    pub initial_lb: f64,
    pub min_emission: f64,
}

/// Plays one episode. Steps are recorded only when `record` is set.
pub fn rollout(
    params: &PolicyParams,
    inst: &Arc<Instance>,
    ctx: &RolloutContext<'_>,
    store: Option<&ImpactStore>,
    mut selection: Selection<'_>,
    record: bool,
) -> Result<Episode> {
    let mut state = State::reset(inst.clone());
    let initial_lb = state.lower_bound_makespan();
    let min_emission = state.emission_lower_bound();
    let mut steps = Vec::new();
    while !state.is_done() {
        let z_text = if ctx.mode.uses_text() {
            ctx.encoder.encode_prompt(&build_state_prompt(&state, store, ctx.prompt))?
        } else {
            vec![0.0; TEXT_DIM]
        };
        if z_text.len() != TEXT_DIM || z_text.iter().any(|x| !x.is_finite()) {
            return Err(Error::Encoder(format!("{} returned an invalid embedding", ctx.encoder.name())));
        }
        let obs = observe(&state, z_text)?;
        let ev = evaluate(params, &obs, ctx.mode)?;
        let chosen = match &mut selection {
            Selection::Greedy => ev.greedy(),
            Selection::Sample(rng) => ev.sample(*rng),
        };
        let outcome = state.apply(&obs.actions[chosen])?;
        if record {
            let (r_ms, r_ce) = immediate_rewards(&outcome);
            steps.push(StepRecord {
                log_prob: ev.log_prob(chosen),
                value: ev.value,
                gate: ev.gate(),
                chosen,
                r_ms,
                r_ce,
                obs,
            });
        }
    }
    Ok(Episode {
        trajectory: Trajectory {
            instance: 0,
            steps,
            makespan: state.makespan(),
            emission: state.total_emission(),
        },
        schedule: state.entries().to_vec(),
        initial_lb,
        min_emission,
    })
}

/// Greedy validation summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    pub mean_makespan: f64,
    pub mean_emission: f64,
    /// Mean of `-makespan / initial lower bound`.
    pub makespan_score: f64,
    /// Mean of `-emission / minimum possible emission`.
    pub emission_score: f64,
    /// `(1 - lambda) * makespan_score + lambda * emission_score`; higher is better.
    pub aggregate: f64,
}

/// Greedy rollouts on every instance; no side effects.
pub fn validate(
    params: &PolicyParams,
    instances: &[Arc<Instance>],
    ctx: &RolloutContext<'_>,
    lambda: f64,
) -> Result<Validation> {
    if instances.is_empty() {
        return Err(Error::Config("validation set is empty".into()));
    }
    let n = instances.len() as f64;
    let mut v = Validation {
        mean_makespan: 0.0,
        mean_emission: 0.0,
        makespan_score: 0.0,
        emission_score: 0.0,
        aggregate: 0.0,
    };
    for inst in instances {
        let ep = rollout(params, inst, ctx, None, Selection::Greedy, false)?;
        v.mean_makespan += ep.trajectory.makespan / n;
        v.mean_emission += ep.trajectory.emission / n;
        v.makespan_score -= ep.trajectory.makespan / ep.initial_lb / n;
        v.emission_score -= ep.trajectory.emission / ep.min_emission / n;
    }
    v.aggregate = (1.0 - lambda) * v.makespan_score + lambda * v.emission_score;
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    pub reward: RewardConfig,
    pub ppo: PpoHyper,
    pub iterations: usize,
    pub batch_size: usize,
    /// Resample the batch every this many iterations.
    pub batch_period: usize,
    /// Validate (and possibly roll back) every this many iterations.
    pub check_period: usize,
    /// Refresh impact hints every this many iterations.
    pub hint_period: usize,
    /// Quantile used for both hint thresholds.
    pub hint_quantile: f64,
    pub prompt: PromptOptions,
    pub seed: u64,
    /// Where interval and final checkpoints go, if anywhere.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: Mode::Luca,
            reward: RewardConfig::default(),
            ppo: PpoHyper::default(),
            iterations: 1000,
            batch_size: 20,
            batch_period: 20,
            check_period: 50,
            hint_period: 20,
            hint_quantile: 0.75,
            prompt: PromptOptions::default(),
            seed: 0,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.reward.validate()?;
        self.ppo.validate()?;
        for (name, v) in [
            ("iterations", self.iterations),
            ("batch_size", self.batch_size),
            ("batch_period", self.batch_period),
            ("check_period", self.check_period),
            ("hint_period", self.hint_period),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.hint_quantile) {
            return Err(Error::Config("hint_quantile must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// `lambda` after the mode override.
    pub fn lambda(&self) -> f64 {
        self.mode.effective_lambda(self.reward.lambda)
    }

    fn checkpoint_meta(&self, iteration: usize) -> Vec<(String, String)> {
        vec![
            ("mode".into(), self.mode.name().into()),
            ("lambda".into(), format!("{:?}", self.lambda())),
            ("seed".into(), self.seed.to_string()),
            ("iteration".into(), iteration.to_string()),
        ]
    }
}

/// One row of the run log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub mean_makespan: f64,
    pub mean_emission: f64,
    pub loss: LossReport,
    pub validation: Option<f64>,
    pub rollback: bool,
}

pub const RUN_LOG_HEADER: &str =
    "iteration,mean_makespan,mean_emission,policy_loss,value_loss,entropy,gate_mean,validation,rollback";

pub fn run_log_csv(log: &[IterationLog]) -> String {
    let mut s = String::from(RUN_LOG_HEADER);
    s.push('\n');
    for r in log {
        writeln!(
            s,
            "{},{:.4},{:.4},{:.6},{:.6},{:.6},{:.6},{},{}",
            r.iteration,
            r.mean_makespan,
            r.mean_emission,
            r.loss.policy,
            r.loss.value,
            r.loss.entropy,
            r.loss.gate_mean,
            r.validation.map(|v| format!("{v:.6}")).unwrap_or_default(),
            r.rollback as u8
        )
        .unwrap();
    }
    s
}

/// Optional callbacks into the training loop.
#[derive(Default)]
pub struct TrainHooks<'a> {
    /// Maps `(iteration, aggregate)` to the aggregate used for the rollback
    /// decision.
    pub validation: Option<Box<dyn FnMut(usize, f64) -> f64 + 'a>>,
    /// Called after every iteration.
    pub progress: Option<Box<dyn FnMut(&IterationLog) + 'a>>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub log: Vec<IterationLog>,
    /// Parameters at the start of every validation interval, in order.
    pub interval_starts: Vec<PolicyParams>,
    pub rollbacks: usize,
    pub checkpoints: Vec<PathBuf>,
}

fn rollout_seed(seed: u64, iteration: usize, slot: usize) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((iteration as u64) << 20)
        .wrapping_add(slot as u64);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn checkpoint(dir: &Option<PathBuf>, name: &str, params: &PolicyParams, cfg: &TrainConfig, it: usize) -> Result<Option<PathBuf>> {
    let Some(dir) = dir else { return Ok(None) };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    save_checkpoint(&path, params, &cfg.checkpoint_meta(it))?;
    Ok(Some(path))
}

/// Trains a policy from `PolicyParams::new(cfg.seed)`.
///
/// Every iteration rolls out a batch (resampled every `batch_period`
/// iterations), logs per-operation impacts, and applies one PPO update.
/// Every `hint_period` iterations the impact hints are refreshed before the
/// rollouts. Every `check_period` iterations the greedy policy is
/// validated; if the aggregate is worse than at the start of the interval,
/// parameters and optimizer state revert to that start.
pub fn train(
    cfg: &TrainConfig,
    train_set: &[Arc<Instance>],
    val_set: &[Arc<Instance>],
    encoder: &dyn TextEncoder,
    hooks: &mut TrainHooks<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let lambda = cfg.lambda();
    let ctx = RolloutContext {
        encoder,
        mode: cfg.mode,
        prompt: cfg.prompt,
    };
    let mut params = PolicyParams::new(cfg.seed);
    let mut opt = Adam::new(cfg.ppo.lr);
    let mut batch_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xba7c_4);
    let threshold = Threshold::Percentile(cfg.hint_quantile);
    let mut stores: BTreeMap<usize, ImpactStore> = BTreeMap::new();

    let mut anchor = (params.clone(), opt.clone());
    let mut anchor_score = if val_set.is_empty() {
        None
    } else {
        Some(validate(&params, val_set, &ctx, lambda)?.aggregate)
    };
    let mut interval_starts = vec![params.clone()];
    let mut log = Vec::with_capacity(cfg.iterations);
    let mut checkpoints = Vec::new();
    let mut rollbacks = 0;
    let mut batch: Vec<usize> = Vec::new();

    for it in 1..=cfg.iterations {
        if batch.is_empty() {
            batch = if cfg.batch_size <= train_set.len() {
                sample(&mut batch_rng, train_set.len(), cfg.batch_size).into_vec()
            } else {
                (0..cfg.batch_size).map(|_| batch_rng.gen_range(0..train_set.len())).collect()
            };
        }
        if it % cfg.hint_period == 0 {
            for s in stores.values_mut() {
                s.refresh_hints();
            }
        }

        let mut trajs = Vec::with_capacity(batch.len());
        for (slot, &idx) in batch.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(rollout_seed(cfg.seed, it, slot));
            let store = stores
                .entry(idx)
                .or_insert_with(|| ImpactStore::new(threshold, threshold, cfg.hint_period));
            let inst = &train_set[idx];
            let mut ep = rollout(&params, inst, &ctx, Some(store), Selection::Sample(&mut rng), true)?;
            for (step, entry) in ep.trajectory.steps.iter().zip(&ep.schedule) {
                store.record_impact(inst.op_offset(entry.job) + entry.op, -step.r_ms, -step.r_ce, it);
            }
            ep.trajectory.instance = idx;
            trajs.push(ep.trajectory);
        }
        let n = trajs.len() as f64;
        let mean_makespan = trajs.iter().map(|t| t.makespan).sum::<f64>() / n;
        let mean_emission = trajs.iter().map(|t| t.emission).sum::<f64>() / n;

        let targets = compute_targets(&trajs, &cfg.reward, lambda);
        let loss = ppo_update(&mut params, &mut opt, &trajs, &targets, &cfg.ppo, cfg.mode)?;

        let mut row = IterationLog {
            iteration: it,
            mean_makespan,
            mean_emission,
            loss,
            validation: None,
            rollback: false,
        };
        if it % cfg.check_period == 0 {
            if let Some(start_score) = anchor_score {
                let mut score = validate(&params, val_set, &ctx, lambda)?.aggregate;
                if let Some(h) = hooks.validation.as_mut() {
                    score = h(it, score);
                }
                row.validation = Some(score);
                if score < start_score {
                    params = anchor.0.clone();
                    opt = anchor.1.clone();
                    row.rollback = true;
                    rollbacks += 1;
                } else {
                    anchor_score = Some(score);
                }
            }
            anchor = (params.clone(), opt.clone());
            interval_starts.push(params.clone());
            if let Some(p) = checkpoint(&cfg.checkpoint_dir, &format!("ckpt_{it:06}.txt"), &params, cfg, it)? {
                checkpoints.push(p);
            }
        }
        if let Some(h) = hooks.progress.as_mut() {
            h(&row);
        }
        log.push(row);
        if it % cfg.batch_period == 0 {
            batch.clear();
        }
    }
    if let Some(p) = checkpoint(&cfg.checkpoint_dir, "final.txt", &params, cfg, cfg.iterations)? {
        checkpoints.push(p);
    }
    Ok(TrainOutcome {
        params,
        log,
        interval_starts,
        rollbacks,
        checkpoints,
    })
}

/// Loads policy parameters and the recorded mode from a checkpoint file.
pub fn load_policy(path: &Path) -> Result<(PolicyParams, Mode)> {
    let ck = crate::neural::load_checkpoint(path)?;
    let mut params = PolicyParams::zeros();
    ck.load_into(&mut params)?;
    let mode = match ck.meta("mode") {
        Some(m) => m.parse()?,
        None => Mode::Luca,
    };
    Ok((params, mode))
}

impl Normalize {
    pub fn name(self) -> &'static str {
        match self {
            Normalize::Returns => "returns",
            Normalize::Rewards => "rewards",
        }
    }
}

impl std::str::FromStr for Normalize {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "returns" => Ok(Normalize::Returns),
            "rewards" => Ok(Normalize::Rewards),
            other => Err(Error::Config(format!("unknown normalization {other:?}"))),
        }
    }
}
