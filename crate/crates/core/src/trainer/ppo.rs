use super::policy::{backward, evaluate, Mode, Observation, PolicyParams};
use super::rewards::{advantages, combine_rewards, discounted_returns, zscore};
use crate::error::{Error, Result};
use crate::neural::{Adam, Parameters};

/// One recorded decision.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub obs: Observation,
    pub chosen: usize,
    pub log_prob: f64,
    pub value: f64,
    pub gate: f64,
    pub r_ms: f64,
    pub r_ce: f64,
}

/// A complete episode on one instance.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    /// Index of the instance within its dataset.
    pub instance: usize,
    pub steps: Vec<StepRecord>,
    pub makespan: f64,
    pub emission: f64,
}

/// Whether z-scoring applies to returns or to immediate rewards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalize {
    #[default]
    Returns,
    Rewards,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub zscore_eps: f64,
    pub normalize: Normalize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            lambda: 0.5,
            gamma: 1.0,
            zscore_eps: 1e-8,
            normalize: Normalize::Returns,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if !(self.zscore_eps > 0.0) {
            return Err(Error::Config("zscore_eps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoHyper {
    pub clip_ratio: f64,
    pub coef_policy: f64,
    pub coef_value: f64,
    pub coef_entropy: f64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for PpoHyper {
    fn default() -> Self {
        PpoHyper {
            clip_ratio: 0.2,
            coef_policy: 1.0,
            coef_value: 0.5,
            coef_entropy: 0.01,
            epochs: 4,
            lr: 2e-4,
        }
    }
}

impl PpoHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return Err(Error::Config(format!("clip_ratio must lie in (0, 1), got {}", self.clip_ratio)));
        }
        if self.coef_policy < 0.0 || self.coef_value < 0.0 || self.coef_entropy < 0.0 {
            return Err(Error::Config("loss coefficients must be non-negative".into()));
        }
        if self.epochs == 0 || !(self.lr > 0.0) {
            return Err(Error::Config("epochs and lr must be positive".into()));
        }
        Ok(())
    }
}

/// Combined, normalized return and advantage of every step, in trajectory
/// then step order.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

/// Per-objective returns pooled over the batch, z-scored, then combined.
/// `lambda` here is the effective weight (mode already applied).
pub fn compute_targets(trajs: &[Trajectory], cfg: &RewardConfig, lambda: f64) -> Targets {
    let (ms, ce) = match cfg.normalize {
        Normalize::Returns => {
            let mut ms = Vec::new();
            let mut ce = Vec::new();
            for t in trajs {
                let r_ms: Vec<f64> = t.steps.iter().map(|s| s.r_ms).collect();
                let r_ce: Vec<f64> = t.steps.iter().map(|s| s.r_ce).collect();
                ms.extend(discounted_returns(&r_ms, cfg.gamma));
                ce.extend(discounted_returns(&r_ce, cfg.gamma));
            }
            (zscore(&ms, cfg.zscore_eps), zscore(&ce, cfg.zscore_eps))
        }
        Normalize::Rewards => {
            let all_ms: Vec<f64> = trajs.iter().flat_map(|t| t.steps.iter().map(|s| s.r_ms)).collect();
            let all_ce: Vec<f64> = trajs.iter().flat_map(|t| t.steps.iter().map(|s| s.r_ce)).collect();
            let (zm, zc) = (zscore(&all_ms, cfg.zscore_eps), zscore(&all_ce, cfg.zscore_eps));
            let mut ms = Vec::new();
            let mut ce = Vec::new();
            let mut off = 0;
            for t in trajs {
                let n = t.steps.len();
                ms.extend(discounted_returns(&zm[off..off + n], cfg.gamma));
                ce.extend(discounted_returns(&zc[off..off + n], cfg.gamma));
                off += n;
            }
            (ms, ce)
        }
    };
    let returns = combine_rewards(&ms, &ce, lambda);
    let values: Vec<f64> = trajs.iter().flat_map(|t| t.steps.iter().map(|s| s.value)).collect();
    let adv = advantages(&returns, &values);
    Targets {
        returns,
        advantages: adv,
    }
}

/// `min(r A, clip(r, 1 - eps, 1 + eps) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Mean loss components over all steps of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    /// `-mean(clipped surrogate)`.
    pub policy: f64,
    /// `mean((V - R)^2)`.
    pub value: f64,
    /// Mean policy entropy.
    pub entropy: f64,
    /// `c_p * policy + c_v * value - c_e * entropy`.
    pub total: f64,
    pub gate_mean: f64,
}

/// Evaluates the loss at `params` and, when `grads` is given, accumulates
/// its exact gradient.
pub fn ppo_loss(
    params: &PolicyParams,
    trajs: &[Trajectory],
    targets: &Targets,
    hyper: &PpoHyper,
    mode: Mode,
    mut grads: Option<&mut PolicyParams>,
) -> Result<LossReport> {
    let n: usize = trajs.iter().map(|t| t.steps.len()).sum();
    if n == 0 {
        return Err(Error::Config("no steps to learn from".into()));
    }
    let inv = 1.0 / n as f64;
    let mut rep = LossReport::default();
    let mut i = 0;
    for t in trajs {
        for step in &t.steps {
            let ev = evaluate(params, &step.obs, mode)?;
            let adv = targets.advantages[i];
            let ret = targets.returns[i];
            i += 1;
            let lp = ev.log_prob(step.chosen);
            let ratio = (lp - step.log_prob).exp();
            let surrogate = clipped_surrogate(ratio, adv, hyper.clip_ratio);
            let entropy = ev.entropy();
            let v_err = ev.value - ret;
            rep.policy -= surrogate * inv;
            rep.value += v_err * v_err * inv;
            rep.entropy += entropy * inv;
            rep.gate_mean += ev.gate() * inv;

            if let Some(g) = grads.as_deref_mut() {
                let clipped = (adv >= 0.0 && ratio > 1.0 + hyper.clip_ratio)
                    || (adv < 0.0 && ratio < 1.0 - hyper.clip_ratio);
                let d_ratio = if clipped { 0.0 } else { -hyper.coef_policy * adv * inv };
                let d_lp = d_ratio * ratio;
                let lse_entropy = entropy;
                let d_logits: Vec<f64> = ev
                    .probs
                    .iter()
                    .enumerate()
                    .map(|(j, &p)| {
                        let onehot = if j == step.chosen { 1.0 } else { 0.0 };
                        let pol = d_lp * (onehot - p);
                        let ent = if p > 0.0 {
                            hyper.coef_entropy * inv * p * (p.ln() + lse_entropy)
                        } else {
                            0.0
                        };
                        pol + ent
                    })
                    .collect();
                let d_value = hyper.coef_value * 2.0 * v_err * inv;
                backward(params, &step.obs, &ev, mode, &d_logits, d_value, g)?;
            }
        }
    }
    rep.total = hyper.coef_policy * rep.policy + hyper.coef_value * rep.value - hyper.coef_entropy * rep.entropy;
    if !rep.total.is_finite() {
        return Err(Error::NonFinite(format!("loss {:?}", rep)));
    }
    Ok(rep)
}

/// Runs `hyper.epochs` full-batch Adam steps. On a non-finite loss or
/// gradient, `params` and `opt` are left untouched.
///
/// Returns the loss measured before the first step.
pub fn ppo_update(
    params: &mut PolicyParams,
    opt: &mut Adam,
    trajs: &[Trajectory],
    targets: &Targets,
    hyper: &PpoHyper,
    mode: Mode,
) -> Result<LossReport> {
    let mut work = params.clone();
    let mut work_opt = opt.clone();
    let mut first = None;
    for _ in 0..hyper.epochs {
        let mut grads = PolicyParams::zeros();
        let rep = ppo_loss(&work, trajs, targets, hyper, mode, Some(&mut grads))?;
        if !grads.all_finite() {
            return Err(Error::NonFinite("policy gradient".into()));
        }
        first.get_or_insert(rep);
        work_opt.update(&mut work, &grads);
    }
    if !work.all_finite() {
        return Err(Error::NonFinite("updated parameters".into()));
    }
    *params = work;
    *opt = work_opt;
    Ok(first.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_definition() {
        assert!((clipped_surrogate(1.5, 2.0, 0.2) - 1.2 * 2.0).abs() < 1e-15);
        assert_eq!(clipped_surrogate(1.1, 2.0, 0.2), 1.1 * 2.0);
        assert!((clipped_surrogate(0.5, -1.0, 0.2) - (-0.8)).abs() < 1e-15);
        assert_eq!(clipped_surrogate(1.5, -1.0, 0.2), -1.5);
    }

    #[test]
    fn defaults_validate() {
        PpoHyper::default().validate().unwrap();
        RewardConfig::default().validate().unwrap();
        assert!(PpoHyper { clip_ratio: 1.0, ..Default::default() }.validate().is_err());
        assert!(RewardConfig { lambda: 1.5, ..Default::default() }.validate().is_err());
    }
}
