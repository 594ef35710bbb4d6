use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoders::{
    build_graph, fuse, fuse_backward, gnn_backward, gnn_forward, FusionParams, Fused, GnnParams, GnnTrace,
    GraphSnapshot, GNN_DIM, TEXT_DIM,
};
use crate::env::{Action, State};
use crate::error::{Error, Result};
use crate::neural::{softmax, Activation, DenseNet, DenseTrace, Matrix, Parameters};

/// Per-action machine features: `p / max_p`, `e / max_e`,
/// `p*e / (max_p*max_e)`, `machine free-at / horizon`.
pub const ACTION_FEATURES: usize = 4;
/// Actor input: fused state, operation node embedding, machine features.
pub const ACTOR_INPUT: usize = 2 * GNN_DIM + ACTION_FEATURES;
pub const HIDDEN: usize = 128;
pub const HEAD: usize = 64;

/// Policy variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Text and graph embeddings fused by the learned gate.
    #[default]
    Luca,
    /// Gate pinned to 0: graph embedding only, both objectives rewarded.
    DrlC,
    /// Full fusion with the makespan objective only.
    LucaM,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Luca, Mode::DrlC, Mode::LucaM];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Luca => "luca",
            Mode::DrlC => "drl_c",
            Mode::LucaM => "luca_m",
        }
    }

    pub fn forced_gate(self) -> Option<f64> {
        match self {
            Mode::DrlC => Some(0.0),
            _ => None,
        }
    }

    pub fn uses_text(self) -> bool {
        self.forced_gate() != Some(0.0)
    }

    /// Objective weight actually used for `lambda` under this mode.
    pub fn effective_lambda(self, lambda: f64) -> f64 {
        match self {
            Mode::LucaM => 0.0,
            _ => lambda,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?} (expected luca, drl_c or luca_m)")))
    }
}

/// Every learned parameter: graph encoder, fusion, actor and critic.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub gnn: GnnParams,
    pub fusion: FusionParams,
    /// `ACTOR_INPUT -> 128 -> 64 -> 1`, scoring one action.
    pub actor: DenseNet,
    /// `8 -> 128 -> 64 -> 1`, state value.
    pub critic: DenseNet,
}

const ACTS: [Activation; 3] = [Activation::Tanh, Activation::Tanh, Activation::Identity];

impl PolicyParams {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PolicyParams {
            gnn: GnnParams::new(&mut rng),
            fusion: FusionParams::new(&mut rng),
            actor: DenseNet::new(&[ACTOR_INPUT, HIDDEN, HEAD, 1], &ACTS, &mut rng),
            critic: DenseNet::new(&[GNN_DIM, HIDDEN, HEAD, 1], &ACTS, &mut rng),
        }
    }

    pub fn zeros() -> Self {
        PolicyParams {
            gnn: GnnParams::zeros(),
            fusion: FusionParams::zeros(),
            actor: DenseNet::zeros(&[ACTOR_INPUT, HIDDEN, HEAD, 1], &ACTS),
            critic: DenseNet::zeros(&[GNN_DIM, HIDDEN, HEAD, 1], &ACTS),
        }
    }
}

impl Parameters for PolicyParams {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&str, &'a Matrix)) {
        self.gnn.visit(f);
        self.fusion.visit(f);
        self.actor.visit(&mut |n, m| f(&format!("actor.{n}"), m));
        self.critic.visit(&mut |n, m| f(&format!("critic.{n}"), m));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Matrix)) {
        self.gnn.visit_mut(f);
        self.fusion.visit_mut(f);
        self.actor.visit_mut(&mut |n, m| f(&format!("actor.{n}"), m));
        self.critic.visit_mut(&mut |n, m| f(&format!("critic.{n}"), m));
    }
}

/// Everything the policy sees at one decision step.
#[derive(Debug, Clone)]
pub struct Observation {
    pub graph: GraphSnapshot,
    pub z_text: Vec<f64>,
    /// Legal actions, job-major then machine.
    pub actions: Vec<Action>,
    /// Flat operation id of each action.
    pub action_ops: Vec<usize>,
    pub action_features: Vec<[f64; ACTION_FEATURES]>,
}

/// Builds the observation of `state` with a precomputed text embedding.
pub fn observe(state: &State, z_text: Vec<f64>) -> Result<Observation> {
    if state.is_done() {
        return Err(Error::Terminal);
    }
    if z_text.len() != TEXT_DIM {
        return Err(Error::Dimension(format!("text embedding has {} entries, expected {TEXT_DIM}", z_text.len())));
    }
    let inst = state.instance();
    let max_p = inst.max_time();
    let max_e = inst.max_emission_rate();
    let horizon = inst.horizon();
    let actions = state.legal_actions();
    let action_ops = actions.iter().map(|a| inst.op_offset(a.job) + a.op).collect();
    let action_features = actions
        .iter()
        .map(|a| {
            let p = inst.op(a.job, a.op).time_on(a.machine).unwrap();
            let e = inst.emission_rate(a.machine);
            [p / max_p, e / max_e, p * e / (max_p * max_e), state.machine_free_at(a.machine) / horizon]
        })
        .collect();
    Ok(Observation {
        graph: build_graph(state),
        z_text,
        actions,
        action_ops,
        action_features,
    })
}

/// Forward pass of one decision step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepEval {
    gnn: GnnTrace,
    pub fused: Fused,
    critic: DenseTrace,
    /// Hidden activations of every action, `n x HIDDEN` and `n x HEAD`.
    hidden1: Vec<f64>,
    hidden2: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub value: f64,
}

impl StepEval {
    pub fn gate(&self) -> f64 {
        self.fused.gate
    }

    pub fn h(&self) -> &[f64] {
        &self.fused.h
    }

    pub fn log_prob(&self, a: usize) -> f64 {
        self.logits[a] - log_sum_exp(&self.logits)
    }

    pub fn entropy(&self) -> f64 {
        let lse = log_sum_exp(&self.logits);
        -self
            .probs
            .iter()
            .zip(&self.logits)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, l)| p * (l - lse))
            .sum::<f64>()
    }

    /// Index of the most probable action; ties go to the earliest.
    pub fn greedy(&self) -> usize {
        let mut best = 0;
        for (i, l) in self.logits.iter().enumerate() {
            if *l > self.logits[best] {
                best = i;
            }
        }
        best
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Scores each candidate: `actor([h ; node_embedding(op) ; machine features])`.
///
/// `node_embeddings[i]` is the embedding of flat op `i`.
pub fn score_actions(
    h: &[f64],
    action_ops: &[usize],
    action_features: &[[f64; ACTION_FEATURES]],
    node_embeddings: &[Vec<f64>],
    actor: &DenseNet,
) -> Result<Vec<f64>> {
    if action_ops.is_empty() {
        return Err(Error::IllegalAction("no legal actions to score".into()));
    }
    let mut x = Vec::with_capacity(ACTOR_INPUT);
    action_ops
        .iter()
        .zip(action_features)
        .map(|(&op, mf)| {
            x.clear();
            x.extend_from_slice(h);
            x.extend_from_slice(&node_embeddings[op]);
            x.extend_from_slice(mf);
            Ok(actor.forward(&x)?[0])
        })
        .collect()
}

/// Runs the graph encoder, fusion, critic and actor on one observation.
pub fn evaluate(params: &PolicyParams, obs: &Observation, mode: Mode) -> Result<StepEval> {
    let gnn = gnn_forward(&obs.graph, &params.gnn)?;
    let fused = fuse(&obs.z_text, &gnn.z, &params.fusion, mode.forced_gate());
    let critic = params.critic.forward_trace(&fused.h)?;
    let value = critic.output()[0];

    let [l1, l2, l3] = actor_layers(&params.actor)?;
    let n = obs.actions.len();
    if n == 0 {
        return Err(Error::IllegalAction("no legal actions to score".into()));
    }
    // First layer split by input block; state and node parts are shared.
    let w1 = l1.weight.as_slice();
    let mut base = l1.bias.as_slice().to_vec();
    for (r, b) in base.iter_mut().enumerate() {
        let row = &w1[r * ACTOR_INPUT..r * ACTOR_INPUT + GNN_DIM];
        *b += row.iter().zip(&fused.h).map(|(a, b)| a * b).sum::<f64>();
    }
    let mut node_part: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut hidden1 = vec![0.0; n * HIDDEN];
    let mut hidden2 = vec![0.0; n * HEAD];
    let mut logits = Vec::with_capacity(n);
    let w3 = l3.weight.as_slice();
    let b3 = l3.bias.as_slice()[0];
    for a in 0..n {
        let op = obs.action_ops[a];
        let np = match node_part.iter().position(|(o, _)| *o == op) {
            Some(i) => i,
            None => {
                let e = gnn.node_embedding(op);
                let v = (0..HIDDEN)
                    .map(|r| {
                        let row = &w1[r * ACTOR_INPUT + GNN_DIM..r * ACTOR_INPUT + 2 * GNN_DIM];
                        row.iter().zip(e).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect();
                node_part.push((op, v));
                node_part.len() - 1
            }
        };
        let mf = &obs.action_features[a];
        let h1 = &mut hidden1[a * HIDDEN..(a + 1) * HIDDEN];
        for r in 0..HIDDEN {
            let row = &w1[r * ACTOR_INPUT + 2 * GNN_DIM..(r + 1) * ACTOR_INPUT];
            let pre = base[r] + node_part[np].1[r] + row.iter().zip(mf).map(|(a, b)| a * b).sum::<f64>();
            h1[r] = pre.tanh();
        }
        let h2 = &mut hidden2[a * HEAD..(a + 1) * HEAD];
        h2.copy_from_slice(l2.bias.as_slice());
        l2.weight.matvec_add(h1, h2);
        for v in h2.iter_mut() {
            *v = v.tanh();
        }
        logits.push(b3 + w3.iter().zip(h2.iter()).map(|(a, b)| a * b).sum::<f64>());
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("action logits".into()));
    }
    let probs = softmax(&logits, &vec![true; n])?;
    Ok(StepEval {
        gnn,
        fused,
        critic,
        hidden1,
        hidden2,
        logits,
        probs,
        value,
    })
}

fn actor_layers(actor: &DenseNet) -> Result<[&crate::neural::Layer; 3]> {
    match actor.layers.as_slice() {
        [a, b, c]
            if a.inputs() == ACTOR_INPUT
                && a.outputs() == HIDDEN
                && b.outputs() == HEAD
                && c.outputs() == 1
                && a.activation == Activation::Tanh
                && b.activation == Activation::Tanh
                && c.activation == Activation::Identity =>
        {
            Ok([a, b, c])
        }
        _ => Err(Error::Dimension("actor must be tanh 20-128-64 with a linear scalar head".into())),
    }
}

/// Accumulates into `grads` the gradient of `d_logits . logits + d_value * value`.
pub fn backward(
    params: &PolicyParams,
    obs: &Observation,
    eval: &StepEval,
    mode: Mode,
    d_logits: &[f64],
    d_value: f64,
    grads: &mut PolicyParams,
) -> Result<()> {
    let [l1, l2, l3] = actor_layers(&params.actor)?;
    let mut d_h = vec![0.0; GNN_DIM];
    let mut d_nodes: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut d_pre2 = vec![0.0; HEAD];
    let mut d_a1 = vec![0.0; HIDDEN];
    let mut d_pre1 = vec![0.0; HIDDEN];
    let w1 = l1.weight.as_slice();
    let w3 = l3.weight.as_slice();
    let mut x = [0.0; ACTOR_INPUT];
    x[..GNN_DIM].copy_from_slice(&eval.fused.h);
    for (a, &dl) in d_logits.iter().enumerate() {
        if dl == 0.0 {
            continue;
        }
        let h1 = &eval.hidden1[a * HIDDEN..(a + 1) * HIDDEN];
        let h2 = &eval.hidden2[a * HEAD..(a + 1) * HEAD];
        {
            let g3 = &mut grads.actor.layers[2];
            for (g, v) in g3.weight.as_mut_slice().iter_mut().zip(h2) {
                *g += dl * v;
            }
            g3.bias.as_mut_slice()[0] += dl;
        }
        for c in 0..HEAD {
            d_pre2[c] = dl * w3[c] * (1.0 - h2[c] * h2[c]);
        }
        {
            let g2 = &mut grads.actor.layers[1];
            g2.weight.add_outer(1.0, &d_pre2, h1);
            for (b, d) in g2.bias.as_mut_slice().iter_mut().zip(&d_pre2) {
                *b += d;
            }
        }
        d_a1.fill(0.0);
        l2.weight.matvec_t_add(&d_pre2, &mut d_a1);
        for r in 0..HIDDEN {
            d_pre1[r] = d_a1[r] * (1.0 - h1[r] * h1[r]);
        }
        let op = obs.action_ops[a];
        x[GNN_DIM..2 * GNN_DIM].copy_from_slice(eval.gnn.node_embedding(op));
        x[2 * GNN_DIM..].copy_from_slice(&obs.action_features[a]);
        {
            let g1 = &mut grads.actor.layers[0];
            g1.weight.add_outer(1.0, &d_pre1, &x);
            for (b, d) in g1.bias.as_mut_slice().iter_mut().zip(&d_pre1) {
                *b += d;
            }
        }
        let slot = match d_nodes.iter().position(|(o, _)| *o == op) {
            Some(i) => i,
            None => {
                d_nodes.push((op, vec![0.0; GNN_DIM]));
                d_nodes.len() - 1
            }
        };
        let d_node = &mut d_nodes[slot].1;
        for (r, &d) in d_pre1.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &w1[r * ACTOR_INPUT..r * ACTOR_INPUT + 2 * GNN_DIM];
            for c in 0..GNN_DIM {
                d_h[c] += d * row[c];
                d_node[c] += d * row[GNN_DIM + c];
            }
        }
    }
    if d_value != 0.0 {
        let dx = params.critic.backward_into(&eval.critic, &[d_value], &mut grads.critic)?;
        for (a, b) in d_h.iter_mut().zip(&dx) {
            *a += b;
        }
    }
    let forced = mode.forced_gate().is_some();
    let d_z = fuse_backward(
        &obs.z_text,
        &eval.gnn.z,
        &params.fusion,
        &eval.fused,
        forced,
        &d_h,
        &mut grads.fusion,
    );
    gnn_backward(&obs.graph, &params.gnn, &eval.gnn, &d_z, &d_nodes, &mut grads.gnn);
    Ok(())
}

/// Action distribution over the full `job x machine` grid of `state`, with
/// exact zeros on illegal slots.
pub fn grid_distribution(obs: &Observation, eval: &StepEval, n_jobs: usize, n_machines: usize) -> Result<Vec<f64>> {
    let mut logits = vec![0.0; n_jobs * n_machines];
    let mut mask = vec![false; n_jobs * n_machines];
    for (a, l) in obs.actions.iter().zip(&eval.logits) {
        let i = a.job * n_machines + a.machine;
        logits[i] = *l;
        mask[i] = true;
    }
    softmax(&logits, &mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{EncoderSpec, PromptOptions, build_state_prompt, TextEncoder};
    use crate::instances::{generate_instance, GenConfig};
    use std::sync::Arc;

    fn obs_for(state: &State, enc: &dyn TextEncoder) -> Observation {
        let p = build_state_prompt(state, None, PromptOptions::default());
        observe(state, enc.encode_prompt(&p).unwrap()).unwrap()
    }

    #[test]
    fn fast_scoring_matches_reference() {
        let enc = EncoderSpec::Builtin.build();
        let params = PolicyParams::new(3);
        let inst = Arc::new(generate_instance(2, &GenConfig::sized(5, 3)).unwrap());
        let mut s = State::reset(inst);
        while !s.is_done() {
            let obs = obs_for(&s, enc.as_ref());
            let ev = evaluate(&params, &obs, Mode::Luca).unwrap();
            let nodes = ev.gnn.node_embeddings(obs.graph.n_ops);
            let reference = score_actions(ev.h(), &obs.action_ops, &obs.action_features, &nodes, &params.actor).unwrap();
            for (a, b) in ev.logits.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-12);
            }
            s.apply(&obs.actions[ev.greedy()]).unwrap();
        }
    }

    #[test]
    fn zero_actor_is_uniform() {
        let enc = EncoderSpec::Builtin.build();
        let mut params = PolicyParams::new(1);
        params.actor.fill(0.0);
        let inst = Arc::new(generate_instance(4, &GenConfig::sized(4, 3)).unwrap());
        let s = State::reset(inst);
        let obs = obs_for(&s, enc.as_ref());
        let ev = evaluate(&params, &obs, Mode::Luca).unwrap();
        let k = obs.actions.len() as f64;
        assert!(ev.probs.iter().all(|p| (p - 1.0 / k).abs() < 1e-15));
    }

    #[test]
    fn single_action_is_certain() {
        let inst = Arc::new(crate::instances::Instance::new("one", vec![vec![vec![(0, 3.0)]]], vec![1.0]).unwrap());
        let s = State::reset(inst);
        let obs = observe(&s, vec![0.0; TEXT_DIM]).unwrap();
        let ev = evaluate(&PolicyParams::new(0), &obs, Mode::Luca).unwrap();
        assert_eq!(ev.probs, vec![1.0]);
        assert_eq!(ev.entropy(), 0.0);
    }

    #[test]
    fn drl_c_uses_graph_embedding_only() {
        let enc = EncoderSpec::Builtin.build();
        let params = PolicyParams::new(8);
        let inst = Arc::new(generate_instance(5, &GenConfig::sized(4, 3)).unwrap());
        let mut s = State::reset(inst);
        while !s.is_done() {
            let obs = obs_for(&s, enc.as_ref());
            let ev = evaluate(&params, &obs, Mode::DrlC).unwrap();
            assert_eq!(ev.gate(), 0.0);
            assert_eq!(ev.h(), ev.gnn.z.as_slice());
            s.apply(&obs.actions[0]).unwrap();
        }
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert!("ppo".parse::<Mode>().is_err());
        assert_eq!(Mode::LucaM.effective_lambda(0.7), 0.0);
        assert_eq!(Mode::DrlC.effective_lambda(0.7), 0.7);
    }

    #[test]
    fn step_gradient_matches_finite_differences() {
        let enc = EncoderSpec::Builtin.build();
        for (seed, mode) in [(0u64, Mode::Luca), (1, Mode::DrlC)] {
            let params = PolicyParams::new(seed);
            let inst = Arc::new(generate_instance(seed, &GenConfig::sized(3, 3)).unwrap());
            let mut s = State::reset(inst);
            let a = s.legal_actions()[0];
            s.apply(&a).unwrap();
            let obs = obs_for(&s, enc.as_ref());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d_logits: Vec<f64> = (0..obs.actions.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let d_value = 0.7;
            let f = |p: &PolicyParams| {
                let ev = evaluate(p, &obs, mode).unwrap();
                ev.logits.iter().zip(&d_logits).map(|(a, b)| a * b).sum::<f64>() + d_value * ev.value
            };
            let ev = evaluate(&params, &obs, mode).unwrap();
            let mut grads = PolicyParams::zeros();
            backward(&params, &obs, &ev, mode, &d_logits, d_value, &mut grads).unwrap();
            let analytic = grads.flatten();
            let base = params.flatten();
            let h = 1e-6;
            let mut p = params.clone();
            for i in (0..base.len()).step_by(7) {
                let mut v = base.clone();
                v[i] += h;
                p.assign_flat(&v);
                let fp = f(&p);
                v[i] -= 2.0 * h;
                p.assign_flat(&v);
                let num = (fp - f(&p)) / (2.0 * h);
                assert!(
                    (num - analytic[i]).abs() <= 1e-5 * num.abs().max(analytic[i].abs()) + 1e-8,
                    "{mode} param {i}: {num} vs {}",
                    analytic[i]
                );
            }
        }
    }
}
