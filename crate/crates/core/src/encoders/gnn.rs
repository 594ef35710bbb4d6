use rand::Rng;

use super::graph::{GraphSnapshot, EDGE_FEATURES, NODE_FEATURES};
use crate::error::{Error, Result};
use crate::neural::{Matrix, Parameters};

/// Latent width of node embeddings and of the pooled graph embedding.
pub const GNN_DIM: usize = 8;

/// One round of mean-aggregation message passing:
/// `h'_v = tanh(W_self h_v + W_nbr mean(h_u) + W_edge mean(edge_uv) + b)`,
/// weights shared across edge types.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageLayer {
    pub w_self: Matrix,
    pub w_nbr: Matrix,
    pub w_edge: Matrix,
    pub bias: Matrix,
}

impl MessageLayer {
    fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        MessageLayer {
            w_self: Matrix::uniform_fan_in(outputs, inputs, rng),
            w_nbr: Matrix::uniform_fan_in(outputs, inputs, rng),
            w_edge: Matrix::uniform_fan_in(outputs, EDGE_FEATURES, rng),
            bias: Matrix::zeros(outputs, 1),
        }
    }

    fn zeros(inputs: usize, outputs: usize) -> Self {
        MessageLayer {
            w_self: Matrix::zeros(outputs, inputs),
            w_nbr: Matrix::zeros(outputs, inputs),
            w_edge: Matrix::zeros(outputs, EDGE_FEATURES),
            bias: Matrix::zeros(outputs, 1),
        }
    }

    fn inputs(&self) -> usize {
        self.w_self.cols()
    }
}

/// Two message-passing layers, `NODE_FEATURES -> 8 -> 8`.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnParams {
    pub layers: [MessageLayer; 2],
}

impl GnnParams {
    pub fn new(rng: &mut impl Rng) -> Self {
        GnnParams {
            layers: [
                MessageLayer::new(NODE_FEATURES, GNN_DIM, rng),
                MessageLayer::new(GNN_DIM, GNN_DIM, rng),
            ],
        }
    }

    pub fn zeros() -> Self {
        GnnParams {
            layers: [
                MessageLayer::zeros(NODE_FEATURES, GNN_DIM),
                MessageLayer::zeros(GNN_DIM, GNN_DIM),
            ],
        }
    }
}

impl Parameters for GnnParams {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&str, &'a Matrix)) {
        for (i, l) in self.layers.iter().enumerate() {
            f(&format!("mp{i}.w_self"), &l.w_self);
            f(&format!("mp{i}.w_nbr"), &l.w_nbr);
            f(&format!("mp{i}.w_edge"), &l.w_edge);
            f(&format!("mp{i}.bias"), &l.bias);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Matrix)) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            f(&format!("mp{i}.w_self"), &mut l.w_self);
            f(&format!("mp{i}.w_nbr"), &mut l.w_nbr);
            f(&format!("mp{i}.w_edge"), &mut l.w_edge);
            f(&format!("mp{i}.bias"), &mut l.bias);
        }
    }
}

/// Activations of every layer, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GnnTrace {
    /// `hidden[0]` is the input; `hidden[l + 1]` the output of layer `l`.
    hidden: Vec<Matrix>,
    /// Neighbour means fed into layer `l`.
    aggregates: Vec<Matrix>,
    pub z: Vec<f64>,
}

impl GnnTrace {
    /// Final embedding of operation node `op`.
    pub fn node_embedding(&self, op: usize) -> &[f64] {
        self.hidden.last().unwrap().row(op)
    }

    pub fn node_embeddings(&self, n_ops: usize) -> Vec<Vec<f64>> {
        (0..n_ops).map(|i| self.node_embedding(i).to_vec()).collect()
    }
}

fn neighbor_mean(g: &GraphSnapshot, h: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(h.rows(), h.cols());
    for (v, nb) in g.neighbors.iter().enumerate() {
        if nb.is_empty() {
            continue;
        }
        let inv = 1.0 / nb.len() as f64;
        let row = &mut out.as_mut_slice()[v * h.cols()..(v + 1) * h.cols()];
        for &u in nb {
            for (o, x) in row.iter_mut().zip(h.row(u)) {
                *o += x;
            }
        }
        for o in row.iter_mut() {
            *o *= inv;
        }
    }
    out
}

pub fn gnn_forward(g: &GraphSnapshot, params: &GnnParams) -> Result<GnnTrace> {
    if g.node_features.cols() != params.layers[0].inputs() {
        return Err(Error::Dimension(format!(
            "graph has {} node features, network expects {}",
            g.node_features.cols(),
            params.layers[0].inputs()
        )));
    }
    if g.n_ops == 0 {
        return Err(Error::Dimension("graph has no operation nodes".into()));
    }
    let n = g.n_nodes();
    let mut hidden = vec![g.node_features.clone()];
    let mut aggregates = Vec::with_capacity(2);
    for layer in &params.layers {
        let h = hidden.last().unwrap();
        let agg = neighbor_mean(g, h);
        let mut out = Matrix::zeros(n, GNN_DIM);
        for v in 0..n {
            let mut pre = layer.bias.as_slice().to_vec();
            layer.w_self.matvec_add(h.row(v), &mut pre);
            layer.w_nbr.matvec_add(agg.row(v), &mut pre);
            layer.w_edge.matvec_add(g.edge_means.row(v), &mut pre);
            for (c, p) in pre.iter().enumerate() {
                out[(v, c)] = p.tanh();
            }
        }
        aggregates.push(agg);
        hidden.push(out);
    }
    let last = hidden.last().unwrap();
    let mut z = vec![0.0; GNN_DIM];
    for v in 0..g.n_ops {
        for (zc, x) in z.iter_mut().zip(last.row(v)) {
            *zc += x;
        }
    }
    for zc in &mut z {
        *zc /= g.n_ops as f64;
    }
    Ok(GnnTrace {
        hidden,
        aggregates,
        z,
    })
}

/// Node embeddings of every operation and the mean-pooled graph embedding.
pub fn gnn_embed(g: &GraphSnapshot, params: &GnnParams) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let t = gnn_forward(g, params)?;
    Ok((t.node_embeddings(g.n_ops), t.z))
}

/// Accumulates into `grads` the parameter gradient of
/// `d_z . z + sum_op d_nodes[op] . node_embedding(op)`.
pub fn gnn_backward(
    g: &GraphSnapshot,
    params: &GnnParams,
    trace: &GnnTrace,
    d_z: &[f64],
    d_nodes: &[(usize, Vec<f64>)],
    grads: &mut GnnParams,
) {
    let n = g.n_nodes();
    let mut d_h = Matrix::zeros(n, GNN_DIM);
    let pool = 1.0 / g.n_ops as f64;
    for v in 0..g.n_ops {
        for c in 0..GNN_DIM {
            d_h[(v, c)] = d_z[c] * pool;
        }
    }
    for (op, d) in d_nodes {
        for c in 0..GNN_DIM {
            d_h[(*op, c)] += d[c];
        }
    }

    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let gl = &mut grads.layers[l];
        let out = &trace.hidden[l + 1];
        let inp = &trace.hidden[l];
        let agg = &trace.aggregates[l];
        let need_input = l > 0;
        let mut d_in = Matrix::zeros(n, inp.cols());
        let mut d_agg = vec![0.0; inp.cols()];
        for v in 0..n {
            let d_pre: Vec<f64> = (0..GNN_DIM)
                .map(|c| {
                    let y = out[(v, c)];
                    d_h[(v, c)] * (1.0 - y * y)
                })
                .collect();
            if d_pre.iter().all(|&x| x == 0.0) {
                continue;
            }
            gl.w_self.add_outer(1.0, &d_pre, inp.row(v));
            gl.w_nbr.add_outer(1.0, &d_pre, agg.row(v));
            gl.w_edge.add_outer(1.0, &d_pre, g.edge_means.row(v));
            for (b, d) in gl.bias.as_mut_slice().iter_mut().zip(&d_pre) {
                *b += d;
            }
            if need_input {
                let cols = inp.cols();
                layer
                    .w_self
                    .matvec_t_add(&d_pre, &mut d_in.as_mut_slice()[v * cols..(v + 1) * cols]);
                let nb = &g.neighbors[v];
                if !nb.is_empty() {
                    d_agg.iter_mut().for_each(|x| *x = 0.0);
                    layer.w_nbr.matvec_t_add(&d_pre, &mut d_agg);
                    let inv = 1.0 / nb.len() as f64;
                    for &u in nb {
                        for (c, da) in d_agg.iter().enumerate() {
                            d_in[(u, c)] += da * inv;
                        }
                    }
                }
            }
        }
        d_h = d_in;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::graph::build_graph;
    use crate::env::State;
    use crate::instances::{generate_instance, GenConfig, Instance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn rollout_states(inst: Arc<Instance>, seed: u64) -> Vec<State> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = State::reset(inst);
        let mut out = vec![s.clone()];
        while !s.is_done() {
            let acts = s.legal_actions();
            s.apply(&acts[rng.gen_range(0..acts.len())]).unwrap();
            out.push(s.clone());
        }
        out
    }

    #[test]
    fn zero_weights_give_constant_embedding() {
        let mut p = GnnParams::zeros();
        p.layers[1].bias.as_mut_slice().copy_from_slice(&[0.3, -0.2, 0.0, 0.1, 0.5, -0.5, 1.0, 2.0]);
        let expect: Vec<f64> = p.layers[1].bias.as_slice().iter().map(|b| b.tanh()).collect();
        for seed in 0..5 {
            let inst = Arc::new(generate_instance(seed, &GenConfig::sized(4, 3)).unwrap());
            for s in rollout_states(inst, seed) {
                let (_, z) = gnn_embed(&build_graph(&s), &p).unwrap();
                for (a, b) in z.iter().zip(&expect) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn job_permutation_invariance() {
        let inst = generate_instance(5, &GenConfig::sized(5, 3)).unwrap();
        let mut jobs: Vec<Vec<Vec<(usize, f64)>>> = inst
            .jobs
            .iter()
            .map(|ops| ops.iter().map(|o| o.alternatives.clone()).collect())
            .collect();
        let original = Arc::new(Instance::new("a", jobs.clone(), inst.emission_rates()).unwrap());
        jobs.reverse();
        jobs.swap(0, 2);
        let permuted = Arc::new(Instance::new("b", jobs, inst.emission_rates()).unwrap());
        let params = GnnParams::new(&mut ChaCha8Rng::seed_from_u64(11));
        let (_, a) = gnn_embed(&build_graph(&State::reset(original)), &params).unwrap();
        let (_, b) = gnn_embed(&build_graph(&State::reset(permuted)), &params).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn finite_along_rollouts() {
        let params = GnnParams::new(&mut ChaCha8Rng::seed_from_u64(1));
        for seed in 0..30 {
            let inst = Arc::new(generate_instance(seed, &GenConfig::default()).unwrap());
            for s in rollout_states(inst, seed) {
                let (nodes, z) = gnn_embed(&build_graph(&s), &params).unwrap();
                assert!(z.iter().chain(nodes.iter().flatten()).all(|x| x.is_finite()));
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let inst = Arc::new(generate_instance(2, &GenConfig::sized(3, 3)).unwrap());
        let states = rollout_states(inst, 2);
        let g = build_graph(&states[3]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = GnnParams::new(&mut rng);
        let d_z: Vec<f64> = (0..GNN_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d_nodes: Vec<(usize, Vec<f64>)> = [0usize, 2, 4]
            .iter()
            .map(|&op| (op, (0..GNN_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let objective = |p: &GnnParams| {
            let t = gnn_forward(&g, p).unwrap();
            let mut v: f64 = t.z.iter().zip(&d_z).map(|(a, b)| a * b).sum();
            for (op, d) in &d_nodes {
                v += t.node_embedding(*op).iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
            }
            v
        };
        let trace = gnn_forward(&g, &params).unwrap();
        let mut grads = GnnParams::zeros();
        gnn_backward(&g, &params, &trace, &d_z, &d_nodes, &mut grads);
        let analytic = grads.flatten();
        let base = params.flatten();
        let h = 1e-6;
        for i in 0..base.len() {
            let mut p = params.clone();
            let mut v = base.clone();
            v[i] += h;
            p.assign_flat(&v);
            let fp = objective(&p);
            v[i] -= 2.0 * h;
            p.assign_flat(&v);
            let fm = objective(&p);
            let numeric = (fp - fm) / (2.0 * h);
            let err = (numeric - analytic[i]).abs();
            assert!(err <= 1e-5 * numeric.abs().max(analytic[i].abs()) + 1e-9, "param {i}: {numeric} vs {}", analytic[i]);
        }
    }

    use rand::Rng;
}
