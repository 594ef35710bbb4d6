use crate::env::State;
use crate::neural::Matrix;

/// Per-operation feature width.
pub const OP_FEATURES: usize = 10;
/// Per-machine feature width.
pub const MACHINE_FEATURES: usize = 2;
/// Node input width: op block, machine block and a machine-type flag.
pub const NODE_FEATURES: usize = OP_FEATURES + MACHINE_FEATURES + 1;
/// Edge attribute width: `[is_precedence, p / max_p, p*e / (max_p*max_e)]`.
pub const EDGE_FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpStatus {
    Done,
    Ready,
    Blocked,
}

/// Graph view of a scheduling state.
///
/// Nodes `0..n_ops` are operations in (job, op) order, followed by one node
/// per machine. Precedence edges run from each operation to its successor;
/// eligibility edges join an operation and each eligible machine in both
/// directions. All features are normalized by instance-level constants
/// (largest time, largest rate, horizon, longest job) to lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSnapshot {
    pub n_ops: usize,
    pub n_machines: usize,
    pub status: Vec<OpStatus>,
    /// `(n_ops + n_machines) x NODE_FEATURES`.
    pub node_features: Matrix,
    /// Directed `(from, to)` operation pairs.
    pub precedence: Vec<(usize, usize)>,
    /// `(op node, machine index, p / max_p, p*e / (max_p*max_e))`.
    pub eligibility: Vec<(usize, usize, f64, f64)>,
    /// Incoming neighbours of every node.
    pub neighbors: Vec<Vec<usize>>,
    /// Mean incoming edge attributes per node, `n_nodes x EDGE_FEATURES`.
    pub edge_means: Matrix,
}

impl GraphSnapshot {
    pub fn n_nodes(&self) -> usize {
        self.n_ops + self.n_machines
    }

    pub fn op_features(&self, op: usize) -> &[f64] {
        &self.node_features.row(op)[..OP_FEATURES]
    }

    pub fn machine_features(&self, machine: usize) -> &[f64] {
        &self.node_features.row(self.n_ops + machine)[OP_FEATURES..OP_FEATURES + MACHINE_FEATURES]
    }
}

/// Builds the graph snapshot of `state`; a pure function of the state.
pub fn build_graph(state: &State) -> GraphSnapshot {
    let inst = state.instance();
    let n_ops = inst.total_ops();
    let m = inst.n_machines();
    let n_nodes = n_ops + m;
    let max_p = inst.max_time();
    let max_e = inst.max_emission_rate();
    let horizon = inst.horizon();
    let max_k = inst.max_ops_per_job() as f64;

    let mut feats = Matrix::zeros(n_nodes, NODE_FEATURES);
    let mut status = Vec::with_capacity(n_ops);
    let mut scheduled = vec![None; n_ops];
    for e in state.entries() {
        scheduled[inst.op_offset(e.job) + e.op] = Some((e.start, e.end));
    }

    let mut precedence = Vec::new();
    let mut eligibility = Vec::new();
    let mut node = 0;
    for (j, ops) in inst.jobs.iter().enumerate() {
        let next = state.next_op(j).unwrap_or(ops.len());
        let remaining = state.remaining_ops(j) as f64 / max_k;
        let ready = state.job_ready(j) / horizon;
        for (k, op) in ops.iter().enumerate() {
            let st = if k < next {
                OpStatus::Done
            } else if k == next {
                OpStatus::Ready
            } else {
                OpStatus::Blocked
            };
            status.push(st);
            let f = &mut feats;
            f[(node, 0)] = (st == OpStatus::Done) as u8 as f64;
            f[(node, 1)] = (st == OpStatus::Ready) as u8 as f64;
            f[(node, 2)] = (st == OpStatus::Blocked) as u8 as f64;
            f[(node, 3)] = op.min_time() / max_p;
            f[(node, 4)] = op.mean_time() / max_p;
            f[(node, 5)] = inst.min_emission(op) / (max_p * max_e);
            f[(node, 6)] = remaining;
            f[(node, 7)] = ready;
            if let Some((s, e)) = scheduled[node] {
                f[(node, 8)] = s / horizon;
                f[(node, 9)] = e / horizon;
            }
            if k > 0 {
                precedence.push((node - 1, node));
            }
            for &(mach, p) in &op.alternatives {
                eligibility.push((node, mach, p / max_p, p * inst.emission_rate(mach) / (max_p * max_e)));
            }
            node += 1;
        }
    }
    for mach in 0..m {
        let r = n_ops + mach;
        feats[(r, OP_FEATURES)] = state.machine_free_at(mach) / horizon;
        feats[(r, OP_FEATURES + 1)] = inst.emission_rate(mach) / max_e;
        feats[(r, NODE_FEATURES - 1)] = 1.0;
    }

    let mut neighbors = vec![Vec::new(); n_nodes];
    let mut edge_sums = Matrix::zeros(n_nodes, EDGE_FEATURES);
    for &(a, b) in &precedence {
        neighbors[b].push(a);
        edge_sums[(b, 0)] += 1.0;
    }
    for &(op, mach, p, pe) in &eligibility {
        let mn = n_ops + mach;
        neighbors[op].push(mn);
        neighbors[mn].push(op);
        for v in [op, mn] {
            edge_sums[(v, 1)] += p;
            edge_sums[(v, 2)] += pe;
        }
    }
    for (v, nb) in neighbors.iter().enumerate() {
        if !nb.is_empty() {
            let d = nb.len() as f64;
            for c in 0..EDGE_FEATURES {
                edge_sums[(v, c)] /= d;
            }
        }
    }

    GraphSnapshot {
        n_ops,
        n_machines: m,
        status,
        node_features: feats,
        precedence,
        eligibility,
        neighbors,
        edge_means: edge_sums,
    }
}
