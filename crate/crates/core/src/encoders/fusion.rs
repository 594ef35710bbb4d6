use rand::Rng;

use super::gnn::GNN_DIM;
use super::text::TEXT_DIM;
use crate::neural::{sigmoid, Matrix, Parameters};

/// Text projection and scalar gate.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub proj_weight: Matrix,
    pub proj_bias: Matrix,
    pub gate_weight: Matrix,
    pub gate_bias: Matrix,
}

impl FusionParams {
    pub fn new(rng: &mut impl Rng) -> Self {
        FusionParams {
            proj_weight: Matrix::uniform_fan_in(GNN_DIM, TEXT_DIM, rng),
            proj_bias: Matrix::zeros(GNN_DIM, 1),
            gate_weight: Matrix::uniform_fan_in(1, 2 * GNN_DIM, rng),
            gate_bias: Matrix::zeros(1, 1),
        }
    }

    pub fn zeros() -> Self {
        FusionParams {
            proj_weight: Matrix::zeros(GNN_DIM, TEXT_DIM),
            proj_bias: Matrix::zeros(GNN_DIM, 1),
            gate_weight: Matrix::zeros(1, 2 * GNN_DIM),
            gate_bias: Matrix::zeros(1, 1),
        }
    }
}

impl Parameters for FusionParams {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&str, &'a Matrix)) {
        f("fusion.proj_weight", &self.proj_weight);
        f("fusion.proj_bias", &self.proj_bias);
        f("fusion.gate_weight", &self.gate_weight);
        f("fusion.gate_bias", &self.gate_bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Matrix)) {
        f("fusion.proj_weight", &mut self.proj_weight);
        f("fusion.proj_bias", &mut self.proj_bias);
        f("fusion.gate_weight", &mut self.gate_weight);
        f("fusion.gate_bias", &mut self.gate_bias);
    }
}

/// Result of [`fuse`].
#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub h: Vec<f64>,
    pub gate: f64,
    pub projected: Vec<f64>,
}

/// `h = g * proj(z_text) + (1 - g) * z_graph` with
/// `g = sigmoid(W [proj(z_text) ; z_graph] + b)`.
///
/// `forced_gate` replaces `g` by a constant (used to switch the text path
/// off); no gradient then reaches the gate or projection.
pub fn fuse(z_text: &[f64], z_graph: &[f64], params: &FusionParams, forced_gate: Option<f64>) -> Fused {
    debug_assert_eq!(z_text.len(), TEXT_DIM);
    debug_assert_eq!(z_graph.len(), GNN_DIM);
    let mut projected = params.proj_bias.as_slice().to_vec();
    params.proj_weight.matvec_add(z_text, &mut projected);
    let gate = forced_gate.unwrap_or_else(|| {
        let w = params.gate_weight.as_slice();
        let a = params.gate_bias.as_slice()[0]
            + w[..GNN_DIM].iter().zip(&projected).map(|(a, b)| a * b).sum::<f64>()
            + w[GNN_DIM..].iter().zip(z_graph).map(|(a, b)| a * b).sum::<f64>();
        sigmoid(a)
    });
    let h = projected
        .iter()
        .zip(z_graph)
        .map(|(p, z)| gate * p + (1.0 - gate) * z)
        .collect();
    Fused { h, gate, projected }
}

/// Backward pass of [`fuse`]: accumulates parameter gradients for upstream
/// `d_h` and returns the gradient with respect to `z_graph`.
pub fn fuse_backward(
    z_text: &[f64],
    z_graph: &[f64],
    params: &FusionParams,
    fused: &Fused,
    forced: bool,
    d_h: &[f64],
    grads: &mut FusionParams,
) -> Vec<f64> {
    let g = fused.gate;
    let mut d_z: Vec<f64> = d_h.iter().map(|d| (1.0 - g) * d).collect();
    if forced {
        if g != 0.0 {
            let d_p: Vec<f64> = d_h.iter().map(|d| g * d).collect();
            grads.proj_weight.add_outer(1.0, &d_p, z_text);
            for (b, d) in grads.proj_bias.as_mut_slice().iter_mut().zip(&d_p) {
                *b += d;
            }
        }
        return d_z;
    }
    let d_gate: f64 = d_h
        .iter()
        .zip(fused.projected.iter().zip(z_graph))
        .map(|(d, (p, z))| d * (p - z))
        .sum();
    let d_a = d_gate * g * (1.0 - g);
    let w = params.gate_weight.as_slice();
    let mut d_p: Vec<f64> = d_h.iter().map(|d| g * d).collect();
    for c in 0..GNN_DIM {
        d_p[c] += d_a * w[c];
        d_z[c] += d_a * w[GNN_DIM + c];
    }
    {
        let gw = grads.gate_weight.as_mut_slice();
        for c in 0..GNN_DIM {
            gw[c] += d_a * fused.projected[c];
            gw[GNN_DIM + c] += d_a * z_graph[c];
        }
        grads.gate_bias.as_mut_slice()[0] += d_a;
    }
    grads.proj_weight.add_outer(1.0, &d_p, z_text);
    for (b, d) in grads.proj_bias.as_mut_slice().iter_mut().zip(&d_p) {
        *b += d;
    }
    d_z
}
