use rand::Rng;

use super::{sigmoid, Matrix, Parameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

/// Affine map followed by an element-wise activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Matrix,
    pub activation: Activation,
}

impl Layer {
    pub fn new(inputs: usize, outputs: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        Layer {
            weight: Matrix::uniform_fan_in(outputs, inputs, rng),
            bias: Matrix::zeros(outputs, 1),
            activation,
        }
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Layer {
            weight: Matrix::zeros(outputs, inputs),
            bias: Matrix::zeros(outputs, 1),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.bias.as_slice().to_vec();
        self.weight.matvec_add(x, &mut y);
        for v in &mut y {
            *v = self.activation.apply(*v);
        }
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
}

/// Per-layer activations recorded by [`DenseNet::forward_trace`];
/// `values[0]` is the input and `values[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct DenseTrace {
    pub values: Vec<Vec<f64>>,
}

impl DenseTrace {
    pub fn output(&self) -> &[f64] {
        self.values.last().unwrap()
    }
}

impl DenseNet {
    /// `dims = [in, h1, ..., out]` with one activation per layer.
    pub fn new(dims: &[usize], activations: &[Activation], rng: &mut impl Rng) -> Self {
        assert_eq!(dims.len(), activations.len() + 1, "one activation per layer");
        DenseNet {
            layers: dims
                .windows(2)
                .zip(activations)
                .map(|(w, &a)| Layer::new(w[0], w[1], a, rng))
                .collect(),
        }
    }

    pub fn zeros(dims: &[usize], activations: &[Activation]) -> Self {
        assert_eq!(dims.len(), activations.len() + 1, "one activation per layer");
        DenseNet {
            layers: dims
                .windows(2)
                .zip(activations)
                .map(|(w, &a)| Layer::zeros(w[0], w[1], a))
                .collect(),
        }
    }

    /// Same architecture, every parameter zero. Used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        DenseNet {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs(), l.outputs(), l.activation))
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        for l in &self.layers {
            h = l.forward(&h);
        }
        Ok(h)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<DenseTrace> {
        self.check_input(x)?;
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.to_vec());
        for l in &self.layers {
            let y = l.forward(values.last().unwrap());
            values.push(y);
        }
        Ok(DenseTrace { values })
    }

    /// Accumulates parameter gradients of `upstream . output` into `grads`
    /// and returns the gradient with respect to the input.
    pub fn backward_into(&self, trace: &DenseTrace, upstream: &[f64], grads: &mut DenseNet) -> Result<Vec<f64>> {
        if upstream.len() != self.output_dim() || trace.values.len() != self.layers.len() + 1 {
            return Err(Error::Dimension("backward: trace or upstream shape mismatch".into()));
        }
        let mut delta = upstream.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let y = &trace.values[i + 1];
            for (d, &yi) in delta.iter_mut().zip(y) {
                *d *= layer.activation.derivative_from_output(yi);
            }
            let x = &trace.values[i];
            let g = &mut grads.layers[i];
            g.weight.add_outer(1.0, &delta, x);
            for (b, d) in g.bias.as_mut_slice().iter_mut().zip(&delta) {
                *b += d;
            }
            let mut dx = vec![0.0; layer.inputs()];
            layer.weight.matvec_t_add(&delta, &mut dx);
            delta = dx;
        }
        Ok(delta)
    }

    /// Returns `(parameter gradients, input gradient)` of `upstream . f(x)`.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<(DenseNet, Vec<f64>)> {
        let trace = self.forward_trace(x)?;
        let mut grads = self.zeros_like();
        let dx = self.backward_into(&trace, upstream, &mut grads)?;
        Ok((grads, dx))
    }
}

impl Parameters for DenseNet {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&str, &'a Matrix)) {
        for (i, l) in self.layers.iter().enumerate() {
            f(&format!("layer{i}.weight"), &l.weight);
            f(&format!("layer{i}.bias"), &l.bias);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Matrix)) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            f(&format!("layer{i}.weight"), &mut l.weight);
            f(&format!("layer{i}.bias"), &mut l.bias);
        }
    }
}
