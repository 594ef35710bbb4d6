//! Small dense-network substrate: matrices, layers with exact reverse-mode
//! gradients, Adam, masked softmax and a text checkpoint format.
//!
//! All arithmetic is `f64`. Networks here are tiny, so the code favours
//! straightforward loops over any tensor machinery.

mod adam;
mod checkpoint;
mod dense;
mod matrix;
mod softmax;

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use dense::{Activation, DenseNet, DenseTrace, Layer};
pub use matrix::Matrix;
pub use softmax::{log_softmax, softmax};

/// Visits named parameter arrays in a fixed order.
///
/// Gradients are represented by a value of the same type with the same
/// shapes, so `visit` on a parameter set and on its gradient yields arrays in
/// lockstep.
pub trait Parameters {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&str, &'a Matrix));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Matrix));

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, m| n += m.len());
        n
    }

    /// All parameters concatenated in visit order.
    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.visit(&mut |_, m| out.extend_from_slice(m.as_slice()));
        out
    }

    fn assign_flat(&mut self, values: &[f64]) {
        let mut off = 0;
        self.visit_mut(&mut |_, m| {
            let n = m.len();
            m.as_mut_slice().copy_from_slice(&values[off..off + n]);
            off += n;
        });
        assert_eq!(off, values.len(), "flat parameter length mismatch");
    }

    fn fill(&mut self, value: f64) {
        self.visit_mut(&mut |_, m| m.as_mut_slice().fill(value));
    }

    /// `self += alpha * other`, element-wise over matching shapes.
    fn add_scaled(&mut self, alpha: f64, other: &Self)
    where
        Self: Sized,
    {
        let flat = other.flatten();
        let mut off = 0;
        self.visit_mut(&mut |_, m| {
            for x in m.as_mut_slice() {
                *x += alpha * flat[off];
                off += 1;
            }
        });
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |_, m| ok &= m.as_slice().iter().all(|x| x.is_finite()));
        ok
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
