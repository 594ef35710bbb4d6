use super::Parameters;

/// Bias-corrected adaptive-moment optimizer over a flattened parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn update<P: Parameters>(&mut self, params: &mut P, grads: &P) {
        let g = grads.flatten();
        if self.first.len() != g.len() {
            self.first = vec![0.0; g.len()];
            self.second = vec![0.0; g.len()];
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let mut p = params.flatten();
        for i in 0..p.len() {
            self.first[i] = self.beta1 * self.first[i] + (1.0 - self.beta1) * g[i];
            self.second[i] = self.beta2 * self.second[i] + (1.0 - self.beta2) * g[i] * g[i];
            let m_hat = self.first[i] / bc1;
            let v_hat = self.second[i] / bc2;
            p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        params.assign_flat(&p);
    }
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new(2e-4)
    }
}
