// SPDX-License-Identifier: Apache-2.0

use super::ModelParams;

#[derive(Clone, Debug)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: ModelParams,
    v: ModelParams,
}

impl Adam {
    pub fn new(p: &ModelParams, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self { learning_rate, beta1, beta2, epsilon, step: 0, m: p.zeros_like(), v: p.zeros_like() }
    }

    pub fn step(&mut self, p: &mut ModelParams, grad: &ModelParams) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        let tensors = p.tensors_mut().into_iter().zip(grad.tensors());
        let moments = self.m.tensors_mut().into_iter().zip(self.v.tensors_mut());
        for ((w, g), (m, v)) in tensors.zip(moments) {
            for i in 0..w.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
