// SPDX-License-Identifier: Apache-2.0

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Layer widths of the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: usize,
    pub sage_layers: usize,
    pub head_hidden: usize,
    pub classes: usize,
}

impl ModelDims {
    /// Three 100-wide message-passing layers and a 100 -> 50 -> 2 head.
    pub fn standard(input: usize) -> Self {
        Self { input, hidden: 100, sage_layers: 3, head_hidden: 50, classes: 2 }
    }
}

/// `y = x W + b` with `W` stored as `in x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { weight: Array2::zeros((fan_in, fan_out)), bias: Array1::zeros(fan_out) }
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..limit));
        Self { weight, bias: Array1::zeros(fan_out) }
    }
}

/// Per-node layer normalization with learned scale and shift.
#[derive(Clone, Debug, PartialEq)]
pub struct Norm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SageLayer {
    pub linear: Dense,
    pub norm: Option<Norm>,
}

#[derive(Clone, Debug)]
pub struct ModelParams {
    pub sage: Vec<SageLayer>,
    pub head: Dense,
    pub output: Dense,
    generation: u64,
}

impl PartialEq for ModelParams {
    fn eq(&self, other: &Self) -> bool {
        self.sage == other.sage && self.head == other.head && self.output == other.output
    }
}

impl ModelParams {
    pub fn init(dims: ModelDims, layer_norm: bool, rng: &mut impl Rng) -> Self {
        let sage = (0..dims.sage_layers)
            .map(|k| {
                let fan_in = if k == 0 { dims.input } else { dims.hidden };
                SageLayer {
                    linear: Dense::glorot(fan_in, dims.hidden, rng),
                    norm: layer_norm.then(|| Norm {
                        gamma: Array1::ones(dims.hidden),
                        beta: Array1::zeros(dims.hidden),
                    }),
                }
            })
            .collect();
        let head_in = if dims.sage_layers == 0 { dims.input } else { dims.hidden };
        Self {
            sage,
            head: Dense::glorot(head_in, dims.head_hidden, rng),
            output: Dense::glorot(dims.head_hidden, dims.classes, rng),
            generation: 0,
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            input: self.sage.first().map_or(self.head.weight.nrows(), |l| l.linear.weight.nrows()),
            hidden: self.sage.first().map_or(0, |l| l.linear.weight.ncols()),
            sage_layers: self.sage.len(),
            head_hidden: self.head.weight.ncols(),
            classes: self.output.weight.ncols(),
        }
    }

    pub fn layer_norm(&self) -> bool {
        self.sage.iter().any(|l| l.norm.is_some())
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z.generation = 0;
        z
    }

    /// Changes whenever the parameters may have been modified through
    /// [`ModelParams::tensors_mut`].
    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Tensor names and shapes in storage order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let dense = |out: &mut Vec<(String, Vec<usize>)>, name: &str, d: &Dense| {
            out.push((format!("{name}.weight"), d.weight.shape().to_vec()));
            out.push((format!("{name}.bias"), d.bias.shape().to_vec()));
        };
        for (k, l) in self.sage.iter().enumerate() {
            dense(&mut out, &format!("sage{k}"), &l.linear);
            if let Some(n) = &l.norm {
                out.push((format!("sage{k}.gamma"), n.gamma.shape().to_vec()));
                out.push((format!("sage{k}.beta"), n.beta.shape().to_vec()));
            }
        }
        dense(&mut out, "head", &self.head);
        dense(&mut out, "output", &self.output);
        out
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.sage {
            out.push(l.linear.weight.as_slice().expect("standard layout"));
            out.push(l.linear.bias.as_slice().expect("standard layout"));
            if let Some(n) = &l.norm {
                out.push(n.gamma.as_slice().expect("standard layout"));
                out.push(n.beta.as_slice().expect("standard layout"));
            }
        }
        for d in [&self.head, &self.output] {
            out.push(d.weight.as_slice().expect("standard layout"));
            out.push(d.bias.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.generation += 1;
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.sage {
            out.push(l.linear.weight.as_slice_mut().expect("standard layout"));
            out.push(l.linear.bias.as_slice_mut().expect("standard layout"));
            if let Some(n) = &mut l.norm {
                out.push(n.gamma.as_slice_mut().expect("standard layout"));
                out.push(n.beta.as_slice_mut().expect("standard layout"));
            }
        }
        for d in [&mut self.head, &mut self.output] {
            out.push(d.weight.as_slice_mut().expect("standard layout"));
            out.push(d.bias.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_shapes() {
        let p = ModelParams::init(ModelDims::standard(26), true, &mut ChaCha8Rng::seed_from_u64(0));
        let shapes: Vec<Vec<usize>> = p.layout().into_iter().map(|(_, s)| s).collect();
        assert_eq!(shapes[0], vec![26, 100]);
        assert_eq!(shapes[4], vec![100, 100]);
        assert_eq!(shapes[12], vec![100, 50]);
        assert_eq!(shapes[14], vec![50, 2]);
        assert_eq!(p.dims(), ModelDims::standard(26));
        assert_eq!(p.tensors().len(), p.layout().len());
    }

    #[test]
    fn glorot_bounds() {
        let d = Dense::glorot(26, 100, &mut ChaCha8Rng::seed_from_u64(1));
        let limit = (6.0f64 / 126.0).sqrt();
        assert!(d.weight.iter().all(|w| w.abs() < limit));
        assert!(d.weight.iter().any(|w| w.abs() > 0.9 * limit));
    }

    #[test]
    fn mutable_access_bumps_generation() {
        let mut p = ModelParams::init(ModelDims::standard(4), false, &mut ChaCha8Rng::seed_from_u64(0));
        let g = p.generation();
        p.tensors_mut();
        assert!(p.generation() > g);
    }
}
