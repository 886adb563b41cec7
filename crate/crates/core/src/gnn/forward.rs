// SPDX-License-Identifier: Apache-2.0

//! Forward pass, loss and reverse-mode gradients.
//!
//! Message-passing layer `k`:
//!
//! ```text
//! M = mean over {v} ∪ N(v) of H[u]
//! Z = M W + b
//! A = ReLU(Z)
//! Y = gamma * (A - mean(A)) / sqrt(var(A) + eps) + beta     (per node, optional)
//! H' = Y * dropout mask                                      (train mode only)
//! ```
//!
//! followed by the head `log_softmax(ReLU(H W1 + b1) W2 + b2)`.

use ndarray::{Array1, Array2, Axis};
use rand::RngCore;
use rand_chacha::ChaCha8Rng;

use super::{GnnError, MessageGraph, ModelParams};
use crate::netlist::RegisterClass;

pub const NORM_EPS: f64 = 1e-5;

/// Output column of each class.
pub fn class_index(c: RegisterClass) -> usize {
    match c {
        RegisterClass::State => 0,
        RegisterClass::Data => 1,
    }
}

pub enum Mode<'a> {
    Eval,
    Train { dropout: f64, rng: &'a mut ChaCha8Rng },
}

#[derive(Clone, Debug)]
pub struct LayerTrace {
    aggregated: Array2<f64>,
    pre_activation: Array2<f64>,
    normalized: Option<Array2<f64>>,
    inv_std: Option<Array1<f64>>,
    mask: Option<Array2<f64>>,
    pub output: Array2<f64>,
}

#[derive(Clone, Debug)]
pub struct Trace {
    generation: u64,
    pub layers: Vec<LayerTrace>,
    head_pre: Array2<f64>,
    head_act: Array2<f64>,
    pub logits: Array2<f64>,
    pub log_probs: Array2<f64>,
}

impl Trace {
    pub fn masks(&self) -> Vec<Option<Array2<f64>>> {
        self.layers.iter().map(|l| l.mask.clone()).collect()
    }

    /// Smallest `|z|` over all ReLU inputs. Finite-difference checks are
    /// only meaningful when a perturbation cannot move any `z` across zero.
    pub fn relu_margin(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| &l.pre_activation)
            .chain([&self.head_pre])
            .flat_map(|a| a.iter())
            .fold(f64::INFINITY, |m, z| m.min(z.abs()))
    }

    /// Embeddings after the last message-passing layer.
    pub fn embeddings(&self) -> Option<&Array2<f64>> {
        self.layers.last().map(|l| &l.output)
    }
}

fn check_finite(a: &Array2<f64>, layer: usize) -> Result<(), GnnError> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(GnnError::NonFinite { layer })
    }
}

fn affine(x: &Array2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut z = x.dot(w);
    z += b;
    z
}

/// ReLU, per-row normalization, affine rescale and optional mask in one
/// pass. Returns the output, the normalized activations and `1 / std`.
fn relu_norm(
    z: &Array2<f64>,
    norm: &super::Norm,
    mask: Option<&Array2<f64>>,
) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    let (rows, width) = z.dim();
    let mut y = Array2::zeros((rows, width));
    let mut n = Array2::zeros((rows, width));
    let mut inv = Array1::zeros(rows);
    let gamma = norm.gamma.as_slice().expect("contiguous");
    let beta = norm.beta.as_slice().expect("contiguous");
    let w = width as f64;
    for r in 0..rows {
        let zr = z.row(r);
        let zr = zr.as_slice().expect("row-major");
        let mu = zr.iter().map(|v| v.max(0.0)).sum::<f64>() / w;
        let var = zr.iter().map(|v| (v.max(0.0) - mu) * (v.max(0.0) - mu)).sum::<f64>() / w;
        let s = 1.0 / (var + NORM_EPS).sqrt();
        inv[r] = s;
        let mut nr = n.row_mut(r);
        let nr = nr.as_slice_mut().expect("row-major");
        let mut yr = y.row_mut(r);
        let yr = yr.as_slice_mut().expect("row-major");
        for j in 0..width {
            let nv = (zr[j].max(0.0) - mu) * s;
            nr[j] = nv;
            yr[j] = nv * gamma[j] + beta[j];
        }
        if let Some(m) = mask {
            let mr = m.row(r);
            for (a, b) in yr.iter_mut().zip(mr.as_slice().expect("row-major")) {
                *a *= b;
            }
        }
    }
    (y, n, inv)
}

fn log_softmax(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

fn run(
    p: &ModelParams,
    mg: &MessageGraph,
    x: &Array2<f64>,
    make_mask: impl FnMut(usize, (usize, usize)) -> Option<Array2<f64>>,
) -> Result<Trace, GnnError> {
    run_from(p, mg, x, Vec::new(), make_mask)
}

fn run_from(
    p: &ModelParams,
    mg: &MessageGraph,
    x: &Array2<f64>,
    mut layers: Vec<LayerTrace>,
    mut make_mask: impl FnMut(usize, (usize, usize)) -> Option<Array2<f64>>,
) -> Result<Trace, GnnError> {
    let dims = p.dims();
    if x.ncols() != dims.input {
        return Err(GnnError::Dimension { expected: dims.input, found: x.ncols() });
    }
    if x.nrows() != mg.node_count() {
        return Err(GnnError::Rows { expected: mg.node_count(), found: x.nrows() });
    }
    for (k, layer) in p.sage.iter().enumerate().skip(layers.len()) {
        let h = layers.last().map_or(x, |l| &l.output);
        let aggregated = mg.aggregate(h);
        let pre_activation = affine(&aggregated, &layer.linear.weight, &layer.linear.bias);
        let mask = make_mask(k, pre_activation.dim());
        let (y, normalized, inv_std) = match &layer.norm {
            None => {
                let mut y = pre_activation.mapv(|v| v.max(0.0));
                if let Some(m) = &mask {
                    y *= m;
                }
                (y, None, None)
            }
            Some(norm) => {
                let (y, n, inv) = relu_norm(&pre_activation, norm, mask.as_ref());
                (y, Some(n), Some(inv))
            }
        };
        check_finite(&y, k)?;
        layers.push(LayerTrace { aggregated, pre_activation, normalized, inv_std, mask, output: y });
    }
    let h = layers.last().map_or(x, |l| &l.output);
    let head_pre = affine(h, &p.head.weight, &p.head.bias);
    let head_act = head_pre.mapv(|v| v.max(0.0));
    check_finite(&head_act, p.sage.len())?;
    let logits = affine(&head_act, &p.output.weight, &p.output.bias);
    check_finite(&logits, p.sage.len() + 1)?;
    let log_probs = log_softmax(&logits);
    Ok(Trace { generation: p.generation(), layers, head_pre, head_act, logits, log_probs })
}

/// Runs the model on every node of `mg`. `x` must already be standardized.
pub fn forward(
    p: &ModelParams,
    mg: &MessageGraph,
    x: &Array2<f64>,
    mode: Mode<'_>,
) -> Result<Trace, GnnError> {
    match mode {
        Mode::Eval => run(p, mg, x, |_, _| None),
        Mode::Train { dropout, rng } => {
            if !(0.0..1.0).contains(&dropout) {
                return Err(GnnError::Config(format!("dropout {dropout} outside [0, 1)")));
            }
            if dropout == 0.0 {
                return run(p, mg, x, |_, _| None);
            }
            let keep = 1.0 / (1.0 - dropout);
            // a unit is dropped when a uniform 32-bit draw falls below this
            let cut = (dropout * 4294967296.0) as u64;
            run(p, mg, x, |_, dim| {
                Some(Array2::from_shape_simple_fn(dim, || {
                    if u64::from(rng.next_u32()) < cut {
                        0.0
                    } else {
                        keep
                    }
                }))
            })
        }
    }
}

/// Forward pass reusing the dropout masks of an earlier train-mode trace.
pub fn forward_with_masks(
    p: &ModelParams,
    mg: &MessageGraph,
    x: &Array2<f64>,
    masks: &[Option<Array2<f64>>],
) -> Result<Trace, GnnError> {
    if masks.len() != p.sage.len() {
        return Err(GnnError::Config(format!("{} masks for {} layers", masks.len(), p.sage.len())));
    }
    run(p, mg, x, |k, _| masks[k].clone())
}

/// Recomputes `trace` from message-passing layer `start` onwards with the
/// current parameters, keeping the earlier layers' activations and every
/// dropout mask. Only valid when the parameters of layers before `start`
/// are unchanged since `trace` was recorded; `start` may equal the layer
/// count to rerun just the head.
pub fn forward_from(
    p: &ModelParams,
    mg: &MessageGraph,
    x: &Array2<f64>,
    trace: &Trace,
    start: usize,
) -> Result<Trace, GnnError> {
    if start > p.sage.len() || trace.layers.len() != p.sage.len() {
        return Err(GnnError::Config(format!("cannot resume at layer {start}")));
    }
    let kept = trace.layers[..start].to_vec();
    run_from(p, mg, x, kept, |k, _| trace.layers[k].mask.clone())
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClassWeights {
    pub state: f64,
    pub data: f64,
}

impl ClassWeights {
    pub const EQUAL: Self = Self { state: 1.0, data: 1.0 };

    /// `w_state = N_data / N`, `w_data = N_state / N`.
    pub fn from_counts(n_state: usize, n_data: usize) -> Result<Self, GnnError> {
        if n_state == 0 || n_data == 0 {
            return Err(GnnError::Config(format!(
                "class weights need both classes in training data (state {n_state}, data {n_data})"
            )));
        }
        let n = (n_state + n_data) as f64;
        Ok(Self { state: n_data as f64 / n, data: n_state as f64 / n })
    }

    pub fn of(&self, c: RegisterClass) -> f64 {
        match c {
            RegisterClass::State => self.state,
            RegisterClass::Data => self.data,
        }
    }
}

/// Weighted negative log-likelihood over `targets` (row, class), divided by
/// the sum of the applied weights.
pub fn loss(
    log_probs: &Array2<f64>,
    targets: &[(usize, RegisterClass)],
    w: ClassWeights,
) -> Result<f64, GnnError> {
    if targets.is_empty() {
        return Err(GnnError::NoTargets);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(row, c) in targets {
        let wc = w.of(c);
        num -= wc * log_probs[(row, class_index(c))];
        den += wc;
    }
    Ok(num / den)
}

/// Gradient of [`loss`] with respect to the log-probabilities.
pub fn loss_gradient(
    shape: (usize, usize),
    targets: &[(usize, RegisterClass)],
    w: ClassWeights,
) -> Array2<f64> {
    let den: f64 = targets.iter().map(|&(_, c)| w.of(c)).sum();
    let mut d = Array2::zeros(shape);
    for &(row, c) in targets {
        d[(row, class_index(c))] -= w.of(c) / den;
    }
    d
}

fn dense_backward(
    input: &Array2<f64>,
    d_out: &Array2<f64>,
    weight: &Array2<f64>,
) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
    let dw = input.t().dot(d_out);
    let db = d_out.sum_axis(Axis(0));
    let d_in = d_out.dot(&weight.t());
    (dw, db, d_in)
}

fn relu_backward(d: &mut Array2<f64>, pre: &Array2<f64>) {
    ndarray::Zip::from(d).and(pre).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
}

/// Backward through the normalization and the ReLU in place, accumulating
/// the gamma and beta gradients into `gn`.
fn norm_relu_backward(
    d: &mut Array2<f64>,
    n: &Array2<f64>,
    inv: &Array1<f64>,
    pre: &Array2<f64>,
    norm: &super::Norm,
    gn: &mut super::Norm,
) {
    let width = d.ncols();
    let w = width as f64;
    let gamma = norm.gamma.as_slice().expect("contiguous");
    let mut dg = vec![0.0; width];
    let mut dbeta = vec![0.0; width];
    let mut buf = vec![0.0; width];
    for r in 0..d.nrows() {
        let nr = n.row(r);
        let nr = nr.as_slice().expect("row-major");
        let zr = pre.row(r);
        let zr = zr.as_slice().expect("row-major");
        let mut dr = d.row_mut(r);
        let dr = dr.as_slice_mut().expect("row-major");
        let (mut sum_g, mut sum_gn) = (0.0, 0.0);
        for j in 0..width {
            dg[j] += dr[j] * nr[j];
            dbeta[j] += dr[j];
            buf[j] = dr[j] * gamma[j];
            sum_g += buf[j];
            sum_gn += buf[j] * nr[j];
        }
        let (mean_g, mean_gn, s) = (sum_g / w, sum_gn / w, inv[r]);
        for j in 0..width {
            dr[j] = if zr[j] <= 0.0 { 0.0 } else { s * (buf[j] - mean_g - nr[j] * mean_gn) };
        }
    }
    gn.gamma = Array1::from(dg);
    gn.beta = Array1::from(dbeta);
}

/// Loss and exact parameter gradients for the trace, replaying its dropout
/// masks. Fails if `p` changed since the trace was recorded.
pub fn backward(
    p: &ModelParams,
    mg: &MessageGraph,
    x: &Array2<f64>,
    trace: &Trace,
    targets: &[(usize, RegisterClass)],
    w: ClassWeights,
) -> Result<(f64, ModelParams), GnnError> {
    if trace.generation != p.generation() {
        return Err(GnnError::StaleTrace);
    }
    let value = loss(&trace.log_probs, targets, w)?;
    let mut g = p.zeros_like();

    let d_logp = loss_gradient(trace.log_probs.dim(), targets, w);
    // log-softmax: dz = dlogp - softmax * sum(dlogp)
    let mut d_logits = d_logp.clone();
    for ((mut dz, lp), dl) in d_logits.rows_mut().into_iter().zip(trace.log_probs.rows()).zip(d_logp.rows()) {
        let s = dl.sum();
        if s != 0.0 {
            dz.zip_mut_with(&lp, |a, &l| *a -= l.exp() * s);
        }
    }
    let (dw, db, mut d_act) = dense_backward(&trace.head_act, &d_logits, &p.output.weight);
    g.output.weight = dw;
    g.output.bias = db;
    relu_backward(&mut d_act, &trace.head_pre);
    let h_last = trace.embeddings().unwrap_or(x);
    let (dw, db, mut d_h) = dense_backward(h_last, &d_act, &p.head.weight);
    g.head.weight = dw;
    g.head.bias = db;

    for k in (0..p.sage.len()).rev() {
        let lt = &trace.layers[k];
        let layer = &p.sage[k];
        if let Some(m) = &lt.mask {
            d_h *= m;
        }
        let mut d_a = d_h;
        if let (Some(norm), Some(n), Some(inv)) = (&layer.norm, &lt.normalized, &lt.inv_std) {
            let gn = g.sage[k].norm.as_mut().expect("gradient mirrors params");
            norm_relu_backward(&mut d_a, n, inv, &lt.pre_activation, norm, gn);
        } else {
            relu_backward(&mut d_a, &lt.pre_activation);
        }
        g.sage[k].linear.weight = lt.aggregated.t().dot(&d_a);
        g.sage[k].linear.bias = d_a.sum_axis(Axis(0));
        d_h = if k > 0 {
            mg.aggregate_transpose(&d_a.dot(&layer.linear.weight.t()))
        } else {
            Array2::zeros((0, 0))
        };
    }
    Ok((value, g))
}

#[cfg(test)]
mod tests {
    use super::super::{ModelDims, SageLayer};
    use super::*;
    use crate::gnn::params::Dense;
    use ndarray::array;
    use rand::SeedableRng;

    fn identity_model(width: usize) -> ModelParams {
        let dims = ModelDims { input: width, hidden: width, sage_layers: 1, head_hidden: width, classes: 2 };
        let mut p = ModelParams::init(dims, false, &mut ChaCha8Rng::seed_from_u64(0));
        p.sage[0] = SageLayer {
            linear: Dense { weight: Array2::eye(width), bias: Array1::zeros(width) },
            norm: None,
        };
        p
    }

    #[test]
    fn isolated_node_identity() {
        let p = identity_model(3);
        let mg = MessageGraph::from_neighbors(&[vec![]]);
        let x = array![[0.5, 2.0, 0.0]];
        let t = forward(&p, &mg, &x, Mode::Eval).unwrap();
        assert_eq!(t.layers[0].output, x);
    }

    #[test]
    fn mutual_pair_identity() {
        let p = identity_model(2);
        let mg = MessageGraph::from_neighbors(&[vec![1], vec![0]]);
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let t = forward(&p, &mg, &x, Mode::Eval).unwrap();
        assert_eq!(t.layers[0].output, array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = ModelParams::init(ModelDims::standard(4), true, &mut ChaCha8Rng::seed_from_u64(3));
        let mg = MessageGraph::from_neighbors(&[vec![1], vec![2], vec![0]]);
        let x = array![[1.0, -2.0, 0.5, 3.0], [0.0, 0.1, 0.2, 0.3], [5.0, 5.0, -5.0, 1.0]];
        let t = forward(&p, &mg, &x, Mode::Eval).unwrap();
        for row in t.log_probs.rows() {
            assert!((row.mapv(f64::exp).sum() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn loss_analytic_values() {
        let uniform = Array2::from_elem((2, 2), 0.5f64.ln());
        let t = [(0, RegisterClass::State), (1, RegisterClass::Data)];
        assert!((loss(&uniform, &t, ClassWeights::EQUAL).unwrap() - 2f64.ln()).abs() < 1e-15);
        let perfect = array![[0.0, f64::NEG_INFINITY], [f64::NEG_INFINITY, 0.0]];
        assert_eq!(loss(&perfect, &t, ClassWeights::EQUAL).unwrap(), 0.0);
    }

    #[test]
    fn ratio_rule_weights() {
        let w = ClassWeights::from_counts(10, 990).unwrap();
        assert!((w.state / w.data - 99.0).abs() < 1e-12);
    }

    #[test]
    fn doubled_state_weight_doubles_state_share() {
        let t = [(0, RegisterClass::State), (1, RegisterClass::Data)];
        let a = loss_gradient((2, 2), &t, ClassWeights::EQUAL);
        let b = loss_gradient((2, 2), &t, ClassWeights { state: 2.0, data: 1.0 });
        let ratio_a = a[(0, 0)] / a[(1, 1)];
        let ratio_b = b[(0, 0)] / b[(1, 1)];
        assert!((ratio_b - 2.0 * ratio_a).abs() < 1e-15);
    }

    #[test]
    fn stale_trace_rejected() {
        let mut p = ModelParams::init(ModelDims::standard(2), false, &mut ChaCha8Rng::seed_from_u64(0));
        let mg = MessageGraph::from_neighbors(&[vec![]]);
        let x = array![[1.0, 2.0]];
        let t = forward(&p, &mg, &x, Mode::Eval).unwrap();
        p.tensors_mut()[0][0] += 1.0;
        let err = backward(&p, &mg, &x, &t, &[(0, RegisterClass::State)], ClassWeights::EQUAL);
        assert_eq!(err.unwrap_err(), GnnError::StaleTrace);
    }

    #[test]
    fn zero_dropout_train_equals_eval() {
        let p = ModelParams::init(ModelDims::standard(3), true, &mut ChaCha8Rng::seed_from_u64(5));
        let mg = MessageGraph::from_neighbors(&[vec![1], vec![]]);
        let x = array![[1.0, 0.0, 2.0], [0.5, -1.0, 0.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = forward(&p, &mg, &x, Mode::Train { dropout: 0.0, rng: &mut rng }).unwrap();
        let b = forward(&p, &mg, &x, Mode::Eval).unwrap();
        assert_eq!(a.log_probs, b.log_probs);
    }

    #[test]
    fn true_class_bias_gradient_is_non_positive() {
        let p = ModelParams::init(ModelDims::standard(3), true, &mut ChaCha8Rng::seed_from_u64(2));
        let mg = MessageGraph::from_neighbors(&[vec![1], vec![0]]);
        let x = array![[1.0, 0.0, 2.0], [0.5, -1.0, 0.0]];
        let t = forward(&p, &mg, &x, Mode::Eval).unwrap();
        let (_, g) = backward(&p, &mg, &x, &t, &[(0, RegisterClass::State)], ClassWeights::EQUAL).unwrap();
        assert!(g.output.bias[0] <= 0.0);
        assert!(g.output.bias[1] >= 0.0);
    }
}
