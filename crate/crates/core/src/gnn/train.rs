// SPDX-License-Identifier: Apache-2.0

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::{backward, forward, loss, ClassWeights, Mode};
use super::{Adam, Checkpoint, GnnError, MessageDirection, MessageGraph, ModelDims, ModelParams};
use crate::eval::ConfusionCounts;
use crate::features::{fit_standardizer, FeatureMatrix, FeatureSchema};
use crate::graph::CircuitGraph;
use crate::netlist::RegisterClass;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub dropout: f64,
    pub epochs: usize,
    /// `None` derives weights from the training split's class ratio.
    pub class_weights: Option<ClassWeights>,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub direction: MessageDirection,
    pub layer_norm: bool,
    pub hidden: usize,
    pub sage_layers: usize,
    pub head_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            dropout: 0.25,
            epochs: 300,
            class_weights: None,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            direction: MessageDirection::InNeighbors,
            layer_norm: true,
            hidden: 100,
            sage_layers: 3,
            head_hidden: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GnnError> {
        let bad = |m: String| Err(GnnError::Config(m));
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if let Some(w) = self.class_weights {
            if !(w.state > 0.0 && w.data > 0.0) {
                return bad(format!("class weights must be positive, got {w:?}"));
            }
        }
        if self.hidden == 0 || self.head_hidden == 0 {
            return bad("layer widths must be positive".into());
        }
        Ok(())
    }

    pub fn dims(&self, input: usize) -> ModelDims {
        ModelDims {
            input,
            hidden: self.hidden,
            sage_layers: self.sage_layers,
            head_hidden: self.head_hidden,
            classes: 2,
        }
    }
}

/// One labeled graph with unstandardized features.
#[derive(Clone, Copy)]
pub struct Example<'a> {
    pub graph: &'a CircuitGraph,
    pub features: &'a FeatureMatrix,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_balanced_accuracy: Vec<Option<f64>>,
}

/// Register rows with their labels.
pub fn targets(x: &FeatureMatrix) -> Result<Vec<(usize, RegisterClass)>, GnnError> {
    x.register_rows()
        .into_iter()
        .map(|r| x.labels[r].map(|c| (r, c)).ok_or(GnnError::MissingLabel { row: r }))
        .collect()
}

/// Several graphs concatenated into one disconnected graph.
pub struct Batch {
    pub graph: MessageGraph,
    pub x: Array2<f64>,
    pub targets: Vec<(usize, RegisterClass)>,
}

impl Batch {
    pub fn new(
        examples: &[Example<'_>],
        schema: &FeatureSchema,
        direction: MessageDirection,
    ) -> Result<Self, GnnError> {
        let mut graphs = Vec::with_capacity(examples.len());
        let mut blocks = Vec::with_capacity(examples.len());
        let mut targets_all = Vec::new();
        let mut base = 0;
        for ex in examples {
            if ex.features.rows() != ex.graph.node_count() {
                return Err(GnnError::Rows { expected: ex.graph.node_count(), found: ex.features.rows() });
            }
            let mut x = ex.features.clone();
            schema.standardize(&mut x)?;
            targets_all.extend(targets(&x)?.into_iter().map(|(r, c)| (r + base, c)));
            base += x.rows();
            blocks.push(x.values);
            graphs.push(MessageGraph::build(ex.graph, direction));
        }
        let views: Vec<ArrayView2<f64>> = blocks.iter().map(|b| b.view()).collect();
        let x = if views.is_empty() {
            Array2::zeros((0, schema.len()))
        } else {
            concatenate(Axis(0), &views).expect("equal widths checked by standardize")
        };
        let refs: Vec<&MessageGraph> = graphs.iter().collect();
        Ok(Self { graph: MessageGraph::disjoint_union(&refs), x, targets: targets_all })
    }
}

/// State iff its log-probability is strictly larger; ties go to data.
pub fn decide(log_probs: &Array2<f64>, row: usize) -> RegisterClass {
    if log_probs[(row, 0)] > log_probs[(row, 1)] {
        RegisterClass::State
    } else {
        RegisterClass::Data
    }
}

fn confusion(log_probs: &Array2<f64>, targets: &[(usize, RegisterClass)]) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for &(row, truth) in targets {
        c.add(truth, decide(log_probs, row));
    }
    c
}

fn check_schema(examples: &[Example<'_>], schema: &FeatureSchema) -> Result<(), GnnError> {
    for ex in examples {
        for found in [&ex.features.library_fingerprint, &ex.graph.library().fingerprint()] {
            if *found != schema.library_fingerprint {
                return Err(GnnError::Fingerprint {
                    expected: schema.library_fingerprint.clone(),
                    found: found.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Full-batch training. Standardization statistics are fitted on `train`.
/// The returned checkpoint holds the parameters of the epoch with the best
/// validation balanced accuracy (ties: lower validation loss, then earlier
/// epoch); without validation graphs it holds the final parameters.
pub fn train(
    train: &[Example<'_>],
    val: &[Example<'_>],
    cfg: &TrainConfig,
) -> Result<Checkpoint, GnnError> {
    cfg.validate()?;
    let first = train.first().ok_or(GnnError::EmptyTrainingSet)?;
    let schema = FeatureSchema::for_library(first.graph.library());
    check_schema(train, &schema)?;
    check_schema(val, &schema)?;
    let feats: Vec<&FeatureMatrix> = train.iter().map(|e| e.features).collect();
    let schema = fit_standardizer(&schema, &feats)?;

    let train_batch = Batch::new(train, &schema, cfg.direction)?;
    let val_batch = Batch::new(val, &schema, cfg.direction)?;
    if train_batch.targets.is_empty() {
        return Err(GnnError::NoTargets);
    }
    let weights = match cfg.class_weights {
        Some(w) => w,
        None => {
            let n_state = train_batch.targets.iter().filter(|t| t.1.is_state()).count();
            ClassWeights::from_counts(n_state, train_batch.targets.len() - n_state)?
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(cfg.dims(schema.len()), cfg.layer_norm, &mut rng);
    let mut adam = Adam::new(&params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut history = LossTrace::default();
    let mut best: Option<(f64, f64, usize, ModelParams)> = None;

    for epoch in 0..cfg.epochs {
        let mode = Mode::Train { dropout: cfg.dropout, rng: &mut rng };
        let trace = forward(&params, &train_batch.graph, &train_batch.x, mode)
            .map_err(|e| e.at_epoch(epoch))?;
        let (value, grad) =
            backward(&params, &train_batch.graph, &train_batch.x, &trace, &train_batch.targets, weights)?;
        if !value.is_finite() {
            return Err(GnnError::Divergence { epoch });
        }
        adam.step(&mut params, &grad);
        if !params.all_finite() {
            return Err(GnnError::Divergence { epoch });
        }
        history.train_loss.push(value);

        if val_batch.targets.is_empty() {
            continue;
        }
        let t = forward(&params, &val_batch.graph, &val_batch.x, Mode::Eval)
            .map_err(|e| e.at_epoch(epoch))?;
        let vl = loss(&t.log_probs, &val_batch.targets, weights)?;
        if !vl.is_finite() {
            return Err(GnnError::Divergence { epoch });
        }
        let ba = confusion(&t.log_probs, &val_batch.targets).metrics().balanced_accuracy;
        history.val_loss.push(vl);
        history.val_balanced_accuracy.push(ba);
        let score = ba.unwrap_or(f64::NEG_INFINITY);
        let better = match &best {
            None => true,
            Some((s, l, _, _)) => score > *s || (score == *s && vl < *l),
        };
        if better {
            best = Some((score, vl, epoch, params.clone()));
        }
    }

    let (best_epoch, params) = match best {
        Some((_, _, e, p)) => (e, p),
        None => (cfg.epochs - 1, params),
    };
    Ok(Checkpoint { params, schema, config: cfg.clone(), class_weights: weights, best_epoch, history })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegisterPrediction {
    pub node: usize,
    pub name: String,
    pub class: RegisterClass,
    pub prob_state: f64,
}

/// Standardizes `x` with the checkpoint's statistics and classifies every
/// register node of `g`.
pub fn predict(
    g: &CircuitGraph,
    x: &FeatureMatrix,
    ckpt: &Checkpoint,
) -> Result<Vec<RegisterPrediction>, GnnError> {
    check_schema(&[Example { graph: g, features: x }], &ckpt.schema)?;
    if x.rows() != g.node_count() {
        return Err(GnnError::Rows { expected: g.node_count(), found: x.rows() });
    }
    let mut xs = x.clone();
    ckpt.schema.standardize(&mut xs)?;
    let mg = MessageGraph::build(g, ckpt.config.direction);
    let t = forward(&ckpt.params, &mg, &xs.values, Mode::Eval)?;
    Ok(g.registers()
        .map(|v| RegisterPrediction {
            node: v,
            name: g.node(v).name.clone(),
            class: decide(&t.log_probs, v),
            prob_state: t.log_probs[(v, 0)].exp(),
        })
        .collect())
}
