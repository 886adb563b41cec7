// SPDX-License-Identifier: Apache-2.0

// Trains a small classifier on three designs and labels a fourth.

use std::error::Error;
use std::sync::Arc;

use regclass::eval::ConfusionCounts;
use regclass::gnn::{predict, train, Checkpoint, TrainConfig};
use regclass::netlist::CellLibrary;
use regclass::pipeline::{prepare_items, Prepared};
use regclass::synthgen::{builtin_archetypes, generate_corpus, StateEncoding};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let lib = Arc::new(CellLibrary::standard());
    let archetypes: Vec<_> = builtin_archetypes().into_iter().take(4).collect();
    let (_, items) = generate_corpus(&archetypes, 3, &lib)?;
    let corpus: Vec<Prepared> = prepare_items(items, 3)?
        .into_iter()
        .filter(|p| p.entry.as_ref().is_some_and(|e| e.encoding == StateEncoding::OneHot))
        .collect();
    let held = "fsm_like";
    let (test, rest): (Vec<&Prepared>, Vec<&Prepared>) =
        corpus.iter().partition(|p| p.entry.as_ref().is_some_and(|e| e.design == held));

    let cfg = TrainConfig { epochs: 40, hidden: 32, head_hidden: 16, learning_rate: 0.01, ..TrainConfig::default() };
    let train_ex: Vec<_> = rest.iter().map(|p| p.example()).collect();
    let ckpt = train(&train_ex, &[], &cfg)?;
    let losses = &ckpt.history.train_loss;
    println!("loss {:.4} -> {:.4}", losses[0], losses[losses.len() - 1]);

    let bytes = ckpt.to_bytes();
    let ckpt = Checkpoint::load(&mut bytes.as_slice())?;
    let mut counts = ConfusionCounts::default();
    for p in &test {
        let preds = predict(&p.graph, &p.features, &ckpt)?;
        let truth = p.truth().ok_or("labeled")?;
        let classes: Vec<_> = preds.iter().map(|r| r.class).collect();
        counts.merge(&ConfusionCounts::tally(&truth, &classes));
    }
    let m = counts.metrics();
    println!("{held}: {counts:?} balanced accuracy {:?}", m.balanced_accuracy);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
