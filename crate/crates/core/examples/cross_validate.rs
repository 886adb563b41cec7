// SPDX-License-Identifier: Apache-2.0

// Leave-one-design-out evaluation on a small corpus.

use std::error::Error;
use std::sync::Arc;

use regclass::gnn::TrainConfig;
use regclass::netlist::CellLibrary;
use regclass::pipeline::{prepare_items, xval_report, XvalConfig};
use regclass::synthgen::{builtin_archetypes, generate_corpus, StateEncoding};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let lib = Arc::new(CellLibrary::standard());
    let archetypes: Vec<_> = builtin_archetypes().into_iter().take(3).collect();
    let (_, items) = generate_corpus(&archetypes, 11, &lib)?;
    let corpus = prepare_items(items, 11)?;
    let cfg = XvalConfig {
        train: TrainConfig { epochs: 15, hidden: 24, head_hidden: 12, learning_rate: 0.01, seed: 11, ..TrainConfig::default() },
        encodings: vec![StateEncoding::OneHot],
        complete: true,
        ..XvalConfig::default()
    };
    let report = xval_report(&corpus, &cfg)?;
    print!("{}", report.table());
    println!("config {}", &report.config_hash[..12]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
