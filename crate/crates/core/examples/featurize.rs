// SPDX-License-Identifier: Apache-2.0

// Node features of a generated design, raw and standardized.

use std::error::Error;
use std::sync::Arc;

use regclass::features::{extract_features, fit_standardizer, FeatureSchema};
use regclass::graph::{BetweennessMode, CircuitGraph};
use regclass::netlist::CellLibrary;
use regclass::synthgen::{builtin_archetypes, generate, StateEncoding};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let lib = Arc::new(CellLibrary::standard());
    let recipe = builtin_archetypes()[3].recipe(1, 1, StateEncoding::OneHot);
    let (n, labels) = generate(&recipe, &lib)?;
    let g = CircuitGraph::build(&n);
    let c = g.centralities(BetweennessMode::Exact);
    let schema = FeatureSchema::for_library(&lib);
    let mut x = extract_features(&g, &c, &schema, Some(&labels))?;
    println!("{}: {} rows x {} columns", n.name(), x.rows(), schema.len());

    let fitted = fit_standardizer(&schema, &[&x])?;
    fitted.standardize(&mut x)?;
    let names = schema.feature_names();
    let v = x.register_rows()[0];
    for (name, value) in names.iter().zip(x.values.row(v)).skip(schema.continuous_start()) {
        println!("{:<16} {:>8.3}", name, value);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
