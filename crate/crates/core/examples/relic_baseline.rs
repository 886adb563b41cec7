// SPDX-License-Identifier: Apache-2.0

// Similarity-based register classification on a generated design.

use std::error::Error;
use std::sync::Arc;

use regclass::eval::ConfusionCounts;
use regclass::netlist::{normalize_to_aoi, CellLibrary};
use regclass::relic::{classify_registers, RelicConfig};
use regclass::synthgen::{builtin_archetypes, generate, StateEncoding};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let lib = Arc::new(CellLibrary::standard());
    let recipe = builtin_archetypes()[7].recipe(5, 1, StateEncoding::OneHot);
    let (n, truth) = generate(&recipe, &lib)?;
    let aoi = normalize_to_aoi(&n, &lib)?;
    for name in ["p1", "p2", "p3"] {
        let cfg = RelicConfig::preset(name)?;
        let r = classify_registers(&aoi, &cfg)?;
        let mut c = ConfusionCounts::default();
        for id in &r.registers {
            c.add(truth.get(id).ok_or("label")?, r.labels.get(id).ok_or("label")?);
        }
        println!("{name}: {} registers, {c:?}", r.registers.len());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
