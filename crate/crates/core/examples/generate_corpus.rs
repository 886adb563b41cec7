// SPDX-License-Identifier: Apache-2.0

// Writes a labeled corpus for three archetypes and reads one graph back.

use std::error::Error;
use std::sync::Arc;

use regclass::netlist::CellLibrary;
use regclass::pipeline::read_netlist;
use regclass::synthgen::{build_corpus, builtin_archetypes, StateEncoding};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let lib = Arc::new(CellLibrary::standard());
    let archetypes: Vec<_> = builtin_archetypes().into_iter().take(3).collect();
    let dir = tempfile::tempdir()?;
    let manifest = build_corpus(&archetypes, 7, &lib, dir.path())?;
    println!("{} graphs, config {}", manifest.entries.len(), &manifest.config_hash[..12]);
    for e in manifest.with_encoding(StateEncoding::Binary) {
        println!("{:<28} {:>3} regs {:>2} state", e.path, e.n_registers, e.n_state_registers);
    }

    let first = &manifest.entries[0];
    let n = read_netlist(&manifest.resolve(&dir.path().join("manifest.json"), first), &lib)?;
    let labels = n.labels().ok_or("corpus graphs carry labels")?;
    assert_eq!(labels.len(), first.n_registers);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
