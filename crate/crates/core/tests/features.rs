// SPDX-License-Identifier: Apache-2.0

mod common;

use std::sync::Arc;

use regclass::features::{extract_features, fit_standardizer, read_feature_matrix, write_feature_matrix, FeatureSchema};
use regclass::graph::{BetweennessMode, CircuitGraph};
use regclass::netlist::CellLibrary;
use regclass::synthgen::{builtin_archetypes, generate_corpus};

#[test]
fn standardized_training_columns_have_unit_moments() {
    let lib = Arc::new(CellLibrary::standard());
    let (_, items) = generate_corpus(&builtin_archetypes()[..4], 12, &lib).unwrap();
    let schema = FeatureSchema::for_library(&lib);
    let mut mats: Vec<_> = items
        .iter()
        .map(|i| {
            let g = CircuitGraph::build(&i.netlist);
            extract_features(&g, &g.centralities(BetweennessMode::Exact), &schema, i.netlist.labels()).unwrap()
        })
        .collect();
    let refs: Vec<_> = mats.iter().collect();
    let fitted = fit_standardizer(&schema, &refs).unwrap();
    for m in &mut mats {
        fitted.standardize(m).unwrap();
        assert!(fitted.standardize(m).is_err(), "double standardization is rejected");
    }
    let rows: usize = mats.iter().map(|m| m.rows()).sum();
    for c in schema.continuous_start()..schema.len() {
        let col: Vec<f64> = mats.iter().flat_map(|m| m.values.column(c).to_vec()).collect();
        let mean = col.iter().sum::<f64>() / rows as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / rows as f64;
        assert!(mean.abs() <= 1e-9, "column {c} mean {mean}");
        // constant columns stay at zero
        if col.iter().any(|&x| x != 0.0) {
            assert!((var - 1.0).abs() <= 1e-6, "column {c} variance {var}");
        }
    }
}

#[test]
fn one_hot_block_and_degree_columns_agree_with_the_graph() {
    let mut r = common::rng(21);
    let schema = FeatureSchema::for_library(&CellLibrary::standard());
    for _ in 0..20 {
        let n = common::random_aoi_netlist(&mut r, 30);
        let g = CircuitGraph::build(&n);
        let x = extract_features(&g, &g.centralities(BetweennessMode::Exact), &schema, n.labels()).unwrap();
        let k = schema.k();
        for v in 0..g.node_count() {
            let row = x.values.row(v);
            assert_eq!(row.iter().take(k).sum::<f64>(), 1.0);
            assert_eq!(row[g.node(v).kind.0], 1.0);
            assert_eq!(row[k] as usize, g.in_degree(v));
            assert_eq!(row[k + 1] as usize, g.out_degree(v));
        }
        let mut buf = Vec::new();
        let names = schema.feature_names();
        write_feature_matrix(&mut buf, &x, &names).unwrap();
        let (back, back_names) = read_feature_matrix(&mut buf.as_slice()).unwrap();
        assert_eq!(back.values, x.values);
        assert_eq!(back_names, names);
    }
}
