// SPDX-License-Identifier: Apache-2.0

//! Per-node feature vectors.
//!
//! With `K` cell kinds in the library, every row has `2K + 4` columns:
//!
//! | columns        | content                                             |
//! |----------------|-----------------------------------------------------|
//! | `0..K`         | one-hot node kind                                   |
//! | `K`            | in-degree (edges)                                   |
//! | `K + 1`        | out-degree (edges)                                  |
//! | `K + 2`        | betweenness centrality                              |
//! | `K + 3`        | harmonic centrality                                 |
//! | `K + 4..2K + 4`| kind histogram over distinct 1-hop neighbors        |
//!
//! The neighbor histogram counts each distinct in- or out-neighbor once and
//! excludes the node itself. Everything after the one-hot block is
//! "continuous" and may be standardized with training-set statistics.

mod io;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Centralities, CircuitGraph};
use crate::netlist::{CellLibrary, RegisterClass, RegisterLabels};

pub use io::{read_feature_matrix, write_feature_matrix};

/// Standard deviations below this mark a feature as constant.
pub const CONSTANT_STD: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("library fingerprint mismatch: schema {expected}, graph {found}")]
    Fingerprint { expected: String, found: String },
    #[error("centrality vectors have {found} entries for {expected} nodes")]
    CentralityLength { expected: usize, found: usize },
    #[error("no training matrices supplied")]
    EmptyTrainingSet,
    #[error("feature matrix is already standardized")]
    AlreadyStandardized,
    #[error("schema carries no standardization statistics")]
    NoStatistics,
    #[error("feature matrix has {found} columns, schema expects {expected}")]
    Width { expected: usize, found: usize },
    #[error("feature file: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    /// One entry per continuous column (`K + 4` of them).
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub library_fingerprint: String,
    pub kinds: Vec<String>,
    pub stats: Option<Standardization>,
}

impl FeatureSchema {
    pub fn for_library(lib: &CellLibrary) -> Self {
        Self {
            library_fingerprint: lib.fingerprint(),
            kinds: lib.kinds().iter().map(|k| k.name.clone()).collect(),
            stats: None,
        }
    }

    pub fn k(&self) -> usize {
        self.kinds.len()
    }

    pub fn len(&self) -> usize {
        2 * self.k() + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// First continuous column.
    pub fn continuous_start(&self) -> usize {
        self.k()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.kinds.iter().map(|k| format!("kind={k}")).collect();
        names.extend(["in_degree", "out_degree", "betweenness", "harmonic"].map(String::from));
        names.extend(self.kinds.iter().map(|k| format!("neighbors={k}")));
        names
    }

    /// Applies the stored statistics in place.
    pub fn standardize(&self, x: &mut FeatureMatrix) -> Result<(), FeatureError> {
        let stats = self.stats.as_ref().ok_or(FeatureError::NoStatistics)?;
        if x.standardized {
            return Err(FeatureError::AlreadyStandardized);
        }
        if x.values.ncols() != self.len() {
            return Err(FeatureError::Width { expected: self.len(), found: x.values.ncols() });
        }
        let start = self.continuous_start();
        for (j, ((&m, &s), &c)) in stats.mean.iter().zip(&stats.std).zip(&stats.constant).enumerate() {
            if c {
                continue;
            }
            x.values.column_mut(start + j).mapv_inplace(|v| (v - m) / s);
        }
        x.standardized = true;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub register_mask: Vec<bool>,
    /// Set on register rows whose netlist carried labels.
    pub labels: Vec<Option<RegisterClass>>,
    pub library_fingerprint: String,
    pub standardized: bool,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn register_rows(&self) -> Vec<usize> {
        (0..self.rows()).filter(|&r| self.register_mask[r]).collect()
    }

    pub fn is_labeled(&self) -> bool {
        self.register_mask.iter().zip(&self.labels).all(|(&m, l)| !m || l.is_some())
    }
}

/// Builds the feature matrix of `g`. `labels`, when given, is looked up by
/// register instance id.
pub fn extract_features(
    g: &CircuitGraph,
    centralities: &Centralities,
    schema: &FeatureSchema,
    labels: Option<&RegisterLabels>,
) -> Result<FeatureMatrix, FeatureError> {
    let fingerprint = g.library().fingerprint();
    if fingerprint != schema.library_fingerprint {
        return Err(FeatureError::Fingerprint {
            expected: schema.library_fingerprint.clone(),
            found: fingerprint,
        });
    }
    let n = g.node_count();
    for len in [centralities.betweenness.len(), centralities.harmonic.len()] {
        if len != n {
            return Err(FeatureError::CentralityLength { expected: n, found: len });
        }
    }
    let k = schema.k();
    let mut values = Array2::<f64>::zeros((n, schema.len()));
    let (succ, pred) = (g.successors(), g.predecessors());
    let mut neighbors = Vec::new();
    for v in 0..n {
        let mut row = values.row_mut(v);
        let node = g.node(v);
        row[node.kind.0] = 1.0;
        row[k] = g.in_degree(v) as f64;
        row[k + 1] = g.out_degree(v) as f64;
        row[k + 2] = centralities.betweenness[v];
        row[k + 3] = centralities.harmonic[v];
        neighbors.clear();
        neighbors.extend(pred[v].iter().chain(&succ[v]).copied().filter(|&u| u != v));
        neighbors.sort_unstable();
        neighbors.dedup();
        for &u in &neighbors {
            row[k + 4 + g.node(u).kind.0] += 1.0;
        }
    }
    let register_mask: Vec<bool> = g.nodes().iter().map(|nd| nd.is_register).collect();
    let labels = g
        .nodes()
        .iter()
        .map(|nd| if nd.is_register { labels.and_then(|l| l.get(&nd.name)) } else { None })
        .collect();
    Ok(FeatureMatrix {
        values,
        register_mask,
        labels,
        library_fingerprint: fingerprint,
        standardized: false,
    })
}

/// Mean and population standard deviation of every continuous column over
/// all rows of all `train` matrices.
pub fn fit_standardizer(
    schema: &FeatureSchema,
    train: &[&FeatureMatrix],
) -> Result<FeatureSchema, FeatureError> {
    if train.is_empty() {
        return Err(FeatureError::EmptyTrainingSet);
    }
    let start = schema.continuous_start();
    let width = schema.len() - start;
    let mut sum = vec![0.0; width];
    let mut rows = 0usize;
    for x in train {
        if x.standardized {
            return Err(FeatureError::AlreadyStandardized);
        }
        if x.values.ncols() != schema.len() {
            return Err(FeatureError::Width { expected: schema.len(), found: x.values.ncols() });
        }
        for row in x.values.rows() {
            for (s, v) in sum.iter_mut().zip(row.iter().skip(start)) {
                *s += v;
            }
        }
        rows += x.rows();
    }
    if rows == 0 {
        return Err(FeatureError::EmptyTrainingSet);
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / rows as f64).collect();
    let mut sq = vec![0.0; width];
    for x in train {
        for row in x.values.rows() {
            for ((q, v), m) in sq.iter_mut().zip(row.iter().skip(start)).zip(&mean) {
                *q += (v - m) * (v - m);
            }
        }
    }
    let std: Vec<f64> = sq.iter().map(|q| (q / rows as f64).sqrt()).collect();
    let constant = std.iter().map(|&s| s < CONSTANT_STD).collect();
    Ok(FeatureSchema {
        stats: Some(Standardization { mean, std, constant }),
        ..schema.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BetweennessMode;
    use crate::netlist::parse_verilog_subset;
    use std::sync::Arc;

    fn graph(text: &str) -> CircuitGraph {
        let lib = Arc::new(CellLibrary::standard());
        CircuitGraph::build(&parse_verilog_subset(text, &lib).unwrap())
    }

    const SMALL: &str = "module m (a, b, y); input a; input b; output y; wire n1;
        INV u1 (.A(a), .Y(n1)); AND2 u2 (.A(n1), .B(b), .Y(y)); endmodule";

    fn features(g: &CircuitGraph) -> FeatureMatrix {
        let schema = FeatureSchema::for_library(g.library());
        extract_features(g, &g.centralities(BetweennessMode::Exact), &schema, None).unwrap()
    }

    #[test]
    fn standard_library_gives_26_features() {
        let schema = FeatureSchema::for_library(&CellLibrary::standard());
        assert_eq!(schema.k(), 11);
        assert_eq!(schema.len(), 26);
        assert_eq!(schema.feature_names().len(), 26);
    }

    #[test]
    fn one_hot_degrees_and_histogram() {
        let g = graph(SMALL);
        let x = features(&g);
        let lib = g.library();
        let and = lib.find("AND2").unwrap().0;
        // u2 = AND2 with two in-edges and one out-edge
        let row = x.values.row(1);
        assert_eq!(row[and], 1.0);
        assert_eq!(row.iter().take(11).sum::<f64>(), 1.0);
        assert_eq!((row[11], row[12]), (2.0, 1.0));
        // neighbors: INV u1, INPUT b, OUTPUT y
        let hist: f64 = row.iter().skip(15).sum();
        assert_eq!(hist, 3.0);
        assert_eq!(row[15 + lib.find("INV").unwrap().0], 1.0);
        assert_eq!(row[15 + lib.input_port().0], 1.0);
        // betweenness of u1: on a -> u1 -> u2 and a -> u1 -> u2 -> y
        assert_eq!(x.values[(0, 13)], 2.0);
    }

    #[test]
    fn fingerprint_mismatch_rejected() {
        let g = graph(SMALL);
        let schema = FeatureSchema::for_library(&CellLibrary::extended());
        let err = extract_features(&g, &g.centralities(BetweennessMode::Exact), &schema, None);
        assert!(matches!(err, Err(FeatureError::Fingerprint { .. })));
    }

    #[test]
    fn constant_column_passes_through() {
        // no MUX2 anywhere, so its neighbor count is constant
        let g = graph(SMALL);
        let x = features(&g);
        let schema = fit_standardizer(&FeatureSchema::for_library(g.library()), &[&x]).unwrap();
        let stats = schema.stats.as_ref().unwrap();
        let mux_hist = 4 + g.library().find("MUX2").unwrap().0;
        assert!(stats.constant[mux_hist]);
        let mut y = x.clone();
        schema.standardize(&mut y).unwrap();
        assert_eq!(y.values.column(11 + mux_hist), x.values.column(11 + mux_hist));
        assert_eq!(schema.standardize(&mut y), Err(FeatureError::AlreadyStandardized));
    }

    #[test]
    fn empty_training_set() {
        let schema = FeatureSchema::for_library(&CellLibrary::standard());
        assert_eq!(fit_standardizer(&schema, &[]), Err(FeatureError::EmptyTrainingSet));
    }
}
