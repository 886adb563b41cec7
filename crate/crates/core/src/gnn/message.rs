// SPDX-License-Identifier: Apache-2.0

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::graph::CircuitGraph;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageDirection {
    /// Aggregate over drivers (in-neighbors).
    #[default]
    InNeighbors,
    /// Aggregate over drivers and sinks.
    Undirected,
}

/// For each node `v`, the set `{v} ∪ N(v)` over which the mean is taken,
/// stored compressed.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageGraph {
    offsets: Vec<usize>,
    members: Vec<usize>,
}

impl MessageGraph {
    pub fn build(g: &CircuitGraph, direction: MessageDirection) -> Self {
        match direction {
            MessageDirection::InNeighbors => Self::from_neighbors(g.predecessors()),
            MessageDirection::Undirected => {
                let lists: Vec<Vec<usize>> = g
                    .predecessors()
                    .iter()
                    .zip(g.successors())
                    .map(|(p, s)| p.iter().chain(s).copied().collect())
                    .collect();
                Self::from_neighbors(&lists)
            }
        }
    }

    /// `neighbors[v]` lists `N(v)`; duplicates and `v` itself are allowed.
    pub fn from_neighbors(neighbors: &[Vec<usize>]) -> Self {
        let mut offsets = Vec::with_capacity(neighbors.len() + 1);
        let mut members = Vec::new();
        offsets.push(0);
        for (v, list) in neighbors.iter().enumerate() {
            let start = members.len();
            members.push(v);
            members.extend_from_slice(list);
            members[start..].sort_unstable();
            let mut set: Vec<usize> = members.drain(start..).collect();
            set.dedup();
            members.extend(set);
            offsets.push(members.len());
        }
        Self { offsets, members }
    }

    pub fn disjoint_union(parts: &[&MessageGraph]) -> Self {
        let mut offsets = vec![0];
        let mut members = Vec::new();
        let mut base = 0;
        for p in parts {
            for v in 0..p.node_count() {
                members.extend(p.set(v).iter().map(|&u| u + base));
                offsets.push(members.len());
            }
            base += p.node_count();
        }
        Self { offsets, members }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// `{v} ∪ N(v)`, ascending.
    pub fn set(&self, v: usize) -> &[usize] {
        &self.members[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Row `v` of the result is the mean of rows `set(v)` of `h`.
    pub fn aggregate(&self, h: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(h.raw_dim());
        for (v, mut row) in out.rows_mut().into_iter().enumerate() {
            let set = self.set(v);
            for &u in set {
                row += &h.row(u);
            }
            row /= set.len() as f64;
        }
        out
    }

    /// Adjoint of [`MessageGraph::aggregate`].
    pub fn aggregate_transpose(&self, d: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(d.raw_dim());
        for v in 0..self.node_count() {
            let set = self.set(v);
            let scale = 1.0 / set.len() as f64;
            let dv = d.row(v);
            for &u in set {
                out.row_mut(u).scaled_add(scale, &dv);
            }
        }
        out
    }
}
