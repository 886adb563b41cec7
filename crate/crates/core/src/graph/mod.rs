// SPDX-License-Identifier: Apache-2.0

//! The directed circuit graph and the algorithms run on it.
//!
//! Nodes are laid out densely: instances first (netlist order), then one
//! node per primary input, then one per primary output. An edge `u -> v`
//! exists once per sink pin: a net feeding two pins of the same cell yields
//! two parallel edges. Degrees count these edges; centralities, SCCs and
//! message passing use the simple graph (parallel edges merged).

mod centrality;
mod scc;

use std::fmt::Write as _;
use std::sync::Arc;

use crate::netlist::{CellLibrary, Driver, KindId, Netlist};

pub use centrality::{
    betweenness, betweenness_centrality, harmonic, harmonic_centrality, BetweennessMode,
    Centralities, EXACT_NODE_LIMIT, DEFAULT_SAMPLE_COUNT,
};
pub use scc::{tarjan, SccPartition};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeOrigin {
    /// Position in [`Netlist::instances`].
    Instance(usize),
    /// Position in [`Netlist::primary_inputs`].
    Input(usize),
    /// Position in [`Netlist::primary_outputs`].
    Output(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub origin: NodeOrigin,
    pub kind: KindId,
    pub is_register: bool,
    /// Instance id or port net name.
    pub name: String,
}

#[derive(Clone, Debug)]
pub struct CircuitGraph {
    library: Arc<CellLibrary>,
    nodes: Vec<Node>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    edge_count: usize,
}

fn simple(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    adj.iter()
        .map(|l| {
            let mut v = l.clone();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect()
}

impl CircuitGraph {
    pub fn build(n: &Netlist) -> Self {
        let lib = n.library();
        let n_inst = n.instances().len();
        let n_pi = n.primary_inputs().len();
        let mut nodes = Vec::with_capacity(n_inst + n_pi + n.primary_outputs().len());
        for (i, inst) in n.instances().iter().enumerate() {
            nodes.push(Node {
                origin: NodeOrigin::Instance(i),
                kind: inst.kind,
                is_register: n.kind_of(inst).is_register(),
                name: inst.id.clone(),
            });
        }
        for (i, &net) in n.primary_inputs().iter().enumerate() {
            nodes.push(Node {
                origin: NodeOrigin::Input(i),
                kind: lib.input_port(),
                is_register: false,
                name: n.net_name(net).into(),
            });
        }
        for (i, &net) in n.primary_outputs().iter().enumerate() {
            nodes.push(Node {
                origin: NodeOrigin::Output(i),
                kind: lib.output_port(),
                is_register: false,
                name: n.net_name(net).into(),
            });
        }

        let driver_node = |net| match n.driver(net) {
            Driver::Instance(i) => i,
            Driver::Input(p) => n_inst + p,
        };
        let mut out_edges = vec![Vec::new(); nodes.len()];
        let mut in_edges = vec![Vec::new(); nodes.len()];
        let mut edge_count = 0;
        for (v, inst) in n.instances().iter().enumerate() {
            for &net in &inst.inputs {
                let u = driver_node(net);
                out_edges[u].push(v);
                in_edges[v].push(u);
                edge_count += 1;
            }
        }
        for (p, &net) in n.primary_outputs().iter().enumerate() {
            let (u, v) = (driver_node(net), n_inst + n_pi + p);
            out_edges[u].push(v);
            in_edges[v].push(u);
            edge_count += 1;
        }
        let succ = simple(&out_edges);
        let pred = simple(&in_edges);
        Self { library: lib.clone(), nodes, out_edges, in_edges, succ, pred, edge_count }
    }

    pub fn library(&self) -> &Arc<CellLibrary> {
        &self.library
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, v: usize) -> &Node {
        &self.nodes[v]
    }

    /// Sinks of `v`, one entry per edge.
    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out_edges[v]
    }

    /// Drivers of `v`'s input pins in pin order, one entry per edge.
    pub fn in_edges(&self, v: usize) -> &[usize] {
        &self.in_edges[v]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_edges[v].len()
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.out_edges[v].len()
    }

    /// Distinct successors, sorted.
    pub fn successors(&self) -> &[Vec<usize>] {
        &self.succ
    }

    /// Distinct predecessors, sorted.
    pub fn predecessors(&self) -> &[Vec<usize>] {
        &self.pred
    }

    pub fn registers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&v| self.nodes[v].is_register)
    }

    pub fn has_self_loop(&self, v: usize) -> bool {
        self.succ[v].binary_search(&v).is_ok()
    }

    pub fn scc(&self) -> SccPartition {
        tarjan(&self.succ)
    }

    pub fn centralities(&self, mode: BetweennessMode) -> Centralities {
        Centralities {
            betweenness: betweenness(&self.succ, mode),
            harmonic: harmonic(&self.succ),
        }
    }

    /// One `src dst` line per edge, using node indices.
    pub fn edge_list(&self) -> String {
        let mut s = String::with_capacity(self.edge_count * 8);
        for (u, outs) in self.out_edges.iter().enumerate() {
            for v in outs {
                let _ = writeln!(s, "{u} {v}");
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_verilog_subset;

    fn lib() -> Arc<CellLibrary> {
        Arc::new(CellLibrary::standard())
    }

    #[test]
    fn inv_and_chain() {
        let text = "module m (a, b, y); input a; input b; output y; wire n1;
                    INV u1 (.A(a), .Y(n1)); AND2 u2 (.A(n1), .B(b), .Y(y)); endmodule";
        let g = CircuitGraph::build(&parse_verilog_subset(text, &lib()).unwrap());
        // u1, u2, a, b, y
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.out_edges(2), &[0]);
        assert_eq!(g.in_edges(1), &[0, 3]);
        assert_eq!(g.out_edges(1), &[4]);
        assert_eq!(g.edge_list(), "0 1\n1 4\n2 0\n3 1\n");
    }

    #[test]
    fn fanout_to_three_sinks() {
        let text = "module m (a, x, y, z); input a; output x, y, z;
                    INV u1 (.A(a), .Y(x)); INV u2 (.A(a), .Y(y)); INV u3 (.A(a), .Y(z)); endmodule";
        let g = CircuitGraph::build(&parse_verilog_subset(text, &lib()).unwrap());
        assert_eq!(g.out_edges(3), &[0, 1, 2]);
        assert_eq!(g.out_degree(3), 3);
    }

    #[test]
    fn parallel_edges_kept_in_degree_merged_in_simple_graph() {
        let text = "module m (a, y); input a; output y; AND2 u (.A(a), .B(a), .Y(y)); endmodule";
        let g = CircuitGraph::build(&parse_verilog_subset(text, &lib()).unwrap());
        assert_eq!(g.in_degree(0), 2);
        assert_eq!(g.predecessors()[0], vec![1]);
    }
}
