// SPDX-License-Identifier: Apache-2.0

// Strongly connected components and centralities of a netlist graph.

use std::error::Error;
use std::sync::Arc;

use regclass::graph::{BetweennessMode, CircuitGraph};
use regclass::netlist::{parse_verilog_subset, CellLibrary};

const COUNTER: &str = "
module cnt (en, d, y, z);
  input en, d;
  output y, z;
  wire q0, q1, n0, c, n1, p;
  XOR2 a0 (.A(q0), .B(en), .Y(n0));
  AND2 a1 (.A(q0), .B(en), .Y(c));
  XOR2 a2 (.A(q1), .B(c), .Y(n1));
  DFF r0 (.D(n0), .Q(q0));
  DFF r1 (.D(n1), .Q(q1));
  DFF r2 (.D(d), .Q(p));
  AND2 a3 (.A(p), .B(q1), .Y(y));
  BUF a4 (.A(p), .Y(z));
endmodule
";

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let n = parse_verilog_subset(COUNTER, &Arc::new(CellLibrary::standard()))?;
    let g = CircuitGraph::build(&n);
    println!("{} nodes, {} edges", g.node_count(), g.edge_count());

    let scc = g.scc();
    for v in g.registers() {
        println!("{:>3} on_cycle={} component={}", g.node(v).name, scc.on_cycle[v], scc.component[v]);
    }
    let regs: Vec<usize> = g.registers().collect();
    let (r0, r1, r2) = (regs[0], regs[1], regs[2]);
    assert!(scc.on_cycle[r0] && scc.on_cycle[r1] && !scc.on_cycle[r2]);
    assert!(!scc.same_component(r0, r1));

    let exact = g.centralities(BetweennessMode::Exact);
    let sampled = g.centralities(BetweennessMode::Approximate { samples: 4, seed: 1 });
    println!("{:<6} {:>8} {:>8} {:>8}", "node", "betw", "~betw", "harm");
    for (v, node) in g.nodes().iter().enumerate() {
        println!(
            "{:<6} {:>8.3} {:>8.3} {:>8.3}",
            node.name, exact.betweenness[v], sampled.betweenness[v], exact.harmonic[v]
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
