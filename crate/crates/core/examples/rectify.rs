// SPDX-License-Identifier: Apache-2.0

// Structural clean-up of classifier output.

use std::error::Error;
use std::sync::Arc;

use regclass::gnn::RegisterPrediction;
use regclass::graph::CircuitGraph;
use regclass::netlist::{parse_verilog_subset, CellLibrary, RegisterClass};
use regclass::postprocess::{expand_completeness, rectify};

const DESIGN: &str = "
module m (a, y);
  input a;
  output y;
  wire q0, q1, q2, q3, d0, x;
  XOR2 u0 (.A(q0), .B(q1), .Y(d0));
  DFF s0 (.D(d0), .Q(q0));
  DFF s1 (.D(q0), .Q(q1));
  DFF p0 (.D(a), .Q(q2));
  AND2 u1 (.A(q2), .B(q1), .Y(x));
  DFF p1 (.D(x), .Q(q3));
  BUF u2 (.A(q3), .Y(y));
endmodule
";

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let n = parse_verilog_subset(DESIGN, &Arc::new(CellLibrary::standard()))?;
    let g = CircuitGraph::build(&n);
    let scc = g.scc();
    // a classifier that got s1 wrong and called the pipeline register state
    let guess = |name: &str| match name {
        "s0" | "p0" => RegisterClass::State,
        _ => RegisterClass::Data,
    };
    let raw: Vec<RegisterPrediction> = g
        .registers()
        .map(|v| RegisterPrediction { node: v, name: g.node(v).name.clone(), class: guess(&g.node(v).name), prob_state: 0.5 })
        .collect();

    let (rect, flips) = rectify(&g, &scc, &raw);
    for f in &flips {
        println!("rectify: {} {:?} -> {:?} ({:?})", f.register, f.from, f.to, f.reason);
    }
    let (done, flips) = expand_completeness(&g, &scc, &rect);
    for f in &flips {
        println!("complete: {} {:?} -> {:?} ({:?})", f.register, f.from, f.to, f.reason);
    }
    for p in &done {
        println!("{:<3} {:?}", p.name, p.class);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
