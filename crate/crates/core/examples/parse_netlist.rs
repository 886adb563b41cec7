// SPDX-License-Identifier: Apache-2.0

// Reads a structural Verilog netlist, lowers it to AND2/OR2/INV/DFF and
// writes both forms back out.

use std::error::Error;
use std::sync::Arc;

use regclass::netlist::{emit_json_netlist, emit_verilog, normalize_to_aoi, parse_json_netlist, parse_verilog_subset, CellLibrary};

const TOGGLE: &str = "
// two-bit state machine with a muxed data path
module toggle (clk, go, d, y);
  input clk, go, d;
  output y;
  wire s0, s1, n0, n1, x, q;
  XOR2 u0 (.A(s0), .B(go), .Y(n0));
  AND2 u1 (.A(s0), .B(go), .Y(x));
  XOR2 u2 (.A(s1), .B(x), .Y(n1));
  DFF st0 (.CK(clk), .D(n0), .Q(s0));
  DFF st1 (.CK(clk), .D(n1), .Q(s1));
  MUX2 u3 (.A(d), .B(s1), .S(s0), .Y(q));
  DFF dq (.CK(clk), .D(q), .Q(y));
endmodule
";

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let lib = Arc::new(CellLibrary::standard());
    let n = parse_verilog_subset(TOGGLE, &lib)?;
    println!("{}: {} nets, {} cells, {} registers", n.name(), n.nets().len(), n.instances().len(), n.register_count());

    let aoi = normalize_to_aoi(&n, &lib)?;
    let mut kinds: Vec<&str> = aoi.instances().iter().map(|i| aoi.kind_of(i).name.as_str()).collect();
    kinds.sort_unstable();
    kinds.dedup();
    println!("normalized: {} cells of kinds {:?}", aoi.instances().len(), kinds);
    assert_eq!(aoi.register_count(), n.register_count());

    let json = emit_json_netlist(&aoi);
    let back = parse_json_netlist(json.as_bytes(), &lib)?;
    assert_eq!(emit_verilog(&back), emit_verilog(&aoi));
    println!("{}", emit_verilog(&aoi).lines().take(6).collect::<Vec<_>>().join("\n"));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
