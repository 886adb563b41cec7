// SPDX-License-Identifier: Apache-2.0

pub mod cli;
pub mod eval;
pub mod features;
pub mod gnn;
pub mod graph;
pub mod netlist;
pub mod pipeline;
pub mod postprocess;
pub mod relic;
pub mod synthgen;
