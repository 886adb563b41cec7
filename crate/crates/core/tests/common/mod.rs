// SPDX-License-Identifier: Apache-2.0

//! Independent oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use regclass::gnn::{backward, forward, forward_from, loss, ClassWeights, MessageGraph, Mode, ModelDims, ModelParams};
use regclass::netlist::{parse_verilog_subset, CellKind, CellLibrary, Netlist, RegisterClass};
use regclass::synthgen::{Builder, Style};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random digraph as sorted, deduplicated successor lists.
pub fn random_digraph(rng: &mut impl Rng, n: usize, p: f64, self_loops: bool) -> Vec<Vec<usize>> {
    (0..n)
        .map(|u| (0..n).filter(|&v| (self_loops || u != v) && rng.random_bool(p)).collect())
        .collect()
}

pub fn bfs_distances(succ: &[Vec<usize>], s: usize) -> Vec<Option<usize>> {
    let mut d = vec![None; succ.len()];
    d[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in &succ[u] {
            if d[v].is_none() {
                d[v] = Some(d[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    d
}

/// `reach[u][v]`: a path of length >= 0 leads from `u` to `v`.
pub fn reachability(succ: &[Vec<usize>]) -> Vec<Vec<bool>> {
    (0..succ.len()).map(|s| bfs_distances(succ, s).iter().map(Option::is_some).collect()).collect()
}

/// Components as the classes of mutual reachability, each sorted, the list
/// sorted by first member.
pub fn scc_oracle(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let reach = reachability(succ);
    let n = succ.len();
    let mut done = vec![false; n];
    let mut out = Vec::new();
    for u in 0..n {
        if done[u] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&v| reach[u][v] && reach[v][u]).collect();
        for &v in &class {
            done[v] = true;
        }
        out.push(class);
    }
    out
}

/// `u` lies on a directed cycle: it reaches itself through at least one edge.
pub fn on_cycle_oracle(succ: &[Vec<usize>]) -> Vec<bool> {
    let reach = reachability(succ);
    (0..succ.len()).map(|u| succ[u].iter().any(|&w| reach[w][u])).collect()
}

/// Betweenness by listing every shortest path of every ordered pair.
pub fn betweenness_by_enumeration(succ: &[Vec<usize>]) -> Vec<f64> {
    let n = succ.len();
    let dist: Vec<Vec<Option<usize>>> = (0..n).map(|s| bfs_distances(succ, s)).collect();
    let mut score = vec![0.0; n];
    let mut through = vec![0usize; n];
    for s in 0..n {
        for t in 0..n {
            let Some(dst) = dist[s][t] else { continue };
            if s == t {
                continue;
            }
            through.fill(0);
            let mut paths = 0usize;
            // depth-first over prefixes that stay on some shortest s-t path
            let mut stack = vec![(s, vec![s])];
            while let Some((u, path)) = stack.pop() {
                if u == t {
                    paths += 1;
                    for &v in &path[1..path.len() - 1] {
                        through[v] += 1;
                    }
                    continue;
                }
                let du = dist[s][u].unwrap();
                for &w in &succ[u] {
                    if dist[s][w] == Some(du + 1) && dist[w][t].is_some_and(|r| du + 1 + r == dst) {
                        let mut p = path.clone();
                        p.push(w);
                        stack.push((w, p));
                    }
                }
            }
            for v in 0..n {
                if through[v] > 0 {
                    score[v] += through[v] as f64 / paths as f64;
                }
            }
        }
    }
    score
}

pub fn harmonic_oracle(succ: &[Vec<usize>]) -> Vec<f64> {
    let n = succ.len();
    let mut h = vec![0.0; n];
    for s in 0..n {
        for (v, d) in bfs_distances(succ, s).into_iter().enumerate() {
            if let Some(d) = d.filter(|&d| d > 0) {
                h[v] += 1.0 / d as f64;
            }
        }
    }
    h
}

/// Maximum matching by trying every assignment of left vertices.
pub fn matching_oracle(adj: &[Vec<usize>], right: usize) -> usize {
    fn go(adj: &[Vec<usize>], i: usize, used: u32, memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        if i == adj.len() {
            return 0;
        }
        if let Some(v) = memo[i][used as usize] {
            return v;
        }
        let mut best = go(adj, i + 1, used, memo);
        for &b in &adj[i] {
            if used & (1 << b) == 0 {
                best = best.max(1 + go(adj, i + 1, used | (1 << b), memo));
            }
        }
        memo[i][used as usize] = Some(best);
        best
    }
    let mut memo = vec![vec![None; 1 << right]; adj.len()];
    go(adj, 0, 0, &mut memo)
}

/// Random netlist of AND2, OR2, INV and DFF cells with about `size` nodes,
/// feedback only through registers.
pub fn random_aoi_netlist(rng: &mut impl Rng, size: usize) -> Netlist {
    let lib = Arc::new(CellLibrary::standard());
    let mut b = Builder::new(lib, Style { wide_gates: false, max_fanout: None }).unwrap();
    let n_in = rng.random_range(1..=3);
    let mut pool = b.inputs(n_in);
    let n_reg = rng.random_range(1..=4);
    let mut pending = Vec::new();
    for _ in 0..n_reg {
        let d = b.future();
        let class = if rng.random_bool(0.5) { RegisterClass::State } else { RegisterClass::Data };
        pool.push(b.reg(d, class));
        pending.push(d);
    }
    let gates = size.saturating_sub(n_in + 2 * n_reg).max(1);
    for _ in 0..gates {
        let a = pool[rng.random_range(0..pool.len())];
        let c = pool[rng.random_range(0..pool.len())];
        let y = match rng.random_range(0..3) {
            0 => b.and(&[a, c]),
            1 => b.or(&[a, c]),
            _ => b.not(a),
        };
        pool.push(y);
    }
    for d in pending {
        let src = pool[rng.random_range(n_in..pool.len())];
        b.bind(d, src);
    }
    b.finish("random").unwrap()
}

/// One clock cycle: combinational settle from primary inputs and register
/// outputs; returns every net value.
pub fn settle(n: &Netlist, inputs: &[bool], regs: &[bool]) -> Vec<bool> {
    let mut val = vec![false; n.nets().len()];
    for (&net, &v) in n.primary_inputs().iter().zip(inputs) {
        val[net.0] = v;
    }
    for ((_, r), &v) in n.registers().zip(regs) {
        val[r.output.0] = v;
    }
    // sweep to a fixed point; depth bounds the number of sweeps
    for _ in 0..=n.instances().len() {
        let mut changed = false;
        for inst in n.instances() {
            if let Some(tt) = n.kind_of(inst).truth_table {
                let ins: Vec<bool> = inst.inputs.iter().map(|x| val[x.0]).collect();
                let y = tt.eval(&ins);
                changed |= val[inst.output.0] != y;
                val[inst.output.0] = y;
            }
        }
        if !changed {
            break;
        }
    }
    val
}

/// Result of a central-difference gradient check.
#[derive(Debug)]
pub struct GradCheck {
    pub worst_relative_error: f64,
    pub worst_tensor: String,
    /// Analytic and numeric value at the worst entry.
    pub worst_pair: (f64, f64),
    /// Worst `|a - n| / (max(|a|, |n|) + 1e-6)`, which tolerates the
    /// roundoff of the difference quotient on near-zero gradients.
    pub worst_mixed_error: f64,
    pub checked: usize,
    pub relu_margin: f64,
}

/// Compares analytic gradients with central differences for every
/// parameter. Dropout masks from one train-mode pass drawn from `rng` are
/// replayed, and perturbations of a layer rerun the model only from that
/// layer.
pub fn gradient_check(
    p: &ModelParams,
    mg: &MessageGraph,
    x: &Array2<f64>,
    targets: &[(usize, RegisterClass)],
    w: ClassWeights,
    dropout: f64,
    rng: &mut ChaCha8Rng,
    h: f64,
) -> GradCheck {
    let trace = forward(p, mg, x, Mode::Train { dropout, rng }).unwrap();
    let (_, grad) = backward(p, mg, x, &trace, targets, w).unwrap();
    let layers = p.sage.len();
    let start_of = |name: &str| -> usize {
        name.strip_prefix("sage")
            .and_then(|s| s.split('.').next())
            .and_then(|k| k.parse().ok())
            .unwrap_or(layers)
    };
    let names: Vec<String> = p.layout().into_iter().map(|(n, _)| n).collect();
    let analytic: Vec<Vec<f64>> = grad.tensors().into_iter().map(|t| t.to_vec()).collect();
    let mut q = p.clone();
    let (mut worst, mut worst_tensor, mut worst_pair, mut checked) = (0.0f64, String::new(), (0.0, 0.0), 0);
    let mut mixed = 0.0f64;
    for (t, name) in names.iter().enumerate() {
        let start = start_of(name);
        for i in 0..analytic[t].len() {
            let orig = q.tensors()[t][i];
            q.tensors_mut()[t][i] = orig + h;
            let up = loss(&forward_from(&q, mg, x, &trace, start).unwrap().log_probs, targets, w).unwrap();
            q.tensors_mut()[t][i] = orig - h;
            let down = loss(&forward_from(&q, mg, x, &trace, start).unwrap().log_probs, targets, w).unwrap();
            q.tensors_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[t][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            mixed = mixed.max((a - numeric).abs() / (a.abs().max(numeric.abs()) + 1e-6));
            if rel > worst {
                worst = rel;
                worst_tensor = format!("{name}[{i}]");
                worst_pair = (a, numeric);
            }
            checked += 1;
        }
    }
    GradCheck { worst_relative_error: worst, worst_tensor, worst_pair, worst_mixed_error: mixed, checked, relu_margin: trace.relu_margin() }
}

/// Ten-node fixture for the gradient checks: a random digraph with edge
/// probability 0.25, features uniform in [-1, 1), freshly initialized
/// parameters and alternating state/data targets on every node. Returns the
/// generator so dropout masks continue the same stream.
pub fn gradient_fixture(
    seed: u64,
    dims: ModelDims,
    layer_norm: bool,
) -> (ModelParams, MessageGraph, Array2<f64>, Vec<(usize, RegisterClass)>, ChaCha8Rng) {
    let mut r = rng(seed);
    let n = 10;
    let lists: Vec<Vec<usize>> =
        (0..n).map(|v| (0..n).filter(|&u| u != v && r.random::<f64>() < 0.25).collect()).collect();
    let mg = MessageGraph::from_neighbors(&lists);
    let x = Array2::from_shape_fn((n, dims.input), |_| r.random_range(-1.0..1.0));
    let p = ModelParams::init(dims, layer_norm, &mut r);
    let targets = (0..n)
        .map(|v| (v, if v % 2 == 0 { RegisterClass::State } else { RegisterClass::Data }))
        .collect();
    (p, mg, x, targets, r)
}

/// A netlist holding one instance of `kind`, inputs declared in pin order.
pub fn single_cell(lib: &Arc<CellLibrary>, kind: &CellKind) -> Netlist {
    let ins: Vec<String> = (0..kind.inputs.len()).map(|i| format!("i{i}")).collect();
    let mut ports = ins.clone();
    ports.push("y".into());
    let mut text = format!("module cell ({});\n", ports.join(", "));
    for i in &ins {
        text.push_str(&format!("  input {i};\n"));
    }
    text.push_str("  output y;\n");
    let pins: Vec<String> = kind
        .inputs
        .iter()
        .zip(&ins)
        .map(|(p, n)| format!(".{p}({n})"))
        .chain([format!(".{}(y)", kind.output)])
        .collect();
    text.push_str(&format!("  {} u ({});\nendmodule\n", kind.name, pins.join(", ")));
    parse_verilog_subset(&text, lib).unwrap()
}

/// Value of the first primary output for every input assignment; bit `i` of
/// the row index drives primary input `i`.
pub fn output_table(n: &Netlist) -> Vec<bool> {
    let k = n.primary_inputs().len();
    let y = n.primary_outputs()[0];
    (0..1usize << k)
        .map(|row| {
            let ins: Vec<bool> = (0..k).map(|i| row >> i & 1 == 1).collect();
            settle(n, &ins, &[])[y.0]
        })
        .collect()
}
