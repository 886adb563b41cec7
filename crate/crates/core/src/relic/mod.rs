// SPDX-License-Identifier: Apache-2.0

//! Register classification by fan-in similarity.
//!
//! Two nodes are compared recursively over their fan-in trees: different
//! types score 0; at depth 0 the score is the ratio of the smaller to the
//! larger child count; otherwise children pairs scoring above `t1` become
//! edges of a bipartite graph and the score is its maximum matching size
//! divided by the larger child count. Register pairs scoring above `t2` are
//! "similar"; a register with at most `t3` similar partners is classified
//! as state, all others as data.
//!
//! Two nodes that both have no children score 1: their (empty) fan-ins are
//! identical.

mod matching;

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CircuitGraph, NodeOrigin};
use crate::netlist::{AoiKinds, CellCategory, KindId, Netlist, NetlistError, RegisterClass, RegisterLabels};

pub use matching::{max_matching, Bipartite};

#[derive(Debug, Error, PartialEq)]
pub enum RelicError {
    #[error("instance {instance} of kind {kind} is not AND2/OR2/INV; normalize the netlist first")]
    NotNormalized { instance: String, kind: String },
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("thresholds t1 and t2 must lie in [0, 1]")]
    Threshold,
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelicConfig {
    pub t1: f64,
    pub t2: f64,
    pub t3: usize,
    pub depth: usize,
    /// Count ordered pairs including self-pairs, exactly as the classic
    /// pseudocode's double loop does: every distinct pair adds 2 to both
    /// registers and each register adds 2 for itself.
    pub strict_pairs: bool,
}

impl RelicConfig {
    pub const P1: Self = Self { t1: 0.5, t2: 0.8, t3: 1, depth: 5, strict_pairs: false };
    pub const P2: Self = Self { t1: 0.7, t2: 0.5, t3: 5, depth: 5, strict_pairs: false };
    pub const P3: Self = Self { t1: 0.4, t2: 0.5, t3: 4, depth: 7, strict_pairs: false };

    pub fn preset(name: &str) -> Result<Self, RelicError> {
        match name.to_ascii_uppercase().as_str() {
            "P1" => Ok(Self::P1),
            "P2" => Ok(Self::P2),
            "P3" => Ok(Self::P3),
            _ => Err(RelicError::UnknownPreset(name.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), RelicError> {
        if (0.0..=1.0).contains(&self.t1) && (0.0..=1.0).contains(&self.t2) {
            Ok(())
        } else {
            Err(RelicError::Threshold)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeType {
    And,
    Or,
    Inv,
    Register,
    Input,
    Output,
    /// A 0-input cell.
    Const(KindId),
}

/// Node types and fan-in children (drivers in pin order, repeated when a
/// driver feeds several pins).
#[derive(Clone, Debug, PartialEq)]
pub struct FaninView {
    pub types: Vec<NodeType>,
    pub children: Vec<Vec<usize>>,
}

impl FaninView {
    pub fn build(n: &Netlist, g: &CircuitGraph) -> Result<Self, RelicError> {
        let aoi = AoiKinds::find(n.library())?;
        let lib = n.library();
        let mut types = Vec::with_capacity(g.node_count());
        for node in g.nodes() {
            let kind = lib.kind(node.kind);
            let t = match node.origin {
                NodeOrigin::Input(_) => NodeType::Input,
                NodeOrigin::Output(_) => NodeType::Output,
                NodeOrigin::Instance(_) if kind.category == CellCategory::Register => NodeType::Register,
                NodeOrigin::Instance(_) if node.kind == aoi.and2 => NodeType::And,
                NodeOrigin::Instance(_) if node.kind == aoi.or2 => NodeType::Or,
                NodeOrigin::Instance(_) if node.kind == aoi.inv => NodeType::Inv,
                NodeOrigin::Instance(_) if kind.input_count() == 0 => NodeType::Const(node.kind),
                NodeOrigin::Instance(_) => {
                    return Err(RelicError::NotNormalized {
                        instance: node.name.clone(),
                        kind: kind.name.clone(),
                    })
                }
            };
            types.push(t);
        }
        let children = (0..g.node_count()).map(|v| g.in_edges(v).to_vec()).collect();
        Ok(Self { types, children })
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }
}

pub type Memo = HashMap<(usize, usize, usize), f64>;

fn ratio(min: usize, max: usize) -> f64 {
    if max == 0 {
        1.0
    } else {
        min as f64 / max as f64
    }
}

fn score(
    v: &FaninView,
    i: usize,
    j: usize,
    d: usize,
    t1: f64,
    memo: &mut Option<&mut Memo>,
) -> f64 {
    if v.types[i] != v.types[j] {
        return 0.0;
    }
    let (ci, cj) = (&v.children[i], &v.children[j]);
    let max = ci.len().max(cj.len());
    let min = ci.len().min(cj.len());
    if d == 0 || max == 0 {
        return ratio(min, max);
    }
    let key = (i.min(j), i.max(j), d);
    if let Some(m) = memo.as_deref() {
        if let Some(&s) = m.get(&key) {
            return s;
        }
    }
    let mut bip = Bipartite::new(ci.len(), cj.len());
    for (a, &ca) in ci.iter().enumerate() {
        for (b, &cb) in cj.iter().enumerate() {
            if score(v, ca, cb, d - 1, t1, memo) > t1 {
                bip.add_edge(a, b);
            }
        }
    }
    let s = max_matching(&bip) as f64 / max as f64;
    if let Some(m) = memo.as_deref_mut() {
        m.insert(key, s);
    }
    s
}

/// Fan-in similarity of nodes `i` and `j` at depth `d`, memoized in `memo`.
pub fn similarity_score(v: &FaninView, i: usize, j: usize, d: usize, t1: f64, memo: &mut Memo) -> f64 {
    score(v, i, j, d, t1, &mut Some(memo))
}

/// [`similarity_score`] without memoization; exponential in `d`.
pub fn similarity_score_direct(v: &FaninView, i: usize, j: usize, d: usize, t1: f64) -> f64 {
    score(v, i, j, d, t1, &mut None)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelicResult {
    /// Register instance ids in graph order.
    pub registers: Vec<String>,
    pub labels: RegisterLabels,
    pub pair_counts: Vec<usize>,
    /// `similarity[a][b]` for register positions `a`, `b`; 1 on the diagonal.
    pub similarity: Vec<Vec<f64>>,
}

impl RelicResult {
    pub fn similarity_csv(&self) -> String {
        let mut s = String::from("register");
        for r in &self.registers {
            let _ = write!(s, ",{r}");
        }
        s.push('\n');
        for (r, row) in self.registers.iter().zip(&self.similarity) {
            s.push_str(r);
            for x in row {
                let _ = write!(s, ",{x}");
            }
            s.push('\n');
        }
        s
    }
}

/// Pair counts from a similarity matrix.
pub fn pair_counts(similarity: &[Vec<f64>], t2: f64, strict_pairs: bool) -> Vec<usize> {
    let n = similarity.len();
    let mut counts = vec![0; n];
    for a in 0..n {
        let others = if strict_pairs { 0..n } else { a + 1..n };
        for b in others {
            if similarity[a][b] > t2 {
                counts[a] += 1;
                counts[b] += 1;
            }
        }
    }
    counts
}

/// Classifies every register of the normalized netlist `n`.
pub fn classify_registers(n: &Netlist, cfg: &RelicConfig) -> Result<RelicResult, RelicError> {
    cfg.validate()?;
    let g = CircuitGraph::build(n);
    let view = FaninView::build(n, &g)?;
    let regs: Vec<usize> = g.registers().collect();
    let r = regs.len();
    let pairs: Vec<(usize, usize)> = (0..r).flat_map(|a| (a + 1..r).map(move |b| (a, b))).collect();
    let scores: Vec<f64> = pairs
        .par_iter()
        .map_init(Memo::new, |memo, &(a, b)| {
            similarity_score(&view, regs[a], regs[b], cfg.depth, cfg.t1, memo)
        })
        .collect();
    let mut similarity = vec![vec![1.0; r]; r];
    for (&(a, b), &s) in pairs.iter().zip(&scores) {
        similarity[a][b] = s;
        similarity[b][a] = s;
    }
    let counts = pair_counts(&similarity, cfg.t2, cfg.strict_pairs);
    let registers: Vec<String> = regs.iter().map(|&v| g.node(v).name.clone()).collect();
    let labels = RegisterLabels(
        registers
            .iter()
            .zip(&counts)
            .map(|(name, &c)| {
                let class = if c <= cfg.t3 { RegisterClass::State } else { RegisterClass::Data };
                (name.clone(), class)
            })
            .collect(),
    );
    Ok(RelicResult { registers, labels, pair_counts: counts, similarity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_verilog_subset, CellLibrary};
    use std::sync::Arc;

    fn view(text: &str) -> (Netlist, CircuitGraph, FaninView) {
        let n = parse_verilog_subset(text, &Arc::new(CellLibrary::standard())).unwrap();
        let g = CircuitGraph::build(&n);
        let v = FaninView::build(&n, &g).unwrap();
        (n, g, v)
    }

    const GATES: &str = "module m (a, b, y0, y1, y2, y3); input a, b; output y0, y1, y2, y3; wire n;
        AND2 u0 (.A(a), .B(b), .Y(y0)); OR2 u1 (.A(a), .B(b), .Y(y1)); INV u2 (.A(a), .Y(n));
        AND2 u3 (.A(n), .B(n), .Y(y2)); AND2 u4 (.A(b), .B(a), .Y(y3)); endmodule";

    #[test]
    fn type_mismatch_scores_zero() {
        let (_, _, v) = view(GATES);
        assert_eq!(similarity_score_direct(&v, 0, 1, 3, 0.5), 0.0);
    }

    #[test]
    fn identical_structures_score_one() {
        let (_, _, v) = view(GATES);
        for d in 0..5 {
            assert_eq!(similarity_score(&v, 0, 4, d, 0.5, &mut Memo::new()), 1.0);
        }
    }

    #[test]
    fn depth_zero_ratio_of_child_counts() {
        // normalized gates never have 3 children, so build the view by hand
        let v = FaninView {
            types: vec![NodeType::And, NodeType::And, NodeType::Input],
            children: vec![vec![2, 2], vec![2, 2, 2], vec![]],
        };
        assert!((similarity_score_direct(&v, 0, 1, 0, 0.5) - 2.0 / 3.0).abs() < 1e-15);
        assert!((similarity_score_direct(&v, 0, 1, 1, 0.5) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn deeper_mismatch_lowers_score() {
        let (_, _, v) = view(GATES);
        // u3 = AND(INV a, INV a) vs u0 = AND(a, b): children types INV vs INPUT
        assert_eq!(similarity_score_direct(&v, 3, 0, 0, 0.5), 1.0);
        assert_eq!(similarity_score_direct(&v, 3, 0, 1, 0.5), 0.0);
    }

    #[test]
    fn identical_registers_are_data() {
        let text = "module m (a, b, c, y0, y1, y2); input a, b, c; output y0, y1, y2; wire d0, d1, d2;
            AND2 g0 (.A(a), .B(b), .Y(d0)); AND2 g1 (.A(b), .B(c), .Y(d1)); AND2 g2 (.A(c), .B(a), .Y(d2));
            DFF r0 (.D(d0), .Q(y0)); DFF r1 (.D(d1), .Q(y1)); DFF r2 (.D(d2), .Q(y2)); endmodule";
        let (n, _, _) = view(text);
        let r = classify_registers(&n, &RelicConfig::P1).unwrap();
        assert_eq!(r.pair_counts, vec![2, 2, 2]);
        assert!(r.labels.0.values().all(|&c| c == RegisterClass::Data));
        let strict = RelicConfig { strict_pairs: true, ..RelicConfig::P1 };
        assert_eq!(classify_registers(&n, &strict).unwrap().pair_counts, vec![6, 6, 6]);
    }

    #[test]
    fn dissimilar_register_is_state() {
        let text = "module m (a, b, y0, y1); input a, b; output y0, y1; wire d0;
            AND2 g0 (.A(a), .B(b), .Y(d0)); DFF r0 (.D(d0), .Q(y0)); DFF r1 (.D(a), .Q(y1)); endmodule";
        let (n, _, _) = view(text);
        let r = classify_registers(&n, &RelicConfig { t3: 0, ..RelicConfig::P1 }).unwrap();
        assert_eq!(r.similarity[0][1], 0.0);
        assert_eq!(r.labels.get("r0"), Some(RegisterClass::State));
        assert_eq!(r.labels.get("r1"), Some(RegisterClass::State));
        assert!(r.similarity_csv().starts_with("register,r0,r1\nr0,1,0\n"));
    }

    #[test]
    fn unnormalized_netlist_rejected() {
        let (n, _, _) = view(GATES);
        assert!(classify_registers(&n, &RelicConfig::P1).is_ok());
        let text = "module m (a, b, y); input a, b; output y; XOR2 x (.A(a), .B(b), .Y(y)); endmodule";
        let n = parse_verilog_subset(text, &Arc::new(CellLibrary::standard())).unwrap();
        assert!(matches!(classify_registers(&n, &RelicConfig::P1), Err(RelicError::NotNormalized { .. })));
    }

    #[test]
    fn presets() {
        assert_eq!(RelicConfig::preset("p2").unwrap().t3, 5);
        assert_eq!(RelicConfig::P3.depth, 7);
        assert!(RelicConfig::preset("P4").is_err());
    }
}
