// SPDX-License-Identifier: Apache-2.0

//! Incremental netlist construction over the standard cell kinds.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::netlist::{CellLibrary, Instance, KindId, NetId, Netlist, NetlistError, RegisterClass, RegisterLabels};

/// Structural choices that vary between synthesis variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Style {
    /// Build AND/OR trees from 3-input cells where possible.
    pub wide_gates: bool,
    /// Insert buffers so no net drives more than this many pins.
    pub max_fanout: Option<usize>,
}

#[derive(Clone, Copy, Debug)]
struct Kinds {
    dff: KindId,
    inv: KindId,
    buf: KindId,
    and2: KindId,
    and3: KindId,
    or2: KindId,
    or3: KindId,
    xor2: KindId,
    mux2: KindId,
}

impl Kinds {
    fn find(lib: &CellLibrary) -> Result<Self, NetlistError> {
        let get = |name: &str| {
            lib.find(name)
                .ok_or_else(|| NetlistError::Library(format!("generator needs cell kind {name}")))
        };
        Ok(Self {
            dff: get("DFF")?,
            inv: get("INV")?,
            buf: get("BUF")?,
            and2: get("AND2")?,
            and3: get("AND3")?,
            or2: get("OR2")?,
            or3: get("OR3")?,
            xor2: get("XOR2")?,
            mux2: get("MUX2")?,
        })
    }
}

const UNBOUND: NetId = NetId(usize::MAX);

pub struct Builder {
    lib: Arc<CellLibrary>,
    k: Kinds,
    style: Style,
    nets: Vec<String>,
    /// Forward references: placeholder net -> resolved net.
    alias: HashMap<NetId, NetId>,
    placeholders: Vec<NetId>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    instances: Vec<Instance>,
    labels: BTreeMap<String, RegisterClass>,
    inverted: HashMap<NetId, NetId>,
    gate_count: usize,
    reg_count: usize,
}

impl Builder {
    pub fn new(lib: Arc<CellLibrary>, style: Style) -> Result<Self, NetlistError> {
        let k = Kinds::find(&lib)?;
        Ok(Self {
            lib,
            k,
            style,
            nets: Vec::new(),
            alias: HashMap::new(),
            placeholders: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            instances: Vec::new(),
            labels: BTreeMap::new(),
            inverted: HashMap::new(),
            gate_count: 0,
            reg_count: 0,
        })
    }

    fn net(&mut self) -> NetId {
        let id = NetId(self.nets.len());
        self.nets.push(format!("n{}", id.0));
        id
    }

    pub fn input(&mut self) -> NetId {
        let id = NetId(self.nets.len());
        self.nets.push(format!("in{}", self.inputs.len()));
        self.inputs.push(id);
        id
    }

    pub fn inputs(&mut self, n: usize) -> Vec<NetId> {
        (0..n).map(|_| self.input()).collect()
    }

    pub fn output(&mut self, net: NetId) {
        self.outputs.push(net);
    }

    /// A net to be bound later with [`Builder::bind`].
    pub fn future(&mut self) -> NetId {
        let id = self.net();
        self.placeholders.push(id);
        id
    }

    pub fn bind(&mut self, placeholder: NetId, net: NetId) {
        assert!(self.placeholders.contains(&placeholder), "not a placeholder");
        assert!(self.alias.insert(placeholder, net).is_none(), "placeholder bound twice");
    }

    fn gate(&mut self, kind: KindId, inputs: Vec<NetId>) -> NetId {
        let output = self.net();
        self.instances.push(Instance { id: format!("g{}", self.gate_count), kind, inputs, output });
        self.gate_count += 1;
        output
    }

    pub fn reg(&mut self, d: NetId, class: RegisterClass) -> NetId {
        let output = self.net();
        let id = format!("r{}", self.reg_count);
        self.reg_count += 1;
        self.labels.insert(id.clone(), class);
        self.instances.push(Instance { id, kind: self.k.dff, inputs: vec![d], output });
        output
    }

    pub fn not(&mut self, a: NetId) -> NetId {
        if let Some(&n) = self.inverted.get(&a) {
            return n;
        }
        let n = self.gate(self.k.inv, vec![a]);
        self.inverted.insert(a, n);
        n
    }

    pub fn xor(&mut self, a: NetId, b: NetId) -> NetId {
        self.gate(self.k.xor2, vec![a, b])
    }

    /// `sel ? b : a`.
    pub fn mux(&mut self, sel: NetId, a: NetId, b: NetId) -> NetId {
        self.gate(self.k.mux2, vec![a, b, sel])
    }

    fn tree(&mut self, items: &[NetId], two: KindId, three: KindId) -> NetId {
        assert!(!items.is_empty(), "empty gate tree");
        let width = if self.style.wide_gates { 3 } else { 2 };
        let mut queue: std::collections::VecDeque<NetId> = items.iter().copied().collect();
        while queue.len() > 1 {
            let group: Vec<NetId> = queue.drain(..width.min(queue.len())).collect();
            let kind = if group.len() == 3 { three } else { two };
            let out = self.gate(kind, group);
            queue.push_back(out);
        }
        queue[0]
    }

    pub fn and(&mut self, items: &[NetId]) -> NetId {
        self.tree(items, self.k.and2, self.k.and3)
    }

    pub fn or(&mut self, items: &[NetId]) -> NetId {
        self.tree(items, self.k.or2, self.k.or3)
    }

    /// `bits + addend` (ripple carry, no carry out).
    pub fn add(&mut self, a: &[NetId], b: &[NetId]) -> Vec<NetId> {
        let mut carry: Option<NetId> = None;
        let mut out = Vec::with_capacity(a.len());
        for (&x, &y) in a.iter().zip(b) {
            let p = self.xor(x, y);
            let s = match carry {
                Some(c) => self.xor(p, c),
                None => p,
            };
            let g = self.and(&[x, y]);
            carry = Some(match carry {
                Some(c) => {
                    let t = self.and(&[c, p]);
                    self.or(&[g, t])
                }
                None => g,
            });
            out.push(s);
        }
        out
    }

    fn resolve(&self, mut n: NetId) -> NetId {
        let mut hops = 0;
        while let Some(&m) = self.alias.get(&n) {
            n = m;
            hops += 1;
            assert!(hops <= self.alias.len(), "placeholder cycle");
        }
        n
    }

    fn insert_buffers(&mut self, limit: usize) {
        let limit = limit.max(2);
        let mut sinks: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.nets.len()];
        for (i, inst) in self.instances.iter().enumerate() {
            for (pin, net) in inst.inputs.iter().enumerate() {
                sinks[net.0].push((i, pin));
            }
        }
        let mut work: Vec<(NetId, Vec<(usize, usize)>)> = sinks
            .into_iter()
            .enumerate()
            .filter(|(_, s)| s.len() > limit)
            .map(|(n, s)| (NetId(n), s))
            .collect();
        while let Some((net, pins)) = work.pop() {
            let mut bufs = Vec::new();
            for group in pins.chunks(limit) {
                let out = self.gate(self.k.buf, vec![net]);
                for &(i, pin) in group {
                    self.instances[i].inputs[pin] = out;
                }
                bufs.push((self.instances.len() - 1, 0));
            }
            if bufs.len() > limit {
                work.push((net, bufs));
            }
        }
    }

    pub fn finish(mut self, name: &str) -> Result<Netlist, NetlistError> {
        let resolved: Vec<Instance> = self
            .instances
            .iter()
            .map(|inst| Instance {
                inputs: inst.inputs.iter().map(|&n| self.resolve(n)).collect(),
                ..inst.clone()
            })
            .collect();
        self.instances = resolved;
        self.outputs = self.outputs.iter().map(|&n| self.resolve(n)).collect();
        for &p in &self.placeholders {
            if !self.alias.contains_key(&p) {
                return Err(NetlistError::Undriven { net: self.nets[p.0].clone() });
            }
        }
        if let Some(limit) = self.style.max_fanout {
            self.insert_buffers(limit);
        }
        // every cell output without a sink becomes observable
        let mut used = vec![false; self.nets.len()];
        for inst in &self.instances {
            for n in &inst.inputs {
                used[n.0] = true;
            }
        }
        for &o in &self.outputs {
            used[o.0] = true;
        }
        let dangling: Vec<NetId> =
            self.instances.iter().map(|i| i.output).filter(|o| !used[o.0]).collect();
        self.outputs.extend(dangling);
        let mut seen = vec![false; self.nets.len()];
        self.outputs.retain(|o| !std::mem::replace(&mut seen[o.0], true));

        // drop placeholders and renumber
        let mut remap = vec![UNBOUND; self.nets.len()];
        let mut nets = Vec::with_capacity(self.nets.len());
        let placeholder: std::collections::HashSet<NetId> = self.placeholders.iter().copied().collect();
        for (i, name) in self.nets.iter().enumerate() {
            if !placeholder.contains(&NetId(i)) {
                remap[i] = NetId(nets.len());
                nets.push(name.clone());
            }
        }
        let map = |n: NetId| remap[n.0];
        let instances = self
            .instances
            .iter()
            .map(|inst| Instance {
                id: inst.id.clone(),
                kind: inst.kind,
                inputs: inst.inputs.iter().map(|&n| map(n)).collect(),
                output: map(inst.output),
            })
            .collect();
        Netlist::new(
            name,
            self.lib.clone(),
            nets,
            self.inputs.iter().map(|&n| map(n)).collect(),
            self.outputs.iter().map(|&n| map(n)).collect(),
            instances,
            Some(RegisterLabels(self.labels)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CircuitGraph;

    fn builder(style: Style) -> Builder {
        Builder::new(Arc::new(CellLibrary::standard()), style).unwrap()
    }

    const NARROW: Style = Style { wide_gates: false, max_fanout: None };

    #[test]
    fn toggle_register_through_future() {
        let mut b = builder(NARROW);
        let d = b.future();
        let q = b.reg(d, RegisterClass::Data);
        let nq = b.not(q);
        b.bind(d, nq);
        let n = b.finish("t").unwrap();
        assert_eq!(n.instances().len(), 2);
        let g = CircuitGraph::build(&n);
        assert!(g.scc().on_cycle[0]);
        // the inverter output had a sink; the register output is observed
        assert_eq!(n.primary_outputs().len(), 0);
    }

    #[test]
    fn unbound_future_is_an_error() {
        let mut b = builder(NARROW);
        let d = b.future();
        b.reg(d, RegisterClass::Data);
        assert!(matches!(b.finish("t"), Err(NetlistError::Undriven { .. })));
    }

    #[test]
    fn wide_and_narrow_trees() {
        let mut b = builder(NARROW);
        let x = b.inputs(5);
        let y = b.and(&x);
        b.output(y);
        let n = b.finish("t").unwrap();
        assert_eq!(n.instances().len(), 4);
        let mut b = builder(Style { wide_gates: true, max_fanout: None });
        let x = b.inputs(5);
        let y = b.and(&x);
        b.output(y);
        let n = b.finish("t").unwrap();
        let kinds: Vec<&str> = n.instances().iter().map(|i| n.kind_of(i).name.as_str()).collect();
        assert_eq!(kinds, ["AND3", "AND3"]);
    }

    #[test]
    fn buffering_bounds_fanout() {
        let mut b = builder(Style { wide_gates: false, max_fanout: Some(3) });
        let a = b.input();
        for _ in 0..20 {
            let y = b.xor(a, a);
            b.output(y);
        }
        let n = b.finish("t").unwrap();
        let g = CircuitGraph::build(&n);
        assert!((0..g.node_count()).all(|v| g.out_degree(v) <= 3));
    }

    #[test]
    fn adder_matches_arithmetic() {
        let mut b = builder(NARROW);
        let x = b.inputs(3);
        let y = b.inputs(3);
        let s = b.add(&x, &y);
        for o in s {
            b.output(o);
        }
        let n = b.finish("t").unwrap();
        // evaluate by simulation over all inputs
        for av in 0..8usize {
            for bv in 0..8usize {
                let mut val = vec![false; n.nets().len()];
                for i in 0..3 {
                    val[n.primary_inputs()[i].0] = av >> i & 1 == 1;
                    val[n.primary_inputs()[3 + i].0] = bv >> i & 1 == 1;
                }
                for inst in n.instances() {
                    let ins: Vec<bool> = inst.inputs.iter().map(|x| val[x.0]).collect();
                    val[inst.output.0] = n.kind_of(inst).truth_table.unwrap().eval(&ins);
                }
                let got: usize = (0..3).map(|i| (val[n.primary_outputs()[i].0] as usize) << i).sum();
                assert_eq!(got, (av + bv) % 8);
            }
        }
    }
}
