// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::builder::Builder;
use super::StateEncoding;
use crate::graph::tarjan;
use crate::netlist::{NetId, RegisterClass};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MachineType {
    Moore,
    Mealy,
}

/// A finite state machine. Inputs are grouped into classes: class `c` is
/// the input vector whose bit `i` is `(c >> i) & 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FsmSpec {
    pub states: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub initial: usize,
    /// `transitions[s][c]`: next state from `s` under input class `c`.
    pub transitions: Vec<Vec<usize>>,
    /// `output_table[s][c][o]`; independent of `c` for Moore machines.
    pub output_table: Vec<Vec<Vec<bool>>>,
    pub encoding: StateEncoding,
    pub machine: MachineType,
}

impl FsmSpec {
    pub fn classes(&self) -> usize {
        1 << self.inputs
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.states < 2 {
            return Err("need at least two states".into());
        }
        if self.initial >= self.states {
            return Err(format!("initial state {} out of range", self.initial));
        }
        if self.transitions.len() != self.states
            || self.transitions.iter().any(|r| r.len() != self.classes() || r.iter().any(|&t| t >= self.states))
        {
            return Err("transition table is not total".into());
        }
        if self.output_table.len() != self.states
            || self.output_table.iter().any(|r| {
                r.len() != self.classes() || r.iter().any(|o| o.len() != self.outputs)
            })
        {
            return Err("output table has the wrong shape".into());
        }
        if self.machine == MachineType::Moore
            && self.output_table.iter().any(|r| r.iter().any(|o| *o != r[0]))
        {
            return Err("Moore outputs depend on inputs".into());
        }
        Ok(())
    }

    pub fn is_strongly_connected(&self) -> bool {
        let succ: Vec<Vec<usize>> = self
            .transitions
            .iter()
            .map(|r| {
                let mut v = r.clone();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        tarjan(&succ).component_count() == 1
    }

    pub fn state_registers(&self) -> usize {
        self.encoding.state_bits(self.states)
    }

    /// Random machine whose transition graph is strongly connected: a
    /// Hamiltonian cycle in random order plus up to two extra targets per
    /// state.
    pub fn random(
        states: usize,
        inputs: usize,
        outputs: usize,
        machine: MachineType,
        encoding: StateEncoding,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(states >= 2 && inputs >= 1);
        let classes = 1usize << inputs;
        let mut order: Vec<usize> = (0..states).collect();
        order.shuffle(rng);
        let mut transitions = vec![Vec::new(); states];
        for (pos, &s) in order.iter().enumerate() {
            let succ = order[(pos + 1) % states];
            let mut targets = vec![succ];
            let extra = rng.random_range(0..=2usize).min(classes - 1);
            for _ in 0..extra {
                targets.push(rng.random_range(0..states));
            }
            let mut row: Vec<usize> = (0..classes).map(|c| targets[c % targets.len()]).collect();
            row.shuffle(rng);
            transitions[s] = row;
        }
        let output_table = (0..states)
            .map(|s| {
                let moore: Vec<bool> = (0..outputs).map(|o| (s + o) % 3 == 0 || rng.random_bool(0.3)).collect();
                (0..classes)
                    .map(|c| match machine {
                        MachineType::Moore => moore.clone(),
                        MachineType::Mealy => moore
                            .iter()
                            .enumerate()
                            .map(|(o, &m)| m && (c >> (o % inputs)) & 1 == 1)
                            .collect(),
                    })
                    .collect()
            })
            .collect();
        Self { states, inputs, outputs, initial: 0, transitions, output_table, encoding, machine }
    }
}

/// A product term: `care` bits must equal the matching bits of `value`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cube {
    pub care: usize,
    pub value: usize,
}

/// Sum-of-products cover of `minterms` over `bits` variables: prime
/// implicants by pairwise merging, then a greedy cover.
pub fn cover(minterms: &[usize], bits: usize) -> Vec<Cube> {
    let full = (1usize << bits) - 1;
    let mut level: Vec<Cube> = minterms.iter().map(|&m| Cube { care: full, value: m }).collect();
    level.sort_unstable();
    level.dedup();
    let mut primes = Vec::new();
    while !level.is_empty() {
        let mut merged = vec![false; level.len()];
        let mut next = Vec::new();
        for a in 0..level.len() {
            for b in a + 1..level.len() {
                let (x, y) = (level[a], level[b]);
                let diff = x.value ^ y.value;
                if x.care == y.care && diff.count_ones() == 1 && diff & x.care != 0 {
                    merged[a] = true;
                    merged[b] = true;
                    next.push(Cube { care: x.care & !diff, value: x.value & !diff });
                }
            }
        }
        primes.extend(level.iter().zip(&merged).filter(|(_, &m)| !m).map(|(c, _)| *c));
        next.sort_unstable();
        next.dedup();
        level = next;
    }
    let covers = |c: &Cube, m: usize| m & c.care == c.value & c.care;
    let mut left: Vec<usize> = minterms.to_vec();
    left.sort_unstable();
    left.dedup();
    let mut chosen = Vec::new();
    while !left.is_empty() {
        let best = primes
            .iter()
            .max_by_key(|c| (left.iter().filter(|&&m| covers(c, m)).count(), std::cmp::Reverse(**c)))
            .copied()
            .expect("minterms are covered by their own cubes");
        left.retain(|&m| !covers(&best, m));
        chosen.push(best);
    }
    chosen
}

/// Nets of a synthesized machine.
pub struct FsmNets {
    pub state: Vec<NetId>,
    pub outputs: Vec<NetId>,
}

/// One product term per cube of a cover of `minterms` over `vars`, each
/// ANDed with `guard`.
pub(crate) fn product_terms(
    b: &mut Builder,
    vars: &[NetId],
    guard: &[NetId],
    minterms: &[usize],
) -> Vec<NetId> {
    cover(minterms, vars.len())
        .into_iter()
        .map(|c| {
            let mut lits = guard.to_vec();
            for (i, &v) in vars.iter().enumerate() {
                if c.care >> i & 1 == 1 {
                    lits.push(if c.value >> i & 1 == 1 { v } else { b.not(v) });
                }
            }
            b.and(&lits)
        })
        .collect()
}

/// Builds the machine with synchronous reset `rst` to the initial state.
/// State registers are labeled state.
pub fn synthesize(b: &mut Builder, machine: &FsmSpec, inputs: &[NetId], rst: NetId) -> FsmNets {
    assert_eq!(inputs.len(), machine.inputs);
    let bits = machine.state_registers();
    let d: Vec<NetId> = (0..bits).map(|_| b.future()).collect();
    let state: Vec<NetId> = d.iter().map(|&x| b.reg(x, RegisterClass::State)).collect();

    // state s is encoded as code[s]; the initial state gets the all-zero
    // binary code
    let code: Vec<usize> = (0..machine.states)
        .map(|s| (s + machine.states - machine.initial) % machine.states)
        .collect();
    let decode: Vec<NetId> = match machine.encoding {
        StateEncoding::OneHot => state.clone(),
        StateEncoding::Binary => (0..machine.states)
            .map(|s| {
                let lits: Vec<NetId> = (0..bits)
                    .map(|k| if code[s] >> k & 1 == 1 { state[k] } else { b.not(state[k]) })
                    .collect();
                b.and(&lits)
            })
            .collect(),
    };

    // terms[s][t]: product terms for the transition s -> t
    let mut into: Vec<Vec<NetId>> = vec![Vec::new(); machine.states];
    for s in 0..machine.states {
        for t in 0..machine.states {
            let classes: Vec<usize> = (0..machine.classes()).filter(|&c| machine.transitions[s][c] == t).collect();
            if !classes.is_empty() {
                let terms = product_terms(b, inputs, &[decode[s]], &classes);
                into[t].extend(terms);
            }
        }
    }
    let not_rst = b.not(rst);
    match machine.encoding {
        StateEncoding::OneHot => {
            for t in 0..machine.states {
                let next = b.or(&into[t]);
                let v = if t == machine.initial { b.or(&[rst, next]) } else { b.and(&[not_rst, next]) };
                b.bind(d[t], v);
            }
        }
        StateEncoding::Binary => {
            for k in 0..bits {
                let terms: Vec<NetId> = (0..machine.states)
                    .filter(|&t| code[t] >> k & 1 == 1)
                    .flat_map(|t| into[t].iter().copied())
                    .collect();
                let next = b.or(&terms);
                let v = b.and(&[not_rst, next]);
                b.bind(d[k], v);
            }
        }
    }

    let outputs = (0..machine.outputs)
        .map(|o| {
            let mut terms = Vec::new();
            for s in 0..machine.states {
                let classes: Vec<usize> =
                    (0..machine.classes()).filter(|&c| machine.output_table[s][c][o]).collect();
                if classes.is_empty() {
                    continue;
                }
                terms.extend(product_terms(b, inputs, &[decode[s]], &classes));
            }
            if terms.is_empty() {
                // never asserted: tie to a reset-gated state bit so the net has a driver
                terms.push(b.and(&[rst, state[0]]));
            }
            b.or(&terms)
        })
        .collect();
    FsmNets { state, outputs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CircuitGraph;
    use crate::netlist::CellLibrary;
    use crate::synthgen::builder::Style;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn evaluate(cubes: &[Cube], m: usize) -> bool {
        cubes.iter().any(|c| m & c.care == c.value & c.care)
    }

    #[test]
    fn cover_is_exact() {
        for bits in 1..=4 {
            for f in 0u32..(1 << (1 << bits)).min(4096) {
                let minterms: Vec<usize> = (0..1 << bits).filter(|m| f >> m & 1 == 1).collect();
                if minterms.is_empty() {
                    continue;
                }
                let c = cover(&minterms, bits);
                for m in 0..1 << bits {
                    assert_eq!(evaluate(&c, m), minterms.contains(&m), "bits {bits} f {f:b} m {m}");
                }
            }
        }
    }

    #[test]
    fn cover_merges_adjacent() {
        assert_eq!(cover(&[0, 1, 2, 3], 2), vec![Cube { care: 0, value: 0 }]);
        assert_eq!(cover(&[2, 3], 2), vec![Cube { care: 2, value: 2 }]);
    }

    #[test]
    fn random_machines_are_valid_and_strongly_connected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for states in 2..12 {
            for machine in [MachineType::Moore, MachineType::Mealy] {
                let f = FsmSpec::random(states, 2, 3, machine, StateEncoding::OneHot, &mut rng);
                f.validate().unwrap();
                assert!(f.is_strongly_connected());
            }
        }
    }

    fn build(encoding: StateEncoding, states: usize) -> (crate::netlist::Netlist, FsmSpec) {
        let mut rng = ChaCha8Rng::seed_from_u64(states as u64);
        let machine = FsmSpec::random(states, 2, 2, MachineType::Mealy, encoding, &mut rng);
        let mut b = Builder::new(Arc::new(CellLibrary::standard()), Style { wide_gates: false, max_fanout: None })
            .unwrap();
        let rst = b.input();
        let ins = b.inputs(2);
        let nets = synthesize(&mut b, &machine, &ins, rst);
        for o in nets.outputs {
            b.output(o);
        }
        (b.finish("fsm").unwrap(), machine)
    }

    #[test]
    fn register_counts_follow_encoding() {
        let (n, _) = build(StateEncoding::OneHot, 5);
        assert_eq!(n.labels().unwrap().count(RegisterClass::State), 5);
        let (n, _) = build(StateEncoding::Binary, 5);
        assert_eq!(n.labels().unwrap().count(RegisterClass::State), 3);
    }

    #[test]
    fn state_registers_lie_on_cycles() {
        for encoding in [StateEncoding::OneHot, StateEncoding::Binary] {
            for states in 2..10 {
                let (n, _) = build(encoding, states);
                let g = CircuitGraph::build(&n);
                let scc = g.scc();
                assert!(g.registers().all(|v| scc.on_cycle[v]), "{encoding:?} {states}");
            }
        }
    }

    /// Simulates the synthesized netlist against the specification.
    #[test]
    fn netlist_implements_the_machine() {
        for encoding in [StateEncoding::OneHot, StateEncoding::Binary] {
            let (n, machine) = build(encoding, 6);
            let regs: Vec<&crate::netlist::Instance> = n.registers().map(|(_, i)| i).collect();
            let mut q = vec![false; regs.len()];
            let mut state = machine.initial;
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            for step in 0..200 {
                let rst = step == 0;
                let class = rng.random_range(0..machine.classes());
                let mut val = vec![false; n.nets().len()];
                val[n.primary_inputs()[0].0] = rst;
                for i in 0..2 {
                    val[n.primary_inputs()[1 + i].0] = class >> i & 1 == 1;
                }
                for (r, &bit) in regs.iter().zip(&q) {
                    val[r.output.0] = bit;
                }
                // instances are emitted in dependency order apart from registers
                for inst in n.instances() {
                    if let Some(tt) = n.kind_of(inst).truth_table {
                        let ins: Vec<bool> = inst.inputs.iter().map(|x| val[x.0]).collect();
                        val[inst.output.0] = tt.eval(&ins);
                    }
                }
                if !rst {
                    for o in 0..machine.outputs {
                        let po = n.primary_outputs()[o];
                        assert_eq!(val[po.0], machine.output_table[state][class][o], "step {step}");
                    }
                    state = machine.transitions[state][class];
                } else {
                    state = machine.initial;
                }
                q = regs.iter().map(|r| val[r.inputs[0].0]).collect();
            }
        }
    }
}
