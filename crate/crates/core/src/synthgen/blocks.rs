// SPDX-License-Identifier: Apache-2.0

//! Datapath blocks. Every register built here is labeled data.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::builder::Builder;
use super::fsm::product_terms;
use crate::netlist::{NetId, RegisterClass};

const DATA: RegisterClass = RegisterClass::Data;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageLogic {
    None,
    Xor,
    /// Each bit gated by a control signal.
    And,
}

/// A datapath block. Word widths not given here come from the recipe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Block {
    Pipeline { stages: usize, logic: StageLogic },
    /// Single-bit register chain on a primary input.
    Synchronizer { stages: usize },
    /// Register with load enable.
    LoadReg,
    ShiftReg,
    Accumulator,
    /// Enable/clear counter with terminal count; `width` is fixed.
    Counter { width: usize },
    /// Free-running modulo counter with synchronous reset, built from
    /// sum-of-products next-state logic.
    FreeCounter { modulus: usize },
    Mixer { words: usize, adder: bool },
    RegisterFile { words: usize },
}

/// Shared state while building one design.
pub struct Ctx {
    pub b: Builder,
    pub rst: NetId,
    pub rng: ChaCha8Rng,
    controls: Vec<NetId>,
    next_control: usize,
    words: Vec<Vec<NetId>>,
    pub status: Vec<NetId>,
}

impl Ctx {
    pub fn new(b: Builder, rst: NetId, controls: Vec<NetId>, rng: ChaCha8Rng) -> Self {
        assert!(!controls.is_empty());
        Self { b, rst, rng, controls, next_control: 0, words: Vec::new(), status: Vec::new() }
    }

    /// Control signals are handed out round-robin.
    pub fn control(&mut self) -> NetId {
        let c = self.controls[self.next_control % self.controls.len()];
        self.next_control += 1;
        c
    }

    /// A data word: an earlier block's output half the time, fresh primary
    /// inputs otherwise.
    pub fn word(&mut self, width: usize) -> Vec<NetId> {
        if !self.words.is_empty() && self.rng.random_bool(0.5) {
            let w = &self.words[self.rng.random_range(0..self.words.len())];
            return (0..width).map(|i| w[i % w.len()]).collect();
        }
        self.b.inputs(width)
    }

    fn regs(&mut self, width: usize) -> (Vec<NetId>, Vec<NetId>) {
        let d: Vec<NetId> = (0..width).map(|_| self.b.future()).collect();
        let q = d.iter().map(|&x| self.b.reg(x, DATA)).collect();
        (d, q)
    }

    fn bind(&mut self, d: &[NetId], v: &[NetId]) {
        for (&x, &y) in d.iter().zip(v) {
            self.b.bind(x, y);
        }
    }

    fn hold_or(&mut self, sel: NetId, q: &[NetId], v: &[NetId]) -> Vec<NetId> {
        q.iter().zip(v).map(|(&a, &b)| self.b.mux(sel, a, b)).collect()
    }

    pub fn build(&mut self, block: Block, width: usize) {
        let out = match block {
            Block::Pipeline { stages, logic } => self.pipeline(width, stages, logic),
            Block::Synchronizer { stages } => {
                let mut x = self.b.input();
                for _ in 0..stages {
                    x = self.b.reg(x, DATA);
                }
                self.status.push(x);
                vec![x]
            }
            Block::LoadReg => {
                let (en, din) = (self.control(), self.word(width));
                let (d, q) = self.regs(width);
                let v = self.hold_or(en, &q, &din);
                self.bind(&d, &v);
                q
            }
            Block::ShiftReg => {
                let (en, serial) = (self.control(), self.b.input());
                let (d, q) = self.regs(width);
                let shifted: Vec<NetId> = std::iter::once(serial).chain(q[..width - 1].iter().copied()).collect();
                let v = self.hold_or(en, &q, &shifted);
                self.bind(&d, &v);
                self.status.push(q[width - 1]);
                q
            }
            Block::Accumulator => {
                let (en, din) = (self.control(), self.word(width));
                let (d, q) = self.regs(width);
                let sum = self.b.add(&q, &din);
                let v = self.hold_or(en, &q, &sum);
                self.bind(&d, &v);
                self.status.push(q[width - 1]);
                q
            }
            Block::Counter { width } => self.counter(width),
            Block::FreeCounter { modulus } => self.free_counter(modulus),
            Block::Mixer { words, adder } => self.mixer(width, words, adder),
            Block::RegisterFile { words } => self.register_file(width, words),
        };
        self.words.push(out);
    }

    fn pipeline(&mut self, width: usize, stages: usize, logic: StageLogic) -> Vec<NetId> {
        let mut x = self.word(width);
        let gate = if logic == StageLogic::And { Some(self.control()) } else { None };
        for _ in 0..stages {
            let v: Vec<NetId> = match logic {
                StageLogic::None => x.clone(),
                StageLogic::Xor => (0..width).map(|i| self.b.xor(x[i], x[(i + 1) % width])).collect(),
                StageLogic::And => x.iter().map(|&a| self.b.and(&[a, gate.unwrap()])).collect(),
            };
            x = v.into_iter().map(|n| self.b.reg(n, DATA)).collect();
        }
        x
    }

    fn counter(&mut self, width: usize) -> Vec<NetId> {
        let (en, clr) = (self.control(), self.control());
        let (d, q) = self.regs(width);
        let mut carry = en;
        let mut sum = Vec::with_capacity(width);
        for &bit in &q {
            sum.push(self.b.xor(bit, carry));
            carry = self.b.and(&[bit, carry]);
        }
        let tc = self.b.and(&q);
        let clear = self.b.or(&[tc, clr]);
        let keep = self.b.not(clear);
        let v: Vec<NetId> = sum.iter().map(|&s| self.b.and(&[keep, s])).collect();
        self.bind(&d, &v);
        self.status.push(tc);
        q
    }

    fn free_counter(&mut self, modulus: usize) -> Vec<NetId> {
        assert!(modulus >= 2);
        let bits = (usize::BITS - (modulus - 1).leading_zeros()) as usize;
        let (d, q) = self.regs(bits);
        let not_rst = self.b.not(self.rst);
        for k in 0..bits {
            let minterms: Vec<usize> = (0..modulus).filter(|c| ((c + 1) % modulus) >> k & 1 == 1).collect();
            let v = if minterms.is_empty() {
                self.b.and(&[not_rst, self.rst])
            } else {
                let terms = product_terms(&mut self.b, &q, &[not_rst], &minterms);
                self.b.or(&terms)
            };
            self.b.bind(d[k], v);
        }
        let tick = product_terms(&mut self.b, &q, &[], &[modulus - 1])[0];
        self.status.push(tick);
        q
    }

    fn mixer(&mut self, width: usize, words: usize, adder: bool) -> Vec<NetId> {
        let ld = self.control();
        let din: Vec<Vec<NetId>> = (0..words).map(|_| self.word(width)).collect();
        let regs: Vec<(Vec<NetId>, Vec<NetId>)> = (0..words).map(|_| self.regs(width)).collect();
        for j in 0..words {
            let (a, b) = (&regs[j].1, &regs[(j + 1) % words].1);
            let rot: Vec<NetId> = (0..width).map(|i| b[(i + 1) % width]).collect();
            let mix = if adder {
                self.b.add(a, &rot)
            } else {
                a.iter().zip(&rot).map(|(&x, &y)| self.b.xor(x, y)).collect()
            };
            let v = self.hold_or(ld, &mix, &din[j]);
            self.bind(&regs[j].0, &v);
        }
        self.status.push(regs[0].1[width - 1]);
        regs[words - 1].1.clone()
    }

    fn register_file(&mut self, width: usize, words: usize) -> Vec<NetId> {
        assert!(words.is_power_of_two() && words >= 2);
        let abits = words.trailing_zeros() as usize;
        let we = self.control();
        let addr_in = self.word(abits);
        let addr: Vec<NetId> = addr_in.iter().map(|&a| self.b.reg(a, DATA)).collect();
        let din = self.word(width);
        let mut rows = Vec::with_capacity(words);
        for j in 0..words {
            let mut lits = vec![we];
            for (k, &a) in addr.iter().enumerate() {
                lits.push(if j >> k & 1 == 1 { a } else { self.b.not(a) });
            }
            let wj = self.b.and(&lits);
            let (d, q) = self.regs(width);
            let v = self.hold_or(wj, &q, &din);
            self.bind(&d, &v);
            rows.push(q);
        }
        // read mux tree, low address bit first
        let mut level = rows;
        for &a in &addr {
            level = level
                .chunks(2)
                .map(|p| p[0].iter().zip(&p[1]).map(|(&x, &y)| self.b.mux(a, x, y)).collect())
                .collect();
        }
        level[0].iter().map(|&x| self.b.reg(x, DATA)).collect()
    }
}
