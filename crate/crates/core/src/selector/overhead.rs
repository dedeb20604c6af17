// SPDX-License-Identifier: Apache-2.0

//! Mapping a selector cover onto {INV, NAND2, NOR2} and comparing it with
//! the multiplier it guards.
//!
//! The cover is written as an AND/OR expression, both as a flat sum of
//! products and with the literals shared by every term factored out; the
//! cheaper mapping is kept. n-ary nodes are reduced pairwise,
//! earliest-arriving operands first. Every node can then be produced in
//! true or complemented form: `NAND(x, y)` gives `¬(x y)` from true
//! operands, `NOR(x, y)` gives `x y` from complemented ones, and dually for
//! OR. A bottom-up pass picks, per node and form, the cheapest of the direct
//! gate and an inverter on the other form, ordered by (depth, gates).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::logicsim::{lane_mask, uniform_pair, InputPair, Simulator};
use crate::netlist::{Arch, Builder, Netlist, Role, Sig};
use crate::Result;

use super::SelectorFn;

#[derive(Clone, Copy, PartialEq)]
enum Op {
    And,
    Or,
}

enum Expr {
    Lit { pos: usize, positive: bool },
    Node(Op, Vec<Expr>),
}

/// (depth, gates)
type Cost = (usize, usize);

#[derive(Clone, Copy)]
enum Plan {
    Input,
    Direct,
    ViaInv,
}

#[derive(Clone, Copy)]
enum Kind {
    Leaf(usize),
    Gate(Op, usize, usize),
}

/// Binary node; `cost[f]` and `plan[f]` are for the true (`f = 1`) and
/// complemented (`f = 0`) form.
struct Node {
    kind: Kind,
    cost: [Cost; 2],
    plan: [Plan; 2],
}

fn add(a: Cost, b: Cost) -> Cost {
    (a.0.max(b.0) + 1, a.1 + b.1 + 1)
}

fn settle(kind: Kind, direct: [Cost; 2]) -> Node {
    let mut cost = direct;
    let mut plan = [Plan::Direct; 2];
    for f in 0..2 {
        let via = (direct[1 - f].0 + 1, direct[1 - f].1 + 1);
        if via < cost[f] {
            cost[f] = via;
            plan[f] = Plan::ViaInv;
        }
    }
    Node { kind, cost, plan }
}

#[derive(Default)]
struct Mapper {
    nodes: Vec<Node>,
}

impl Mapper {
    fn min_depth(&self, i: usize) -> usize {
        self.nodes[i].cost[0].0.min(self.nodes[i].cost[1].0)
    }

    fn gate(&mut self, op: Op, l: usize, r: usize) -> usize {
        let (cl, cr) = (self.nodes[l].cost, self.nodes[r].cost);
        // For either operator one gate maps true operands to the complemented
        // result and the other maps complemented operands to the true result.
        let direct = [add(cl[1], cr[1]), add(cl[0], cr[0])];
        self.nodes.push(settle(Kind::Gate(op, l, r), direct));
        self.nodes.len() - 1
    }

    fn lower(&mut self, e: &Expr) -> usize {
        match *e {
            Expr::Lit { pos, positive } => {
                let (t, c) = if positive { ((0, 0), (1, 1)) } else { ((1, 1), (0, 0)) };
                let plan = if positive { [Plan::ViaInv, Plan::Input] } else { [Plan::Input, Plan::ViaInv] };
                self.nodes.push(Node { kind: Kind::Leaf(pos), cost: [c, t], plan });
                self.nodes.len() - 1
            }
            Expr::Node(op, ref xs) => {
                let mut ops: Vec<usize> = xs.iter().map(|x| self.lower(x)).collect();
                while ops.len() > 1 {
                    // Earliest first; among equals, those cheaper in the same
                    // form end up adjacent.
                    ops.sort_by_key(|&i| (self.min_depth(i), self.nodes[i].cost[1] <= self.nodes[i].cost[0]));
                    let (l, r) = (ops.remove(0), ops.remove(0));
                    let g = self.gate(op, l, r);
                    ops.push(g);
                }
                ops[0]
            }
        }
    }
}

/// Polarity `true` means the emitted net carries the source's value for a
/// leaf, or the node's own value for a gate.
struct Emitter<'a> {
    mapper: &'a Mapper,
    b: Builder,
    width: usize,
    inputs: HashMap<usize, Sig>,
    done: HashMap<(usize, usize), Sig>,
}

impl Emitter<'_> {
    fn input(&mut self, pos: usize) -> Sig {
        let width = self.width;
        let b = &mut self.b;
        *self.inputs.entry(pos).or_insert_with(|| {
            b.input(if pos < width { Role::A(pos as u8) } else { Role::B((pos - width) as u8) })
        })
    }

    /// Net carrying node `i` in form `f`.
    fn emit(&mut self, i: usize, f: usize) -> Sig {
        if let Some(&s) = self.done.get(&(i, f)) {
            return s;
        }
        let node = &self.mapper.nodes[i];
        let (kind, plan) = (node.kind, node.plan[f]);
        let s = match (plan, kind) {
            (Plan::Input, Kind::Leaf(pos)) => self.input(pos),
            (Plan::ViaInv, _) => {
                let o = self.emit(i, 1 - f);
                self.b.inv(o)
            }
            (Plan::Direct, Kind::Gate(op, l, r)) => {
                // Complemented result from true operands and vice versa.
                let (x, y) = (self.emit(l, 1 - f), self.emit(r, 1 - f));
                match (op, f) {
                    (Op::And, 0) | (Op::Or, 1) => self.b.nand(x, y),
                    _ => self.b.nor(x, y),
                }
            }
            _ => unreachable!("leaf plans are Input or ViaInv"),
        };
        self.done.insert((i, f), s);
        s
    }
}

/// Literal positions, as multiplier input bits, of each cover term.
fn terms(s: &SelectorFn) -> Vec<Vec<(usize, bool)>> {
    s.cubes()
        .iter()
        .map(|c| c.to_literals(s.k()).into_iter().map(|l| (s.bits()[l.unsigned_abs() as usize - 1], l > 0)).collect())
        .collect()
}

fn lit((pos, positive): (usize, bool)) -> Expr {
    Expr::Lit { pos, positive }
}

fn and_of(t: &[(usize, bool)]) -> Expr {
    Expr::Node(Op::And, t.iter().copied().map(lit).collect())
}

/// Plain sum of products.
fn flat(terms: &[Vec<(usize, bool)>]) -> Expr {
    Expr::Node(Op::Or, terms.iter().map(|t| and_of(t)).collect())
}

/// `common ∧ (residual_1 ∨ … ∨ residual_m)`, or `None` when no literal is
/// shared by every term.
fn factored(terms: &[Vec<(usize, bool)>]) -> Option<Expr> {
    let common: Vec<(usize, bool)> = terms[0].iter().copied().filter(|l| terms.iter().all(|t| t.contains(l))).collect();
    let residual: Vec<Vec<(usize, bool)>> =
        terms.iter().map(|t| t.iter().copied().filter(|l| !common.contains(l)).collect()).collect();
    if common.is_empty() || residual.iter().any(|r| r.is_empty()) {
        return None;
    }
    let mut and: Vec<Expr> = common.into_iter().map(lit).collect();
    and.push(flat(&residual));
    Some(Expr::Node(Op::And, and))
}

/// Not-min-value: neither operand has the sign bit alone set.
fn not_guard(width: usize) -> Vec<Expr> {
    (0..2)
        .map(|op| {
            // ¬(s ∧ ¬x_{w-2} ∧ … ∧ ¬x_0) = ¬s ∨ x_{w-2} ∨ … ∨ x_0
            let base = op * width;
            Expr::Node(Op::Or, (0..width).map(|i| lit((base + i, i != width - 1))).collect())
        })
        .collect()
}

/// Gate-level realization of the selector. `None` for constant selectors
/// (no gates; the output is tied).
pub fn selector_netlist(s: &SelectorFn, with_guard: bool) -> Option<Netlist> {
    let width = s.width();
    let full = s.cubes().len() == 1 && s.cubes()[0].literals(s.k()) == 0;
    if s.is_constant_false() || (full && !with_guard) {
        return None;
    }
    // The core is chosen on its own cost so that the guarded and unguarded
    // netlists share it.
    let core = if full {
        None
    } else {
        let t = terms(s);
        let lower = |e: &Expr| {
            let mut m = Mapper::default();
            let root = m.lower(e);
            m.nodes[root].cost[1]
        };
        let flat = flat(&t);
        Some(match factored(&t) {
            Some(f) if lower(&f) < lower(&flat) => f,
            _ => flat,
        })
    };
    let mut and: Vec<Expr> = core.into_iter().collect();
    if with_guard {
        and.extend(not_guard(width));
    }
    let mut mapper = Mapper::default();
    let root = mapper.lower(&Expr::Node(Op::And, and));
    let mut e = Emitter { mapper: &mapper, b: Builder::new(), width, inputs: HashMap::new(), done: HashMap::new() };
    let out = e.emit(root, 1);
    Some(e.b.finish(Arch::Generic, width, &[out]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    /// Gates of the mapped cover alone.
    pub sm_gates: usize,
    pub sm_depth: usize,
    /// Additional gates the min-value guard costs.
    pub guard_gates: usize,
    /// Depth of the selector including the guard.
    pub guarded_depth: usize,
    pub reference_gates: usize,
    pub reference_depth: usize,
    pub area_ratio: f64,
    pub delay_ratio: f64,
    pub guarded_area_ratio: f64,
    pub guarded_delay_ratio: f64,
    /// Output toggles per vector, summed over gates, relative to the reference.
    pub power_ratio: f64,
}

const ACTIVITY_VECTORS: usize = 4096;
const ACTIVITY_SEED: u64 = 0x7067_6c65;

/// Gate output toggles per applied vector under a uniform random sequence.
fn activity(n: &Netlist, width: usize) -> Result<f64> {
    let sim = Simulator::new(n)?;
    let gate_nets: Vec<u32> = n.gates.iter().map(|g| g.output).collect();
    let mut block = sim.new_block();
    let mut prev_last: Option<Vec<u64>> = None;
    let mut toggles = 0u64;
    for start in (0..ACTIVITY_VECTORS).step_by(64) {
        let v: Vec<InputPair> = (start..start + 64).map(|i| uniform_pair(ACTIVITY_SEED, i as u64, width)).collect();
        sim.eval_block(&v, &mut block);
        let inner = lane_mask(63);
        let mut last = Vec::with_capacity(gate_nets.len());
        for (g, &net) in gate_nets.iter().enumerate() {
            let w = block.nets[net as usize];
            toggles += ((w ^ (w >> 1)) & inner).count_ones() as u64;
            if let Some(p) = &prev_last {
                toggles += p[g] ^ (w & 1);
            }
            last.push(w >> 63);
        }
        prev_last = Some(last);
    }
    Ok(toggles as f64 / (ACTIVITY_VECTORS - 1) as f64)
}

pub fn overhead(s: &SelectorFn, reference: &Netlist) -> Result<OverheadReport> {
    let reference_gates = reference.gates.len();
    let reference_depth = reference.logic_depth();
    let core = selector_netlist(s, false);
    let guarded = selector_netlist(s, true);
    let gates = |n: &Option<Netlist>| n.as_ref().map_or(0, |n| n.gates.len());
    let depth = |n: &Option<Netlist>| n.as_ref().map_or(0, |n| n.logic_depth());
    let sm_gates = gates(&core);
    let total_gates = gates(&guarded);
    let sm_depth = depth(&core);
    let guarded_depth = depth(&guarded);
    let power_ratio = match &core {
        Some(c) => activity(c, s.width())? / activity(reference, reference.width)?,
        None => 0.0,
    };
    Ok(OverheadReport {
        sm_gates,
        sm_depth,
        guard_gates: total_gates.saturating_sub(sm_gates),
        guarded_depth,
        reference_gates,
        reference_depth,
        area_ratio: sm_gates as f64 / reference_gates as f64,
        delay_ratio: sm_depth as f64 / reference_depth as f64,
        guarded_area_ratio: total_gates as f64 / reference_gates as f64,
        guarded_delay_ratio: guarded_depth as f64 / reference_depth as f64,
        power_ratio,
    })
}
