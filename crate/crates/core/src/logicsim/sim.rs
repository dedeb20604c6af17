// SPDX-License-Identifier: Apache-2.0

//! Bit-parallel evaluation: 64 input vectors per `u64` net word.

use crate::netlist::{Arch, GateKind, NetId, Netlist, Role};
use crate::{Error, Result};

use super::InputPair;

#[derive(Clone, Copy)]
struct CGate {
    kind: GateKind,
    a: u32,
    b: u32,
    out: u32,
}

/// A netlist flattened into evaluation order.
#[derive(Clone)]
pub struct Simulator {
    arch: Arch,
    width: usize,
    nets: usize,
    gates: Vec<CGate>,
    inputs: Vec<(u32, Role)>,
    outputs: Vec<u32>,
    site_nets: Vec<NetId>,
}

/// Values of every net across up to 64 lanes.
pub struct Block {
    pub nets: Vec<u64>,
    pub lanes: usize,
}

impl Block {
    pub fn mask(&self) -> u64 {
        lane_mask(self.lanes)
    }
}

pub fn lane_mask(lanes: usize) -> u64 {
    if lanes >= 64 {
        u64::MAX
    } else {
        (1u64 << lanes) - 1
    }
}

impl Simulator {
    pub fn new(n: &Netlist) -> Result<Self> {
        n.validate().map_err(Error::InvalidNetlist)?;
        let order = n.topo_order().expect("validated netlist is acyclic");
        let gates = order
            .iter()
            .map(|&i| {
                let g = &n.gates[i];
                let a = g.inputs[0];
                let b = *g.inputs.get(1).unwrap_or(&a);
                CGate { kind: g.kind, a, b, out: g.output }
            })
            .collect();
        Ok(Simulator {
            arch: n.arch,
            width: n.width,
            nets: n.net_count(),
            gates,
            inputs: n.inputs.iter().map(|p| (p.net, p.role)).collect(),
            outputs: n.outputs.clone(),
            site_nets: n.site_nets(),
        })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn net_count(&self) -> usize {
        self.nets
    }

    pub fn site_nets(&self) -> &[NetId] {
        &self.site_nets
    }

    pub fn site_count(&self) -> usize {
        self.site_nets.len()
    }

    pub fn operand_mask(&self) -> u64 {
        lane_mask(self.width)
    }

    pub fn check(&self, v: &InputPair) -> Result<()> {
        let m = self.operand_mask();
        if v.a & !m != 0 || v.b & !m != 0 {
            return Err(Error::input(format!(
                "operands ({:#x}, {:#x}) do not fit {} bits",
                v.a, v.b, self.width
            )));
        }
        Ok(())
    }

    /// Evaluate up to 64 vectors. Operand patterns must already fit the width.
    pub fn eval_block(&self, vectors: &[InputPair], block: &mut Block) {
        debug_assert!(vectors.len() <= 64);
        block.nets.clear();
        block.nets.resize(self.nets, 0);
        block.lanes = vectors.len();
        for &(net, role) in &self.inputs {
            let mut w = 0u64;
            for (lane, v) in vectors.iter().enumerate() {
                let bit = match role {
                    Role::A(i) => (v.a >> i) & 1,
                    Role::B(i) => (v.b >> i) & 1,
                    Role::CarryIn => v.cin as u64,
                };
                w |= bit << lane;
            }
            block.nets[net as usize] = w;
        }
        let nets = &mut block.nets;
        for g in &self.gates {
            let x = nets[g.a as usize];
            let y = nets[g.b as usize];
            nets[g.out as usize] = match g.kind {
                GateKind::Inv => !x,
                GateKind::Nand2 => !(x & y),
                GateKind::Nor2 => !(x | y),
            };
        }
    }

    pub fn new_block(&self) -> Block {
        Block { nets: vec![0; self.nets], lanes: 0 }
    }

    /// Raw output bits of one lane, least significant first.
    pub fn output_bits(&self, block: &Block, lane: usize) -> u128 {
        self.outputs
            .iter()
            .enumerate()
            .fold(0u128, |acc, (k, &o)| acc | ((((block.nets[o as usize] >> lane) & 1) as u128) << k))
    }

    /// Output of one lane decoded per architecture.
    pub fn decode(&self, bits: u128) -> i128 {
        let n = self.outputs.len();
        if self.arch.is_signed_multiplier() && n < 128 && (bits >> (n - 1)) & 1 == 1 {
            bits as i128 - (1i128 << n)
        } else {
            bits as i128
        }
    }

    pub fn output_value(&self, block: &Block, lane: usize) -> i128 {
        self.decode(self.output_bits(block, lane))
    }
}
