// SPDX-License-Identifier: Apache-2.0

//! Netlist construction with constant folding.
//!
//! Constants never become nets. A tied-low pin would hold its PMOS in
//! permanent stress, independent of the data, so any gate that would read a
//! constant is simplified away instead (`NAND(x, 1) = INV(x)`, and so on).
//! Double inversions collapse to the original net.

use std::collections::HashMap;

use super::{Arch, Gate, GateKind, NetId, Netlist, PrimaryInput, Role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sig {
    Const(bool),
    Net(NetId),
}

impl Sig {
    pub fn net(self) -> Option<NetId> {
        match self {
            Sig::Net(n) => Some(n),
            Sig::Const(_) => None,
        }
    }
}

#[derive(Debug, Default)]
pub struct Builder {
    gates: Vec<Gate>,
    inputs: Vec<PrimaryInput>,
    next_net: NetId,
    /// net -> net it is the inverse of, for nets produced by INV
    inverse_of: HashMap<NetId, NetId>,
    full_adders: usize,
}

impl Builder {
    pub fn new() -> Self {
        Self::default()
    }

    fn fresh(&mut self) -> NetId {
        let n = self.next_net;
        self.next_net += 1;
        n
    }

    fn gate(&mut self, kind: GateKind, inputs: Vec<NetId>) -> Sig {
        let output = self.fresh();
        self.gates.push(Gate { id: self.gates.len(), kind, inputs, output });
        Sig::Net(output)
    }

    pub fn input(&mut self, role: Role) -> Sig {
        let net = self.fresh();
        self.inputs.push(PrimaryInput { net, role });
        Sig::Net(net)
    }

    pub fn inv(&mut self, a: Sig) -> Sig {
        match a {
            Sig::Const(v) => Sig::Const(!v),
            Sig::Net(n) => {
                if let Some(&src) = self.inverse_of.get(&n) {
                    return Sig::Net(src);
                }
                let out = self.gate(GateKind::Inv, vec![n]);
                let o = out.net().unwrap();
                self.inverse_of.insert(o, n);
                out
            }
        }
    }

    pub fn nand(&mut self, a: Sig, b: Sig) -> Sig {
        match (a, b) {
            (Sig::Const(false), _) | (_, Sig::Const(false)) => Sig::Const(true),
            (Sig::Const(true), x) | (x, Sig::Const(true)) => self.inv(x),
            (Sig::Net(x), Sig::Net(y)) if x == y => self.inv(a),
            (Sig::Net(x), Sig::Net(y)) => self.gate(GateKind::Nand2, vec![x, y]),
        }
    }

    pub fn nor(&mut self, a: Sig, b: Sig) -> Sig {
        match (a, b) {
            (Sig::Const(true), _) | (_, Sig::Const(true)) => Sig::Const(false),
            (Sig::Const(false), x) | (x, Sig::Const(false)) => self.inv(x),
            (Sig::Net(x), Sig::Net(y)) if x == y => self.inv(a),
            (Sig::Net(x), Sig::Net(y)) => self.gate(GateKind::Nor2, vec![x, y]),
        }
    }

    pub fn and(&mut self, a: Sig, b: Sig) -> Sig {
        let n = self.nand(a, b);
        self.inv(n)
    }

    pub fn or(&mut self, a: Sig, b: Sig) -> Sig {
        let n = self.nor(a, b);
        self.inv(n)
    }

    /// Four-NAND XOR. Returns the XOR and the first-stage `NAND(a, b)`.
    fn xor_parts(&mut self, a: Sig, b: Sig) -> (Sig, Sig) {
        let n1 = self.nand(a, b);
        let n2 = self.nand(a, n1);
        let n3 = self.nand(b, n1);
        (self.nand(n2, n3), n1)
    }

    pub fn xor(&mut self, a: Sig, b: Sig) -> Sig {
        match (a, b) {
            (Sig::Const(false), x) | (x, Sig::Const(false)) => x,
            (Sig::Const(true), x) | (x, Sig::Const(true)) => self.inv(x),
            _ => self.xor_parts(a, b).0,
        }
    }

    pub fn xnor(&mut self, a: Sig, b: Sig) -> Sig {
        let x = self.xor(a, b);
        self.inv(x)
    }

    /// Half adder: four-NAND XOR plus `INV(NAND(a, b))` for the carry.
    pub fn half_add(&mut self, a: Sig, b: Sig) -> (Sig, Sig) {
        match (a, b) {
            (Sig::Net(_), Sig::Net(_)) => {
                let (s, n1) = self.xor_parts(a, b);
                let c = self.inv(n1);
                (s, c)
            }
            _ => (self.xor(a, b), self.and(a, b)),
        }
    }

    /// Full-adder macro. With three live inputs this is the nine-NAND cell
    /// (two four-NAND XORs sharing their first stages with the carry NAND).
    /// Constant inputs reduce it: `x + y + 0` is a half adder and
    /// `x + y + 1` is `(XNOR, OR)`.
    pub fn full_add(&mut self, a: Sig, b: Sig, c: Sig) -> (Sig, Sig) {
        self.full_adders += 1;
        let mut live = Vec::with_capacity(3);
        let mut ones = 0u8;
        for s in [a, b, c] {
            match s {
                Sig::Const(v) => ones += v as u8,
                net => live.push(net),
            }
        }
        match (live.as_slice(), ones) {
            (&[x, y, z], _) => {
                let (s1, n1) = self.xor_parts(x, y);
                let n4 = self.nand(s1, z);
                let n5 = self.nand(s1, n4);
                let n6 = self.nand(z, n4);
                let sum = self.nand(n5, n6);
                let carry = self.nand(n1, n4);
                (sum, carry)
            }
            (&[x, y], 0) => self.half_add(x, y),
            (&[x, y], _) => (self.xnor(x, y), self.or(x, y)),
            (&[x], 0) => (x, Sig::Const(false)),
            (&[x], 1) => (self.inv(x), x),
            (&[x], _) => (x, Sig::Const(true)),
            (&[], k) => (Sig::Const(k & 1 == 1), Sig::Const(k >= 2)),
            _ => unreachable!(),
        }
    }

    pub fn full_adders(&self) -> usize {
        self.full_adders
    }

    /// Finish the netlist. Panics if an output folded to a constant, which
    /// only a generator bug can cause.
    pub fn finish(self, arch: Arch, width: usize, outputs: &[Sig]) -> Netlist {
        let outputs = outputs
            .iter()
            .map(|s| s.net().expect("primary output folded to a constant"))
            .collect();
        Netlist {
            arch,
            width,
            gates: self.gates,
            inputs: self.inputs,
            outputs,
            full_adders: self.full_adders,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_constants() {
        let mut b = Builder::new();
        let x = b.input(Role::A(0));
        assert_eq!(b.nand(x, Sig::Const(false)), Sig::Const(true));
        assert_eq!(b.nor(x, Sig::Const(true)), Sig::Const(false));
        assert_eq!(b.xor(x, Sig::Const(false)), x);
        let nx = b.nand(x, Sig::Const(true));
        assert_eq!(b.inv(nx), x);
        // only the single inverter was emitted
        assert_eq!(b.gates.len(), 1);
    }

    #[test]
    fn full_adder_is_nine_nands() {
        let mut b = Builder::new();
        let x = b.input(Role::A(0));
        let y = b.input(Role::B(0));
        let z = b.input(Role::CarryIn);
        b.full_add(x, y, z);
        assert_eq!(b.gates.len(), 9);
        assert!(b.gates.iter().all(|g| g.kind == GateKind::Nand2));
    }
}
