// SPDX-License-Identifier: Apache-2.0

//! Adder and multiplier generators.
//!
//! Fixed macro expansions (identical for every instance):
//!
//! | macro            | gates                      | sites |
//! |------------------|----------------------------|-------|
//! | full adder       | 9 NAND2                    | 18    |
//! | half adder       | 4 NAND2 + 1 INV            | 9     |
//! | `x + y + 1` cell | 4 NAND2 + 1 INV + NOR2 + INV (XNOR, OR) | 13 |
//! | AND partial product | NAND2 + INV             | 3     |
//! | complemented partial product | NAND2          | 2     |
//!
//! Array multipliers are row-ripple arrays: row `i >= 1` adds partial-product
//! row `i` into the running sum with a chain of `width` full-adder macros, so
//! there are exactly `width * (width - 1)` macros. Macros whose inputs are
//! tied to constants (the carry-in of every row, the top operand of row 1)
//! reduce as described in [`Builder::full_add`].

use super::builder::{Builder, Sig};
use super::{Arch, Netlist, Role};
use crate::{Error, Result};

pub const MAX_MULTIPLIER_WIDTH: usize = 32;

fn operands(b: &mut Builder, width: usize) -> (Vec<Sig>, Vec<Sig>) {
    let a = (0..width).map(|i| b.input(Role::A(i as u8))).collect();
    let bb = (0..width).map(|i| b.input(Role::B(i as u8))).collect();
    (a, bb)
}

/// Ripple-carry adder: outputs `width` sum bits then the carry out.
pub fn build_ripple_adder(width: usize) -> Result<Netlist> {
    if width == 0 || width > 64 {
        return Err(Error::config(format!("ripple adder width {width} outside 1..=64")));
    }
    let mut b = Builder::new();
    let (a, bb) = operands(&mut b, width);
    let mut carry = b.input(Role::CarryIn);
    let mut outs = Vec::with_capacity(width + 1);
    for i in 0..width {
        let (s, c) = b.full_add(a[i], bb[i], carry);
        outs.push(s);
        carry = c;
    }
    outs.push(carry);
    Ok(b.finish(Arch::RippleAdder, width, &outs))
}

pub fn build_multiplier(width: usize, arch: Arch) -> Result<Netlist> {
    if !(2..=MAX_MULTIPLIER_WIDTH).contains(&width) {
        return Err(Error::config(format!(
            "multiplier width {width} outside 2..={MAX_MULTIPLIER_WIDTH}"
        )));
    }
    match arch {
        Arch::ArrayUnsigned => Ok(array(width, false)),
        Arch::ArraySignedBw => Ok(array(width, true)),
        Arch::WallaceSigned => Ok(wallace(width)),
        other => Err(Error::config(format!("`{other}` is not a multiplier architecture"))),
    }
}

/// Partial product of `a[j]` and `b[i]`. Baugh-Wooley complements the terms
/// where exactly one index is the sign position.
fn partial_product(b: &mut Builder, a: &[Sig], bb: &[Sig], i: usize, j: usize, bw: bool) -> Sig {
    let n = a.len();
    if bw && ((i == n - 1) ^ (j == n - 1)) {
        b.nand(a[j], bb[i])
    } else {
        b.and(a[j], bb[i])
    }
}

fn array(n: usize, bw: bool) -> Netlist {
    let mut b = Builder::new();
    let (a, bb) = operands(&mut b, n);
    let pp: Vec<Vec<Sig>> = (0..n)
        .map(|i| (0..n).map(|j| partial_product(&mut b, &a, &bb, i, j, bw)).collect())
        .collect();

    let mut outs = Vec::with_capacity(2 * n);
    let mut sum = pp[0].clone();
    outs.push(sum[0]);
    // Row 1's top operand sits at weight n; Baugh-Wooley's +2^n correction goes there.
    let mut top = Sig::Const(bw);
    for row in pp.iter().skip(1) {
        let mut carry = Sig::Const(false);
        let mut next = Vec::with_capacity(n);
        for j in 0..n {
            let upper = if j + 1 < n { sum[j + 1] } else { top };
            let (s, c) = b.full_add(row[j], upper, carry);
            next.push(s);
            carry = c;
        }
        outs.push(next[0]);
        sum = next;
        top = carry;
    }
    outs.extend_from_slice(&sum[1..]);
    // +2^(2n-1) correction: inverting the top bit is addition mod 2^(2n).
    outs.push(if bw { b.inv(top) } else { top });
    let arch = if bw { Arch::ArraySignedBw } else { Arch::ArrayUnsigned };
    b.finish(arch, n, &outs)
}

/// Baugh-Wooley partial products reduced by Wallace layers of full and half
/// adders, then a ripple-carry merge.
fn wallace(n: usize) -> Netlist {
    let mut b = Builder::new();
    let (a, bb) = operands(&mut b, n);
    let cols = 2 * n;
    let mut columns: Vec<Vec<Sig>> = vec![Vec::new(); cols];
    for i in 0..n {
        for j in 0..n {
            let p = partial_product(&mut b, &a, &bb, i, j, true);
            columns[i + j].push(p);
        }
    }
    columns[n].push(Sig::Const(true));
    columns[2 * n - 1].push(Sig::Const(true));

    while columns.iter().any(|c| c.len() > 2) {
        let mut next: Vec<Vec<Sig>> = vec![Vec::new(); cols];
        for k in 0..cols {
            let col = &columns[k];
            let mut chunks = col.chunks_exact(3);
            for t in chunks.by_ref() {
                let (s, c) = b.full_add(t[0], t[1], t[2]);
                next[k].push(s);
                if k + 1 < cols {
                    next[k + 1].push(c);
                }
            }
            match *chunks.remainder() {
                [x, y] if col.len() > 2 => {
                    let (s, c) = b.half_add(x, y);
                    next[k].push(s);
                    if k + 1 < cols {
                        next[k + 1].push(c);
                    }
                }
                ref rest => next[k].extend_from_slice(rest),
            }
        }
        columns = next;
    }

    let mut outs = Vec::with_capacity(cols);
    let mut carry = Sig::Const(false);
    for col in &columns {
        let x = col.first().copied().unwrap_or(Sig::Const(false));
        let y = col.get(1).copied().unwrap_or(Sig::Const(false));
        let (s, c) = b.full_add(x, y, carry);
        outs.push(s);
        carry = c;
    }
    b.finish(Arch::WallaceSigned, n, &outs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::GateKind;

    #[test]
    fn ripple_width_one_is_one_full_adder() {
        let n = build_ripple_adder(1).unwrap();
        assert_eq!(n.gates.len(), 9);
        assert_eq!(n.pmos_sites().len(), 18);
        assert!(n.validate().is_ok());
    }

    #[test]
    fn ripple_scales_linearly() {
        let n = build_ripple_adder(8).unwrap();
        assert_eq!(n.gates.len(), 8 * 9);
        assert_eq!(n.full_adders, 8);
    }

    #[test]
    fn array_macro_count() {
        for w in 2..=8 {
            for arch in [Arch::ArrayUnsigned, Arch::ArraySignedBw] {
                let n = build_multiplier(w, arch).unwrap();
                assert_eq!(n.full_adders, w * (w - 1), "{arch} {w}");
                assert!(n.validate().is_ok());
            }
        }
    }

    #[test]
    fn unsigned_width8_inventory() {
        // 64 AND partial products (NAND+INV); rows 1..7 have a half adder at
        // column 0 (carry-in tied low) and row 1 has one at column 7 (top tied
        // low): 8 half adders and 48 full adders.
        let n = build_multiplier(8, Arch::ArrayUnsigned).unwrap();
        let nand = 64 + 8 * 4 + 48 * 9;
        let inv = 64 + 8;
        assert_eq!(n.gate_count(GateKind::Nand2), nand);
        assert_eq!(n.gate_count(GateKind::Inv), inv);
        assert_eq!(n.gate_count(GateKind::Nor2), 0);
        assert_eq!(n.pmos_sites().len(), 2 * nand + inv);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(build_multiplier(1, Arch::ArrayUnsigned).is_err());
        assert!(build_multiplier(33, Arch::WallaceSigned).is_err());
        assert!(build_multiplier(8, Arch::RippleAdder).is_err());
        assert!(build_ripple_adder(0).is_err());
    }

    #[test]
    fn deterministic() {
        for arch in [Arch::ArrayUnsigned, Arch::ArraySignedBw, Arch::WallaceSigned] {
            assert_eq!(build_multiplier(6, arch).unwrap(), build_multiplier(6, arch).unwrap());
        }
    }
}
