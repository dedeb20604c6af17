// SPDX-License-Identifier: Apache-2.0

//! Two-level minimization. Quine-McCluskey prime generation with an exact
//! branch-and-bound cover for up to 8 variables; greedy cube expansion above.

use std::collections::BTreeSet;

pub const EXACT_MAX_VARS: usize = 8;

/// A product term over `k` variables: variable `i` is a don't-care when bit
/// `i` of `mask` is set, otherwise it must equal bit `i` of `value`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cube {
    pub value: u32,
    pub mask: u32,
}

impl Cube {
    pub fn covers(self, m: u32) -> bool {
        (m & !self.mask) == (self.value & !self.mask)
    }

    pub fn literals(self, k: usize) -> usize {
        k - (self.mask & ((1u32 << k) - 1)).count_ones() as usize
    }

    /// Literals as `±(i + 1)`: positive for `x_i`, negative for `¬x_i`.
    pub fn to_literals(self, k: usize) -> Vec<i32> {
        (0..k)
            .filter(|&i| self.mask >> i & 1 == 0)
            .map(|i| if self.value >> i & 1 == 1 { i as i32 + 1 } else { -(i as i32 + 1) })
            .collect()
    }

    pub fn from_literals(lits: &[i32], k: usize) -> Option<Self> {
        let mut mask = (1u32 << k) - 1;
        let mut value = 0;
        for &l in lits {
            let i = l.unsigned_abs() as usize;
            if i == 0 || i > k || mask >> (i - 1) & 1 == 0 {
                return None;
            }
            mask &= !(1 << (i - 1));
            if l > 0 {
                value |= 1 << (i - 1);
            }
        }
        Some(Cube { value, mask })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cover {
    pub cubes: Vec<Cube>,
    /// False when the exact search hit its node budget or `k` exceeded the
    /// exact limit.
    pub exact: bool,
}

pub fn eval(cubes: &[Cube], m: u32) -> bool {
    cubes.iter().any(|c| c.covers(m))
}

/// Minimize the function whose on-set is `tt[m] == true`.
pub fn minimize(tt: &[bool], k: usize) -> Cover {
    assert_eq!(tt.len(), 1 << k);
    let on: Vec<u32> = (0..tt.len() as u32).filter(|&m| tt[m as usize]).collect();
    if on.is_empty() {
        return Cover { cubes: vec![], exact: true };
    }
    if on.len() == tt.len() {
        return Cover { cubes: vec![Cube { value: 0, mask: (1 << k) - 1 }], exact: true };
    }
    if k <= EXACT_MAX_VARS {
        let primes = primes(&on, k);
        let (cubes, exact) = exact_cover(&primes, &on, k);
        Cover { cubes, exact }
    } else {
        Cover { cubes: greedy(tt, &on, k), exact: false }
    }
}

fn primes(on: &[u32], k: usize) -> Vec<Cube> {
    let mut current: BTreeSet<Cube> = on.iter().map(|&m| Cube { value: m, mask: 0 }).collect();
    let mut primes = Vec::new();
    while !current.is_empty() {
        let list: Vec<Cube> = current.iter().copied().collect();
        let mut merged = vec![false; list.len()];
        let mut next = BTreeSet::new();
        for i in 0..list.len() {
            for j in i + 1..list.len() {
                let (a, b) = (list[i], list[j]);
                if a.mask != b.mask {
                    continue;
                }
                let diff = (a.value ^ b.value) & !a.mask;
                if diff.count_ones() == 1 {
                    next.insert(Cube { value: a.value & !diff, mask: a.mask | diff });
                    merged[i] = true;
                    merged[j] = true;
                }
            }
        }
        primes.extend(list.iter().zip(&merged).filter(|(_, &m)| !m).map(|(c, _)| *c));
        current = next;
    }
    primes.sort_by_key(|c| (c.literals(k), *c));
    primes
}

type Bits = Vec<u64>;

fn bits_of(cube: Cube, on: &[u32]) -> Bits {
    let mut b = vec![0u64; on.len().div_ceil(64)];
    for (i, &m) in on.iter().enumerate() {
        if cube.covers(m) {
            b[i / 64] |= 1 << (i % 64);
        }
    }
    b
}

fn count(b: &[u64]) -> usize {
    b.iter().map(|w| w.count_ones() as usize).sum()
}

struct Search<'a> {
    sets: &'a [Bits],
    lits: &'a [usize],
    best: Vec<usize>,
    best_cost: (usize, usize),
    nodes: usize,
    budget: usize,
}

impl Search<'_> {
    fn run(&mut self, chosen: &mut Vec<usize>, uncovered: &Bits, lits: usize) {
        self.nodes += 1;
        let left = count(uncovered);
        if left == 0 {
            let cost = (chosen.len(), lits);
            if cost < self.best_cost {
                self.best_cost = cost;
                self.best = chosen.clone();
            }
            return;
        }
        if self.nodes > self.budget {
            return;
        }
        let gain = |s: usize| -> usize { self.sets[s].iter().zip(uncovered).map(|(a, b)| (a & b).count_ones() as usize).sum() };
        let max_gain = (0..self.sets.len()).map(gain).max().unwrap_or(0);
        if max_gain == 0 {
            return;
        }
        let lower = chosen.len() + left.div_ceil(max_gain);
        if (lower, 0) >= self.best_cost {
            return;
        }
        // Branch on the uncovered minterm with the fewest candidate primes.
        let mut target = None;
        let mut fewest = usize::MAX;
        for (w, &word) in uncovered.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let i = w * 64 + bits.trailing_zeros() as usize;
                let c = self.sets.iter().filter(|s| s[i / 64] >> (i % 64) & 1 == 1).count();
                if c < fewest {
                    fewest = c;
                    target = Some(i);
                }
                bits &= bits - 1;
            }
        }
        let t = target.expect("uncovered minterm exists");
        let mut cands: Vec<usize> = (0..self.sets.len()).filter(|&s| self.sets[s][t / 64] >> (t % 64) & 1 == 1).collect();
        cands.sort_by_key(|&s| (std::cmp::Reverse(gain(s)), self.lits[s], s));
        for s in cands {
            let rest: Bits = uncovered.iter().zip(&self.sets[s]).map(|(u, c)| u & !c).collect();
            chosen.push(s);
            self.run(chosen, &rest, lits + self.lits[s]);
            chosen.pop();
        }
    }
}

const NODE_BUDGET: usize = 200_000;

fn exact_cover(primes: &[Cube], on: &[u32], k: usize) -> (Vec<Cube>, bool) {
    let sets: Vec<Bits> = primes.iter().map(|&p| bits_of(p, on)).collect();
    let lits: Vec<usize> = primes.iter().map(|p| p.literals(k)).collect();
    let mut full = vec![0u64; on.len().div_ceil(64)];
    for i in 0..on.len() {
        full[i / 64] |= 1 << (i % 64);
    }
    let mut s = Search { sets: &sets, lits: &lits, best: vec![], best_cost: (usize::MAX, usize::MAX), nodes: 0, budget: NODE_BUDGET };
    s.run(&mut Vec::new(), &full, 0);
    let exact = s.nodes <= s.budget;
    let mut cubes: Vec<Cube> = s.best.iter().map(|&i| primes[i]).collect();
    cubes.sort();
    (cubes, exact)
}

/// Expand each uncovered on-minterm to a prime by dropping literals while
/// the cube stays inside the on-set.
fn greedy(tt: &[bool], on: &[u32], k: usize) -> Vec<Cube> {
    let inside = |c: Cube| -> bool {
        let free: Vec<u32> = (0..k as u32).filter(|&i| c.mask >> i & 1 == 1).collect();
        (0u32..1 << free.len()).all(|sub| {
            let mut m = c.value & !c.mask;
            for (j, &f) in free.iter().enumerate() {
                m |= (sub >> j & 1) << f;
            }
            tt[m as usize]
        })
    };
    let mut cubes: Vec<Cube> = Vec::new();
    for &m in on {
        if eval(&cubes, m) {
            continue;
        }
        let mut c = Cube { value: m, mask: 0 };
        for i in 0..k as u32 {
            let wider = Cube { value: c.value & !(1 << i), mask: c.mask | 1 << i };
            if inside(wider) {
                c = wider;
            }
        }
        cubes.push(c);
    }
    cubes.sort();
    cubes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(tt: &[bool], k: usize) -> Cover {
        let c = minimize(tt, k);
        for m in 0..tt.len() as u32 {
            assert_eq!(eval(&c.cubes, m), tt[m as usize], "minterm {m}");
        }
        c
    }

    #[test]
    fn constants_and_literals() {
        assert!(check(&[false; 8], 3).cubes.is_empty());
        assert_eq!(check(&[true; 8], 3).cubes.len(), 1);
        let tt: Vec<bool> = (0..8).map(|m| m & 2 != 0).collect();
        let c = check(&tt, 3);
        assert_eq!(c.cubes.len(), 1);
        assert_eq!(c.cubes[0].to_literals(3), vec![2]);
    }

    #[test]
    fn classic_example() {
        // Σm(4, 8, 10, 11, 12, 15) without don't-cares: three terms.
        let on = [4u32, 8, 10, 11, 12, 15];
        let tt: Vec<bool> = (0..16).map(|m| on.contains(&m)).collect();
        let c = check(&tt, 4);
        assert!(c.exact);
        assert_eq!(c.cubes.len(), 3);
    }

    #[test]
    fn xor_needs_all_minterms() {
        let tt: Vec<bool> = (0..16u32).map(|m| m.count_ones() % 2 == 1).collect();
        assert_eq!(check(&tt, 4).cubes.len(), 8);
    }

    #[test]
    fn greedy_is_equivalent() {
        let tt: Vec<bool> = (0..1024u32).map(|m| m.wrapping_mul(2654435761) % 7 < 3 || m & 0x21 == 0x21).collect();
        let c = check(&tt, 10);
        assert!(!c.exact);
    }

    #[test]
    fn literal_round_trip() {
        let c = Cube { value: 0b0100, mask: 0b1010 };
        let l = c.to_literals(4);
        assert_eq!(l, vec![-1, 3]);
        assert_eq!(Cube::from_literals(&l, 4), Some(c));
        assert_eq!(Cube::from_literals(&[5], 4), None);
        assert_eq!(Cube::from_literals(&[1, -1], 4), None);
    }
}
