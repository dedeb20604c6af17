// SPDX-License-Identifier: Apache-2.0

//! Combinational gate-level netlists over {INV, NAND2, NOR2}.
//!
//! Every gate input pin drives the gate of exactly one PMOS transistor in a
//! static CMOS realization, so a pin is the unit of NBTI stress accounting
//! ([`PmosSite`]). Sites are numbered in gate order, pin 0 before pin 1.

mod builder;
mod generators;

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use builder::{Builder, Sig};
pub use generators::{build_multiplier, build_ripple_adder, MAX_MULTIPLIER_WIDTH};

pub type NetId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Inv,
    Nand2,
    Nor2,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Inv => 1,
            GateKind::Nand2 | GateKind::Nor2 => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    /// Hand-built or imported circuit; outputs decode as unsigned.
    Generic,
    RippleAdder,
    ArrayUnsigned,
    ArraySignedBw,
    WallaceSigned,
}

impl Arch {
    pub fn is_signed_multiplier(self) -> bool {
        matches!(self, Arch::ArraySignedBw | Arch::WallaceSigned)
    }

    pub fn is_multiplier(self) -> bool {
        matches!(self, Arch::ArrayUnsigned | Arch::ArraySignedBw | Arch::WallaceSigned)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Generic => "generic",
            Arch::RippleAdder => "ripple_adder",
            Arch::ArrayUnsigned => "array_unsigned",
            Arch::ArraySignedBw => "array_signed_bw",
            Arch::WallaceSigned => "wallace_signed",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "generic" => Arch::Generic,
            "ripple_adder" => Arch::RippleAdder,
            "array_unsigned" => Arch::ArrayUnsigned,
            "array_signed_bw" => Arch::ArraySignedBw,
            "wallace_signed" => Arch::WallaceSigned,
            other => return Err(Error::config(format!("unknown architecture `{other}`"))),
        })
    }
}

/// What a primary input carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Role {
    A(u8),
    B(u8),
    CarryIn,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::A(i) => write!(f, "a[{i}]"),
            Role::B(i) => write!(f, "b[{i}]"),
            Role::CarryIn => f.write_str("cin"),
        }
    }
}

impl From<Role> for String {
    fn from(r: Role) -> String {
        r.to_string()
    }
}

impl TryFrom<String> for Role {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        if s == "cin" {
            return Ok(Role::CarryIn);
        }
        let bad = || Error::Format(format!("bad input role `{s}`"));
        let (operand, rest) = s.split_at_checked(1).ok_or_else(bad)?;
        let index = rest
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .and_then(|r| r.parse::<u8>().ok())
            .ok_or_else(bad)?;
        match operand {
            "a" => Ok(Role::A(index)),
            "b" => Ok(Role::B(index)),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub id: usize,
    pub kind: GateKind,
    #[serde(rename = "in")]
    pub inputs: Vec<NetId>,
    #[serde(rename = "out")]
    pub output: NetId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimaryInput {
    pub net: NetId,
    pub role: Role,
}

/// One PMOS transistor: the pull-up device behind a gate input pin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PmosSite {
    pub index: usize,
    pub gate: usize,
    pub pin: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Netlist {
    pub arch: Arch,
    pub width: usize,
    pub gates: Vec<Gate>,
    #[serde(rename = "pi")]
    pub inputs: Vec<PrimaryInput>,
    /// Output nets, least significant bit first.
    #[serde(rename = "po")]
    pub outputs: Vec<NetId>,
    /// Full-adder macro instances placed by the generator (0 when imported).
    #[serde(skip)]
    pub full_adders: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    MultipleDrivers { net: NetId },
    Cycle { gates: Vec<usize> },
    FloatingNet { net: NetId, gate: usize },
    UndrivenOutput { net: NetId },
    Arity { gate: usize },
    DuplicateGateId { id: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MultipleDrivers { net } => write!(f, "net {net} has more than one driver"),
            Violation::Cycle { gates } => write!(f, "combinational loop through gates {gates:?}"),
            Violation::FloatingNet { net, gate } => {
                write!(f, "gate {gate} reads undriven net {net}")
            }
            Violation::UndrivenOutput { net } => write!(f, "primary output net {net} is undriven"),
            Violation::Arity { gate } => write!(f, "gate {gate} has the wrong number of inputs"),
            Violation::DuplicateGateId { id } => write!(f, "gate id {id} is used twice"),
        }
    }
}

impl Netlist {
    pub fn net_count(&self) -> usize {
        let max_gate = self.gates.iter().map(|g| g.output).max();
        let max_in = self.gates.iter().flat_map(|g| g.inputs.iter().copied()).max();
        let max_pi = self.inputs.iter().map(|p| p.net).max();
        let max_po = self.outputs.iter().copied().max();
        [max_gate, max_in, max_pi, max_po]
            .into_iter()
            .flatten()
            .max()
            .map_or(0, |m| m as usize + 1)
    }

    pub fn site_count(&self) -> usize {
        self.gates.iter().map(|g| g.kind.arity()).sum()
    }

    pub fn pmos_sites(&self) -> Vec<PmosSite> {
        let mut sites = Vec::with_capacity(self.site_count());
        for (gate, g) in self.gates.iter().enumerate() {
            for pin in 0..g.kind.arity() {
                sites.push(PmosSite { index: sites.len(), gate, pin: pin as u8 });
            }
        }
        sites
    }

    /// Net read by each site, in site order.
    pub fn site_nets(&self) -> Vec<NetId> {
        self.gates.iter().flat_map(|g| g.inputs.iter().take(g.kind.arity()).copied()).collect()
    }

    /// Operand width seen at the primary inputs.
    pub fn operand_width(&self) -> usize {
        self.width
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<Violation>> {
        let mut violations = Vec::new();
        let nets = self.net_count();
        let mut drivers = vec![0u32; nets];
        for p in &self.inputs {
            drivers[p.net as usize] += 1;
        }
        let mut seen_ids = std::collections::HashSet::new();
        for (i, g) in self.gates.iter().enumerate() {
            if !seen_ids.insert(g.id) {
                violations.push(Violation::DuplicateGateId { id: g.id });
            }
            if g.inputs.len() != g.kind.arity() {
                violations.push(Violation::Arity { gate: i });
            }
            drivers[g.output as usize] += 1;
        }
        for (net, &d) in drivers.iter().enumerate() {
            if d > 1 {
                violations.push(Violation::MultipleDrivers { net: net as NetId });
            }
        }
        for (i, g) in self.gates.iter().enumerate() {
            for &n in &g.inputs {
                if drivers[n as usize] == 0 {
                    violations.push(Violation::FloatingNet { net: n, gate: i });
                }
            }
        }
        for &o in &self.outputs {
            if drivers[o as usize] == 0 {
                violations.push(Violation::UndrivenOutput { net: o });
            }
        }
        if let Err(gates) = self.topo_order() {
            violations.push(Violation::Cycle { gates });
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    /// Gate indices in evaluation order, or the gates left on a cycle.
    pub fn topo_order(&self) -> std::result::Result<Vec<usize>, Vec<usize>> {
        let nets = self.net_count();
        let mut readers: Vec<Vec<usize>> = vec![Vec::new(); nets];
        let mut driver_gate: Vec<Option<usize>> = vec![None; nets];
        for (i, g) in self.gates.iter().enumerate() {
            driver_gate[g.output as usize] = Some(i);
        }
        let mut pending = vec![0usize; self.gates.len()];
        for (i, g) in self.gates.iter().enumerate() {
            for &n in &g.inputs {
                if driver_gate[n as usize].is_some() {
                    pending[i] += 1;
                    readers[n as usize].push(i);
                }
            }
        }
        let mut queue: VecDeque<usize> = (0..self.gates.len()).filter(|&i| pending[i] == 0).collect();
        let mut order = Vec::with_capacity(self.gates.len());
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &r in &readers[self.gates[i].output as usize] {
                pending[r] -= 1;
                if pending[r] == 0 {
                    queue.push_back(r);
                }
            }
        }
        if order.len() == self.gates.len() {
            Ok(order)
        } else {
            Err((0..self.gates.len()).filter(|&i| pending[i] > 0).collect())
        }
    }

    /// Longest gate path from a primary input to a primary output, one unit per gate.
    pub fn logic_depth(&self) -> usize {
        let Ok(order) = self.topo_order() else { return 0 };
        let mut depth = vec![0usize; self.net_count()];
        for i in order {
            let g = &self.gates[i];
            let d = g.inputs.iter().map(|&n| depth[n as usize]).max().unwrap_or(0) + 1;
            depth[g.output as usize] = d;
        }
        self.outputs.iter().map(|&o| depth[o as usize]).max().unwrap_or(0)
    }

    pub fn gate_count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let n: Netlist = serde_json::from_str(s)?;
        n.validate().map_err(Error::InvalidNetlist)?;
        Ok(n)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
