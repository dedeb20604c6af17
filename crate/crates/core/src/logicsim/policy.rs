// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::sync::Arc;

use crate::aging::F2FSet;
use crate::oracle::OracleTable;
use crate::rng;
use crate::selector::{Ensemble, SelectorFn};
use crate::{Error, Result};

use super::InputPair;

/// Anything that decides per input whether to apply the joint negation.
pub trait Decider: Send + Sync {
    fn width(&self) -> usize;
    fn decide(&self, v: InputPair) -> bool;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transform {
    Identity,
    /// Joint two's-complement negation; preserves signed products.
    Negate,
    /// Bitwise complement of both operands; stress accounting only.
    Complement,
}

#[derive(Clone)]
pub enum TransformPolicy {
    None,
    Oracle(Arc<OracleTable>),
    Selector(Arc<SelectorFn>),
    /// An ensemble with the member already dispatched from `measured`.
    Ensemble { ensemble: Arc<Ensemble>, measured: F2FSet, member: usize },
    Trng { p: f64, seed: u64 },
    Zbp,
}

impl fmt::Debug for TransformPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl TransformPolicy {
    pub fn ensemble(ensemble: Arc<Ensemble>, measured: F2FSet) -> Self {
        let member = ensemble.dispatch_index(&measured);
        TransformPolicy::Ensemble { ensemble, measured, member }
    }

    pub fn name(&self) -> String {
        match self {
            TransformPolicy::None => "none".into(),
            TransformPolicy::Oracle(_) => "oracle".into(),
            TransformPolicy::Selector(s) => format!("sm(k={})", s.k()),
            TransformPolicy::Ensemble { ensemble, member, .. } => {
                format!("ensemble(P={}, member={member})", ensemble.len())
            }
            TransformPolicy::Trng { p, .. } => format!("trng({p})"),
            TransformPolicy::Zbp => "zbp".into(),
        }
    }

    /// True for policies whose transforms preserve the signed product.
    pub fn preserves_products(&self) -> bool {
        !matches!(self, TransformPolicy::Trng { .. } | TransformPolicy::Zbp)
    }

    pub fn check_width(&self, width: usize) -> Result<()> {
        let w = match self {
            TransformPolicy::Oracle(o) => o.width(),
            TransformPolicy::Selector(s) => s.width(),
            TransformPolicy::Ensemble { ensemble, .. } => ensemble.width(),
            TransformPolicy::Trng { p, .. } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::config(format!("trng probability {p} outside [0, 1]")));
                }
                width
            }
            TransformPolicy::None | TransformPolicy::Zbp => width,
        };
        if w != width {
            return Err(Error::input(format!("policy width {w} does not match netlist width {width}")));
        }
        Ok(())
    }

    pub fn transform(&self, v: InputPair, index: u64) -> Transform {
        let negate = |d: bool| if d { Transform::Negate } else { Transform::Identity };
        match self {
            TransformPolicy::None => Transform::Identity,
            TransformPolicy::Oracle(o) => negate(o.decide(v)),
            TransformPolicy::Selector(s) => negate(s.decide(v)),
            TransformPolicy::Ensemble { ensemble, member, .. } => negate(ensemble.member(*member).decide(v)),
            TransformPolicy::Trng { p, seed } => {
                if rng::unit_f64(rng::derive(*seed, &[index])) < *p {
                    Transform::Complement
                } else {
                    Transform::Identity
                }
            }
            TransformPolicy::Zbp => {
                if index % 2 == 1 {
                    Transform::Complement
                } else {
                    Transform::Identity
                }
            }
        }
    }

    /// The vector actually applied to the circuit for workload index `index`.
    pub fn apply(&self, v: InputPair, index: u64, width: usize) -> (InputPair, Transform) {
        let t = self.transform(v, index);
        let out = match t {
            Transform::Identity => v,
            Transform::Negate => v.negated(width),
            Transform::Complement => v.complemented(width),
        };
        (out, t)
    }
}
