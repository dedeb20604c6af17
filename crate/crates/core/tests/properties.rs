// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use mulife_core::aging::{delta_vth, site_lifetime};
use mulife_core::logicsim::{evaluate, profile_stream, to_signed, Decider, Simulator};
use mulife_core::netlist::build_multiplier;
use mulife_core::oracle::apply;
use mulife_core::selector::selector_netlist;
use mulife_core::{AgingParams, Arch, BetaModel, F2FSet, InputPair, OracleTable, SelectorFn, TransformPolicy};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = BetaModel> {
    prop_oneof![Just(BetaModel::PowerLaw), (0.1f64..1.0, 1.0f64..3.0).prop_map(|(c, d)| BetaModel::RdLongTerm { c, d })]
}

fn params() -> impl Strategy<Value = AgingParams> {
    (model(), 0.1f64..0.4).prop_map(|(beta_model, lambda)| AgingParams { beta_model, lambda, ..AgingParams::default() })
}

fn sites() -> impl Strategy<Value = F2FSet> {
    proptest::collection::btree_set(0usize..40, 0..12).prop_map(|s| F2FSet::new(s.into_iter().collect(), 0.01))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_is_monotone(p in params(), a in 0.0f64..1.0, da in 0.0f64..0.5, t in 0.0f64..1e12, grow in 1.0f64..100.0) {
        let base = delta_vth(a, t, &p).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!(delta_vth((a + da).min(1.0), t, &p).unwrap() >= base);
        prop_assert!(delta_vth(a, t * grow, &p).unwrap() >= base);
    }

    #[test]
    fn lifetime_is_antitone(p in params(), a in 0.05f64..0.9, da in 0.01f64..0.1, dv in -0.05f64..0.05, ddv in 0.0f64..0.03) {
        let l = site_lifetime(a, dv, &p).unwrap();
        prop_assert!(l > 0.0);
        let more_stress = site_lifetime(a + da, dv, &p).unwrap();
        let higher_vth = site_lifetime(a, dv + ddv, &p).unwrap();
        // One bisection tolerance of slack.
        prop_assert!(more_stress <= l * (1.0 + 2e-6), "{more_stress} > {l}");
        prop_assert!(higher_vth <= l * (1.0 + 2e-6), "{higher_vth} > {l}");
    }

    #[test]
    fn selector_netlist_is_equivalent(bits in proptest::sample::subsequence((0..10usize).collect::<Vec<_>>(), 1..=5), seed in any::<u64>()) {
        let width = 5;
        let k = bits.len();
        let tt: Vec<bool> = (0..1u32 << k).map(|m| (seed >> (m % 64)) & 1 == 1).collect();
        let s = SelectorFn::from_table(width, bits, tt).unwrap();
        for guarded in [false, true] {
            let Some(n) = selector_netlist(&s, guarded) else {
                let constant_true = s.truth_table().iter().all(|&x| x);
                prop_assert!(s.is_constant_false() || (constant_true && !guarded));
                continue;
            };
            for i in (0..1u64 << (2 * width)).step_by(7) {
                let v = InputPair::from_index(i, width);
                let expect = if guarded { s.decide(v) } else { s.truth_table()[s.pattern(v) as usize] };
                prop_assert_eq!(evaluate(&n, v).unwrap().value, expect as i128);
            }
        }
    }

    #[test]
    fn jaccard_laws(x in sites(), y in sites()) {
        let j = x.jaccard(&y);
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert_eq!(j, y.jaccard(&x));
        if !x.is_empty() {
            prop_assert_eq!(x.jaccard(&x), 1.0);
        }
        let u = x.union(&y);
        prop_assert!(x.is_subset(&u) && y.is_subset(&u));
        prop_assert_eq!(u.jaccard(&x) == 1.0, y.is_subset(&x) && !x.is_empty());
    }

    #[test]
    fn oracle_application_preserves_products(width in 3usize..=6, seed in any::<u64>()) {
        let table = OracleTable::from_fn(width, |v| mulife_core::rng::derive(seed, &[v.index(width)]) & 1 == 1);
        for i in 0..1u64 << (2 * width) {
            let v = InputPair::from_index(i, width);
            let w = apply(&table, v);
            let prod = |v: InputPair| to_signed(v.a, width) * to_signed(v.b, width);
            prop_assert_eq!(prod(w), prod(v));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn profiles_merge_across_shards(split in 0usize..300, policy in 0usize..3) {
        let n = build_multiplier(4, Arch::ArraySignedBw).unwrap();
        let sim = Simulator::new(&n).unwrap();
        let pairs: Vec<InputPair> = (0..300u64).map(|i| InputPair::from_index(i * 37 % 256, 4)).collect();
        let policy = match policy {
            0 => TransformPolicy::None,
            1 => TransformPolicy::Zbp,
            _ => TransformPolicy::Oracle(Arc::new(OracleTable::from_fn(4, |v| v.a & 2 == 2))),
        };
        let whole = profile_stream(&sim, &pairs, &policy, 0).unwrap();
        let mut left = profile_stream(&sim, &pairs[..split], &policy, 0).unwrap();
        let right = profile_stream(&sim, &pairs[split..], &policy, split as u64).unwrap();
        left.merge(&right);
        prop_assert_eq!(left, whole);
    }
}
