// SPDX-License-Identifier: Apache-2.0

use mulife_core::logicsim::profile_alpha;
use mulife_core::netlist::build_multiplier;
use mulife_core::oracle::build_oracle;
use mulife_core::selector::synthesize;
use mulife_core::systolic::SaLifetime;
use mulife_core::{
    AgingParams, Arch, LifetimeStats, Netlist, OracleTable, PvSample, SelectorFn, StressProfile, TransformPolicy,
    WorkloadSpec,
};

#[test]
fn netlist_json() {
    for arch in [Arch::ArrayUnsigned, Arch::ArraySignedBw, Arch::WallaceSigned] {
        let n = build_multiplier(5, arch).unwrap();
        let json = n.to_json().unwrap();
        let back = Netlist::from_json(&json).unwrap();
        assert_eq!(back.to_json().unwrap(), json);
        assert_eq!((back.gates.len(), back.logic_depth()), (n.gates.len(), n.logic_depth()));
    }
}

#[test]
fn profile_csv() {
    let n = build_multiplier(4, Arch::WallaceSigned).unwrap();
    let p = profile_alpha(&n, &WorkloadSpec::uniform(3, 999), &TransformPolicy::Zbp).unwrap();
    let mut buf = Vec::new();
    p.write_csv(&n, &mut buf).unwrap();
    assert_eq!(StressProfile::read_csv(std::str::from_utf8(&buf).unwrap()).unwrap(), p);
}

#[test]
fn oracle_and_selector_files() {
    let n = build_multiplier(4, Arch::ArraySignedBw).unwrap();
    let o = build_oracle(&n, &AgingParams::no_pv(), &PvSample::zeros(n.site_count()), &WorkloadSpec::Exhaustive).unwrap();
    let dir = std::env::temp_dir().join(format!("mulife-formats-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    o.save(&dir.join("o.bin")).unwrap();
    let back = OracleTable::load(&dir.join("o.bin")).unwrap();
    assert_eq!(back.entries(), o.entries());
    let s = synthesize(&o, 3).unwrap();
    s.save(&dir.join("s.json")).unwrap();
    assert_eq!(SelectorFn::load(&dir.join("s.json")).unwrap(), s);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn lifetime_csv_is_exact() {
    let results: Vec<SaLifetime> = (0..50)
        .map(|i| SaLifetime { seconds: 1e9 * (1.0 + (i as f64).sin().abs()) / 3.0, row: i % 8, col: (i * 3) % 8 })
        .collect();
    let st = LifetimeStats::new("x", results).unwrap();
    let mut buf = Vec::new();
    st.write_csv(&mut buf).unwrap();
    let back = LifetimeStats::read_csv("x", std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back, st);
    assert!(LifetimeStats::read_csv("x", "wrong header\n").is_err());
}
