use std::collections::BTreeSet;

use tplab_cli::manifest::Manifest;
use tplab_cli::suite::{run_criterion, Cache, SuiteConfig};

#[test]
fn builtin_manifest_is_well_formed() {
    let m = Manifest::builtin();
    assert_eq!(m.version, 1);
    for name in m.names() {
        assert!(!m.get(name).unwrap().citation.is_empty(), "{name}");
    }
    assert!(m.get("no.such.check").is_err());
    assert!(Manifest::parse("version = 1\n[checks.x]\nvalue = 1\nsource = \"rumor\"\ncitation = \"\"\n").is_err());
}

#[test]
fn cheap_criteria_only_use_manifest_names() {
    let cfg = SuiteConfig { q_max: 2, seed: 1, allow_long: false };
    let mut cache = Cache::default();
    let names: BTreeSet<&str> = Manifest::builtin().names().collect();
    for id in [1, 6, 11] {
        let r = run_criterion(id, &cfg, &mut cache);
        for c in r.checks.iter().filter(|c| c.expected.is_some()) {
            assert!(names.contains(c.check_name.as_str()), "{}", c.check_name);
        }
        assert!(!r.failed(), "criterion {id}");
    }
}
