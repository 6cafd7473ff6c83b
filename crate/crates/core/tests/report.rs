use serde_json::json;
use tplab_core::{CheckReport, Expected, Source, Status};

fn expected(v: serde_json::Value) -> Expected {
    Expected { value: v, source: Source::Reported, citation: "test".into() }
}

#[test]
fn compare_sets_status() {
    let pass = CheckReport::compare("a", json!({}), expected(json!(3)), json!(3));
    assert_eq!(pass.status, Status::Pass);
    let fail = CheckReport::compare("a", json!({}), expected(json!(3)), json!(4));
    assert!(fail.failed());
    let info = CheckReport::informational("b", json!({}), json!(1));
    assert!(info.expected.is_none() && !info.failed());
    assert_eq!(CheckReport::skipped("c", json!({}), "why").status, Status::Skipped);
}

#[test]
fn serialization_is_camel_case_and_omits_missing_timing() {
    let r = CheckReport::compare("a", json!({"q": 3}), expected(json!([1, 2])), json!([1, 2]));
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["checkName"], "a");
    assert_eq!(v["status"], "pass");
    assert_eq!(v["expected"]["source"], "reported");
    assert!(v.get("elapsedMs").is_none());
    let v = serde_json::to_value(r.with_elapsed(5)).unwrap();
    assert_eq!(v["elapsedMs"], 5);
}
