use std::path::PathBuf;

use cartanforge::harness::{build_catalog, run_catalog, run_identity_catalog, CatalogItem, Status};
use cartanforge::problem::{load_problem, parse_problem};
use cartanforge::Expr;

fn corpus(name: &str) -> cartanforge::problem::Problem {
    load_problem(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(format!("{name}.toml"))).unwrap()
}

#[test]
fn tampered_identity_fails_with_witness() {
    let p = corpus("wave");
    let mut items = build_catalog(&p);
    let target = items
        .iter_mut()
        .find_map(|it| match it {
            CatalogItem::Identity(c) if c.name.starts_with("curvature_bracket") => Some(c),
            _ => None,
        })
        .expect("wave declares a connection");
    let name = target.name.clone();
    target.left[0] = &target.left[0] + Expr::ratio(1, 1000) * Expr::var("u");

    let report = run_catalog::<f64>(&items);
    let entry = report.entry(&name).unwrap();
    assert_eq!(entry.status, Status::Fail);
    assert_eq!(entry.mode, "numeric");
    assert!(entry.max_dev.unwrap() > 1e-9);
    assert!(entry.witness.contains_key("u"), "{:?}", entry.witness);
    assert!(!report.passed());
    assert!(report.suite.iter().filter(|e| e.name != name).all(|e| e.status != Status::Fail));
}

#[test]
fn bare_problem_skips_what_it_cannot_check() {
    let p = parse_problem("[bundle]\nbase = [\"t\"]\nfiber = [\"q\"]\n[lagrangian]\nL = \"1/2*d(q,t)^2\"\n", "bare").unwrap();
    let report = run_identity_catalog(&p);
    assert!(report.passed());
    for name in ["energy_intrinsic", "noether_conservation"] {
        let e = report.suite.iter().find(|e| e.name.starts_with(name)).unwrap();
        assert_eq!(e.status, Status::Skipped, "{name}");
    }
    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert!(json["suite"].as_array().unwrap().iter().any(|e| e["status"] == "skip"));
}

#[test]
fn same_seed_same_report() {
    let p = corpus("harmonic_oscillator");
    assert_eq!(run_identity_catalog(&p).to_json(), run_identity_catalog(&p).to_json());
}
