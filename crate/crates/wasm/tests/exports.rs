use mace_wasm::{cell_risk, dp_curve, normal_audit};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn dp_curve_endpoints() {
    let v = parse(dp_curve(0.5, 2.0, 4).unwrap());
    let pts = v.as_array().unwrap();
    assert_eq!(pts.len(), 5);
    assert_eq!(pts[0]["bound"].as_f64().unwrap(), 0.0);
    let at_one = pts[2]["bound"].as_f64().unwrap();
    assert!((at_one - 0.462_117_157_26).abs() < 1e-10);
    assert!(dp_curve(0.5, 0.0, 4).is_err());
    assert!(dp_curve(1.5, 1.0, 4).is_err());
}

#[test]
fn normal_audit_tracks_truth() {
    let v = parse(normal_audit(1.0, 4000, 20, 3).unwrap());
    let truth = v["truth"].as_f64().unwrap();
    assert!((truth - 0.38292).abs() < 1e-5);
    assert!((v["u_n"].as_f64().unwrap() - truth).abs() < 0.1);
    assert!((v["w_n"].as_f64().unwrap() - truth).abs() < 0.1);
    assert_eq!(v["x"].as_array().unwrap().len(), 201);
    assert!(v["risk"].as_array().unwrap().iter().all(|r| (0.0..=1.0).contains(&r.as_f64().unwrap())));
    assert!(normal_audit(1.0, 2, 20, 3).is_err());
}

#[test]
fn cell_risk_from_counts() {
    let v = parse(cell_risk(900, 1000, 100, 1000, 0.5, 0.05).unwrap());
    assert!((v["risk"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert!(v["lower"].as_f64().unwrap() < 0.8 && v["upper"].as_f64().unwrap() > 0.8);
    assert!((v["am"].as_f64().unwrap() - 0.9).abs() < 1e-12);
    // Equal rates at p = ½: the posterior sits on the AM threshold.
    let v = parse(cell_risk(10, 100, 10, 100, 0.5, 0.05).unwrap());
    assert_eq!(v["risk"].as_f64().unwrap(), 0.0);
    assert!(v["am_error"].as_str().unwrap().contains("ties"));
    assert!(cell_risk(5, 4, 1, 10, 0.5, 0.05).is_err());
}
