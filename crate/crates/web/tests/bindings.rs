use powerval_web::{fixture_text, replay_json, scenario_json, validate_json};
use serde_json::Value;

fn f(name: &str) -> &'static str {
    fixture_text(name).unwrap()
}

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn replay_returns_csv_and_svg() {
    let v = parse(replay_json(f("phone_model"), f("phone_trace"), 0.0).unwrap());
    assert_eq!(v["segments"], 6);
    assert!(v["csv"].as_str().unwrap().starts_with("t_start,t_end,power_w,states"));
    assert!(v["svg"].as_str().unwrap().contains(r#"data-label="modeled""#));
}

#[test]
fn validate_clean_and_anomalous() {
    let clean = parse(validate_json(f("handset_model"), f("handset_trace"), 10.0, 1, 0.01, 0.5, 0.0, 0.0, 0.0, 0.05).unwrap());
    assert_eq!(clean["report"]["verdict"], "pass");

    let bad = parse(validate_json(f("handset_model"), f("handset_trace"), 10.0, 1, 0.01, 0.5, 5.8, 6.8, 0.2, 0.05).unwrap());
    assert_eq!(bad["report"]["verdict"], "fail");
    assert_eq!(bad["report"]["discrepancies"].as_array().unwrap().len(), 1);
    assert!(bad["svg"].as_str().unwrap().contains("discrepancy excess"));
}

#[test]
fn scenario_timing_and_energy() {
    let v = parse(scenario_json(f("phone_model"), f("phone_trace"), f("phone_scenario"), Some(4)).unwrap());
    assert_eq!(v["pass"], true);
    assert!((v["expected_energy_j"].as_f64().unwrap() - 0.41).abs() < 1e-12);
    assert_eq!(v["energy"]["pass"], true);
}

#[test]
fn parse_errors_name_the_input() {
    let err = replay_json("region {", f("phone_trace"), 0.0).unwrap_err();
    assert!(err.starts_with("model: "), "{err}");
    assert!(fixture_text("nope").is_none());
}
