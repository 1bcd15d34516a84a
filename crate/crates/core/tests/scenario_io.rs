use std::fs;

use sensorco::money::Money;
use sensorco::scenario::{
    emit_report, emit_scenario_echo, load_scenario, CurveSource, ReportFormat, ScenarioOverrides,
};
use sensorco::sim::{run_with_break_even, Sweep, DEFAULT_SWEEP_USERS};
use sensorco::Error;
use serde_json::Value;

fn path(name: &str) -> String {
    format!("{}/scenarios/{name}.scenario.json", env!("CARGO_MANIFEST_DIR"))
}

fn field_paths(err: Error) -> Vec<String> {
    match err {
        Error::Validation(errors) => errors.into_iter().map(|e| format!("{}: {}", e.path, e.message)).collect(),
        other => panic!("expected validation errors, got {other}"),
    }
}

/// Copies a bundled scenario (and its curves) into a temp dir and edits it.
fn edited(name: &str, edit: impl FnOnce(&mut Value)) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let src = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    fs::create_dir(dir.path().join("curves")).unwrap();
    for entry in fs::read_dir(src.join("curves")).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), dir.path().join("curves").join(entry.file_name())).unwrap();
    }
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path(name)).unwrap()).unwrap();
    edit(&mut v);
    let p = dir.path().join("s.json");
    fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    (dir, p)
}

#[test]
fn bundled_scenarios_load() {
    for name in ["air", "parking"] {
        let s = load_scenario(path(name)).unwrap();
        assert!(s.company.services.iter().all(|b| matches!(b.curve, CurveSource::Inline(_))));
    }
    let air = load_scenario(path("air")).unwrap();
    assert_eq!(air.funding_goal(), Money::from_cents(49_500));
    assert_eq!(air.company.costs.maintenance_hourly_rate_cents, Money::from_cents(1_000));
    assert_eq!(air.company.services.len(), 4);
}

#[test]
fn negative_hourly_rate_is_reported_with_its_path() {
    let (_d, p) = edited("air", |v| v["company"]["costs"]["maintenance_hourly_rate_cents"] = (-500).into());
    let errors = field_paths(load_scenario(p).unwrap_err());
    assert!(errors.iter().any(|e| e.starts_with("company.costs.maintenance_hourly_rate")), "{errors:?}");
}

#[test]
fn decreasing_prices_cite_the_curve_invariant() {
    let (_d, p) = edited("air", |v| {
        v["company"]["services"][1]["curve"] = serde_json::json!({
            "points": [
                {"price_cents": 50, "usages_per_user_per_month": 1.0},
                {"price_cents": 10, "usages_per_user_per_month": 2.0}
            ]
        });
    });
    let errors = field_paths(load_scenario(p).unwrap_err());
    assert!(
        errors.iter().any(|e| e.starts_with("company.services[1].curve") && e.contains("strictly increasing")),
        "{errors:?}"
    );
}

#[test]
fn all_errors_are_collected() {
    let (_d, p) = edited("parking", |v| {
        v["company"]["costs"]["maintenance_hourly_rate_cents"] = (-1).into();
        v["company"]["esop_fraction"] = 1.5.into();
        v["simulation"]["reserve_rate"] = 2.0.into();
        v["company"]["services"][0]["curve"] = "curves/missing.json".into();
    });
    let errors = field_paths(load_scenario(p).unwrap_err());
    assert!(errors.len() >= 4, "{errors:?}");
    assert!(errors.iter().any(|e| e.starts_with("company.services[0].curve") && e.contains("missing.json")));
    assert!(errors.iter().any(|e| e.starts_with("company.esop_fraction")));
    assert!(errors.iter().any(|e| e.starts_with("simulation.reserve_rate")));
}

#[test]
fn unknown_and_mistyped_fields_name_the_path() {
    let (_d, p) = edited("air", |v| v["simulation"]["months"] = "twelve".into());
    match load_scenario(p).unwrap_err() {
        Error::Parse { message, .. } => assert!(message.contains("simulation.months"), "{message}"),
        other => panic!("{other}"),
    }
    let (_d, p) = edited("air", |v| v["company"]["colour"] = "red".into());
    assert!(matches!(load_scenario(p).unwrap_err(), Error::Parse { .. }));
}

#[test]
fn missing_file_is_an_input_error() {
    let err = load_scenario("/nonexistent/x.json").unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn overrides_are_validated_like_the_file() {
    let s = load_scenario(path("air")).unwrap();
    let bad = ScenarioOverrides { months: Some(0), apr: Some(-1.0), ..Default::default() };
    let errors = field_paths(bad.apply(&s).unwrap_err());
    assert!(errors.iter().any(|e| e.starts_with("simulation.months")));
    assert!(errors.iter().any(|e| e.starts_with("valuation.target_apr")));
    let ok = ScenarioOverrides { users: Some(7), pe: Some(20.0), ..Default::default() }.apply(&s).unwrap();
    assert_eq!(ok.simulation.users.constant(), Some(7));
    assert_eq!(ok.valuation_params().unwrap().pe_ratio, 20.0);
}

#[test]
fn parking_metrics_match_the_table() {
    let s = load_scenario(path("parking")).unwrap();
    let (report, _) = run_with_break_even(&s, DEFAULT_SWEEP_USERS).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(Some(&report), None, ReportFormat::Json, dir.path()).unwrap();
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["market_value_cents"], 57_950);
    assert_eq!(m["ipo_value_cents"], 23_900);
    assert_eq!(m["income_per_year_cents"], 2_375);
    assert!(m["break_even_users"].is_u64());
}

#[test]
fn emitted_money_is_integral() {
    let s = load_scenario(path("air")).unwrap();
    let (report, sweep) = run_with_break_even(&s, DEFAULT_SWEEP_USERS).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(Some(&report), sweep.as_ref(), ReportFormat::Json, dir.path()).unwrap();
    fn walk(key: &str, v: &Value) {
        match v {
            Value::Object(map) => map.iter().for_each(|(k, v)| walk(k, v)),
            Value::Array(a) => a.iter().for_each(|v| walk(key, v)),
            Value::Number(n) if key.ends_with("_cents") => assert!(n.is_i64() || n.is_u64(), "{key} = {n}"),
            _ => {}
        }
    }
    for f in ["metrics.json", "report.json"] {
        walk("", &serde_json::from_str(&fs::read_to_string(dir.path().join(f)).unwrap()).unwrap());
    }
}

#[test]
fn empty_sweep_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = Sweep { rows: vec![], break_even_users: None };
    emit_report(None, Some(&sweep), ReportFormat::Csv, dir.path()).unwrap();
    assert_eq!(
        fs::read_to_string(dir.path().join("sweep.csv")).unwrap(),
        "users,annual_revenue_cents,annual_cost_cents,profit_cents\n"
    );
}

#[test]
fn reruns_are_byte_identical() {
    let s = load_scenario(path("air")).unwrap();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let (report, sweep) = run_with_break_even(&s, DEFAULT_SWEEP_USERS).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut files = emit_report(Some(&report), sweep.as_ref(), ReportFormat::Json, dir.path()).unwrap();
        files.extend(emit_report(Some(&report), sweep.as_ref(), ReportFormat::Csv, dir.path()).unwrap());
        outputs.push(files.iter().map(|f| fs::read(f).unwrap()).collect::<Vec<_>>());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn scenario_echo_round_trips() {
    for name in ["air", "parking"] {
        let first = load_scenario(path(name)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let echo = emit_scenario_echo(&first, dir.path()).unwrap();
        let second = load_scenario(&echo).unwrap();
        assert_eq!(first, second);
        let again = tempfile::tempdir().unwrap();
        let echo2 = emit_scenario_echo(&second, again.path()).unwrap();
        assert_eq!(fs::read(echo).unwrap(), fs::read(echo2).unwrap());
    }
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let sweep = Sweep { rows: vec![], break_even_users: None };
    assert!(matches!(emit_report(None, Some(&sweep), ReportFormat::Csv, blocker.join("sub")), Err(Error::Io { .. })));
}
