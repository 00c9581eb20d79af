use mindscreen_wasm::{assess, compare, metric_table, schema};
use serde_json::Value;

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn compare_reports_both_classifiers() {
    let out = json(&compare(r#"{"n": 200, "separability": 1.0, "folds": 5}"#).unwrap());
    assert_eq!(out["records"], 200);
    for kind in ["knn", "svm"] {
        let f1 = out["results"][kind]["mean_weighted_f1"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&f1));
        assert!(out["results"][kind]["table"]
            .as_str()
            .unwrap()
            .contains("Weighted avg"));
    }
    assert!(["knn", "svm"].contains(&out["selected"].as_str().unwrap()));
    assert_eq!(
        compare(r#"{"n": 200, "separability": 1.0, "folds": 5}"#).unwrap(),
        compare(r#"{"n": 200, "separability": 1.0, "folds": 5}"#).unwrap()
    );
}

#[test]
fn compare_rejects_bad_requests() {
    assert!(compare(r#"{"n": 5}"#).is_err());
    assert!(compare(r#"{"folds": 1}"#).is_err());
    assert!(compare(r#"{"gamma": 1}"#).is_err());
}

#[test]
fn schema_lists_every_feature() {
    let s = json(&schema());
    let features = s["features"].as_array().unwrap();
    assert_eq!(features.len(), 18);
    let sex = features.iter().find(|f| f["name"] == "sex").unwrap();
    assert_eq!(sex["required"], true);
    assert_eq!(sex["choices"].as_array().unwrap().len(), 2);
}

#[test]
fn assess_classifies_or_lists_violations() {
    let ok = json(
        &assess(
            r#"{"kind": "knn", "answers": {"age": "22", "sex": "female", "sleeping_hour": "5"}}"#,
        )
        .unwrap(),
    );
    let code = ok["label"].as_u64().unwrap();
    assert!((1..=3).contains(&code));
    assert_eq!(
        ok["route"],
        format!("vcbt/{}", ok["disorder"].as_str().unwrap())
    );
    assert!(!ok["disclaimer"].as_str().unwrap().is_empty());

    let bad = json(
        &assess(
            r#"{"kind": "svm", "answers": {"age": "22", "sex": "female", "sleeping_hour": "30"}}"#,
        )
        .unwrap(),
    );
    let violations = bad["violations"].as_array().unwrap();
    assert!(violations
        .iter()
        .any(|v| v.as_str().unwrap().contains("sleeping_hour")));
    assert!(assess(r#"{"kind": "forest", "answers": {}}"#).is_err());
}

#[test]
fn metric_table_matches_hand_arithmetic() {
    let rows = r#"[{"precision":0.86,"recall":0.90,"support":60},
                   {"precision":0.88,"recall":0.70,"support":30},
                   {"precision":0.38,"recall":0.50,"support":10}]"#;
    let t = json(&metric_table(rows).unwrap());
    let f1s: Vec<f64> = t["classes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["f1"].as_f64().unwrap())
        .collect();
    assert_eq!(f1s, [0.88, 0.78, 0.43]);
    assert_eq!(t["macro_avg"]["precision"], 0.71);
    assert_eq!(t["weighted_avg"]["f1"], 0.80);
    assert_eq!(t["total_support"], 100);
    assert!(metric_table("[]").is_err());
}
