//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every operation takes and returns JSON text. The plain functions in this
//! module hold the logic and are tested natively; the `js_*` wrappers only
//! convert errors for JavaScript.

use std::collections::BTreeMap;

use mindscreen_core::evaluation::{
    aggregate, cross_validate, f1, round2, select_by_scores, ClassMetrics, CvOptions,
};
use mindscreen_core::synth::{generate, GeneratorConfig};
use mindscreen_core::vcbt::{route_for, DISCLAIMER};
use mindscreen_core::{
    builtin_schema, ClassifierConfig, ClassifierKind, DisorderLabel, RespondentRecord,
    ScreeningModel,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Cohort size used to train the model behind `assess`.
pub const DEMO_COHORT: usize = 1000;

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareRequest {
    pub n: usize,
    pub separability: f64,
    pub seed: u64,
    pub folds: usize,
}

impl Default for CompareRequest {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        Self {
            n: 300,
            separability: g.separability,
            seed: g.seed,
            folds: CvOptions::default().folds,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct KindSummary {
    pub mean_weighted_f1: f64,
    pub std_weighted_f1: f64,
    pub pooled_accuracy: f64,
    /// Pooled report in the text table layout.
    pub table: String,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub records: usize,
    pub seed: u64,
    pub folds: usize,
    pub separability: f64,
    pub results: BTreeMap<ClassifierKind, KindSummary>,
    pub selected: ClassifierKind,
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| format!("invalid request: {e}"))
}

fn to_json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Generates a cohort and cross-validates both classifiers on it.
pub fn compare(request: &str) -> Result<String, String> {
    let req: CompareRequest = if request.trim().is_empty() {
        CompareRequest::default()
    } else {
        parse(request)?
    };
    let config = GeneratorConfig {
        n: req.n,
        separability: req.separability,
        seed: req.seed,
        ..Default::default()
    };
    let ds = generate(&config).map_err(|e| e.to_string())?;
    let cv = CvOptions {
        folds: req.folds,
        seed: req.seed,
        stratified: false,
    };
    let mut results = BTreeMap::new();
    let mut scores = BTreeMap::new();
    for kind in ClassifierKind::ALL {
        let out = cross_validate(&ds, kind, &ClassifierConfig::default(), &cv)
            .map_err(|e| e.to_string())?;
        scores.insert(kind, (out.mean_weighted_f1, out.pooled.accuracy));
        results.insert(
            kind,
            KindSummary {
                mean_weighted_f1: out.mean_weighted_f1,
                std_weighted_f1: out.std_weighted_f1,
                pooled_accuracy: out.pooled.accuracy,
                table: out.pooled.to_string(),
            },
        );
    }
    let selected = select_by_scores(&scores).map_err(|e| e.to_string())?;
    to_json(&Comparison {
        records: ds.len(),
        seed: req.seed,
        folds: req.folds,
        separability: req.separability,
        results,
        selected,
    })
}

/// Feature names, answer choices and ranges for building the form.
pub fn schema() -> String {
    let features: Vec<Value> = builtin_schema()
        .features()
        .iter()
        .map(|f| {
            let range = f.range();
            json!({
                "name": f.name,
                "required": f.required,
                "choices": f.category_codes.iter().map(|c| c.label.as_str()).collect::<Vec<_>>(),
                "min": range.min,
                "max": range.max,
                "integral": f.integral,
            })
        })
        .collect();
    json!({ "features": features }).to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssessRequest {
    pub kind: ClassifierKind,
    /// Feature name to raw answer text; blank means unanswered.
    pub answers: BTreeMap<String, String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Trains the chosen classifier on a default synthetic cohort and screens
/// one set of answers. Invalid answers come back as a `violations` list.
pub fn assess(request: &str) -> Result<String, String> {
    let req: AssessRequest = parse(request)?;
    let schema = builtin_schema();
    let answers = req.answers.iter().map(|(k, v)| (k.as_str(), v.as_str()));
    let record = match RespondentRecord::from_answers(&schema, "demo", answers) {
        Ok(r) => r,
        Err(violations) => {
            let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Ok(json!({ "violations": list }).to_string());
        }
    };
    let seed = req.seed.unwrap_or(GeneratorConfig::default().seed);
    let cohort = generate(&GeneratorConfig {
        n: DEMO_COHORT,
        seed,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let model = ScreeningModel::train(req.kind, &ClassifierConfig::default(), &cohort)
        .map_err(|e| e.to_string())?;
    let p = model.assess(&schema, &record).map_err(|e| e.to_string())?;
    Ok(json!({
        "label": p.label.code(),
        "disorder": p.label.name(),
        "route": route_for(p.label),
        "disclaimer": DISCLAIMER,
    })
    .to_string())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricRow {
    pub precision: f64,
    pub recall: f64,
    pub support: u64,
}

/// Per-class F1 plus macro and weighted averages from three rows of
/// precision, recall and support, in label order 1, 2, 3.
pub fn metric_table(request: &str) -> Result<String, String> {
    let rows: Vec<MetricRow> = parse(request)?;
    if rows.len() != DisorderLabel::ALL.len() {
        return Err(format!(
            "expected {} rows, got {}",
            DisorderLabel::ALL.len(),
            rows.len()
        ));
    }
    let per_class: Vec<ClassMetrics> = DisorderLabel::ALL
        .into_iter()
        .zip(&rows)
        .map(|(label, r)| ClassMetrics {
            label,
            precision: r.precision,
            recall: r.recall,
            f1: f1(r.precision, r.recall),
            support: r.support,
        })
        .collect();
    let agg = aggregate(&per_class).map_err(|e| e.to_string())?;
    let triple = |p: f64, r: f64, f: f64| json!({ "precision": round2(p), "recall": round2(r), "f1": round2(f) });
    let classes: Vec<Value> = per_class
        .iter()
        .map(|c| {
            let mut v = triple(c.precision, c.recall, c.f1);
            v["label"] = json!(c.label.code());
            v["f1_exact"] = json!(c.f1);
            v["support"] = json!(c.support);
            v
        })
        .collect();
    let m = agg.macro_avg;
    let w = agg.weighted_avg;
    Ok(json!({
        "classes": classes,
        "macro_avg": triple(m.precision, m.recall, m.f1),
        "weighted_avg": triple(w.precision, w.recall, w.f1),
        "total_support": agg.total_support,
    })
    .to_string())
}

#[wasm_bindgen(js_name = compare)]
pub fn js_compare(request: &str) -> Result<String, JsError> {
    compare(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = schema)]
pub fn js_schema() -> String {
    schema()
}

#[wasm_bindgen(js_name = assess)]
pub fn js_assess(request: &str) -> Result<String, JsError> {
    assess(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = metricTable)]
pub fn js_metric_table(request: &str) -> Result<String, JsError> {
    metric_table(request).map_err(|e| JsError::new(&e))
}
