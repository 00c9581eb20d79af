//! Acceptance criteria. Each test covers one criterion, checks every part of it
//! at the stated tolerance and runtime budget, and prints a single
//! `PASS`/`FAIL` line straight to stdout (visible without `--nocapture`).

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use mindscreen_core::evaluation::{
    aggregate, cross_validate, evaluate_holdout, f1, kfold_indices, select_model, train_test_split, ClassMetrics,
    ClassificationReport, ConfusionMatrix, CvOptions,
};
use mindscreen_core::knn::KnnModel;
use mindscreen_core::preprocess::normalize_value;
use mindscreen_core::schema::Bounds;
use mindscreen_core::svm::{dual_objective, hinge_objective, kkt_residual, train_binary, SvmParams};
use mindscreen_core::synth::{generate, generate_separable, GeneratorConfig};
use mindscreen_core::{
    builtin_schema, ClassifierConfig, ClassifierKind, Dataset, DisorderLabel, PreprocessorModel, RespondentRecord,
    ScreeningModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Criterion {
    name: &'static str,
    start: Instant,
    budget: Duration,
    failures: Vec<String>,
}

impl Criterion {
    fn new(name: &'static str, budget: Duration) -> Self {
        Self { name, start: Instant::now(), budget, failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn near(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        self.check((got - want).abs() <= tol, || format!("{what} = {got:.5}, want {want} ± {tol}"));
    }

    fn finish(mut self) {
        let elapsed = self.start.elapsed();
        let budget = self.budget;
        self.check(elapsed < budget, || format!("took {elapsed:.2?}, budget {budget:.0?}"));
        let line = if self.failures.is_empty() {
            format!("PASS {} ({elapsed:.2?})\n", self.name)
        } else {
            format!("FAIL {} ({elapsed:.2?}): {}\n", self.name, self.failures.join("; "))
        };
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(line.as_bytes());
        let _ = out.flush();
        assert!(self.failures.is_empty(), "{}", line.trim_end());
    }
}

fn row(label: DisorderLabel, precision: f64, recall: f64, support: u64) -> ClassMetrics {
    ClassMetrics { label, precision, recall, f1: f1(precision, recall), support }
}

use DisorderLabel::{Anxiety, Depression, InternetAddiction};

#[test]
fn table_ii_reproduction() {
    let mut c = Criterion::new("table_ii_reproduction", Duration::from_secs(1));
    let rows = [row(Depression, 0.86, 0.90, 60), row(InternetAddiction, 0.88, 0.70, 30), row(Anxiety, 0.38, 0.50, 10)];
    for (r, want) in rows.iter().zip([0.88, 0.78, 0.43]) {
        c.near(&format!("F1 class {}", r.label.code()), r.f1, want, 0.005);
    }
    let agg = aggregate(&rows).unwrap();
    c.near("macro precision", agg.macro_avg.precision, 0.71, 0.005);
    c.near("macro recall", agg.macro_avg.recall, 0.70, 0.005);
    c.near("macro F1", agg.macro_avg.f1, 0.70, 0.005);
    c.near("weighted precision", agg.weighted_avg.precision, 0.82, 0.005);
    c.near("weighted recall", agg.weighted_avg.recall, 0.80, 0.005);
    c.near("weighted F1", agg.weighted_avg.f1, 0.80, 0.005);
    c.finish();
}

#[test]
fn table_iii_reproduction() {
    let mut c = Criterion::new("table_iii_reproduction", Duration::from_secs(1));
    let rows = [row(Depression, 0.93, 0.90, 62), row(InternetAddiction, 0.74, 0.82, 28), row(Anxiety, 0.44, 0.40, 10)];
    for (r, want) in rows.iter().zip([0.92, 0.78, 0.42]) {
        c.near(&format!("F1 class {}", r.label.code()), r.f1, want, 0.005);
    }
    let agg = aggregate(&rows).unwrap();
    c.near("weighted F1", agg.weighted_avg.f1, 0.83, 0.005);

    // Selection sees only weighted F1 here, so build reports that carry it.
    let report_with = |weighted_f1: f64| {
        let mut r = ClassificationReport {
            per_class: rows,
            accuracy: 0.0,
            macro_avg: agg.macro_avg,
            weighted_avg: agg.weighted_avg,
            total_support: 100,
            confusion: ConfusionMatrix::default(),
        };
        r.weighted_avg.f1 = weighted_f1;
        r
    };
    let reports = BTreeMap::from([(ClassifierKind::Svm, report_with(0.80)), (ClassifierKind::Knn, report_with(0.83))]);
    let chosen = select_model(&reports).unwrap();
    c.check(chosen == ClassifierKind::Knn, || format!("select_model chose {chosen}"));
    c.finish();
}

/// Full sort by (distance, index), then majority vote; ties on count go to
/// the smaller summed distance, then the smaller code.
fn brute_force_knn(points: &[Vec<f64>], labels: &[DisorderLabel], k: usize, q: &[f64]) -> DisorderLabel {
    let mut order: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut tally: BTreeMap<u8, (usize, f64)> = BTreeMap::new();
    for &(d, i) in &order[..k] {
        let e = tally.entry(labels[i].code()).or_default();
        e.0 += 1;
        e.1 += d;
    }
    let best = tally
        .iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.total_cmp(&a.1 .1)).then(b.0.cmp(a.0)))
        .unwrap();
    DisorderLabel::from_code(*best.0).unwrap()
}

#[test]
fn knn_oracle_equivalence() {
    let mut c = Criterion::new("knn_oracle_equivalence", Duration::from_secs(10));
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ties = 0;
    for trial in 0..1000 {
        let n = rng.random_range(1..=50);
        let k = rng.random_range(1..=7).min(n);
        // every third trial uses a coarse grid and duplicated points so that
        // equal distances and split votes occur
        let tie_case = trial % 3 == 0;
        let point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..18).map(|_| if tie_case { rng.random_range(0..3) as f64 / 2.0 } else { rng.random::<f64>() }).collect()
        };
        let mut points: Vec<Vec<f64>> = (0..n).map(|_| point(&mut rng)).collect();
        if tie_case && n > 1 {
            let src = rng.random_range(0..n);
            let dst = rng.random_range(0..n);
            points[dst] = points[src].clone();
        }
        let labels: Vec<DisorderLabel> = (0..n).map(|_| DisorderLabel::ALL[rng.random_range(0..3)]).collect();
        let query = if tie_case && rng.random_bool(0.5) { points[rng.random_range(0..n)].clone() } else { point(&mut rng) };
        let model = KnnModel::new(points.clone(), labels.clone(), k).unwrap();
        let got = model.predict(&query).unwrap();
        let want = brute_force_knn(&points, &labels, k, &query);
        let dists: Vec<f64> = got.neighbors.iter().map(|nb| nb.distance).collect();
        if dists.windows(2).any(|w| w[0] == w[1]) {
            ties += 1;
        }
        c.check(got.label == want, || format!("trial {trial}: got {}, oracle {}", got.label, want));
    }
    c.check(ties > 50, || format!("only {ties} trials exercised distance ties"));
    c.finish();
}

fn separable_2d(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let normal = [angle.cos(), angle.sin()];
    let mut x = Vec::new();
    let mut y = Vec::new();
    while x.len() < n {
        let p = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let side = p[0] * normal[0] + p[1] * normal[1];
        let label = if side > 0.0 { 1.0 } else { -1.0 };
        if side.abs() < 0.2 || y.iter().filter(|&&v| v == label).count() >= n / 2 {
            continue;
        }
        x.push(p);
        y.push(label);
    }
    (x, y)
}

#[test]
fn svm_analytic_case() {
    let mut c = Criterion::new("svm_analytic_case", Duration::from_secs(30));
    let params = SvmParams::default();
    let m = train_binary(&[vec![-1.0], vec![1.0]], &[-1.0, 1.0], &params).unwrap();
    c.near("two-point weight", m.weights[0], 1.0, 1e-6);
    c.near("two-point bias", m.bias, 0.0, 1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for problem in 0..20 {
        let (x, y) = separable_2d(&mut rng, 30);
        let m = train_binary(&x, &y, &params).unwrap();
        let kkt = kkt_residual(&m, &x, &y);
        c.check(kkt <= params.tol, || format!("problem {problem}: KKT residual {kkt:e} > {}", params.tol));
        let gap = hinge_objective(&m, &x, &y, params.c) - dual_objective(&m, &x, &y);
        c.check((-1e-9..=1e-3).contains(&gap), || format!("problem {problem}: duality gap {gap:e}"));
    }
    c.finish();
}

#[test]
fn pipeline_soundness() {
    let mut c = Criterion::new("pipeline_soundness", Duration::from_secs(120));
    let ds = generate_separable(300, 42);
    for kind in ClassifierKind::ALL {
        let out = cross_validate(&ds, kind, &ClassifierConfig::default(), &CvOptions::default()).unwrap();
        let mean = out.mean_weighted_f1;
        c.check(mean >= 0.99, || format!("{kind} separable 10-fold mean weighted F1 {mean:.4} < 0.99"));
    }
    let flat = generate(&GeneratorConfig { separability: 0.0, ..Default::default() }).unwrap();
    let (train, test) = train_test_split(&flat, 0.2, 42).unwrap();
    for kind in ClassifierKind::ALL {
        let rep = evaluate_holdout(&train, &test, kind, &ClassifierConfig::default()).unwrap();
        let wf1 = rep.weighted_avg.f1;
        c.check(wf1 < 0.55, || format!("{kind} separability=0 weighted F1 {wf1:.4} >= 0.55"));
    }
    c.finish();
}

#[test]
fn fold_arithmetic() {
    let mut c = Criterion::new("fold_arithmetic", Duration::from_secs(1));
    let plan = kfold_indices(1000, 10, 42).unwrap();
    let folds = plan.folds();
    c.check(folds.len() == 10, || format!("{} folds", folds.len()));
    c.check(folds.iter().all(|f| f.len() == 100), || format!("fold sizes {:?}", plan.fold_sizes()));
    let mut all: Vec<usize> = folds.concat();
    all.sort_unstable();
    c.check(all == (0..1000).collect::<Vec<_>>(), || "folds do not partition 0..1000".into());

    let schema = builtin_schema();
    let records = (0..1000)
        .map(|i| {
            let mut r = RespondentRecord::new(format!("r{i}"), vec![None; schema.len()], Some(Depression));
            r.set(&schema, "age", Some(20.0));
            r.set(&schema, "sex", Some(1.0));
            r
        })
        .collect();
    let ds = Dataset::new(schema, records).unwrap();
    let (train, test) = train_test_split(&ds, 0.2, 42).unwrap();
    c.check((train.len(), test.len()) == (800, 200), || format!("split {}/{}", train.len(), test.len()));
    c.finish();
}

#[test]
fn cohort_marginals() {
    let mut c = Criterion::new("cohort_marginals", Duration::from_secs(5));
    let ds = generate(&GeneratorConfig { n: 1000, seed: 42, ..Default::default() }).unwrap();
    let schema = ds.schema();
    let col = |name: &str| -> Vec<f64> {
        let i = schema.index_of(name).unwrap();
        ds.records().iter().filter_map(|r| r.values[i]).collect()
    };
    let age = col("age");
    c.near("mean age", age.iter().sum::<f64>() / age.len() as f64, 23.0, 1.0);
    let female = col("sex").iter().filter(|&&v| v == 0.0).count() as f64 / 1000.0;
    c.near("female fraction", female, 0.22, 0.04);
    let employed = col("employed").iter().filter(|&&v| v == 1.0).count() as f64;
    c.near("employed count", employed, 489.0, 40.0);
    let chronic = col("chronic_disease").iter().filter(|&&v| v == 1.0).count() as f64;
    c.near("chronic disease count", chronic, 162.0, 40.0);
    for (label, prior) in DisorderLabel::ALL.into_iter().zip([0.61, 0.29, 0.10]) {
        let share = ds.records().iter().filter(|r| r.label == Some(label)).count() as f64 / 1000.0;
        c.near(&format!("share of {label}"), share, prior, 0.03);
    }
    c.finish();
}

#[test]
fn normalization_fixture() {
    let mut c = Criterion::new("normalization_fixture", Duration::from_secs(5));
    let b = Bounds::new(0.0, 10.0);
    c.check(normalize_value(5.0, b).unwrap() == 0.5, || "normalize(5, [0,10]) != 0.5".into());
    c.check(normalize_value(0.0, b).unwrap() == 0.0, || "min endpoint != 0".into());
    c.check(normalize_value(10.0, b).unwrap() == 1.0, || "max endpoint != 1".into());

    let schema = builtin_schema();
    let preprocessor = PreprocessorModel::fit(&generate(&GeneratorConfig::default()).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let mut outside = 0usize;
    for i in 0..10_000 {
        let values = schema
            .features()
            .iter()
            .map(|f| {
                if !f.required && rng.random_bool(0.1) {
                    return None;
                }
                Some(if f.is_coded() {
                    f.category_codes[rng.random_range(0..f.category_codes.len())].code as f64
                } else {
                    let r = f.range();
                    let v = rng.random_range(r.min..=r.max);
                    if f.integral { v.round() } else { v }
                })
            })
            .collect();
        let record = RespondentRecord::new(format!("n{i}"), values, None);
        let v = preprocessor.transform(&record).unwrap();
        outside += v.values.iter().filter(|x| !(0.0..=1.0).contains(*x)).count();
    }
    c.check(outside == 0, || format!("{outside} components outside [0, 1]"));
    c.finish();
}

#[tokio::test(flavor = "multi_thread")]
async fn service_flow() {
    use mindscreen_service::{bind, replay, serve_on, ServiceConfig};
    use serde_json::{json, Value};

    let mut c = Criterion::new("service_flow", Duration::from_secs(30));
    let dir = tempfile::tempdir().unwrap();
    let model = ScreeningModel::train(
        ClassifierKind::Knn,
        &ClassifierConfig::default(),
        &generate(&GeneratorConfig { n: 300, ..Default::default() }).unwrap(),
    )
    .unwrap();
    let model_path = dir.path().join("model.json");
    std::fs::write(&model_path, model.to_json().unwrap()).unwrap();
    let config = ServiceConfig { port: 0, model_path, log_path: dir.path().join("log.jsonl"), ..Default::default() };
    let (listener, state) = bind(&config).await.unwrap();
    let base = format!("http://{}/api/v1", listener.local_addr().unwrap());
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve_on(listener, state, async {
        let _ = stopped.await;
    }));
    let http = reqwest::Client::new();

    let respondents = generate(&GeneratorConfig { n: 30, seed: 3, ..Default::default() }).unwrap();
    let schema = builtin_schema();
    let mut issued: Vec<(String, u64)> = Vec::new();
    for r in &respondents.records()[..5] {
        let answers: BTreeMap<&str, Value> = schema.names().zip(&r.values).map(|(n, v)| (n, json!(v))).collect();
        let resp = http.post(format!("{base}/assessments")).json(&json!({ "answers": answers })).send().await.unwrap();
        let status = resp.status().as_u16();
        c.check(status == 201, || format!("POST /assessments returned {status}"));
        let body: Value = resp.json().await.unwrap();
        let code = body["label"].as_u64().unwrap_or(0);
        c.check((1..=3).contains(&code), || format!("label code {code}"));
        let disclaimer = body["disclaimer"].as_str().unwrap_or("");
        c.check(!disclaimer.is_empty(), || "empty disclaimer".into());
        issued.push((body["assessment_id"].as_str().unwrap_or("").to_owned(), code));
    }

    let (id, code) = issued[0].clone();
    let consent = |agreed: bool| http.post(format!("{base}/assessments/{id}/consent")).json(&json!({ "agreed": agreed }));
    let resp = consent(true).send().await.unwrap();
    c.check(resp.status() == 200, || format!("consent returned {}", resp.status()));
    let body: Value = resp.json().await.unwrap();
    let expected = format!("vcbt/{}", DisorderLabel::from_code(code as u8).map(|l| l.name()).unwrap_or("?"));
    c.check(body["route"] == expected.as_str(), || format!("route {} for label {code}", body["route"]));
    let dup = consent(true).send().await.unwrap().status();
    c.check(dup == 409, || format!("duplicate consent returned {dup}"));

    for (name, count) in [("depression", 6), ("internet_addiction", 5), ("anxiety", 4)] {
        let body: Value = http.get(format!("{base}/vcbt/{name}")).send().await.unwrap().json().await.unwrap();
        let items = body["items"].as_array().cloned().unwrap_or_default();
        c.check(items.len() == count, || format!("{name} has {} items", items.len()));
        if name == "depression" {
            let music = items.iter().any(|i| i["title"].as_str().unwrap_or("").to_lowercase().contains("music"));
            c.check(music, || "no music-therapy item".into());
        }
    }

    stop.send(()).unwrap();
    server.await.unwrap().unwrap();
    let log = replay(&config.log_path).unwrap();
    let replayed: Vec<(String, u64)> =
        log.assessments.iter().map(|a| (a.assessment_id.clone(), a.label.code() as u64)).collect();
    c.check(replayed == issued, || format!("replay gave {replayed:?}, issued {issued:?}"));
    c.finish();
}
