use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use mindscreen_core::evaluation::{
    cross_validate, evaluate_holdout, select_by_scores, select_model, train_test_split, ClassificationReport,
    CvOutcome,
};
use mindscreen_core::schema::{load_dataset, write_dataset};
use mindscreen_core::synth::generate;
use mindscreen_core::vcbt::DISCLAIMER;
use mindscreen_core::{builtin_schema, ClassifierKind, Dataset, ScreeningModel};
use serde::Serialize;
use serde_json::Value;

use crate::settings::{FileConfig, Settings};
use crate::{AssessArgs, Cli, CliError, Command, EvalMode, EvaluateArgs, GenerateArgs, TrainArgs};

/// Runs one parsed invocation. Data goes to `out`, progress notes to `err`.
pub fn run(
    cli: Cli,
    env: impl Fn(&str) -> Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    let file = cli.config.as_deref().map(FileConfig::load).transpose()?;
    let settings = Settings::resolve(file, &cli.command.flag_values(), env)?;
    match cli.command {
        Command::Generate(a) => cmd_generate(&a, &settings, out, err),
        Command::Train(a) => cmd_train(&a, &settings, out),
        Command::Evaluate(a) => cmd_evaluate(&a, &settings, out),
        Command::Assess(a) => cmd_assess(&a, &settings, out),
        Command::Serve(_) => cmd_serve(&settings, err),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::File(format!("{}: {e}", path.display()))
}

fn write_out(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<(), CliError> {
    out.write_fmt(text).map_err(|e| CliError::File(format!("output: {e}")))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    load_dataset(BufReader::new(file), &builtin_schema()).map_err(|e| io_err(path, e))
}

fn read_labeled(path: &Path) -> Result<Dataset, CliError> {
    let ds = read_dataset(path)?;
    if !ds.is_labeled() {
        return Err(CliError::File(format!("{}: every row needs a target label", path.display())));
    }
    Ok(ds)
}

fn cmd_generate(a: &GenerateArgs, s: &Settings, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let mut config = s.generator;
    config.n = a.n.unwrap_or(config.n);
    config.separability = a.separability.unwrap_or(config.separability);
    let ds = generate(&config).map_err(|e| CliError::Usage(e.to_string()))?;
    match &a.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_err(path, e))?;
            let mut w = BufWriter::new(file);
            write_dataset(&ds, &mut w).map_err(|e| io_err(path, e))?;
            w.flush().map_err(|e| io_err(path, e))?;
        }
        None => write_dataset(&ds, &mut *out).map_err(|e| CliError::File(e.to_string()))?,
    }
    let dest = a.out.as_ref().map_or("stdout".to_owned(), |p| p.display().to_string());
    let _ = writeln!(
        err,
        "generated {} records (seed {}, separability {}) -> {dest}",
        ds.len(),
        config.seed,
        config.separability
    );
    Ok(())
}

fn cmd_train(a: &TrainArgs, s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = read_labeled(&a.data)?;
    let kind = ClassifierKind::from(a.kind);
    let (train, test) = train_test_split(&ds, s.test_fraction, s.seed).map_err(mindscreen_core::Error::from)?;
    let model = ScreeningModel::train(kind, &s.classifier(), &train)?;
    let file = File::create(&a.out).map_err(|e| io_err(&a.out, e))?;
    model.to_writer(BufWriter::new(file)).map_err(|e| io_err(&a.out, e))?;
    let rep = evaluate_holdout(&train, &test, kind, &s.classifier())?;
    write_out(
        out,
        format_args!(
            "trained {kind} on {} records (seed {}); holdout {} records: accuracy {:.4}, weighted F1 {:.4}\nmodel written to {}\n",
            train.len(),
            s.seed,
            test.len(),
            rep.accuracy,
            rep.weighted_avg.f1,
            a.out.display()
        ),
    )
}

#[derive(Debug, Serialize)]
pub struct KindResult {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout: Option<ClassificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvOutcome>,
}

#[derive(Debug, Serialize)]
pub struct EvaluationDoc {
    pub data: String,
    pub records: usize,
    pub seed: u64,
    pub folds: usize,
    pub test_fraction: f64,
    pub stratified: bool,
    pub results: BTreeMap<ClassifierKind, KindResult>,
    pub selected: ClassifierKind,
    /// "cv" when chosen by mean fold weighted F1, otherwise "holdout".
    pub selected_by: String,
}

fn cmd_evaluate(a: &EvaluateArgs, s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = read_labeled(&a.data)?;
    let config = s.classifier();
    let mut results = BTreeMap::new();
    let mut text = format!(
        "data: {} ({} records), seed {}, test fraction {}, {} folds{}\n",
        a.data.display(),
        ds.len(),
        s.seed,
        s.test_fraction,
        s.folds,
        if s.stratified { " (stratified)" } else { "" }
    );
    for kind in a.kind.kinds() {
        text.push_str(&format!("\n== {kind}\n"));
        let holdout = if a.mode != EvalMode::Cv {
            let (train, test) = train_test_split(&ds, s.test_fraction, s.seed).map_err(mindscreen_core::Error::from)?;
            let rep = evaluate_holdout(&train, &test, kind, &config)?;
            text.push_str(&format!("holdout: {} train / {} test\n{rep}", train.len(), test.len()));
            Some(rep)
        } else {
            None
        };
        let cv = if a.mode != EvalMode::Holdout {
            let outcome = cross_validate(&ds, kind, &config, &s.cv())?;
            text.push_str(&format!(
                "{}-fold cv: weighted F1 mean {:.4}, std {:.4}; pooled accuracy {:.4}\n",
                outcome.plan.k, outcome.mean_weighted_f1, outcome.std_weighted_f1, outcome.pooled.accuracy
            ));
            let first = &outcome.fold_reports[0];
            text.push_str(&format!("fold 1 ({} records):\n{first}", first.total_support));
            Some(outcome)
        } else {
            None
        };
        results.insert(kind, KindResult { holdout, cv });
    }

    let (selected, selected_by) = if a.mode == EvalMode::Holdout {
        let reports = results.iter().filter_map(|(k, r)| r.holdout.clone().map(|h| (*k, h))).collect();
        (select_model(&reports).map_err(mindscreen_core::Error::from)?, "holdout")
    } else {
        let scores = results
            .iter()
            .filter_map(|(k, r)| r.cv.as_ref().map(|c| (*k, (c.mean_weighted_f1, c.pooled.accuracy))))
            .collect();
        (select_by_scores(&scores).map_err(mindscreen_core::Error::from)?, "cv")
    };
    if results.len() > 1 {
        text.push_str(&format!("\nselected: {selected}\n"));
    }
    write_out(out, format_args!("{text}"))?;

    if let Some(path) = &a.json {
        let doc = EvaluationDoc {
            data: a.data.display().to_string(),
            records: ds.len(),
            seed: s.seed,
            folds: s.folds,
            test_fraction: s.test_fraction,
            stratified: s.stratified,
            results,
            selected,
            selected_by: selected_by.to_owned(),
        };
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &doc).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn load_answers(a: &AssessArgs) -> Result<BTreeMap<String, Value>, CliError> {
    let mut answers: BTreeMap<String, Value> = match &a.answers {
        Some(path) => {
            let file = File::open(path).map_err(|e| io_err(path, e))?;
            serde_json::from_reader(BufReader::new(file)).map_err(|e| io_err(path, e))?
        }
        None => BTreeMap::new(),
    };
    for pair in &a.answer {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--answer expects NAME=VALUE, got {pair:?}")))?;
        answers.insert(name.trim().to_owned(), Value::String(value.trim().to_owned()));
    }
    if answers.is_empty() {
        return Err(CliError::Usage("give answers with --answers FILE or --answer NAME=VALUE".into()));
    }
    Ok(answers)
}

fn cmd_assess(a: &AssessArgs, s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let path = s.model_path();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let model = ScreeningModel::from_reader(BufReader::new(file)).map_err(|e| io_err(path, e))?;
    let answers = load_answers(a)?;
    let schema = builtin_schema();
    let record = mindscreen_service::ingest(&schema, &answers).map_err(|violations| {
        CliError::Answers(violations.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))
    })?;
    let p = model.assess(&schema, &record)?;
    write_out(out, format_args!("code={} {}\n{DISCLAIMER}\n", p.label.code(), p.label.name()))
}

fn cmd_serve(s: &Settings, err: &mut dyn Write) -> Result<(), CliError> {
    let _ = writeln!(
        err,
        "serving model {} with log {}",
        s.service.model_path.display(),
        s.service.log_path.display()
    );
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::File(e.to_string()))?;
    runtime.block_on(mindscreen_service::serve(&s.service))?;
    Ok(())
}
