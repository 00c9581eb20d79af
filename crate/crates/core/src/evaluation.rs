//! Splits, k-fold cross-validation, confusion matrices, per-class metrics and
//! weighted-F1 model selection.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClassifierConfig, ScreeningModel};
use crate::schema::{Dataset, DisorderLabel};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("test fraction must be strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("need at least {needed} records, got {got}")]
    TooSmall { needed: usize, got: usize },
    #[error("fold count must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("cannot split {n} records into {k} folds")]
    TooManyFolds { k: usize, n: usize },
    #[error("{truth} truth labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("no samples to evaluate")]
    Empty,
    #[error("label code {0} outside 1..=3")]
    BadLabel(u8),
    #[error("fold {fold}: training portion has no {label} records")]
    MissingLabelInFold { fold: usize, label: DisorderLabel },
    #[error("dataset contains unlabeled records")]
    Unlabeled,
    #[error("no reports to select from")]
    NothingToSelect,
    #[error("fold {fold}: {message}")]
    Fold { fold: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Knn,
    Svm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 2] = [ClassifierKind::Knn, ClassifierKind::Svm];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Knn => "knn",
            Self::Svm => "svm",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "knn" => Ok(Self::Knn),
            "svm" => Ok(Self::Svm),
            other => Err(format!("unknown classifier kind {other:?}")),
        }
    }
}

/// Shuffles `0..n` with a seeded ChaCha stream.
fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Seeded shuffle split. The test size is `round(n * fraction)`, clamped so
/// both sides are non-empty.
pub fn train_test_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), EvalError> {
    let (train, test) = split_indices(ds.len(), test_fraction, seed)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::BadFraction(test_fraction));
    }
    if n < 2 {
        return Err(EvalError::TooSmall { needed: 2, got: n });
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut idx = permutation(n, seed);
    let test = idx.split_off(n - n_test);
    Ok((idx, test))
}

/// Assignment of every record to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Record indices per fold, ascending within each fold.
    pub fn folds(&self) -> Vec<Vec<usize>> {
        let mut folds = vec![Vec::new(); self.k];
        for (i, &f) in self.assignments.iter().enumerate() {
            folds[f].push(i);
        }
        folds
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        self.folds().iter().map(Vec::len).collect()
    }
}

/// Seeded k-fold partition of `0..n`; sizes are `ceil(n/k)` for the first
/// `n % k` folds and `floor(n/k)` for the rest.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::TooFewFolds(k));
    }
    if k > n {
        return Err(EvalError::TooManyFolds { k, n });
    }
    let mut assignments = vec![0; n];
    for (pos, i) in permutation(n, seed).into_iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldPlan { k, seed, assignments })
}

/// Label-stratified variant: each label's records are dealt round-robin
/// across folds, continuing where the previous label stopped.
pub fn stratified_kfold_indices(labels: &[DisorderLabel], k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    let n = labels.len();
    if k < 2 {
        return Err(EvalError::TooFewFolds(k));
    }
    if k > n {
        return Err(EvalError::TooManyFolds { k, n });
    }
    let order = permutation(n, seed);
    let mut assignments = vec![0; n];
    let mut pos = 0;
    for label in DisorderLabel::ALL {
        for &i in order.iter().filter(|&&i| labels[i] == label) {
            assignments[i] = pos % k;
            pos += 1;
        }
    }
    Ok(FoldPlan { k, seed, assignments })
}

/// Counts indexed `[truth][predicted]`, class order 1, 2, 3.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, label: DisorderLabel) -> u64 {
        self.counts[label.index()].iter().sum()
    }

    pub fn predicted(&self, label: DisorderLabel) -> u64 {
        self.counts.iter().map(|row| row[label.index()]).sum()
    }

    pub fn add(&mut self, truth: DisorderLabel, predicted: DisorderLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for i in 0..3 {
            for j in 0..3 {
                self.counts[i][j] += other.counts[i][j];
            }
        }
    }
}

pub fn confusion(truth: &[DisorderLabel], predicted: &[DisorderLabel]) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch { truth: truth.len(), predicted: predicted.len() });
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (t, p) in truth.iter().zip(predicted) {
        cm.add(*t, *p);
    }
    Ok(cm)
}

/// Same as [`confusion`] for raw label codes.
pub fn confusion_from_codes(truth: &[u8], predicted: &[u8]) -> Result<ConfusionMatrix, EvalError> {
    let decode = |codes: &[u8]| {
        codes
            .iter()
            .map(|&c| DisorderLabel::from_code(c).ok_or(EvalError::BadLabel(c)))
            .collect::<Result<Vec<_>, _>>()
    };
    confusion(&decode(truth)?, &decode(predicted)?)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: DisorderLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Macro and support-weighted averages of per-class metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// Support-weighted recall, which equals accuracy for a real matrix.
    pub accuracy: f64,
    pub macro_avg: MetricTriple,
    pub weighted_avg: MetricTriple,
    pub total_support: u64,
}

/// Averages per-class rows. Works on published per-class values too, which is
/// why it takes metrics rather than a confusion matrix.
pub fn aggregate(per_class: &[ClassMetrics]) -> Result<Aggregate, EvalError> {
    let total: u64 = per_class.iter().map(|m| m.support).sum();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let k = per_class.len() as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
    };
    let weighted_avg = MetricTriple {
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
    };
    Ok(Aggregate {
        accuracy: weighted_avg.recall,
        macro_avg: MetricTriple {
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            f1: mean(|m| m.f1),
        },
        weighted_avg,
        total_support: total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: [ClassMetrics; 3],
    pub accuracy: f64,
    pub macro_avg: MetricTriple,
    pub weighted_avg: MetricTriple,
    pub total_support: u64,
    pub confusion: ConfusionMatrix,
}

/// Per-class precision, recall and F1 plus accuracy and averages. Metrics
/// with a zero denominator are 0.
pub fn report(cm: &ConfusionMatrix) -> Result<ClassificationReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::Empty);
    }
    let per_class = DisorderLabel::ALL.map(|label| {
        let tp = cm.counts[label.index()][label.index()];
        let precision = ratio(tp, cm.predicted(label));
        let recall = ratio(tp, cm.support(label));
        ClassMetrics { label, precision, recall, f1: f1(precision, recall), support: cm.support(label) }
    });
    let agg = aggregate(&per_class)?;
    Ok(ClassificationReport {
        per_class,
        accuracy: ratio(cm.trace(), total),
        macro_avg: agg.macro_avg,
        weighted_avg: agg.weighted_avg,
        total_support: total,
        confusion: *cm,
    })
}

/// Two decimals, half rounded up, as printed in the tables.
pub fn round2(x: f64) -> f64 {
    // The nudge absorbs representation error such as 0.705 -> 0.70499...
    ((x * 100.0) + 0.5 + 1e-9).floor() / 100.0
}

impl fmt::Display for ClassificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let total = self.total_support;
        writeln!(f, "{:<14}{:>10}{:>10}{:>10}{:>10}", "", "Precision", "Recall", "F1-score", "Support")?;
        for m in &self.per_class {
            writeln!(
                f,
                "{:<14}{:>10.2}{:>10.2}{:>10.2}{:>10}",
                m.label.code(),
                round2(m.precision),
                round2(m.recall),
                round2(m.f1),
                m.support
            )?;
        }
        writeln!(f, "{:<14}{:>10}{:>10}{:>10.2}{:>10}", "Accuracy", "", "", round2(self.accuracy), total)?;
        for (name, t) in [("Macro avg", &self.macro_avg), ("Weighted avg", &self.weighted_avg)] {
            writeln!(
                f,
                "{:<14}{:>10.2}{:>10.2}{:>10.2}{:>10}",
                name,
                round2(t.precision),
                round2(t.recall),
                round2(t.f1),
                total
            )?;
        }
        Ok(())
    }
}

/// Highest weighted F1 wins; then higher accuracy; then knn before svm.
pub fn select_model(reports: &BTreeMap<ClassifierKind, ClassificationReport>) -> Result<ClassifierKind, EvalError> {
    let scores: BTreeMap<ClassifierKind, (f64, f64)> = reports
        .iter()
        .map(|(k, r)| (*k, (r.weighted_avg.f1, r.accuracy)))
        .collect();
    select_by_scores(&scores)
}

/// Selection over `(weighted F1, accuracy)` pairs.
pub fn select_by_scores(scores: &BTreeMap<ClassifierKind, (f64, f64)>) -> Result<ClassifierKind, EvalError> {
    let mut best: Option<(ClassifierKind, (f64, f64))> = None;
    // BTreeMap iterates knn before svm, and only a strict improvement replaces.
    for (&kind, &(f1, acc)) in scores {
        let better = match best {
            None => true,
            Some((_, (bf1, bacc))) => f1 > bf1 || (f1 == bf1 && acc > bacc),
        };
        if better {
            best = Some((kind, (f1, acc)));
        }
    }
    best.map(|(k, _)| k).ok_or(EvalError::NothingToSelect)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { folds: 10, seed: 42, stratified: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub kind: ClassifierKind,
    pub plan: FoldPlan,
    pub fold_reports: Vec<ClassificationReport>,
    pub mean_weighted_f1: f64,
    /// Population standard deviation across folds.
    pub std_weighted_f1: f64,
    /// Report over the concatenated out-of-fold predictions.
    pub pooled: ClassificationReport,
}

fn labels_of(ds: &Dataset) -> Result<Vec<DisorderLabel>, EvalError> {
    ds.records().iter().map(|r| r.label.ok_or(EvalError::Unlabeled)).collect()
}

/// Fits on `train` (preprocessor and classifier) and scores on `test`.
pub fn evaluate_holdout(
    train: &Dataset,
    test: &Dataset,
    kind: ClassifierKind,
    config: &ClassifierConfig,
) -> crate::Result<ClassificationReport> {
    let model = ScreeningModel::train(kind, config, train)?;
    let truth = labels_of(test)?;
    let predicted = test
        .records()
        .iter()
        .map(|r| model.predict(r).map(|p| p.label))
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(report(&confusion(&truth, &predicted)?)?)
}

/// k-fold cross-validation. Each fold refits the preprocessor and classifier
/// on the out-of-fold records only.
pub fn cross_validate(
    ds: &Dataset,
    kind: ClassifierKind,
    config: &ClassifierConfig,
    options: &CvOptions,
) -> crate::Result<CvOutcome> {
    let labels = labels_of(ds)?;
    let plan = if options.stratified {
        stratified_kfold_indices(&labels, options.folds, options.seed)?
    } else {
        kfold_indices(ds.len(), options.folds, options.seed)?
    };
    let folds = plan.folds();
    let mut fold_reports = Vec::with_capacity(plan.k);
    let mut pooled = ConfusionMatrix::default();
    for (f, test_idx) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = (0..ds.len()).filter(|&i| plan.assignments[i] != f).collect();
        for label in DisorderLabel::ALL {
            if !train_idx.iter().any(|&i| labels[i] == label) {
                return Err(EvalError::MissingLabelInFold { fold: f, label }.into());
            }
        }
        let rep = evaluate_holdout(&ds.subset(&train_idx), &ds.subset(test_idx), kind, config)?;
        pooled.merge(&rep.confusion);
        fold_reports.push(rep);
    }
    let scores: Vec<f64> = fold_reports.iter().map(|r| r.weighted_avg.f1).collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / scores.len() as f64;
    Ok(CvOutcome {
        kind,
        plan,
        fold_reports,
        mean_weighted_f1: mean,
        std_weighted_f1: var.sqrt(),
        pooled: report(&pooled)?,
    })
}
