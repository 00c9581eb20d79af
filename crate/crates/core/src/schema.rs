//! Questionnaire schema, respondent records, and CSV ingestion.
//!
//! Every record carries one slot per feature, stored as the feature's numeric
//! code (`None` for a missing answer). Text answers such as `male` or the
//! hangout answer `No` are translated to codes at ingestion time, so the rest
//! of the pipeline only ever sees numbers.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of questionnaire features (the auto-generated id is not counted).
pub const FEATURE_COUNT: usize = 18;

/// CSV column holding the record identifier.
pub const ID_COLUMN: &str = "id";
/// CSV column holding the disorder code.
pub const TARGET_COLUMN: &str = "target";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("malformed CSV at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("duplicate column {0:?}")]
    DuplicateColumn(String),
    #[error("invalid target {value:?} at row {row}")]
    InvalidLabel { row: usize, value: String },
    #[error("duplicate id {id:?} at row {row}")]
    DuplicateId { row: usize, id: String },
    #[error("validation failed: {}", join_violations(.0))]
    Validation(Vec<Violation>),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("record {id:?} has {got} values, schema expects {expected}")]
    Arity {
        id: String,
        got: usize,
        expected: usize,
    },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Binary,
    OrdinalInteger,
    Continuous,
    CategoricalText,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCode {
    pub label: String,
    pub code: i64,
}

/// Declaration of one questionnaire feature.
///
/// Binary and categorical features accept exactly their listed codes.
/// Ordinal and continuous features accept any value within `bounds`; their
/// `category_codes` (if any) are only text aliases, e.g. hangout `No` -> 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Bounds>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub category_codes: Vec<CategoryCode>,
    pub required: bool,
    /// Present values must be whole numbers.
    pub integral: bool,
}

impl FeatureSpec {
    fn binary(name: &str, zero: &str, one: &str) -> Self {
        Self {
            name: name.to_owned(),
            kind: FeatureKind::Binary,
            bounds: None,
            category_codes: vec![
                CategoryCode { label: zero.to_owned(), code: 0 },
                CategoryCode { label: one.to_owned(), code: 1 },
            ],
            required: false,
            integral: true,
        }
    }

    fn yes_no(name: &str) -> Self {
        Self::binary(name, "no", "yes")
    }

    fn ordinal(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.to_owned(),
            kind: FeatureKind::OrdinalInteger,
            bounds: Some(Bounds::new(min, max)),
            category_codes: Vec::new(),
            required: false,
            integral: true,
        }
    }

    fn continuous(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.to_owned(),
            kind: FeatureKind::Continuous,
            bounds: Some(Bounds::new(min, max)),
            category_codes: Vec::new(),
            required: false,
            integral: false,
        }
    }

    fn required(mut self) -> Self {
        self.required = true;
        self
    }

    fn integral(mut self) -> Self {
        self.integral = true;
        self
    }

    fn alias(mut self, label: &str, code: i64) -> Self {
        self.category_codes.push(CategoryCode { label: label.to_owned(), code });
        self
    }

    /// Binary and categorical features are restricted to their code set.
    pub fn is_coded(&self) -> bool {
        matches!(self.kind, FeatureKind::Binary | FeatureKind::CategoricalText)
    }

    /// The numeric range used for normalization: declared bounds, or the
    /// span of the code set for coded features.
    pub fn range(&self) -> Bounds {
        if let Some(b) = self.bounds {
            return b;
        }
        let codes = self.category_codes.iter().map(|c| c.code as f64);
        let min = codes.clone().fold(f64::INFINITY, f64::min);
        let max = codes.fold(f64::NEG_INFINITY, f64::max);
        Bounds::new(min, max)
    }

    pub fn code_for(&self, label: &str) -> Option<i64> {
        self.category_codes
            .iter()
            .find(|c| c.label.eq_ignore_ascii_case(label))
            .map(|c| c.code)
    }

    pub fn label_for(&self, code: f64) -> Option<&str> {
        self.category_codes
            .iter()
            .find(|c| c.code as f64 == code)
            .map(|c| c.label.as_str())
    }

    /// Parses a raw answer (a category label or a number). Empty means missing.
    pub fn parse(&self, raw: &str) -> Result<Option<f64>, ViolationKind> {
        let raw = raw.trim();
        if raw.is_empty() {
            return Ok(None);
        }
        if let Some(code) = self.code_for(raw) {
            return Ok(Some(code as f64));
        }
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ if self.is_coded() => Err(ViolationKind::UnknownCategory),
            _ => Err(ViolationKind::NotANumber),
        }
    }

    /// Checks a present value against this feature's declaration.
    pub fn check(&self, value: f64) -> Option<ViolationKind> {
        if !value.is_finite() {
            return Some(ViolationKind::NotANumber);
        }
        if self.is_coded() {
            return (!self.category_codes.iter().any(|c| c.code as f64 == value))
                .then_some(ViolationKind::UnknownCategory);
        }
        if let Some(b) = self.bounds {
            if !b.contains(value) {
                return Some(ViolationKind::OutOfBounds { min: b.min, max: b.max });
            }
        }
        if self.integral && value.fract() != 0.0 {
            return Some(ViolationKind::NotInteger);
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ViolationKind {
    OutOfBounds { min: f64, max: f64 },
    NotInteger,
    UnknownCategory,
    NotANumber,
    Missing,
    UnknownFeature,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::OutOfBounds { min, max } => write!(f, "outside [{min}, {max}]"),
            Self::NotInteger => f.write_str("not an integer"),
            Self::UnknownCategory => f.write_str("unknown category"),
            Self::NotANumber => f.write_str("not a number"),
            Self::Missing => f.write_str("required value missing"),
            Self::UnknownFeature => f.write_str("unknown feature"),
        }
    }
}

/// One problem with one value of one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub feature: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    pub value: String,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.feature)?;
        if let Some(row) = self.row {
            write!(f, " (row {row})")?;
        }
        write!(f, ": {:?} {}", self.value, self.kind)
    }
}

/// Target classes. The code <-> name mapping is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum DisorderLabel {
    Depression = 1,
    InternetAddiction = 2,
    Anxiety = 3,
}

impl DisorderLabel {
    pub const ALL: [DisorderLabel; 3] = [
        DisorderLabel::Depression,
        DisorderLabel::InternetAddiction,
        DisorderLabel::Anxiety,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    /// Zero-based position in [`DisorderLabel::ALL`].
    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Depression => "depression",
            Self::InternetAddiction => "internet_addiction",
            Self::Anxiety => "anxiety",
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Self::Depression),
            2 => Some(Self::InternetAddiction),
            3 => Some(Self::Anxiety),
            _ => None,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.name() == name)
    }
}

impl fmt::Display for DisorderLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<DisorderLabel> for u8 {
    fn from(l: DisorderLabel) -> u8 {
        l.code()
    }
}

impl TryFrom<u8> for DisorderLabel {
    type Error = String;

    fn try_from(code: u8) -> Result<Self, String> {
        Self::from_code(code).ok_or_else(|| format!("invalid disorder code {code}"))
    }
}

impl FromStr for DisorderLabel {
    type Err = String;

    /// Accepts a code (`1`..`3`) or a name (`depression`, ...).
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        s.parse::<u8>()
            .ok()
            .and_then(Self::from_code)
            .or_else(|| Self::from_name(&s.to_ascii_lowercase()))
            .ok_or_else(|| format!("invalid disorder {s:?}"))
    }
}

/// The feature registry. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    features: Vec<FeatureSpec>,
}

impl Schema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self, DataError> {
        if features.len() != FEATURE_COUNT {
            return Err(DataError::Schema(format!(
                "expected {FEATURE_COUNT} features, got {}",
                features.len()
            )));
        }
        let mut names = HashSet::new();
        for f in &features {
            if !names.insert(f.name.as_str()) || f.name == ID_COLUMN || f.name == TARGET_COLUMN {
                return Err(DataError::Schema(format!("duplicate or reserved name {:?}", f.name)));
            }
            match f.bounds {
                Some(b) if !(b.min < b.max) => {
                    return Err(DataError::Schema(format!("{}: degenerate bounds", f.name)));
                }
                None if !f.is_coded() => {
                    return Err(DataError::Schema(format!("{}: bounds required", f.name)));
                }
                _ => {}
            }
            let mut codes = HashSet::new();
            let mut labels = HashSet::new();
            for c in &f.category_codes {
                if !codes.insert(c.code) || !labels.insert(c.label.to_ascii_lowercase()) {
                    return Err(DataError::Schema(format!("{}: category codes not injective", f.name)));
                }
            }
            if f.is_coded() && f.category_codes.len() < 2 {
                return Err(DataError::Schema(format!("{}: needs at least two codes", f.name)));
            }
        }
        Ok(Self { features })
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    /// Returns a copy with one feature's bounds replaced.
    pub fn with_bounds(&self, name: &str, bounds: Bounds) -> Result<Self, DataError> {
        let mut features = self.features.clone();
        let f = features
            .iter_mut()
            .find(|f| f.name == name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_owned()))?;
        if f.is_coded() {
            return Err(DataError::Schema(format!("{name}: coded features have no bounds")));
        }
        f.bounds = Some(bounds);
        Self::new(features)
    }
}

/// The fixed 18-feature questionnaire.
pub fn builtin_schema() -> Schema {
    let features = vec![
        FeatureSpec::continuous("age", 15.0, 80.0).integral().required(),
        FeatureSpec::binary("sex", "female", "male").required(),
        FeatureSpec::binary("literacy", "illiterate", "literate"),
        FeatureSpec {
            name: "marital_status".to_owned(),
            kind: FeatureKind::CategoricalText,
            bounds: None,
            category_codes: vec![
                CategoryCode { label: "married".to_owned(), code: 0 },
                CategoryCode { label: "unmarried".to_owned(), code: 1 },
                CategoryCode { label: "divorced".to_owned(), code: 3 },
            ],
            required: false,
            integral: true,
        },
        FeatureSpec::yes_no("children"),
        FeatureSpec::binary("employed", "unemployed", "employed"),
        FeatureSpec::ordinal("socio_economic_status", 1.0, 5.0),
        FeatureSpec::yes_no("drug_addiction"),
        FeatureSpec::yes_no("chronic_disease"),
        FeatureSpec::yes_no("medication"),
        FeatureSpec::ordinal("education", 1.0, 5.0),
        FeatureSpec::ordinal("financial_status", 0.0, 10.0),
        FeatureSpec::continuous("income", 0.0, 500_000.0),
        FeatureSpec::continuous("sleeping_hour", 0.0, 24.0),
        FeatureSpec::yes_no("result_satisfaction"),
        FeatureSpec::yes_no("feelings_of_overwhelm"),
        FeatureSpec::yes_no("extracurricular_activities"),
        FeatureSpec::ordinal("hangout_hours", 0.0, 10.0).alias("no", 0),
    ];
    Schema::new(features).expect("builtin schema is valid")
}

/// One questionnaire response, values in schema order as numeric codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespondentRecord {
    pub id: String,
    pub values: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<DisorderLabel>,
}

impl RespondentRecord {
    pub fn new(id: impl Into<String>, values: Vec<Option<f64>>, label: Option<DisorderLabel>) -> Self {
        Self { id: id.into(), values, label }
    }

    pub fn get(&self, schema: &Schema, name: &str) -> Option<f64> {
        schema.index_of(name).and_then(|i| self.values.get(i).copied().flatten())
    }

    pub fn set(&mut self, schema: &Schema, name: &str, value: Option<f64>) {
        let i = schema.index_of(name).expect("feature exists");
        self.values[i] = value;
    }

    /// Builds a record from raw `(feature, answer)` pairs, as typed by a
    /// respondent. Unlisted features are missing. Violations of any kind
    /// (unparseable, out of bounds, unknown feature) are collected.
    pub fn from_answers<'a>(
        schema: &Schema,
        id: impl Into<String>,
        answers: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, Vec<Violation>> {
        let mut values = vec![None; schema.len()];
        let mut violations = Vec::new();
        for (name, raw) in answers {
            let Some(i) = schema.index_of(name) else {
                violations.push(Violation {
                    feature: name.to_owned(),
                    row: None,
                    value: raw.to_owned(),
                    kind: ViolationKind::UnknownFeature,
                });
                continue;
            };
            match schema.features[i].parse(raw) {
                Ok(v) => values[i] = v,
                Err(kind) => violations.push(Violation {
                    feature: name.to_owned(),
                    row: None,
                    value: raw.to_owned(),
                    kind,
                }),
            }
        }
        let record = Self::new(id, values, None);
        let flagged: HashSet<String> = violations.iter().map(|v| v.feature.clone()).collect();
        violations.extend(
            validate_record(&record, schema)
                .into_iter()
                .filter(|v| !flagged.contains(&v.feature)),
        );
        if violations.is_empty() {
            Ok(record)
        } else {
            Err(violations)
        }
    }
}

/// Lists every problem with `record`; empty means valid.
pub fn validate_record(record: &RespondentRecord, schema: &Schema) -> Vec<Violation> {
    let mut out = Vec::new();
    for (spec, value) in schema.features.iter().zip(&record.values) {
        let kind = match value {
            None if spec.required => Some(ViolationKind::Missing),
            None => None,
            Some(v) => spec.check(*v),
        };
        if let Some(kind) = kind {
            out.push(Violation {
                feature: spec.name.clone(),
                row: None,
                value: value.map(|v| v.to_string()).unwrap_or_default(),
                kind,
            });
        }
    }
    out
}

/// An ordered, validated collection of records sharing one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    records: Vec<RespondentRecord>,
}

impl Dataset {
    pub fn new(schema: Schema, records: Vec<RespondentRecord>) -> Result<Self, DataError> {
        let mut ids = HashSet::new();
        let mut violations = Vec::new();
        for (row, r) in records.iter().enumerate() {
            if r.values.len() != schema.len() {
                return Err(DataError::Arity {
                    id: r.id.clone(),
                    got: r.values.len(),
                    expected: schema.len(),
                });
            }
            if !ids.insert(r.id.as_str()) {
                return Err(DataError::DuplicateId { row: row + 1, id: r.id.clone() });
            }
            violations.extend(validate_record(r, &schema).into_iter().map(|mut v| {
                v.row = Some(row + 1);
                v
            }));
        }
        if !violations.is_empty() {
            return Err(DataError::Validation(violations));
        }
        Ok(Self { schema, records })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn records(&self) -> &[RespondentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<Option<DisorderLabel>> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn is_labeled(&self) -> bool {
        self.records.iter().all(|r| r.label.is_some())
    }

    /// Records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }
}

/// Reads a CSV questionnaire export.
///
/// The header must name every schema feature; `id` and `target` are optional.
/// Rows are numbered from 1 (the first data row) in errors. Records without an
/// `id` column get `r<row>` identifiers.
pub fn load_dataset<R: Read>(source: R, schema: &Schema) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| DataError::Parse { row: 0, message: e.to_string() })?
        .clone();

    let mut column_to_feature = Vec::with_capacity(headers.len());
    let mut id_col = None;
    let mut target_col = None;
    let mut seen = HashSet::new();
    for (col, name) in headers.iter().enumerate() {
        if !seen.insert(name) {
            return Err(DataError::DuplicateColumn(name.to_owned()));
        }
        match name {
            ID_COLUMN => id_col = Some(col),
            TARGET_COLUMN => target_col = Some(col),
            _ => match schema.index_of(name) {
                Some(i) => column_to_feature.push((col, i)),
                None => return Err(DataError::UnknownColumn(name.to_owned())),
            },
        }
    }
    if let Some(missing) = schema.names().find(|n| !seen.contains(n)) {
        return Err(DataError::MissingColumn(missing.to_owned()));
    }

    let mut records = Vec::new();
    let mut violations = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| DataError::Parse { row: row_no, message: e.to_string() })?;
        let mut values = vec![None; schema.len()];
        for &(col, feat) in &column_to_feature {
            let raw = row.get(col).unwrap_or("");
            let spec = &schema.features[feat];
            match spec.parse(raw) {
                Ok(v) => values[feat] = v,
                Err(kind) => violations.push(Violation {
                    feature: spec.name.clone(),
                    row: Some(row_no),
                    value: raw.to_owned(),
                    kind,
                }),
            }
        }
        let label = match target_col.and_then(|c| row.get(c)).filter(|s| !s.is_empty()) {
            None => None,
            Some(raw) => Some(raw.parse::<DisorderLabel>().map_err(|_| DataError::InvalidLabel {
                row: row_no,
                value: raw.to_owned(),
            })?),
        };
        let id = id_col
            .and_then(|c| row.get(c))
            .filter(|s| !s.is_empty())
            .map_or_else(|| format!("r{row_no}"), str::to_owned);
        records.push(RespondentRecord { id, values, label });
    }
    if !violations.is_empty() {
        return Err(DataError::Validation(violations));
    }
    Dataset::new(schema.clone(), records)
}

/// Writes a dataset as CSV with numeric codes: `id`, the features in schema
/// order, then `target` if any record is labeled.
pub fn write_dataset<W: Write>(dataset: &Dataset, sink: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(sink);
    let labeled = dataset.records.iter().any(|r| r.label.is_some());
    let to_io = |e: csv::Error| DataError::Io(e.into());

    let mut header = vec![ID_COLUMN];
    header.extend(dataset.schema.names());
    if labeled {
        header.push(TARGET_COLUMN);
    }
    w.write_record(&header).map_err(to_io)?;

    for r in &dataset.records {
        let mut row = Vec::with_capacity(header.len());
        row.push(r.id.clone());
        row.extend(r.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        if labeled {
            row.push(r.label.map(|l| l.code().to_string()).unwrap_or_default());
        }
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}
