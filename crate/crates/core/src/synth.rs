//! Synthetic labeled cohorts.
//!
//! [`generate`] reproduces the survey's published marginals (age around 23,
//! about 22% female, 48.9% employed, 16.2% with a chronic disease) and the
//! 61/29/10 class split. Class-conditional distributions are shifted along
//! qualitative directions per disorder:
//!
//! * depression: more chronic disease, drug use, medication, overwhelm;
//! * internet addiction: less employment, fewer hangout hours, more divorce,
//!   shorter sleep;
//! * anxiety: shortest sleep, fewer extracurricular activities, overwhelm.
//!
//! Every shift is centered on the class priors, so the marginal rate of a
//! feature does not move with `separability` unless a probability has to be
//! clipped. Shift magnitudes are tuning constants of this generator, not
//! measured quantities.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{builtin_schema, Dataset, DisorderLabel, RespondentRecord, Schema};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("class priors must be non-negative and sum to 1, got {0:?}")]
    BadPriors([f64; 3]),
    #[error("need at least 30 records, got {0}")]
    TooFew(usize),
    #[error("separability must be in [0, 1], got {0}")]
    BadSeparability(f64),
    #[error("marginal target {name} = {value} out of range")]
    BadTarget { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarginalTargets {
    pub mean_age: f64,
    pub female_fraction: f64,
    pub employed_fraction: f64,
    pub chronic_disease_fraction: f64,
}

impl Default for MarginalTargets {
    fn default() -> Self {
        Self {
            mean_age: 23.0,
            female_fraction: 0.22,
            employed_fraction: 0.489,
            chronic_disease_fraction: 0.162,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n: usize,
    /// Depression, internet addiction, anxiety.
    pub class_priors: [f64; 3],
    pub seed: u64,
    /// 0 makes every class draw from the same distribution.
    pub separability: f64,
    pub marginals: MarginalTargets,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            class_priors: [0.61, 0.29, 0.10],
            seed: 42,
            separability: 0.5,
            marginals: MarginalTargets::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let p = self.class_priors;
        if p.iter().any(|&x| !(x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(SynthError::BadPriors(p));
        }
        if self.n < 30 {
            return Err(SynthError::TooFew(self.n));
        }
        if !(0.0..=1.0).contains(&self.separability) {
            return Err(SynthError::BadSeparability(self.separability));
        }
        let m = &self.marginals;
        for (name, value) in [
            ("female_fraction", m.female_fraction),
            ("employed_fraction", m.employed_fraction),
            ("chronic_disease_fraction", m.chronic_disease_fraction),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SynthError::BadTarget { name, value });
            }
        }
        if !(18.0..=30.0).contains(&m.mean_age) {
            return Err(SynthError::BadTarget { name: "mean_age", value: m.mean_age });
        }
        Ok(())
    }
}

/// Exact per-class counts by largest remainder.
fn allocate(n: usize, priors: [f64; 3]) -> [usize; 3] {
    let raw = priors.map(|p| p * n as f64);
    let mut counts = raw.map(|r| r.floor() as usize);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let mut left = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Per-class offsets `scale * (d_c - sum_j prior_j d_j)`: zero prior-weighted mean.
fn centered(direction: [f64; 3], priors: [f64; 3], scale: f64) -> [f64; 3] {
    let mean: f64 = direction.iter().zip(&priors).map(|(d, p)| d * p).sum();
    direction.map(|d| scale * (d - mean))
}

struct Sampler<'a> {
    rng: ChaCha8Rng,
    priors: [f64; 3],
    sep: f64,
    schema: &'a Schema,
}

impl Sampler<'_> {
    fn coin(&mut self, p: f64) -> f64 {
        if self.rng.random::<f64>() < p.clamp(0.02, 0.98) {
            1.0
        } else {
            0.0
        }
    }

    /// Binary feature with marginal `base` shifted by `amp` along `dir`.
    fn binary(&mut self, class: usize, base: f64, amp: f64, dir: [f64; 3]) -> f64 {
        let shift = centered(dir, self.priors, self.sep * amp)[class];
        self.coin(base + shift)
    }

    fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        Normal::new(mean, sd).expect("positive sd").sample(&mut self.rng)
    }

    /// Normal draw clipped to `[lo, hi]` and rounded to a multiple of `step`.
    fn clipped(&mut self, class: usize, mean: f64, sd: f64, amp: f64, dir: [f64; 3], lo: f64, hi: f64, step: f64) -> f64 {
        let shift = centered(dir, self.priors, self.sep * amp)[class];
        let v = self.normal(mean + shift, sd);
        ((v / step).round() * step).clamp(lo, hi)
    }

    fn categorical(&mut self, probs: &[(f64, f64)]) -> f64 {
        let total: f64 = probs.iter().map(|(_, p)| p).sum();
        let mut u = self.rng.random::<f64>() * total;
        for &(value, p) in probs {
            if u < p {
                return value;
            }
            u -= p;
        }
        probs.last().expect("non-empty").0
    }

    fn record(&mut self, id: String, label: DisorderLabel, m: &MarginalTargets) -> RespondentRecord {
        let c = label.index();
        let s = self.schema;
        let mut r = RespondentRecord::new(id, vec![None; s.len()], Some(label));
        let mut put = |name: &str, v: f64| r.set(s, name, Some(v));

        put("age", self.clipped(c, m.mean_age, 1.6, 0.0, [0.0; 3], 17.0, 30.0, 1.0));
        put("sex", self.coin(1.0 - m.female_fraction));
        put("literacy", self.coin(0.96));

        let divorced = (0.03 + centered([0.0, 1.0, 0.0], self.priors, self.sep * 0.2)[c]).clamp(0.005, 0.5);
        let marital = self.categorical(&[(0.0, 0.08), (1.0, 0.92 - divorced), (3.0, divorced)]);
        put("marital_status", marital);
        let children = if marital == 1.0 { self.coin(0.02) } else { self.coin(0.45) };
        put("children", children);

        let employed = self.binary(c, m.employed_fraction, 0.45, [0.0, -1.0, 0.0]);
        put("employed", employed);
        put("socio_economic_status", self.categorical(&[(1.0, 0.2), (2.0, 0.2), (3.0, 0.2), (4.0, 0.2), (5.0, 0.2)]));
        put("drug_addiction", self.binary(c, 0.08, 0.25, [1.0, 0.0, 0.0]));
        put("chronic_disease", self.binary(c, m.chronic_disease_fraction, 0.3, [1.0, 0.0, 0.0]));
        put("medication", self.binary(c, 0.2, 0.4, [1.0, 0.0, 0.2]));
        put("education", self.categorical(&[(1.0, 0.03), (2.0, 0.5), (3.0, 0.4), (4.0, 0.06), (5.0, 0.01)]));
        put("financial_status", self.clipped(c, 5.0, 2.0, 2.0, [-1.0, 0.0, 0.0], 0.0, 10.0, 1.0));
        let income = if employed == 1.0 {
            self.clipped(c, 15_000.0, 6_000.0, 0.0, [0.0; 3], 1_000.0, 100_000.0, 100.0)
        } else {
            0.0
        };
        put("income", income);
        put("sleeping_hour", self.clipped(c, 7.0, 1.0, 3.0, [0.0, -0.5, -1.0], 2.0, 12.0, 0.5));
        put("result_satisfaction", self.binary(c, 0.55, 0.4, [-0.5, -1.0, 0.0]));
        put("feelings_of_overwhelm", self.binary(c, 0.45, 0.4, [1.0, 0.0, 1.0]));
        put("extracurricular_activities", self.binary(c, 0.45, 0.5, [0.0, 0.0, -1.0]));
        put("hangout_hours", self.clipped(c, 4.0, 1.5, 4.0, [0.0, -1.0, -0.3], 0.0, 10.0, 1.0));
        r
    }
}

/// Draws a labeled cohort. Label counts are allocated exactly from the priors
/// (largest remainder) and then shuffled.
pub fn generate(config: &GeneratorConfig) -> Result<Dataset, SynthError> {
    config.validate()?;
    let schema = builtin_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let counts = allocate(config.n, config.class_priors);
    let mut labels: Vec<DisorderLabel> = DisorderLabel::ALL
        .into_iter()
        .zip(counts)
        .flat_map(|(l, c)| std::iter::repeat_n(l, c))
        .collect();
    labels.shuffle(&mut rng);

    let mut sampler = Sampler { rng, priors: config.class_priors, sep: config.separability, schema: &schema };
    let records = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| sampler.record(format!("s{:05}", i + 1), label, &config.marginals))
        .collect();
    Ok(Dataset::new(schema, records).expect("generated records satisfy the schema"))
}

/// Three tight, well-separated clusters with balanced labels (test fixture).
/// Each class has its own binary profile; only age, sleep and income jitter.
pub fn generate_separable(n: usize, seed: u64) -> Dataset {
    let schema = builtin_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<DisorderLabel> = (0..n).map(|i| DisorderLabel::ALL[i % 3]).collect();
    labels.shuffle(&mut rng);

    // employed, drug, chronic, medication, satisfaction, overwhelm, extracurricular, sleep, hangout
    let profiles: [[f64; 9]; 3] = [
        [1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 7.0, 5.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 5.0, 0.0],
        [1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 3.0, 2.0],
    ];
    let records = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let p = profiles[label.index()];
            let mut r = RespondentRecord::new(format!("c{:05}", i + 1), vec![None; schema.len()], Some(label));
            let mut put = |name: &str, v: f64| r.set(&schema, name, Some(v));
            put("age", 22.0 + rng.random_range(-1..=1) as f64);
            put("sex", 1.0);
            put("literacy", 1.0);
            put("marital_status", 1.0);
            put("children", 0.0);
            put("employed", p[0]);
            put("socio_economic_status", 3.0);
            put("drug_addiction", p[1]);
            put("chronic_disease", p[2]);
            put("medication", p[3]);
            put("education", 3.0);
            put("financial_status", 5.0);
            put("income", if p[0] == 1.0 { 15_000.0 + rng.random_range(-2_000.0..2_000.0f64).round() } else { 0.0 });
            put("sleeping_hour", p[7] + (rng.random_range(-0.25..=0.25f64) * 10.0).round() / 10.0);
            put("result_satisfaction", p[4]);
            put("feelings_of_overwhelm", p[5]);
            put("extracurricular_activities", p[6]);
            put("hangout_hours", p[8]);
            r
        })
        .collect();
    Dataset::new(schema, records).expect("fixture records satisfy the schema")
}
