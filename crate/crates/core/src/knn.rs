//! Exact k-nearest-neighbors classification.
//!
//! Fitting only stores the exemplars. Prediction is a linear scan keeping the
//! `k` closest exemplars; ties are resolved deterministically:
//!
//! * equal distances: the exemplar stored first wins a neighbor slot;
//! * equal vote counts: the label with the smaller summed neighbor distance
//!   wins, then the smaller label code.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::FeatureVector;
use crate::schema::DisorderLabel;

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum KnnError {
    #[error("no training exemplars")]
    Empty,
    #[error("k = {k} must be in 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{exemplars} exemplars but {labels} labels")]
    LabelCount { exemplars: usize, labels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64, KnnError> {
    if a.len() != b.len() {
        return Err(KnnError::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(squared_distance(a, b).sqrt())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    k: usize,
    metric: Metric,
    exemplars: Vec<Vec<f64>>,
    labels: Vec<DisorderLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
    pub label: DisorderLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnPrediction {
    pub label: DisorderLabel,
    /// The `k` neighbors, nearest first.
    pub neighbors: Vec<Neighbor>,
}

impl KnnModel {
    pub fn new(exemplars: Vec<Vec<f64>>, labels: Vec<DisorderLabel>, k: usize) -> Result<Self, KnnError> {
        let model = Self { k, metric: Metric::Euclidean, exemplars, labels };
        model.validate()?;
        Ok(model)
    }

    /// Re-checks the invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<(), KnnError> {
        let n = self.exemplars.len();
        if n == 0 {
            return Err(KnnError::Empty);
        }
        if self.labels.len() != n {
            return Err(KnnError::LabelCount { exemplars: n, labels: self.labels.len() });
        }
        if self.k == 0 || self.k > n {
            return Err(KnnError::InvalidK { k: self.k, n });
        }
        let dim = self.exemplars[0].len();
        if let Some(bad) = self.exemplars.iter().find(|e| e.len() != dim) {
            return Err(KnnError::DimensionMismatch { expected: dim, got: bad.len() });
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.exemplars[0].len()
    }

    pub fn exemplars(&self) -> &[Vec<f64>] {
        &self.exemplars
    }

    pub fn labels(&self) -> &[DisorderLabel] {
        &self.labels
    }

    pub fn predict(&self, x: &[f64]) -> Result<KnnPrediction, KnnError> {
        if x.len() != self.dimension() {
            return Err(KnnError::DimensionMismatch { expected: self.dimension(), got: x.len() });
        }
        let mut nearest: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, e) in self.exemplars.iter().enumerate() {
            let d = squared_distance(e, x).sqrt();
            if nearest.len() == self.k && d >= nearest[self.k - 1].0 {
                continue;
            }
            let pos = nearest.partition_point(|&(nd, _)| nd <= d);
            nearest.insert(pos, (d, i));
            nearest.truncate(self.k);
        }
        let neighbors: Vec<Neighbor> = nearest
            .into_iter()
            .map(|(d, index)| Neighbor { index, distance: d, label: self.labels[index] })
            .collect();
        Ok(KnnPrediction { label: vote(&neighbors), neighbors })
    }

    pub fn predict_batch(&self, xs: &[FeatureVector]) -> Result<Vec<KnnPrediction>, KnnError> {
        xs.iter().map(|x| self.predict(&x.values)).collect()
    }
}

fn vote(neighbors: &[Neighbor]) -> DisorderLabel {
    let mut counts = [0usize; 3];
    let mut sums = [0.0f64; 3];
    for n in neighbors {
        counts[n.label.index()] += 1;
        sums[n.label.index()] += n.distance;
    }
    let mut best: Option<DisorderLabel> = None;
    for label in DisorderLabel::ALL {
        let i = label.index();
        if counts[i] == 0 {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let j = b.index();
                counts[i] > counts[j] || (counts[i] == counts[j] && sums[i] < sums[j])
            }
        };
        if better {
            best = Some(label);
        }
    }
    best.expect("at least one neighbor")
}

/// Fits on `(vector, label)` pairs.
pub fn knn_fit(train: &[(FeatureVector, DisorderLabel)], k: usize) -> Result<KnnModel, KnnError> {
    let (exemplars, labels) = train.iter().map(|(v, l)| (v.values.clone(), *l)).unzip();
    KnnModel::new(exemplars, labels, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use DisorderLabel::*;

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector { values, source_id: String::new() }
    }

    #[test]
    fn fit_stores_exemplars() {
        let train: Vec<_> = (0..10).map(|i| (fv(vec![i as f64; 18]), Depression)).collect();
        let m = knn_fit(&train, 3).unwrap();
        assert_eq!(m.len(), 10);
        assert_eq!(m.exemplars()[4], vec![4.0; 18]);
        assert_eq!(knn_fit(&train, 0), Err(KnnError::InvalidK { k: 0, n: 10 }));
        assert_eq!(knn_fit(&train, 11), Err(KnnError::InvalidK { k: 11, n: 10 }));
        assert_eq!(knn_fit(&[], 1), Err(KnnError::Empty));
    }

    #[test]
    fn distances() {
        let z = vec![0.0; 18];
        let o = vec![1.0; 18];
        assert_eq!(euclidean_distance(&z, &z), Ok(0.0));
        let d = euclidean_distance(&z, &o).unwrap();
        assert!((d - 18f64.sqrt()).abs() < 1e-12);
        assert!((d - 4.2426).abs() < 1e-4);
        assert!(euclidean_distance(&z, &o[..3]).is_err());
        let a = [0.3, 0.7, 0.1];
        let b = [0.9, 0.2, 0.5];
        assert_eq!(euclidean_distance(&a, &b), euclidean_distance(&b, &a));
    }

    #[test]
    fn exact_match_with_k1() {
        let m = KnnModel::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![Depression, Anxiety], 1).unwrap();
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap().label, Anxiety);
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap().neighbors[0].distance, 0.0);
    }

    #[test]
    fn majority_vote() {
        let m = KnnModel::new(
            vec![vec![0.1], vec![0.2], vec![0.3], vec![5.0]],
            vec![Depression, InternetAddiction, Depression, Anxiety],
            3,
        )
        .unwrap();
        let p = m.predict(&[0.0]).unwrap();
        assert_eq!(p.label, Depression);
        assert_eq!(p.neighbors.iter().map(|n| n.index).collect::<Vec<_>>(), [0, 1, 2]);
    }

    #[test]
    fn three_way_tie_goes_to_smallest_summed_distance() {
        // one neighbor of each label at distances 0.9, 0.4, 0.7
        let m = KnnModel::new(
            vec![vec![0.9], vec![0.4], vec![0.7], vec![3.0]],
            vec![Depression, InternetAddiction, Anxiety, Depression],
            3,
        )
        .unwrap();
        let p = m.predict(&[0.0]).unwrap();
        // Exhaustive scan of the per-label sums confirms label 2 is smallest.
        let mut sums = [0.0; 3];
        for n in &p.neighbors {
            sums[n.label.index()] += n.distance;
        }
        let argmin = (0..3).min_by(|&a, &b| sums[a].total_cmp(&sums[b])).unwrap();
        assert_eq!(argmin, InternetAddiction.index());
        assert_eq!(p.label, InternetAddiction);
    }

    #[test]
    fn full_tie_goes_to_smaller_code() {
        let m = KnnModel::new(vec![vec![1.0], vec![-1.0]], vec![Anxiety, InternetAddiction], 2).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap().label, InternetAddiction);
    }

    #[test]
    fn equal_distance_prefers_earlier_exemplar() {
        let m = KnnModel::new(
            vec![vec![1.0], vec![-1.0], vec![1.0]],
            vec![Anxiety, Depression, InternetAddiction],
            1,
        )
        .unwrap();
        let p = m.predict(&[0.0]).unwrap();
        assert_eq!(p.neighbors[0].index, 0);
        assert_eq!(p.label, Anxiety);
    }

    #[test]
    fn dimension_checks() {
        let m = KnnModel::new(vec![vec![0.0, 0.0]], vec![Depression], 1).unwrap();
        assert!(m.predict(&[0.0]).is_err());
        assert!(KnnModel::new(vec![vec![0.0], vec![0.0, 1.0]], vec![Depression; 2], 1).is_err());
        assert!(KnnModel::new(vec![vec![0.0]], vec![], 1).is_err());
    }
}
