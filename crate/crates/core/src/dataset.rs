//! Labeled sample data, CSV ingestion and seeded train/calibration/test splits.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    feature_names: Vec<String>,
    features: Vec<Vec<f64>>,
    labels: Vec<u8>,
    base_scores: Option<Vec<f64>>,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let dim = features.first().map_or(0, Vec::len);
        let names = (0..dim).map(|j| format!("x{j}")).collect();
        Self::with_names(names, features, labels)
    }

    pub fn with_names(feature_names: Vec<String>, features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch(features.len(), labels.len()));
        }
        let dim = feature_names.len();
        for (i, row) in features.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("row {i} has a non-finite feature")));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::NonBinaryLabel(bad as f64));
        }
        Ok(Self {
            feature_names,
            features,
            labels,
            base_scores: None,
        })
    }

    pub fn with_base_scores(mut self, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != self.len() {
            return Err(Error::LengthMismatch(scores.len(), self.len()));
        }
        self.base_scores = Some(scores);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn base_scores(&self) -> Option<&[f64]> {
        self.base_scores.as_deref()
    }

    pub fn positive_rate(&self) -> f64 {
        self.labels.iter().map(|&y| y as f64).sum::<f64>() / self.len() as f64
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            base_scores: self
                .base_scores
                .as_ref()
                .map(|s| indices.iter().map(|&i| s[i]).collect()),
        }
    }

    /// Reads a CSV with a header row. `label_column` names the label; every
    /// other column (except `score_column`, if given) must be numeric.
    ///
    /// Labels other than exactly `{0, 1}` are binarized as most frequent
    /// class (label 1) versus the rest; frequency ties go to the
    /// lexicographically smallest class name.
    pub fn read_csv<R: Read>(input: R, label_column: &str, score_column: Option<&str>) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?.clone();
        let label_idx = headers
            .iter()
            .position(|h| h.trim() == label_column)
            .ok_or_else(|| Error::Dataset(format!("missing label column `{label_column}`")))?;
        let score_idx = match score_column {
            Some(name) => Some(
                headers
                    .iter()
                    .position(|h| h.trim() == name)
                    .ok_or_else(|| Error::Dataset(format!("missing score column `{name}`")))?,
            ),
            None => None,
        };
        let feature_idx: Vec<usize> = (0..headers.len())
            .filter(|&j| j != label_idx && Some(j) != score_idx)
            .collect();
        let names = feature_idx.iter().map(|&j| headers[j].trim().to_string()).collect();

        let mut features = Vec::new();
        let mut raw_labels = Vec::new();
        let mut scores = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            let num = |j: usize| -> Result<f64> {
                let cell = rec.get(j).unwrap_or("").trim();
                cell.parse::<f64>().map_err(|_| {
                    Error::Dataset(format!("row {}: column `{}` is not numeric: {cell:?}", line + 1, &headers[j]))
                })
            };
            features.push(feature_idx.iter().map(|&j| num(j)).collect::<Result<Vec<_>>>()?);
            raw_labels.push(rec.get(label_idx).unwrap_or("").trim().to_string());
            if let Some(j) = score_idx {
                scores.push(num(j)?);
            }
        }
        let labels = binarize(&raw_labels);
        let data = Self::with_names(names, features, labels)?;
        if score_idx.is_some() {
            data.with_base_scores(scores)
        } else {
            Ok(data)
        }
    }

    /// Writes features, the label and optionally one extra named column
    /// (an `eta` oracle column, say).
    pub fn write_csv<W: Write>(&self, out: W, extra: Option<(&str, &[f64])>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.feature_names.clone();
        header.push("label".into());
        if let Some((name, _)) = extra {
            header.push(name.into());
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.features[i].iter().map(f64::to_string).collect();
            rec.push(self.labels[i].to_string());
            if let Some((_, col)) = extra {
                rec.push(col[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn binarize(raw: &[String]) -> Vec<u8> {
    if raw.iter().all(|s| s == "0" || s == "1") {
        return raw.iter().map(|s| (s == "1") as u8).collect();
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in raw {
        *counts.entry(s.as_str()).or_default() += 1;
    }
    // BTreeMap iterates names ascending, so max_by_key keeps the last max; reverse for smallest.
    let majority = counts
        .iter()
        .rev()
        .max_by_key(|(_, &c)| c)
        .map(|(s, _)| s.to_string())
        .unwrap_or_default();
    raw.iter().map(|s| (*s == majority) as u8).collect()
}

/// Reads `row,score` CSV (header required) into a dense score vector.
pub fn read_score_csv<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let row = rec.get(0).and_then(|s| s.trim().parse().ok());
        let score = rec.get(1).and_then(|s| s.trim().parse::<f64>().ok());
        match (row, score) {
            (Some(r), Some(s)) if s.is_finite() => rows.push((r, s)),
            _ => return Err(Error::Dataset(format!("bad score row {:?}", rec))),
        }
    }
    rows.sort_by_key(|r| r.0);
    rows.iter()
        .enumerate()
        .map(|(i, &(r, s))| {
            if r == i {
                Ok(s)
            } else {
                Err(Error::Dataset(format!("score file is missing row {i}")))
            }
        })
        .collect()
}

/// Fractions of a random three-way split and the seed that drives it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub calib_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.405,
            calib_frac: 0.495,
            test_frac: 0.10,
            seed: 0,
        }
    }
}

/// Row indices of each split.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub calib: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn new(train_frac: f64, calib_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        let s = Self { train_frac, calib_frac, test_frac, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_frac, self.calib_frac, self.test_frac];
        if fr.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::Domain(format!("split fractions must be positive: {fr:?}")));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("split fractions must sum to 1: {fr:?}")));
        }
        Ok(())
    }

    /// Shuffles `0..n` with the seed and cuts it at the rounded fractions.
    /// Each part gets at least one row.
    pub fn split(&self, n: usize) -> Result<Split> {
        self.validate()?;
        if n < 3 {
            return Err(Error::Domain(format!("cannot split {n} rows three ways")));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let n_train = ((n as f64 * self.train_frac).round() as usize).clamp(1, n - 2);
        let n_calib = ((n as f64 * self.calib_frac).round() as usize).clamp(1, n - 1 - n_train);
        let test = idx.split_off(n_train + n_calib);
        let calib = idx.split_off(n_train);
        Ok(Split { train: idx, calib, test })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_ingestion_with_label_and_score_columns() {
        let text = "a,y,b,s\n1,1,2,0.3\n3,0,4,0.7\n";
        let d = LabeledDataset::read_csv(text.as_bytes(), "y", Some("s")).unwrap();
        assert_eq!(d.feature_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(d.features(), &[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(d.labels(), &[1, 0]);
        assert_eq!(d.base_scores(), Some(&[0.3, 0.7][..]));
    }

    #[test]
    fn missing_label_column_and_non_numeric_features_fail() {
        assert!(LabeledDataset::read_csv("a,b\n1,2\n".as_bytes(), "y", None).is_err());
        assert!(LabeledDataset::read_csv("a,y\nfoo,1\n".as_bytes(), "y", None).is_err());
    }

    #[test]
    fn multiclass_labels_binarize_to_majority_class() {
        let text = "a,y\n1,cat\n2,dog\n3,dog\n4,bird\n";
        let d = LabeledDataset::read_csv(text.as_bytes(), "y", None).unwrap();
        assert_eq!(d.labels(), &[0, 1, 1, 0]);
        let tie = "a,y\n1,b\n2,a\n";
        let d = LabeledDataset::read_csv(tie.as_bytes(), "y", None).unwrap();
        assert_eq!(d.labels(), &[0, 1]);
    }

    #[test]
    fn split_is_seeded_disjoint_and_covering() {
        let spec = SplitSpec { seed: 7, ..Default::default() };
        let s = spec.split(1000).unwrap();
        assert_eq!((s.train.len(), s.calib.len(), s.test.len()), (405, 495, 100));
        let mut all: Vec<usize> = s.train.iter().chain(&s.calib).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert_eq!(spec.split(1000).unwrap(), s);
        assert_ne!(SplitSpec { seed: 8, ..spec }.split(1000).unwrap(), s);
    }

    #[test]
    fn split_spec_validation() {
        assert!(SplitSpec::new(0.5, 0.5, 0.0, 1).is_err());
        assert!(SplitSpec::new(0.5, 0.4, 0.2, 1).is_err());
        assert!(SplitSpec::new(0.405, 0.495, 0.1, 1).is_ok());
    }

    #[test]
    fn score_file_requires_every_row() {
        assert_eq!(read_score_csv("row,score\n1,0.5\n0,0.25\n".as_bytes()).unwrap(), vec![0.25, 0.5]);
        assert!(read_score_csv("row,score\n0,0.5\n2,0.1\n".as_bytes()).is_err());
    }
}
