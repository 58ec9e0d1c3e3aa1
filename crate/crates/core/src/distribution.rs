//! Finite distributions, predictors restricted to their support, and the
//! cell bookkeeping every population measure is built on.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::scalar::Scalar;

/// Tolerance on the total mass accepted at construction.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub id: String,
    pub weight: T,
    pub eta: T,
}

/// A distribution with finite support: each point carries its marginal mass
/// and the conditional probability of label 1 at that point.
///
/// Weights are checked to sum to one within [`WEIGHT_SUM_TOL`] and then
/// renormalized once, so downstream sums are exact up to rounding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<Point<T>>",
    into = "Vec<Point<T>>",
    bound(
        serialize = "T: Scalar + Serialize",
        deserialize = "T: Scalar + Deserialize<'de>"
    )
)]
pub struct DiscreteDistribution<T> {
    points: Vec<Point<T>>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl<T: Scalar> DiscreteDistribution<T> {
    pub fn new(points: Vec<Point<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut index = HashMap::with_capacity(points.len());
        let mut total = T::zero();
        for (i, p) in points.iter().enumerate() {
            if index.insert(p.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(p.id.clone()));
            }
            if !p.weight.is_finite_value() || p.weight <= T::zero() {
                return Err(Error::InvalidWeights(format!(
                    "weight of `{}` must be positive, got {:?}",
                    p.id, p.weight
                )));
            }
            if !p.eta.is_finite_value() || p.eta < T::zero() || p.eta > T::one() {
                return Err(Error::InvalidEta {
                    id: p.id.clone(),
                    value: p.eta.to_f64_lossy(),
                });
            }
            total = total + p.weight.clone();
        }
        if (total.clone() - T::one()).abs() > T::lit(WEIGHT_SUM_TOL) {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {}, expected 1",
                total.to_f64_lossy()
            )));
        }
        let points = points
            .into_iter()
            .map(|p| Point {
                weight: p.weight / total.clone(),
                ..p
            })
            .collect();
        Ok(Self { points, index })
    }

    /// Builds a distribution from `(weight, eta)` pairs with ids `x0, x1, ...`.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (T, T)>,
    {
        Self::new(
            pairs
                .into_iter()
                .enumerate()
                .map(|(i, (weight, eta))| Point {
                    id: format!("x{i}"),
                    weight,
                    eta,
                })
                .collect(),
        )
    }

    /// Equal mass on every eta.
    pub fn uniform(etas: &[T]) -> Result<Self> {
        let n = T::from_usize(etas.len()).ok_or(Error::EmptyInput)?;
        Self::from_pairs(etas.iter().map(|e| (T::one() / n.clone(), e.clone())))
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn weights(&self) -> impl Iterator<Item = &T> {
        self.points.iter().map(|p| &p.weight)
    }

    pub fn etas(&self) -> impl Iterator<Item = &T> {
        self.points.iter().map(|p| &p.eta)
    }

    /// The regression function as a predictor.
    pub fn eta_table(&self) -> ScoreTable<T> {
        ScoreTable::from_fn(self, |p| p.eta.clone())
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        Ok(serde_json::from_str(text)?)
    }
}

impl<T: Scalar> TryFrom<Vec<Point<T>>> for DiscreteDistribution<T> {
    type Error = Error;

    fn try_from(points: Vec<Point<T>>) -> Result<Self> {
        Self::new(points)
    }
}

impl<T> From<DiscreteDistribution<T>> for Vec<Point<T>> {
    fn from(d: DiscreteDistribution<T>) -> Self {
        d.points
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry<T> {
    pub id: String,
    pub score: T,
}

/// A predictor's values on (a superset of) a distribution's support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<ScoreEntry<T>>",
    into = "Vec<ScoreEntry<T>>",
    bound(
        serialize = "T: Scalar + Serialize",
        deserialize = "T: Scalar + Deserialize<'de>"
    )
)]
pub struct ScoreTable<T> {
    entries: BTreeMap<String, T>,
}

impl<T: Scalar> ScoreTable<T> {
    pub fn new<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, T)>,
    {
        let mut map = BTreeMap::new();
        for (id, score) in entries {
            if !score.is_finite_value() {
                return Err(Error::Domain(format!("score of `{id}` is not finite")));
            }
            if map.insert(id.clone(), score).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
        Ok(Self { entries: map })
    }

    pub fn from_fn<F>(dist: &DiscreteDistribution<T>, mut f: F) -> Self
    where
        F: FnMut(&Point<T>) -> T,
    {
        Self {
            entries: dist.points().iter().map(|p| (p.id.clone(), f(p))).collect(),
        }
    }

    /// Scores listed in the distribution's point order.
    pub fn from_values(dist: &DiscreteDistribution<T>, values: &[T]) -> Result<Self> {
        if values.len() != dist.len() {
            return Err(Error::LengthMismatch(values.len(), dist.len()));
        }
        Self::new(
            dist.points()
                .iter()
                .zip(values)
                .map(|(p, v)| (p.id.clone(), v.clone())),
        )
    }

    pub fn get(&self, id: &str) -> Option<&T> {
        self.entries.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &T)> {
        self.entries.iter()
    }

    /// Scores aligned with `dist`'s point order; fails unless total on the support.
    pub fn resolve(&self, dist: &DiscreteDistribution<T>) -> Result<Vec<T>> {
        dist.points()
            .iter()
            .map(|p| {
                self.entries
                    .get(&p.id)
                    .cloned()
                    .ok_or_else(|| Error::MissingScore(p.id.clone()))
            })
            .collect()
    }

    pub fn map<F: FnMut(&T) -> T>(&self, mut f: F) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), f(v)))
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        Ok(serde_json::from_str(text)?)
    }
}

impl<T: Scalar> TryFrom<Vec<ScoreEntry<T>>> for ScoreTable<T> {
    type Error = Error;

    fn try_from(entries: Vec<ScoreEntry<T>>) -> Result<Self> {
        Self::new(entries.into_iter().map(|e| (e.id, e.score)))
    }
}

impl<T> From<ScoreTable<T>> for Vec<ScoreEntry<T>> {
    fn from(t: ScoreTable<T>) -> Self {
        t.entries
            .into_iter()
            .map(|(id, score)| ScoreEntry { id, score })
            .collect()
    }
}

/// Level sets of a predictor on the support, in ascending score order.
#[derive(Clone, Debug, PartialEq)]
pub struct Cells<T> {
    pub partition: Partition<T>,
    /// Score shared by every point of the matching bin.
    pub scores: Vec<T>,
}

impl<T: Scalar> Cells<T> {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Weight-averaged eta of every cell.
    pub fn mean_etas(&self, dist: &DiscreteDistribution<T>) -> Vec<T> {
        let pts = dist.points();
        self.partition
            .bins()
            .iter()
            .zip(self.partition.weights())
            .map(|(bin, w)| {
                let mass = bin.iter().fold(T::zero(), |acc, &i| {
                    acc + pts[i].weight.clone() * pts[i].eta.clone()
                });
                mass / w.clone()
            })
            .collect()
    }

    /// Cell index for every support point.
    pub fn assignment(&self) -> Vec<usize> {
        self.partition.assignment()
    }
}

/// Groups support indices by exactly equal score, ascending.
pub(crate) fn group_by_score<T: Scalar>(scores: &[T]) -> Vec<(T, Vec<usize>)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a]
            .partial_cmp(&scores[b])
            .expect("scores are finite")
            .then(a.cmp(&b))
    });
    let mut groups: Vec<(T, Vec<usize>)> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some((s, members)) if *s == scores[i] => members.push(i),
            _ => groups.push((scores[i].clone(), vec![i])),
        }
    }
    groups
}

/// Distinct values `f` takes on the support, ascending.
pub fn effective_range<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>) -> Result<Vec<T>> {
    let scores = f.resolve(dist)?;
    Ok(group_by_score(&scores).into_iter().map(|(s, _)| s).collect())
}

/// The cells `f^{-1}(r)` for each `r` in the effective range, weighted by mass.
pub fn cells<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>) -> Result<Cells<T>> {
    let scores = f.resolve(dist)?;
    Ok(cells_of(dist, &scores))
}

pub(crate) fn cells_of<T: Scalar>(dist: &DiscreteDistribution<T>, scores: &[T]) -> Cells<T> {
    let pts = dist.points();
    let (scores, bins): (Vec<T>, Vec<Vec<usize>>) = group_by_score(scores).into_iter().unzip();
    let weights = bins
        .iter()
        .map(|b| b.iter().fold(T::zero(), |acc, &i| acc + pts[i].weight.clone()))
        .collect();
    Cells {
        partition: Partition::from_parts_unchecked(bins, weights),
        scores,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn dist3() -> DiscreteDistribution<f64> {
        DiscreteDistribution::from_pairs([(0.25, 0.1), (0.25, 0.5), (0.5, 0.9)]).unwrap()
    }

    #[test]
    fn effective_range_deduplicates() {
        let d = dist3();
        let f = ScoreTable::from_values(&d, &[0.2, 0.2, 0.9]).unwrap();
        assert_eq!(effective_range(&d, &f).unwrap(), vec![0.2, 0.9]);

        let constant = ScoreTable::from_values(&d, &[0.4, 0.4, 0.4]).unwrap();
        assert_eq!(effective_range(&d, &constant).unwrap().len(), 1);

        let distinct = ScoreTable::from_values(&d, &[0.3, 0.1, 0.2]).unwrap();
        assert_eq!(effective_range(&d, &distinct).unwrap(), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn cells_group_points_and_sum_mass() {
        let d = dist3();
        let f = ScoreTable::from_values(&d, &[0.2, 0.2, 0.9]).unwrap();
        let c = cells(&d, &f).unwrap();
        assert_eq!(c.partition.bins(), &[vec![0, 1], vec![2]]);
        assert_eq!(c.partition.weights(), &[0.5, 0.5]);
        assert_eq!(c.scores, vec![0.2, 0.9]);

        let by_eta = cells(&d, &d.eta_table()).unwrap();
        assert_eq!(by_eta.len(), 3);

        let constant = ScoreTable::from_values(&d, &[0.4, 0.4, 0.4]).unwrap();
        let c = cells(&d, &constant).unwrap();
        assert_eq!(c.partition.weights(), &[1.0]);
    }

    #[test]
    fn missing_score_is_reported() {
        let d = dist3();
        let f = ScoreTable::new([("x0".to_string(), 0.1), ("x1".to_string(), 0.2)]).unwrap();
        assert!(matches!(effective_range(&d, &f), Err(Error::MissingScore(id)) if id == "x2"));
        assert!(matches!(cells(&d, &f), Err(Error::MissingScore(_))));
    }

    #[test]
    fn construction_validates() {
        assert!(matches!(
            DiscreteDistribution::from_pairs([(0.5, 0.1), (0.4, 0.2)]),
            Err(Error::InvalidWeights(_))
        ));
        assert!(matches!(
            DiscreteDistribution::from_pairs([(0.5, 0.1), (0.5, 1.2)]),
            Err(Error::InvalidEta { .. })
        ));
        assert!(matches!(
            DiscreteDistribution::from_pairs([(1.0, 0.1), (0.0, 0.2)]),
            Err(Error::InvalidWeights(_))
        ));
        let dup = vec![
            Point { id: "a".into(), weight: 0.5, eta: 0.1 },
            Point { id: "a".into(), weight: 0.5, eta: 0.1 },
        ];
        assert!(matches!(DiscreteDistribution::new(dup), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn weights_renormalized_within_tolerance() {
        let d = DiscreteDistribution::from_pairs([(0.5 + 4e-13, 0.1), (0.5, 0.2)]).unwrap();
        let total: f64 = d.weights().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_rationals_are_supported() {
        let third = BigRational::new(1.into(), 3.into());
        let d = DiscreteDistribution::from_pairs([
            (third.clone(), third.clone()),
            (third.clone(), third.clone()),
            (third.clone(), BigRational::from_integer(1.into())),
        ])
        .unwrap();
        let c = cells(&d, &d.eta_table()).unwrap();
        assert_eq!(c.partition.weights()[0], BigRational::new(2.into(), 3.into()));
    }

    #[test]
    fn json_round_trip() {
        let d = dist3();
        let back = DiscreteDistribution::<f64>::from_json(&d.to_json().unwrap()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.position("x2"), Some(2));

        let f = ScoreTable::from_values(&d, &[0.2, 0.2, 0.9]).unwrap();
        let text = f.to_json().unwrap();
        assert!(text.contains("\"score\""));
        assert_eq!(ScoreTable::<f64>::from_json(&text).unwrap(), f);

        let bad = r#"[{"id":"a","weight":0.7,"eta":0.1}]"#;
        assert!(DiscreteDistribution::<f64>::from_json(bad).is_err());
    }
}
