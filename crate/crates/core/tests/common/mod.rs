#![allow(dead_code)]

use calibkit::{DiscreteDistribution, Point, Rational, ScoreTable};
use num_traits::FromPrimitive;
use proptest::prelude::*;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::from_i64(n).unwrap() / Rational::from_i64(d).unwrap()
}

/// Raw instance: (weight 1..=10, eta in tenths, score in eighths) per point.
pub type Raw = Vec<(i64, i64, i64)>;

pub fn raw_instance(max_len: usize) -> impl Strategy<Value = Raw> {
    sized_instance(1, max_len)
}

pub fn sized_instance(min_len: usize, max_len: usize) -> impl Strategy<Value = Raw> {
    prop::collection::vec((1i64..=10, 0i64..=10, 0i64..=8), min_len..=max_len)
}

pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

pub fn exact(raw: &Raw) -> (DiscreteDistribution<Rational>, ScoreTable<Rational>) {
    let total: i64 = raw.iter().map(|r| r.0).sum();
    let d = DiscreteDistribution::new(
        raw.iter()
            .enumerate()
            .map(|(i, &(w, e, _))| Point { id: format!("x{i}"), weight: q(w, total), eta: q(e, 10) })
            .collect(),
    )
    .unwrap();
    let f = ScoreTable::from_values(&d, &raw.iter().map(|r| q(r.2, 8)).collect::<Vec<_>>()).unwrap();
    (d, f)
}

pub fn float(raw: &Raw) -> (DiscreteDistribution<f64>, ScoreTable<f64>) {
    let total: i64 = raw.iter().map(|r| r.0).sum();
    let d = DiscreteDistribution::from_pairs(raw.iter().map(|&(w, e, _)| (w as f64 / total as f64, e as f64 / 10.0))).unwrap();
    let f = ScoreTable::from_values(&d, &raw.iter().map(|r| r.2 as f64 / 8.0).collect::<Vec<_>>()).unwrap();
    (d, f)
}
