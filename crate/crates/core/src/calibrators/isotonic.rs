use serde::{Deserialize, Serialize};

use crate::empirical::check_inputs;
use crate::error::Result;

/// Nondecreasing step function fitted by isotonic least squares.
///
/// Each knot is the smallest training score of a pooled block together with
/// the block's mean label. Queries take the value of the last knot at or
/// below them, clamped to the first knot below the training range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotonicModel {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl IsotonicModel {
    pub fn predict(&self, score: f64) -> f64 {
        let k = self.knots.partition_point(|&t| t <= score);
        self.values[k.saturating_sub(1)]
    }
}

/// A pooled block: label sum and count over a run of sorted samples.
#[derive(Clone, Copy, Debug)]
struct Block {
    first: usize,
    sum: f64,
    count: f64,
}

impl Block {
    fn mean(&self) -> f64 {
        self.sum / self.count
    }
}

/// Pool-adjacent-violators on samples sorted by `(score, index)`, with
/// equal-score samples pooled up front. Returns the model and the fitted value
/// of every input sample (in input order).
pub fn fit_isotonic_with_fit(scores: &[f64], labels: &[u8]) -> Result<(IsotonicModel, Vec<f64>)> {
    check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));

    let mut stack: Vec<Block> = Vec::with_capacity(order.len());
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let mut block = Block { first: k, sum: 0.0, count: 0.0 };
        while k < order.len() && scores[order[k]] == s {
            block.sum += labels[order[k]] as f64;
            block.count += 1.0;
            k += 1;
        }
        while let Some(top) = stack.last() {
            if top.mean() < block.mean() {
                break;
            }
            let top = stack.pop().unwrap();
            block = Block {
                first: top.first,
                sum: top.sum + block.sum,
                count: top.count + block.count,
            };
        }
        stack.push(block);
    }

    let mut fitted = vec![0.0; scores.len()];
    for (b, block) in stack.iter().enumerate() {
        let end = stack.get(b + 1).map_or(order.len(), |n| n.first);
        let m = block.mean();
        for &i in &order[block.first..end] {
            fitted[i] = m;
        }
    }
    let model = IsotonicModel {
        knots: stack.iter().map(|b| scores[order[b.first]]).collect(),
        values: stack.iter().map(Block::mean).collect(),
    };
    Ok((model, fitted))
}

pub fn fit_isotonic(scores: &[f64], labels: &[u8]) -> Result<IsotonicModel> {
    fit_isotonic_with_fit(scores, labels).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_labels_are_their_own_fit() {
        let (_, fit) = fit_isotonic_with_fit(&[0.1, 0.2, 0.3, 0.4], &[0, 0, 1, 1]).unwrap();
        assert_eq!(fit, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn single_violation_is_pooled() {
        let (m, fit) = fit_isotonic_with_fit(&[1.0, 2.0, 3.0, 4.0], &[0, 1, 0, 1]).unwrap();
        assert_eq!(fit, vec![0.0, 0.5, 0.5, 1.0]);
        assert_eq!(m.knots, vec![1.0, 2.0, 4.0]);
    }

    #[test]
    fn constant_labels_give_constant_fit() {
        let (m, fit) = fit_isotonic_with_fit(&[0.3, 0.1, 0.9], &[1, 1, 1]).unwrap();
        assert_eq!(fit, vec![1.0; 3]);
        assert_eq!(m.values, vec![1.0]);
    }

    #[test]
    fn equal_scores_are_pooled_first() {
        let (_, fit) = fit_isotonic_with_fit(&[0.5, 0.5, 0.9], &[1, 0, 1]).unwrap();
        assert_eq!(fit, vec![0.5, 0.5, 1.0]);
    }

    #[test]
    fn prediction_is_a_right_continuous_step() {
        let m = IsotonicModel { knots: vec![0.0, 1.0], values: vec![0.25, 0.75] };
        assert_eq!(m.predict(0.4), 0.25);
        assert_eq!(m.predict(1.0), 0.75);
        assert_eq!(m.predict(-3.0), 0.25);
        assert_eq!(m.predict(7.0), 0.75);
    }
}
