//! Predictor transforms: cell merging, average label assignment,
//! thresholding, and a calibrated, Bayes-accurate alternative to eta.

use crate::distribution::{cells_of, group_by_score, DiscreteDistribution, ScoreTable};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Score given to the union of the two merged cells.
#[derive(Clone, Debug, PartialEq)]
pub enum MergeScore<T> {
    /// Mass-weighted average of the two cell scores.
    Averaged,
    Explicit(T),
}

/// Assigns one score to every point whose score is `r1` or `r2`.
pub fn merge_cells<T: Scalar>(
    dist: &DiscreteDistribution<T>,
    f: &ScoreTable<T>,
    r1: &T,
    r2: &T,
    mode: &MergeScore<T>,
) -> Result<ScoreTable<T>> {
    let scores = f.resolve(dist)?;
    let mut w1 = T::zero();
    let mut w2 = T::zero();
    for (p, s) in dist.points().iter().zip(&scores) {
        if s == r1 {
            w1 = w1 + p.weight.clone();
        } else if s == r2 {
            w2 = w2 + p.weight.clone();
        }
    }
    if w1.is_zero() {
        return Err(Error::NotInRange(r1.to_f64_lossy()));
    }
    if r1 != r2 && w2.is_zero() {
        return Err(Error::NotInRange(r2.to_f64_lossy()));
    }
    if r1 == r2 {
        return Ok(f.clone());
    }
    let r = match mode {
        MergeScore::Averaged => {
            (r1.clone() * w1.clone() + r2.clone() * w2.clone()) / (w1 + w2)
        }
        MergeScore::Explicit(r) => r.clone(),
    };
    Ok(f.map(|s| if s == r1 || s == r2 { r.clone() } else { s.clone() }))
}

/// Replaces each cell's score with the mean eta of the cell. Cells that end
/// up with bit-identical averages become one cell.
pub fn average_label_assignment<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>) -> Result<ScoreTable<T>> {
    let scores = f.resolve(dist)?;
    let cells = cells_of(dist, &scores);
    let means = cells.mean_etas(dist);
    let assignment = cells.assignment();
    let values: Vec<T> = assignment.iter().map(|&c| means[c].clone()).collect();
    ScoreTable::from_values(dist, &values)
}

/// The classifier `1{f(x) >= theta}` as a 0/1 score table.
pub fn threshold<T: Scalar>(f: &ScoreTable<T>, theta: &T) -> ScoreTable<T> {
    f.map(|s| if s >= theta { T::one() } else { T::zero() })
}

/// A predictor other than eta that is still perfectly calibrated and admits
/// a Bayes-optimal threshold, or `None` when eta takes fewer than two
/// distinct values on both sides of 1/2.
///
/// Two eta level sets on the same side of 1/2 are merged and scored with
/// their joint label average; elsewhere the result equals eta. The two
/// heaviest levels are used, and if both sides qualify, the side whose two
/// heaviest levels carry more mass (the lower side on a tie).
pub fn construct_calibrated_accurate_alternative<T: Scalar>(dist: &DiscreteDistribution<T>) -> Option<ScoreTable<T>> {
    let etas: Vec<T> = dist.etas().cloned().collect();
    let half = T::one() / T::two();
    let pts = dist.points();
    let mut lower: Vec<(T, T)> = Vec::new();
    let mut upper: Vec<(T, T)> = Vec::new();
    for (eta, members) in group_by_score(&etas) {
        let mass = members
            .iter()
            .fold(T::zero(), |acc, &i| acc + pts[i].weight.clone());
        if eta < half {
            lower.push((eta, mass));
        } else {
            upper.push((eta, mass));
        }
    }
    let heaviest_pair = |levels: &mut Vec<(T, T)>| -> Option<(T, T, T)> {
        if levels.len() < 2 {
            return None;
        }
        // stable sort keeps ascending eta among equal masses
        levels.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let (a, b) = (&levels[0], &levels[1]);
        Some((a.0.clone(), b.0.clone(), a.1.clone() + b.1.clone()))
    };
    let (e1, e2) = match (heaviest_pair(&mut lower), heaviest_pair(&mut upper)) {
        (None, None) => return None,
        (Some((a, b, _)), None) | (None, Some((a, b, _))) => (a, b),
        (Some((a, b, ml)), Some((c, d, mu))) => {
            if mu > ml {
                (c, d)
            } else {
                (a, b)
            }
        }
    };
    let eta_table = dist.eta_table();
    merge_cells(dist, &eta_table, &e1, &e2, &MergeScore::Averaged).ok()
}
