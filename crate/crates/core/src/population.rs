//! Exact population measures on finite distributions.
//!
//! Every function here is a closed-form sum over the support or over the
//! cells of the predictor; nothing is sampled. All of them are generic over
//! [`Scalar`], so the same code runs on `f64` and on exact rationals.

use std::io::Write;

use crate::distribution::{cells_of, DiscreteDistribution, ScoreTable};
use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Per-cell view used by most measures: mass, score and mean eta.
struct CellStats<T> {
    weight: Vec<T>,
    score: Vec<T>,
    mean_eta: Vec<T>,
}

fn cell_stats<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>) -> Result<CellStats<T>> {
    let scores = f.resolve(dist)?;
    let cells = cells_of(dist, &scores);
    let mean_eta = cells.mean_etas(dist);
    Ok(CellStats {
        weight: cells.partition.weights().to_vec(),
        score: cells.scores,
        mean_eta,
    })
}

/// `sum_cells w * |s - mean eta|^p`, the p-th power of the Lp calibration error.
pub fn ce_p_pow<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>, p: u32) -> Result<T> {
    if p == 0 {
        return Err(Error::Domain("calibration error needs p >= 1".into()));
    }
    let c = cell_stats(dist, f)?;
    Ok(c.weight
        .iter()
        .zip(&c.score)
        .zip(&c.mean_eta)
        .fold(T::zero(), |acc, ((w, s), e)| {
            acc + w.clone() * (s.clone() - e.clone()).abs().powu(p)
        }))
}

/// Lp-norm expected calibration error.
pub fn ce_p<T: Real>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>, p: u32) -> Result<T> {
    Ok(ce_p_pow(dist, f, p)?.root(p))
}

/// L1 calibration error; exact for any scalar.
pub fn ce_1<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>) -> Result<T> {
    ce_p_pow(dist, f, 1)
}

fn loss_with_scores<T: Scalar>(dist: &DiscreteDistribution<T>, scores: &[T], theta: &T) -> T {
    dist.points().iter().zip(scores).fold(T::zero(), |acc, (p, s)| {
        let err = if s >= theta {
            T::one() - p.eta.clone()
        } else {
            p.eta.clone()
        };
        acc + p.weight.clone() * err
    })
}

/// Expected 0/1 loss of the classifier `1{f(x) >= theta}`.
pub fn classification_loss<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>, theta: &T) -> Result<T> {
    Ok(loss_with_scores(dist, &f.resolve(dist)?, theta))
}

/// Smallest achievable expected 0/1 loss.
pub fn bayes_loss<T: Scalar>(dist: &DiscreteDistribution<T>) -> T {
    dist.points().iter().fold(T::zero(), |acc, p| {
        acc + p.weight.clone() * T::min_of(p.eta.clone(), T::one() - p.eta.clone())
    })
}

/// Mean squared error against labels drawn from eta.
pub fn mse<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>) -> Result<T> {
    let scores = f.resolve(dist)?;
    Ok(dist.points().iter().zip(&scores).fold(T::zero(), |acc, (p, s)| {
        let miss = T::one() - s.clone();
        acc + p.weight.clone()
            * (p.eta.clone() * miss.clone() * miss + (T::one() - p.eta.clone()) * s.clone() * s.clone())
    }))
}

/// Inverse collision probability of a list of cell masses.
///
/// Takes the masses as given; callers with a normalized distribution get a
/// value in `[1, #cells]`.
pub fn pc_from_weights<T: Scalar>(weights: &[T]) -> T {
    let collision = weights
        .iter()
        .fold(T::zero(), |acc, w| acc + w.clone() * w.clone());
    T::one() / collision
}

/// Probabilistic count of the predictor's cells.
pub fn pc<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>) -> Result<T> {
    let scores = f.resolve(dist)?;
    Ok(pc_from_weights(cells_of(dist, &scores).partition.weights()))
}

/// Probabilities of concordant and discordant pairs between eta and the
/// predictor, over independent draws conditioned on distinct points.
/// Pairs tied in either coordinate count as neither.
#[derive(Clone, Debug, PartialEq)]
pub struct PairProbabilities<T> {
    pub concordant: T,
    pub discordant: T,
}

pub fn pair_probabilities<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>) -> Result<PairProbabilities<T>> {
    if dist.len() < 2 {
        return Err(Error::Domain("Kendall's tau needs at least two support points".into()));
    }
    let scores = f.resolve(dist)?;
    let pts = dist.points();
    let mut conc = T::zero();
    let mut disc = T::zero();
    let mut distinct = T::zero();
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if i == j {
                continue;
            }
            let mass = pts[i].weight.clone() * pts[j].weight.clone();
            let prod = (pts[i].eta.clone() - pts[j].eta.clone()) * (scores[i].clone() - scores[j].clone());
            if prod < T::zero() {
                disc = disc + mass.clone();
            } else if prod > T::zero() {
                conc = conc + mass.clone();
            }
            distinct = distinct + mass;
        }
    }
    Ok(PairProbabilities {
        concordant: conc / distinct.clone(),
        discordant: disc / distinct,
    })
}

/// Probabilistic Kendall's tau: `1 - 2 P[discordant | x != x']`.
pub fn kendall_tau<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>) -> Result<T> {
    let pp = pair_probabilities(dist, f)?;
    Ok(T::one() - T::two() * pp.discordant)
}

/// `V(eps)`: mass of points whose cell calibration error is at most `eps`.
/// Right-continuous step function stored as its jump points.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidityCurve<T> {
    breakpoints: Vec<(T, T)>,
}

impl<T: Scalar> ValidityCurve<T> {
    /// Builds the curve from per-cell `(error, mass)` pairs. Errors must lie in `[0, 1]`.
    pub fn from_errors(mut errors: Vec<(T, T)>) -> Self {
        errors.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite errors"));
        let mut breakpoints: Vec<(T, T)> = Vec::new();
        let mut acc = T::zero();
        for (e, w) in errors {
            acc = acc + w;
            match breakpoints.last_mut() {
                Some((last, v)) if *last == e => *v = acc.clone(),
                _ => breakpoints.push((e, acc.clone())),
            }
        }
        Self { breakpoints }
    }

    /// `(epsilon, value)` jump points, ascending in epsilon.
    pub fn breakpoints(&self) -> &[(T, T)] {
        &self.breakpoints
    }

    pub fn value_at(&self, eps: &T) -> T {
        self.breakpoints
            .iter()
            .take_while(|(e, _)| e <= eps)
            .last()
            .map_or(T::zero(), |(_, v)| v.clone())
    }

    /// Integral of the step function over `[0, 1]`.
    pub fn area(&self) -> T {
        let mut area = T::zero();
        for (k, (e, v)) in self.breakpoints.iter().enumerate() {
            let next = self
                .breakpoints
                .get(k + 1)
                .map_or(T::one(), |(n, _)| T::min_of(n.clone(), T::one()));
            if *e < next {
                area = area + v.clone() * (next - e.clone());
            }
        }
        area
    }

    /// `epsilon,value` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epsilon", "value"])?;
        for (e, v) in &self.breakpoints {
            w.write_record([e.to_f64_lossy().to_string(), v.to_f64_lossy().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn validity_curve<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>) -> Result<ValidityCurve<T>> {
    let c = cell_stats(dist, f)?;
    if let Some(s) = c.score.iter().find(|s| **s < T::zero() || **s > T::one()) {
        return Err(Error::Domain(format!(
            "validity curve needs scores in [0, 1], got {}",
            s.to_f64_lossy()
        )));
    }
    let errors = c
        .score
        .into_iter()
        .zip(c.mean_eta)
        .map(|(s, e)| (s - e).abs())
        .zip(c.weight)
        .collect();
    Ok(ValidityCurve::from_errors(errors))
}

/// Area under the validity curve.
pub fn auc_v<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>) -> Result<T> {
    Ok(validity_curve(dist, f)?.area())
}

/// Every cell's score is within `tol` of the mean eta on that cell.
pub fn is_calibrated<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>, tol: &T) -> Result<bool> {
    let c = cell_stats(dist, f)?;
    Ok(c.score
        .iter()
        .zip(&c.mean_eta)
        .all(|(s, e)| (s.clone() - e.clone()).abs() <= *tol))
}

/// Orders every pair with distinct etas the same way eta does.
pub fn is_strictly_monotonic<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>) -> Result<bool> {
    let scores = f.resolve(dist)?;
    let pts = dist.points();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if pts[i].eta == pts[j].eta {
                continue;
            }
            let prod = (pts[i].eta.clone() - pts[j].eta.clone()) * (scores[i].clone() - scores[j].clone());
            if prod <= T::zero() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Where the best threshold on a predictor sits relative to its scores.
#[derive(Clone, Debug, PartialEq)]
pub enum Threshold<T> {
    /// Every point classified 1.
    BelowAll,
    Between(T),
    /// Every point classified 0.
    AboveAll,
}

impl<T: Scalar> Threshold<T> {
    /// A concrete threshold value reproducing this classification on `range`.
    pub fn value(&self, range: &[T]) -> T {
        match self {
            Threshold::BelowAll => range.first().cloned().unwrap_or_else(T::zero),
            Threshold::Between(t) => t.clone(),
            Threshold::AboveAll => range.last().cloned().unwrap_or_else(T::zero) + T::one(),
        }
    }
}

/// Minimum classification loss over all thresholds and a threshold attaining it.
///
/// The loss is constant between consecutive distinct scores, so scanning the
/// midpoints plus both sentinels is exhaustive. Ties keep the lowest threshold.
pub fn best_threshold<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>) -> Result<(Threshold<T>, T)> {
    let scores = f.resolve(dist)?;
    let cells = cells_of(dist, &scores);
    let mean_eta = cells.mean_etas(dist);
    let w = cells.partition.weights();
    // Cutting before cell k classifies cells 0..k as 0: loss = sum_{<k} w*eta + sum_{>=k} w*(1-eta).
    let mut loss = w
        .iter()
        .zip(&mean_eta)
        .fold(T::zero(), |acc, (w, e)| acc + w.clone() * (T::one() - e.clone()));
    let mut best = (Threshold::BelowAll, loss.clone());
    for k in 0..cells.len() {
        let (wk, ek) = (w[k].clone(), mean_eta[k].clone());
        loss = loss - wk.clone() * (T::one() - ek.clone()) + wk * ek;
        if loss < best.1 {
            let cut = if k + 1 < cells.len() {
                Threshold::Between((cells.scores[k].clone() + cells.scores[k + 1].clone()) / T::two())
            } else {
                Threshold::AboveAll
            };
            best = (cut, loss.clone());
        }
    }
    Ok(best)
}

/// Some threshold on `f` reaches the Bayes loss within `tol`.
pub fn admits_optimal_threshold<T: Scalar>(dist: &DiscreteDistribution<T>, f: &ScoreTable<T>, tol: &T) -> Result<bool> {
    let (_, loss) = best_threshold(dist, f)?;
    Ok(loss - bayes_loss(dist) <= *tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn obs1() -> DiscreteDistribution<f64> {
        DiscreteDistribution::<f64>::from_pairs([(0.5, 0.0), (0.5, 1.0)]).unwrap()
    }

    fn scores(d: &DiscreteDistribution<f64>, v: &[f64]) -> ScoreTable<f64> {
        ScoreTable::from_values(d, v).unwrap()
    }

    #[test]
    fn ce_examples() {
        let d = obs1();
        assert_eq!(ce_p(&d, &scores(&d, &[0.5, 0.5]), 1).unwrap(), 0.0);
        assert_eq!(ce_p(&d, &d.eta_table(), 2).unwrap(), 0.0);

        // two cells of mass 1/2, mean eta 1/2, scores 0.3 and 0.7
        let d = DiscreteDistribution::<f64>::uniform(&[0.5, 0.5]).unwrap();
        let ce = ce_p(&d, &scores(&d, &[0.3, 0.7]), 1).unwrap();
        assert!((ce - 0.2).abs() < 1e-15);
        assert!(matches!(ce_p(&d, &d.eta_table(), 0), Err(Error::Domain(_))));
    }

    #[test]
    fn classification_loss_examples() {
        let d = obs1();
        for theta in [-1.0, 0.2, 0.5, 0.7, 2.0] {
            assert_eq!(classification_loss(&d, &scores(&d, &[0.5, 0.5]), &theta).unwrap(), 0.5);
        }
        let g = scores(&d, &[0.4, 0.6]);
        assert_eq!(classification_loss(&d, &g, &0.5).unwrap(), 0.0);

        let d = DiscreteDistribution::<f64>::from_pairs([(0.3, 0.2), (0.3, 0.9), (0.4, 0.6)]).unwrap();
        let bayes = 0.3 * 0.2 + 0.3 * 0.1 + 0.4 * 0.4;
        assert!((classification_loss(&d, &d.eta_table(), &0.5).unwrap() - bayes).abs() < 1e-15);
    }

    #[test]
    fn bayes_loss_examples() {
        assert_eq!(bayes_loss(&obs1()), 0.0);
        assert_eq!(bayes_loss(&DiscreteDistribution::<f64>::uniform(&[0.5, 0.5, 0.5]).unwrap()), 0.5);
        let d = DiscreteDistribution::<f64>::uniform(&[0.2, 0.8]).unwrap();
        assert!((bayes_loss(&d) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn mse_examples() {
        let d = obs1();
        assert_eq!(mse(&d, &d.eta_table()).unwrap(), 0.0);
        let d = DiscreteDistribution::<f64>::from_pairs([(0.25, 0.2), (0.75, 0.7)]).unwrap();
        let var = 0.25 * 0.2 * 0.8 + 0.75 * 0.7 * 0.3;
        assert!((mse(&d, &d.eta_table()).unwrap() - var).abs() < 1e-15);
        let d = DiscreteDistribution::<f64>::uniform(&[0.5, 0.5]).unwrap();
        assert!((mse(&d, &scores(&d, &[0.35, 0.65])).unwrap() - 0.2725).abs() < 1e-15);
    }

    #[test]
    fn pc_counts_equal_cells_exactly() {
        for n in 1..8usize {
            let w = vec![BigRational::new(1.into(), (n as i64).into()); n];
            assert_eq!(pc_from_weights(&w), BigRational::from_integer((n as i64).into()));
        }
        let d = DiscreteDistribution::<f64>::from_pairs([(0.25, 0.1), (0.25, 0.2), (0.5, 0.3)]).unwrap();
        assert!((pc(&d, &d.eta_table()).unwrap() - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn kendall_tau_examples() {
        let d = DiscreteDistribution::<f64>::uniform(&[0.1, 0.4, 0.2, 0.9]).unwrap();
        assert_eq!(kendall_tau(&d, &d.eta_table()).unwrap(), 1.0);
        let single = DiscreteDistribution::<f64>::uniform(&[0.3]).unwrap();
        assert!(kendall_tau(&single, &single.eta_table()).is_err());
    }

    #[test]
    fn kendall_tau_eight_point_construction_exact() {
        let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        let etas = [q(1, 10), q(1, 10), q(1, 10), q(1, 1), q(1, 5), q(1, 5), q(1, 5), q(1, 5)];
        let d = DiscreteDistribution::uniform(&etas).unwrap();
        let f = ScoreTable::from_fn(&d, |p| {
            let i: usize = p.id[1..].parse().unwrap();
            if i < 4 { q(0, 1) } else { q(1, 1) }
        });
        assert_eq!(kendall_tau(&d, &f).unwrap(), q(5, 7));
    }

    #[test]
    fn validity_curve_steps_and_area() {
        let d = DiscreteDistribution::<f64>::uniform(&[0.5, 0.5]).unwrap();
        let curve = validity_curve(&d, &scores(&d, &[0.3, 0.3])).unwrap();
        assert_eq!(curve.value_at(&0.1), 0.0);
        assert_eq!(curve.value_at(&0.2), 1.0);
        assert!((curve.area() - 0.8).abs() < 1e-15);

        let cal = validity_curve(&d, &d.eta_table()).unwrap();
        assert_eq!(cal.breakpoints(), &[(0.0, 1.0)]);
        assert_eq!(cal.area(), 1.0);

        assert!(validity_curve(&d, &scores(&d, &[1.5, 0.2])).is_err());

        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("epsilon,value\n"));
    }

    #[test]
    fn checkers_on_observation_one() {
        let d = obs1();
        let check = |f: &ScoreTable<f64>| {
            (
                is_calibrated(&d, f, &1e-12).unwrap(),
                is_strictly_monotonic(&d, f).unwrap(),
                admits_optimal_threshold(&d, f, &1e-12).unwrap(),
            )
        };
        assert_eq!(check(&d.eta_table()), (true, true, true));
        assert_eq!(check(&scores(&d, &[0.5, 0.5])), (true, false, false));
        assert_eq!(check(&scores(&d, &[0.45, 0.55])), (false, true, true));
    }

    #[test]
    fn best_threshold_reports_a_working_cut() {
        let d = DiscreteDistribution::<f64>::uniform(&[0.1, 0.9, 0.2, 0.8]).unwrap();
        let f = scores(&d, &[0.3, 0.7, 0.35, 0.6]);
        let (t, loss) = best_threshold(&d, &f).unwrap();
        let range = crate::distribution::effective_range(&d, &f).unwrap();
        let theta = t.value(&range);
        assert!((classification_loss(&d, &f, &theta).unwrap() - loss).abs() < 1e-15);
        assert!((loss - bayes_loss(&d)).abs() < 1e-15);
        assert!(matches!(t, Threshold::Between(x) if (x - 0.475).abs() < 1e-15));
    }
}
