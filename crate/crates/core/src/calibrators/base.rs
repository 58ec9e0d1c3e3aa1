//! Base scorers that feed the score-to-probability calibrators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    /// L2 penalty on the weights (not the intercept), on the mean loss.
    pub l2: f64,
    pub max_iter: usize,
    /// Convergence threshold on the gradient norm of the mean penalized loss.
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { l2: 1e-3, max_iter: 100, tol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseScorer {
    /// Linear logit over standardized features.
    Logistic {
        weights: Vec<f64>,
        intercept: f64,
        center: Vec<f64>,
        scale: Vec<f64>,
    },
    /// Scores supplied per row by an external model.
    External { scores: Vec<f64> },
}

impl BaseScorer {
    /// Score of row `i` with features `x`. External scorers look up by row.
    pub fn score(&self, i: usize, x: &[f64]) -> Result<f64> {
        match self {
            BaseScorer::Logistic { weights, intercept, center, scale } => {
                if x.len() != weights.len() {
                    return Err(Error::DimensionMismatch { expected: weights.len(), got: x.len() });
                }
                let z = x
                    .iter()
                    .zip(center)
                    .zip(scale)
                    .zip(weights)
                    .map(|(((v, c), s), w)| w * (v - c) / s)
                    .sum::<f64>()
                    + intercept;
                Ok(1.0 / (1.0 + (-z).exp()))
            }
            BaseScorer::External { scores } => scores
                .get(i)
                .copied()
                .ok_or_else(|| Error::Dataset(format!("no external score for row {i}"))),
        }
    }

    pub fn score_all(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        (0..data.len()).map(|i| self.score(i, data.row(i))).collect()
    }
}

/// L2-regularized logistic regression by Newton's method on standardized
/// features. Deterministic: no random initialization.
pub fn fit_base_scorer(data: &LabeledDataset, params: &LogisticParams) -> Result<BaseScorer> {
    let n = data.len();
    let d = data.dim();
    let n_pos = data.labels().iter().filter(|&&y| y == 1).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::UndefinedMetric("logistic base scorer needs both classes".into()));
    }
    let nf = n as f64;
    let center: Vec<f64> = (0..d)
        .map(|j| data.features().iter().map(|r| r[j]).sum::<f64>() / nf)
        .collect();
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let var = data.features().iter().map(|r| (r[j] - center[j]).powi(2)).sum::<f64>() / nf;
            if var > 0.0 { var.sqrt() } else { 1.0 }
        })
        .collect();
    // design matrix with a trailing intercept column
    let x = DMatrix::from_fn(n, d + 1, |i, j| {
        if j == d { 1.0 } else { (data.row(i)[j] - center[j]) / scale[j] }
    });
    let y = DVector::from_iterator(n, data.labels().iter().map(|&v| v as f64));
    let mut penalty = DVector::from_element(d + 1, params.l2);
    penalty[d] = 0.0;

    let objective = |beta: &DVector<f64>| -> f64 {
        let z = &x * beta;
        let nll: f64 = z
            .iter()
            .zip(y.iter())
            .map(|(&z, &y)| {
                let sp = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                sp - y * z
            })
            .sum();
        nll / nf + 0.5 * beta.component_mul(&penalty).dot(beta)
    };

    let mut beta = DVector::zeros(d + 1);
    beta[d] = (n_pos as f64 / (n - n_pos) as f64).ln();
    let mut f = objective(&beta);
    for _ in 0..params.max_iter {
        let z = &x * &beta;
        let p = z.map(|z| 1.0 / (1.0 + (-z).exp()));
        let grad = x.transpose() * (&p - &y) / nf + beta.component_mul(&penalty);
        if grad.norm() <= params.tol {
            return Ok(BaseScorer::Logistic {
                weights: beta.rows(0, d).iter().copied().collect(),
                intercept: beta[d],
                center,
                scale,
            });
        }
        let q = p.map(|p| p * (1.0 - p));
        let mut h = x.transpose() * DMatrix::from_diagonal(&q) * &x / nf;
        for j in 0..=d {
            h[(j, j)] += penalty[j] + 1e-12;
        }
        let step = h
            .cholesky()
            .ok_or_else(|| Error::Domain("singular Hessian in logistic fit".into()))?
            .solve(&grad);
        let decrease = grad.dot(&step);
        // at rounding level the line search cannot rank iterates; take full steps
        let full = decrease <= 1e-12 * (1.0 + f.abs());
        let mut t = 1.0;
        loop {
            let cand = &beta - &step * t;
            let fc = objective(&cand);
            if full || fc <= f - 1e-4 * t * decrease || t < 1e-10 {
                beta = cand;
                f = fc;
                break;
            }
            t *= 0.5;
        }
    }
    let grad_norm = {
        let p = (&x * &beta).map(|z| 1.0 / (1.0 + (-z).exp()));
        (x.transpose() * (&p - &y) / nf + beta.component_mul(&penalty)).norm()
    };
    Err(Error::NonConvergence { iterations: params.max_iter, a: beta[0], b: beta[d], grad_norm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(xs: &[f64], ys: &[u8]) -> LabeledDataset {
        LabeledDataset::new(xs.iter().map(|&v| vec![v]).collect(), ys.to_vec()).unwrap()
    }

    #[test]
    fn separable_data_is_classified_perfectly() {
        let d = one_d(&[-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0], &[0, 0, 0, 0, 1, 1, 1, 1]);
        let m = fit_base_scorer(&d, &LogisticParams::default()).unwrap();
        let scores = m.score_all(&d).unwrap();
        let loss = crate::empirical::zero_one_loss(&scores, d.labels(), 0.5).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn balanced_symmetric_data_has_zero_intercept() {
        let d = one_d(&[-2.0, -1.0, -0.5, 0.5, 1.0, 2.0], &[0, 1, 0, 1, 0, 1]);
        match fit_base_scorer(&d, &LogisticParams::default()).unwrap() {
            BaseScorer::Logistic { intercept, .. } => assert!(intercept.abs() < 1e-9),
            _ => unreachable!(),
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let d = one_d(&[-1.0, 1.0], &[0, 1]);
        let m = fit_base_scorer(&d, &LogisticParams::default()).unwrap();
        assert!(matches!(m.score(0, &[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn external_scores_are_looked_up_by_row() {
        let m = BaseScorer::External { scores: vec![0.2, 0.9] };
        assert_eq!(m.score(1, &[]).unwrap(), 0.9);
        assert!(m.score(2, &[]).is_err());
    }
}
