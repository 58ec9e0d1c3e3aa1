use serde::{Deserialize, Serialize};

use crate::empirical::check_inputs;
use crate::error::{Error, Result};

/// Sigmoid map `1 / (1 + exp(a * s + b))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlattModel {
    pub a: f64,
    pub b: f64,
    /// Set when every training score was equal and the slope is not identifiable.
    #[serde(default)]
    pub degenerate: bool,
}

impl PlattModel {
    pub fn predict(&self, score: f64) -> f64 {
        sigmoid(-(self.a * score + self.b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlattParams {
    pub max_iter: usize,
    /// Convergence threshold on the gradient norm of the summed objective.
    pub tol: f64,
    /// Use the smoothed targets `(N+ + 1) / (N+ + 2)` and `1 / (N- + 2)`.
    pub smooth_targets: bool,
}

impl Default for PlattParams {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-9, smooth_targets: true }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Negative log-likelihood of `p = 1 / (1 + exp(a s + b))` against soft targets.
#[derive(Clone, Debug)]
pub struct PlattObjective {
    scores: Vec<f64>,
    targets: Vec<f64>,
}

impl PlattObjective {
    pub fn new(scores: &[f64], labels: &[u8], smooth_targets: bool) -> Result<Self> {
        check_inputs(scores, labels)?;
        let n_pos = labels.iter().filter(|&&y| y == 1).count() as f64;
        let n_neg = labels.len() as f64 - n_pos;
        let (hi, lo) = if smooth_targets {
            ((n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
        } else {
            (1.0, 0.0)
        };
        Ok(Self {
            scores: scores.to_vec(),
            targets: labels.iter().map(|&y| if y == 1 { hi } else { lo }).collect(),
        })
    }

    pub fn value(&self, a: f64, b: f64) -> f64 {
        // -[t log p + (1-t) log(1-p)] with p = sigmoid(-z) equals t z + log(1 + exp(-z)).
        self.scores
            .iter()
            .zip(&self.targets)
            .map(|(&s, &t)| {
                let z = a * s + b;
                t * z + softplus(-z)
            })
            .sum()
    }

    pub fn gradient(&self, a: f64, b: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (&s, &t) in self.scores.iter().zip(&self.targets) {
            let p = sigmoid(-(a * s + b));
            let d = t - p;
            g[0] += s * d;
            g[1] += d;
        }
        g
    }

    fn hessian(&self, a: f64, b: f64) -> [f64; 3] {
        let mut h = [0.0; 3];
        for &s in &self.scores {
            let p = sigmoid(-(a * s + b));
            let q = p * (1.0 - p);
            h[0] += s * s * q;
            h[1] += s * q;
            h[2] += q;
        }
        h
    }

    fn mean_target(&self) -> f64 {
        self.targets.iter().sum::<f64>() / self.targets.len() as f64
    }
}

/// Result of a Platt fit together with the objective at every accepted iterate.
#[derive(Clone, Debug)]
pub struct PlattFit {
    pub model: PlattModel,
    pub objective_trace: Vec<f64>,
    pub gradient: [f64; 2],
}

/// Damped Newton iteration with backtracking line search.
pub fn fit_platt_traced(scores: &[f64], labels: &[u8], params: &PlattParams) -> Result<PlattFit> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 || n_pos == labels.len() {
        return Err(Error::UndefinedMetric("Platt scaling needs both classes".into()));
    }
    let obj = PlattObjective::new(scores, labels, params.smooth_targets)?;

    if scores.iter().all(|&s| s == scores[0]) {
        // Only a*s + b is identifiable; pin a = 0 and match the target prior.
        let t = obj.mean_target();
        let b = ((1.0 - t) / t).ln();
        return Ok(PlattFit {
            model: PlattModel { a: 0.0, b, degenerate: true },
            objective_trace: vec![obj.value(0.0, b)],
            gradient: obj.gradient(0.0, b),
        });
    }

    let n_neg = labels.len() - n_pos;
    let (mut a, mut b) = (0.0, ((n_neg as f64 + 1.0) / (n_pos as f64 + 1.0)).ln());
    let mut f = obj.value(a, b);
    let mut trace = vec![f];
    let mut g = obj.gradient(a, b);
    for _ in 0..params.max_iter {
        let gnorm = g[0].hypot(g[1]);
        if gnorm <= params.tol {
            return Ok(PlattFit {
                model: PlattModel { a, b, degenerate: false },
                objective_trace: trace,
                gradient: g,
            });
        }
        let [haa, hab, hbb] = obj.hessian(a, b);
        let ridge = 1e-12 * (haa + hbb).max(1.0);
        let (haa, hbb) = (haa + ridge, hbb + ridge);
        let det = haa * hbb - hab * hab;
        let da = -(hbb * g[0] - hab * g[1]) / det;
        let db = -(-hab * g[0] + haa * g[1]) / det;
        let slope = g[0] * da + g[1] * db;

        // Once the predicted decrease is at rounding level the line search
        // can no longer tell iterates apart; take full Newton steps.
        let full = -slope <= 1e-12 * (1.0 + f.abs());
        let mut step = 1.0;
        let accepted = loop {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = obj.value(na, nb);
            if full || nf <= f + 1e-4 * step * slope {
                break Some((na, nb, nf));
            }
            step *= 0.5;
            if step < 1e-10 {
                break None;
            }
        };
        match accepted {
            Some((na, nb, nf)) => {
                a = na;
                b = nb;
                f = nf;
                trace.push(f);
                g = obj.gradient(a, b);
            }
            None => break,
        }
    }
    let grad_norm = g[0].hypot(g[1]);
    if grad_norm <= params.tol {
        return Ok(PlattFit {
            model: PlattModel { a, b, degenerate: false },
            objective_trace: trace,
            gradient: g,
        });
    }
    Err(Error::NonConvergence { iterations: trace.len() - 1, a, b, grad_norm })
}

pub fn fit_platt(scores: &[f64], labels: &[u8], params: &PlattParams) -> Result<PlattModel> {
    fit_platt_traced(scores, labels, params).map(|f| f.model)
}
