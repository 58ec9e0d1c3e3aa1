//! Bias of a calibration metric against the true mean absolute calibration
//! error, measured on fresh samples from a generator with a known eta.

use crate::binning::{bfsl, leaf_partition, uniform_mass};
use crate::calibrators::CalibratorModel;
use crate::dataset::LabeledDataset;
use crate::empirical::{ece, pde};
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::seed::derive_seed;
use crate::synthgen::Generator;

/// One scored test set handed to a metric.
pub struct BiasSample<'a> {
    pub data: &'a LabeledDataset,
    pub scores: &'a [f64],
    pub eta: &'a [f64],
}

impl BiasSample<'_> {
    /// `(1/n) sum |f(x_i) - eta(x_i)|`, the quantity metrics are compared to.
    pub fn true_error(&self) -> f64 {
        self.scores.iter().zip(self.eta).map(|(s, e)| (s - e).abs()).sum::<f64>() / self.scores.len() as f64
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Binning<'a> {
    UniformMass(usize),
    Leaves(&'a CalibratorModel),
    Bfsl(&'a CalibratorModel, usize),
    /// Every row in its own bin.
    Singletons,
}

impl Binning<'_> {
    pub fn partition(&self, data: &LabeledDataset, scores: &[f64]) -> Result<Partition<f64>> {
        match *self {
            Self::UniformMass(b) => uniform_mass(scores, b),
            Self::Leaves(tree) => leaf_partition(tree, data),
            Self::Bfsl(tree, b) => Ok(bfsl(tree, data, b)?.partition),
            Self::Singletons => Partition::from_bins((0..scores.len()).map(|i| vec![i]).collect(), scores.len()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::UniformMass(_) => "uniform_mass",
            Self::Leaves(_) => "tree_leaves",
            Self::Bfsl(..) => "bfsl",
            Self::Singletons => "singletons",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinnedKind {
    Ece,
    Pde,
}

/// ECE or PDE under a fixed binning rule.
#[derive(Clone, Copy, Debug)]
pub struct BinnedMetric<'a> {
    pub kind: BinnedKind,
    pub binning: Binning<'a>,
    pub p: u32,
}

impl BinnedMetric<'_> {
    pub fn evaluate(&self, s: &BiasSample<'_>) -> Result<f64> {
        let part = self.binning.partition(s.data, s.scores)?;
        match self.kind {
            BinnedKind::Ece => ece(s.scores, s.data.labels(), &part, self.p),
            BinnedKind::Pde => pde(s.scores, s.data.labels(), &part, self.p),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasReport {
    /// Mean of `metric - true error` over the repetitions.
    pub bias: f64,
    /// `(metric, true error)` per repetition.
    pub repetitions: Vec<(f64, f64)>,
}

/// Draws `m` fresh test sets of size `n` (stream `derive_seed(seed, [rep])`),
/// scores them with `predictor` and averages `metric - true error`.
pub fn bias<P, M>(metric: M, predictor: P, generator: &dyn Generator, n: usize, m: usize, seed: u64) -> Result<BiasReport>
where
    P: Fn(&[f64]) -> Result<f64>,
    M: Fn(&BiasSample<'_>) -> Result<f64>,
{
    if m == 0 || n == 0 {
        return Err(Error::Domain("bias needs n >= 1 and m >= 1".into()));
    }
    // fail before sampling when there is nothing to compare against
    let (probe, _) = generator.draw(0, 0);
    if let Err(Error::NoEtaOracle) = generator.eta(&probe) {
        return Err(Error::NoEtaOracle);
    }
    let mut repetitions = Vec::with_capacity(m);
    for rep in 0..m {
        let sample = generator.sample(n, derive_seed(seed, &[rep as u64]))?;
        let scores = sample.data.features().iter().map(|x| predictor(x)).collect::<Result<Vec<_>>>()?;
        let s = BiasSample { data: &sample.data, scores: &scores, eta: &sample.eta };
        repetitions.push((metric(&s)?, s.true_error()));
    }
    let bias = repetitions.iter().map(|(v, t)| v - t).sum::<f64>() / m as f64;
    Ok(BiasReport { bias, repetitions })
}
