//! Bias of ECE and PDE for a tree predictor on synthetic data with known
//! eta, across bin counts, test sizes and binning rules.

use std::io::Write;

use calibkit::bias::{bias, BinnedKind, BinnedMetric, Binning};
use calibkit::calibrators::{fit_tree, CalibratorModel, TreeParams};
use calibkit::seed::{derive_seed, hash_str};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BiasConfig, BinningName};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BiasRow {
    pub binning: String,
    pub bins: usize,
    pub n_test: usize,
    pub samples_per_bin: f64,
    pub metric: String,
    pub bias: f64,
    pub abs_bias: f64,
    /// Mean over repetitions of `(1/n) sum |f - eta|`.
    pub true_error: f64,
}

#[derive(Clone, Debug)]
pub struct BiasSweep {
    pub rows: Vec<BiasRow>,
    pub tree_leaves: usize,
}

/// Configurations with at least `min_per_bin` samples per bin, and how many
/// of them PDE has the smaller absolute bias on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BiasTally {
    pub eligible: usize,
    pub pde_not_worse: usize,
}

impl BiasSweep {
    pub fn tally(&self, binning: BinningName, min_per_bin: f64) -> BiasTally {
        let mut t = BiasTally { eligible: 0, pde_not_worse: 0 };
        for e in self.rows.iter().filter(|r| r.metric == "ece" && r.binning == binning.name() && r.samples_per_bin >= min_per_bin) {
            let p = self
                .rows
                .iter()
                .find(|r| r.metric == "pde" && r.binning == e.binning && r.bins == e.bins && r.n_test == e.n_test)
                .expect("pde row for every ece row");
            t.eligible += 1;
            t.pde_not_worse += usize::from(p.abs_bias <= e.abs_bias);
        }
        t
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn run(cfg: &BiasConfig, master_seed: u64) -> Result<BiasSweep> {
    let generator = cfg.generator.build(derive_seed(master_seed, &[hash_str("generator")]))?;
    let train = generator.sample(cfg.train_size, derive_seed(master_seed, &[hash_str("train")]))?;
    let params = TreeParams { seed: derive_seed(master_seed, &[hash_str("tree")]), ..cfg.tree.clone() };
    let tree = fit_tree(&train.data, &params)?;
    let tree_leaves = tree.n_leaves();
    log::info!("bias predictor: tree with {tree_leaves} leaves on {} samples", cfg.train_size);
    let model = CalibratorModel::Tree(tree);
    let predictor = |x: &[f64]| model.as_tree()?.predict(x);

    let mut configs = Vec::new();
    for &binning in &cfg.binnings {
        for &bins in &cfg.bins {
            for &n_test in &cfg.test_sizes {
                if bins <= n_test {
                    configs.push((binning, bins, n_test));
                }
            }
        }
    }
    let rows: Vec<Result<Vec<BiasRow>>> = configs
        .par_iter()
        .map(|&(binning, bins, n_test)| {
            // the same test sets for every binning and bin count
            let seed = derive_seed(master_seed, &[hash_str("test"), n_test as u64]);
            let b = match binning {
                BinningName::UniformMass => Binning::UniformMass(bins),
                BinningName::Bfsl => Binning::Bfsl(&model, bins),
            };
            [BinnedKind::Ece, BinnedKind::Pde]
                .into_iter()
                .map(|kind| {
                    let metric = BinnedMetric { kind, binning: b, p: 1 };
                    let r = bias(|s| metric.evaluate(s), predictor, generator.as_ref(), n_test, cfg.repetitions, seed)?;
                    let true_error = r.repetitions.iter().map(|x| x.1).sum::<f64>() / r.repetitions.len() as f64;
                    Ok(BiasRow {
                        binning: binning.name().into(),
                        bins,
                        n_test,
                        samples_per_bin: n_test as f64 / bins as f64,
                        metric: if kind == BinnedKind::Ece { "ece" } else { "pde" }.into(),
                        bias: r.bias,
                        abs_bias: r.bias.abs(),
                        true_error,
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(BiasSweep { rows: out, tree_leaves })
}
