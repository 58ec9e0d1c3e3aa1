//! Calibration/accuracy tradeoff: trees of growing leaf budgets trained on
//! one half of a dataset, PDE (leaf bins) and 0/1 loss on the other half,
//! plus the cost-complexity pruned tree as a reference point.

use std::io::Write;

use calibkit::binning::leaf_partition;
use calibkit::calibrators::{fit_tree, CalibratorModel, TreeModel, TreeParams};
use calibkit::dataset::LabeledDataset;
use calibkit::empirical::{pde, zero_one_loss};
use calibkit::seed::{derive_seed, hash_str};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::TradeoffConfig;
use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub dataset: String,
    /// `sweep` for budgeted trees, `pruned` for the cost-complexity pruned tree.
    pub kind: String,
    pub leaf_budget: Option<usize>,
    pub leaves: usize,
    pub pde: f64,
    pub zero_one_loss: f64,
}

#[derive(Clone, Debug)]
pub struct DatasetTradeoff {
    pub dataset: String,
    pub rows: Vec<TradeoffRow>,
    /// Spearman correlation between leaf count and PDE over the sweep rows.
    pub spearman: f64,
}

/// Average ranks (1-based), ties sharing the mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut end = k;
        while end + 1 < idx.len() && v[idx[end + 1]] == v[idx[k]] {
            end += 1;
        }
        let mid = (k + end) as f64 / 2.0 + 1.0;
        idx[k..=end].iter().for_each(|&i| r[i] = mid);
        k = end + 1;
    }
    r
}

/// Spearman rank correlation; NaN when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Seeded half split.
pub fn halves(n: usize, train_frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_train = (n as f64 * train_frac).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(CliError::Config(format!("cannot split {n} rows with train fraction {train_frac}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

fn point(cfg: &TradeoffConfig, dataset: &str, kind: &str, budget: Option<usize>, tree: TreeModel, test: &LabeledDataset) -> Result<TradeoffRow> {
    let scores = tree.predict_all(test)?;
    let leaves = tree.n_leaves();
    let model = CalibratorModel::Tree(tree);
    let part = leaf_partition(&model, test)?;
    Ok(TradeoffRow {
        dataset: dataset.into(),
        kind: kind.into(),
        leaf_budget: budget,
        leaves,
        pde: pde(&scores, test.labels(), &part, cfg.p)?,
        zero_one_loss: zero_one_loss(&scores, test.labels(), cfg.theta)?,
    })
}

pub fn run_dataset(cfg: &TradeoffConfig, master_seed: u64, name: &str, data: &LabeledDataset) -> Result<DatasetTradeoff> {
    let seed = derive_seed(master_seed, &[hash_str(name)]);
    let (tr, te) = halves(data.len(), cfg.train_frac, seed)?;
    let (train, test) = (data.subset(&tr), data.subset(&te));
    let fitted: Vec<Result<TreeModel>> = cfg
        .leaf_budgets
        .par_iter()
        .map(|&b| Ok(fit_tree(&train, &TreeParams { seed, ..TreeParams::with_leaf_budget(b) })?))
        .collect();
    let mut rows: Vec<TradeoffRow> = Vec::new();
    for (&budget, tree) in cfg.leaf_budgets.iter().zip(fitted) {
        let tree = tree?;
        // budgets past the fully grown tree repeat the same model
        if rows.iter().any(|r| r.leaves == tree.n_leaves()) {
            continue;
        }
        rows.push(point(cfg, name, "sweep", Some(budget), tree, &test)?);
    }
    let sizes: Vec<f64> = rows.iter().map(|r| r.leaves as f64).collect();
    let pdes: Vec<f64> = rows.iter().map(|r| r.pde).collect();
    let rho = spearman(&sizes, &pdes);
    let pruned = fit_tree(&train, &TreeParams { seed, ..cfg.tree.clone() })?;
    rows.push(point(cfg, name, "pruned", None, pruned, &test)?);
    Ok(DatasetTradeoff { dataset: name.into(), rows, spearman: rho })
}

pub fn write_csv<W: Write>(results: &[DatasetTradeoff], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results.iter().flat_map(|d| &d.rows) {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_reference_values() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 25.0, 90.0]), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        // ranks (1, 2, 3, 4) vs (1, 3, 2, 4): 1 - 6 * 2 / (4 * 15) = 0.8
        assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]) - 0.8).abs() < 1e-15);
        assert!(spearman(&[1.0, 2.0], &[5.0, 5.0]).is_nan());
    }

    #[test]
    fn tied_ranks_are_averaged() {
        assert_eq!(ranks(&[0.5, 0.1, 0.5, 0.9]), [2.5, 1.0, 2.5, 4.0]);
    }

    #[test]
    fn single_leaf_pde_is_the_gap_between_half_means() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let y: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
        let data = LabeledDataset::new(x, y).unwrap();
        let cfg = TradeoffConfig { leaf_budgets: vec![1, 4], ..TradeoffConfig::default() };
        let out = run_dataset(&cfg, 3, "toy", &data).unwrap();
        let seed = derive_seed(3, &[hash_str("toy")]);
        let (tr, te) = halves(40, 0.5, seed).unwrap();
        let mean = |idx: &[usize]| idx.iter().map(|&i| data.labels()[i] as f64).sum::<f64>() / idx.len() as f64;
        let first = &out.rows[0];
        assert_eq!((first.leaf_budget, first.leaves), (Some(1), 1));
        assert!((first.pde - (mean(&tr) - mean(&te)).abs()).abs() < 1e-15);
        assert_eq!(out.rows.last().unwrap().kind, "pruned");
    }
}
