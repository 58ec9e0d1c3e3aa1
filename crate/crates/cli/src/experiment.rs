//! The comparison protocol: repeated random train/calibration/test splits,
//! DT/IR/PS calibrators, metrics on the test split.

use calibkit::binning::{leaf_partition, uniform_mass};
use calibkit::calibrators::{fit_base_scorer, fit_isotonic, fit_platt, fit_tree, BaseScorer, CalibratorModel, TreeParams};
use calibkit::dataset::LabeledDataset;
use calibkit::empirical::{auc_roc, auc_v_knn, ece, pde, rmse, zero_one_loss, MetricParams, MetricReport};
use calibkit::seed::{derive_seed, hash_str};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Method, MetricName};
use crate::error::Result;
use crate::results::{ResultRow, WinTable};

/// Seed of one (dataset, repetition) unit.
pub fn unit_seed(master: u64, dataset: &str, rep: usize) -> u64 {
    derive_seed(master, &[hash_str(dataset), rep as u64])
}

/// Test-set scores of one method, plus the fitted model for trees.
struct Scored {
    scores: Vec<f64>,
    tree: Option<CalibratorModel>,
}

fn base_scores(cfg: &ExperimentConfig, train: &LabeledDataset, calib: &LabeledDataset, test: &LabeledDataset) -> Result<(Vec<f64>, Vec<f64>)> {
    if let (Some(c), Some(t)) = (calib.base_scores(), test.base_scores()) {
        return Ok((c.to_vec(), t.to_vec()));
    }
    let scorer: BaseScorer = fit_base_scorer(train, &cfg.logistic)?;
    Ok((scorer.score_all(calib)?, scorer.score_all(test)?))
}

fn fit_method(
    method: Method,
    cfg: &ExperimentConfig,
    seed: u64,
    calib: &LabeledDataset,
    test: &LabeledDataset,
    base: &(Vec<f64>, Vec<f64>),
) -> Result<Scored> {
    Ok(match method {
        Method::Tree => {
            let params = TreeParams { seed, ..cfg.tree.clone() };
            let tree = fit_tree(calib, &params)?;
            let scores = tree.predict_all(test)?;
            Scored { scores, tree: Some(CalibratorModel::Tree(tree)) }
        }
        Method::Isotonic => {
            let m = fit_isotonic(&base.0, calib.labels())?;
            Scored { scores: base.1.iter().map(|&s| m.predict(s)).collect(), tree: None }
        }
        Method::Platt => {
            let m = fit_platt(&base.0, calib.labels(), &cfg.platt)?;
            Scored { scores: base.1.iter().map(|&s| m.predict(s)).collect(), tree: None }
        }
    })
}

/// Evaluates one metric; `None` when it does not apply to the method or is
/// undefined on this test split (e.g. AUC on a single-class split).
pub fn evaluate(
    metric: MetricName,
    cfg: &ExperimentConfig,
    test: &LabeledDataset,
    scores: &[f64],
    tree: Option<&CalibratorModel>,
) -> Result<Option<MetricReport>> {
    let labels = test.labels();
    let n = scores.len();
    let (value, params, partition) = match metric {
        MetricName::Rmse => (rmse(scores, labels), MetricParams::default(), None),
        MetricName::ZeroOne => (
            zero_one_loss(scores, labels, cfg.theta),
            MetricParams { theta: Some(cfg.theta), ..Default::default() },
            None,
        ),
        MetricName::Auc => (auc_roc(scores, labels), MetricParams::default(), None),
        MetricName::Ece => {
            let b = cfg.bins.min(n);
            let part = uniform_mass(scores, b)?;
            (ece(scores, labels, &part, cfg.p), MetricParams { bins: Some(b), p: Some(cfg.p), ..Default::default() }, Some("uniform_mass"))
        }
        MetricName::Pde => {
            let Some(tree) = tree else { return Ok(None) };
            let part = leaf_partition(tree, test)?;
            (
                pde(scores, labels, &part, cfg.p),
                MetricParams { bins: Some(part.len()), p: Some(cfg.p), ..Default::default() },
                Some("tree_leaves"),
            )
        }
        MetricName::AucV => {
            let k = cfg.k.min(n);
            (auc_v_knn(scores, labels, k).map(|r| r.auc), MetricParams { k: Some(k), ..Default::default() }, None)
        }
    };
    match value {
        Ok(v) => Ok(Some(MetricReport::new(metric.name(), v, params, partition)?)),
        Err(calibkit::Error::UndefinedMetric(msg)) => {
            log::warn!("{metric} skipped: {msg}");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn run_unit(cfg: &ExperimentConfig, dataset: &str, data: &LabeledDataset, rep: usize, seed: u64) -> Result<Vec<ResultRow>> {
    let split = cfg.split.to_spec(seed)?.split(data.len())?;
    let (train, calib, test) = (data.subset(&split.train), data.subset(&split.calib), data.subset(&split.test));
    let needs_base = cfg.methods.iter().any(|m| *m != Method::Tree);
    let base = if needs_base { base_scores(cfg, &train, &calib, &test)? } else { (Vec::new(), Vec::new()) };
    let run_id = format!("{dataset}/{rep}");
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        let scored = fit_method(method, cfg, seed, &calib, &test, &base)?;
        for &metric in &cfg.metrics {
            if let Some(report) = evaluate(metric, cfg, &test, &scored.scores, scored.tree.as_ref())? {
                rows.push(ResultRow {
                    run_id: run_id.clone(),
                    dataset: dataset.to_string(),
                    method: method.name().to_string(),
                    metric: report.metric,
                    params: report.params.label(),
                    value: report.value,
                    seed,
                });
            }
        }
    }
    Ok(rows)
}

/// Runs every (dataset, repetition) unit in parallel. Output order is fixed:
/// datasets as given, then repetition, method and metric as configured.
pub fn run(cfg: &ExperimentConfig, master_seed: u64, datasets: &[(String, LabeledDataset)]) -> Result<Vec<ResultRow>> {
    let units: Vec<(usize, usize)> = (0..datasets.len()).flat_map(|d| (0..cfg.repetitions).map(move |r| (d, r))).collect();
    let per_unit: Vec<Result<Vec<ResultRow>>> = units
        .par_iter()
        .map(|&(d, rep)| {
            let (name, data) = &datasets[d];
            run_unit(cfg, name, data, rep, unit_seed(master_seed, name, rep))
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_unit {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn win_table(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Result<WinTable> {
    WinTable::from_rows(rows, &cfg.methods, &cfg.metrics)
}
