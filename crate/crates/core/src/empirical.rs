//! Sample-based metrics: 0/1 loss, RMSE, ROC AUC, binned calibration errors
//! (ECE and PDE) and the nearest-neighbour validity-curve estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::population::ValidityCurve;
use num_traits::Float;

use crate::scalar::{Real, Scalar};

pub(crate) fn check_inputs<T: Scalar>(scores: &[T], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(&y) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::NonBinaryLabel(y as f64));
    }
    if scores.iter().any(|s| !s.is_finite_value()) {
        return Err(Error::Domain("scores must be finite".into()));
    }
    Ok(())
}

fn label<T: Scalar>(y: u8) -> T {
    if y == 1 {
        T::one()
    } else {
        T::zero()
    }
}

fn count<T: Scalar>(n: usize) -> T {
    T::from_usize(n).unwrap()
}

/// Fraction of rows where `1{score >= theta}` differs from the label.
pub fn zero_one_loss<T: Scalar>(scores: &[T], labels: &[u8], theta: T) -> Result<T> {
    check_inputs(scores, labels)?;
    let wrong = scores
        .iter()
        .zip(labels)
        .filter(|(s, &y)| ((*s >= &theta) as u8) != y)
        .count();
    Ok(count::<T>(wrong) / count(scores.len()))
}

pub fn rmse<T: Real>(scores: &[T], labels: &[u8]) -> Result<T> {
    check_inputs(scores, labels)?;
    let sq = scores
        .iter()
        .zip(labels)
        .fold(T::zero(), |acc, (&s, &y)| acc + Float::powi(s - label::<T>(y), 2));
    Ok((sq / count(scores.len())).sqrt())
}

/// ROC AUC as the Mann-Whitney statistic: `P[s+ > s-] + P[s+ = s-] / 2`.
pub fn auc_roc<T: Real>(scores: &[T], labels: &[u8]) -> Result<T> {
    check_inputs(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    // sum of midranks (1-based) of the positives
    let mut rank_sum = T::zero();
    let mut k = 0;
    while k < order.len() {
        let mut end = k;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[k]] {
            end += 1;
        }
        let mid = count::<T>(k + end + 2) / T::two();
        let pos = order[k..=end].iter().filter(|&&i| labels[i] == 1).count();
        rank_sum = rank_sum + mid * count(pos);
        k = end + 1;
    }
    let np = count::<T>(n_pos);
    let u = rank_sum - np * (np + T::one()) / T::two();
    Ok(u / (np * count(n_neg)))
}

/// Per-bin summaries shared by ECE and PDE.
#[derive(Clone, Debug, PartialEq)]
pub struct BinStats<T> {
    pub weight: T,
    pub mean_score: T,
    pub mean_label: T,
    /// |mean score - mean label|
    pub pce: T,
    /// mean |score - mean label|
    pub ppd: T,
}

pub fn bin_stats<T: Scalar>(scores: &[T], labels: &[u8], partition: &Partition<T>) -> Result<Vec<BinStats<T>>> {
    check_inputs(scores, labels)?;
    if partition.n_indices() != scores.len() {
        return Err(Error::Partition(format!(
            "partition covers {} indices, data has {}",
            partition.n_indices(),
            scores.len()
        )));
    }
    partition
        .bins()
        .iter()
        .zip(partition.weights())
        .map(|(bin, weight)| {
            if bin.is_empty() {
                return Err(Error::Partition("empty bin".into()));
            }
            let n = count::<T>(bin.len());
            let mean_score = bin.iter().fold(T::zero(), |a, &i| a + scores[i].clone()) / n.clone();
            let mean_label = bin.iter().fold(T::zero(), |a, &i| a + label::<T>(labels[i])) / n.clone();
            let ppd = bin
                .iter()
                .fold(T::zero(), |a, &i| a + (scores[i].clone() - mean_label.clone()).abs())
                / n;
            Ok(BinStats {
                weight: weight.clone(),
                pce: (mean_score.clone() - mean_label.clone()).abs(),
                mean_score,
                mean_label,
                ppd,
            })
        })
        .collect()
}

fn weighted_power_sum<T: Scalar>(terms: impl Iterator<Item = (T, T)>, p: u32) -> Result<T> {
    if p == 0 {
        return Err(Error::Domain("p must be at least 1".into()));
    }
    Ok(terms.fold(T::zero(), |acc, (w, e)| acc + w * e.powu(p)))
}

/// `ECE^p`: the p-th power of [`ece`], exact for rational scalars.
pub fn ece_pow<T: Scalar>(scores: &[T], labels: &[u8], partition: &Partition<T>, p: u32) -> Result<T> {
    let stats = bin_stats(scores, labels, partition)?;
    weighted_power_sum(stats.into_iter().map(|b| (b.weight, b.pce)), p)
}

/// `PDE^p`: the p-th power of [`pde`], exact for rational scalars.
pub fn pde_pow<T: Scalar>(scores: &[T], labels: &[u8], partition: &Partition<T>, p: u32) -> Result<T> {
    let stats = bin_stats(scores, labels, partition)?;
    weighted_power_sum(stats.into_iter().map(|b| (b.weight, b.ppd)), p)
}

/// Lp expected calibration error over the bins of `partition`.
pub fn ece<T: Real>(scores: &[T], labels: &[u8], partition: &Partition<T>, p: u32) -> Result<T> {
    Ok(ece_pow(scores, labels, partition, p)?.root(p))
}

/// Lp probability deviation error over the bins of `partition`.
pub fn pde<T: Real>(scores: &[T], labels: &[u8], partition: &Partition<T>, p: u32) -> Result<T> {
    Ok(pde_pow(scores, labels, partition, p)?.root(p))
}

/// Nearest-neighbour validity estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnValidity<T> {
    /// |score_i - mean label of the k nearest scores| per sample.
    pub errors: Vec<T>,
    pub curve: ValidityCurve<T>,
    pub auc: T,
}

/// Estimates the validity curve from the `k` samples with the closest scores
/// to each sample (the sample itself first, then by distance, then by
/// smaller index) and integrates it over `[0, 1]`.
pub fn auc_v_knn<T: Real>(scores: &[T], labels: &[u8], k: usize) -> Result<KnnValidity<T>> {
    check_inputs(scores, labels)?;
    let n = scores.len();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("k must be in 1..={n}, got {k}")));
    }
    // groups of equal score, ascending; members ascending by index
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
    let mut groups: Vec<(T, Vec<usize>)> = Vec::new();
    let mut group_of = vec![0; n];
    for i in order {
        match groups.last_mut() {
            Some((s, m)) if *s == scores[i] => m.push(i),
            _ => groups.push((scores[i], vec![i])),
        }
        group_of[i] = groups.len() - 1;
    }

    let take = |pool: &mut Vec<usize>, need: &mut usize, sum: &mut usize| {
        pool.sort_unstable();
        for &j in pool.iter().take(*need) {
            *sum += labels[j] as usize;
        }
        *need -= (*need).min(pool.len());
    };

    let mut errors = Vec::with_capacity(n);
    for i in 0..n {
        let s = scores[i];
        let g = group_of[i];
        let mut positives = labels[i] as usize;
        let mut need = k - 1;
        let mut same: Vec<usize> = groups[g].1.iter().copied().filter(|&j| j != i).collect();
        take(&mut same, &mut need, &mut positives);
        let (mut lo, mut hi) = (g, g + 1);
        while need > 0 {
            let dl = (lo > 0).then(|| s - groups[lo - 1].0);
            let dr = (hi < groups.len()).then(|| groups[hi].0 - s);
            let mut pool = Vec::new();
            match (dl, dr) {
                (Some(a), Some(b)) if a == b => {
                    pool.extend(&groups[lo - 1].1);
                    pool.extend(&groups[hi].1);
                    lo -= 1;
                    hi += 1;
                }
                (Some(a), Some(b)) if a < b => {
                    pool.extend(&groups[lo - 1].1);
                    lo -= 1;
                }
                (Some(_), None) => {
                    pool.extend(&groups[lo - 1].1);
                    lo -= 1;
                }
                (_, Some(_)) => {
                    pool.extend(&groups[hi].1);
                    hi += 1;
                }
                (None, None) => unreachable!("k <= n"),
            }
            take(&mut pool, &mut need, &mut positives);
        }
        errors.push(Float::abs(s - count::<T>(positives) / count(k)));
    }
    let w = T::one() / count(n);
    let curve = ValidityCurve::from_errors(errors.iter().map(|&e| (e, w)).collect());
    let auc = curve.area();
    Ok(KnnValidity { errors, curve, auc })
}

/// Parameters a metric value was computed with.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    pub bins: Option<usize>,
    pub p: Option<u32>,
    pub k: Option<usize>,
    pub theta: Option<f64>,
}

impl MetricParams {
    /// Compact `key=value` list, `;`-separated, in a fixed order.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(b) = self.bins {
            parts.push(format!("B={b}"));
        }
        if let Some(p) = self.p {
            parts.push(format!("p={p}"));
        }
        if let Some(k) = self.k {
            parts.push(format!("k={k}"));
        }
        if let Some(t) = self.theta {
            parts.push(format!("theta={t}"));
        }
        parts.join(";")
    }
}

/// One evaluated metric together with how it was computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    pub params: MetricParams,
    /// Where the bins came from (`uniform_mass`, `tree_leaves`, ...), if any.
    pub partition: Option<String>,
}

impl MetricReport {
    pub fn new(metric: &str, value: f64, params: MetricParams, partition: Option<&str>) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::UndefinedMetric(format!("{metric} evaluated to {value}")));
        }
        Ok(Self {
            metric: metric.to_string(),
            value,
            params,
            partition: partition.map(str::to_string),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_bin(n: usize) -> Partition<f64> {
        Partition::from_bins(vec![(0..n).collect()], n).unwrap()
    }

    #[test]
    fn zero_one_loss_examples() {
        assert_eq!(zero_one_loss(&[0.0, 1.0, 1.0], &[0, 1, 1], 0.5).unwrap(), 0.0);
        assert_eq!(zero_one_loss(&[1.0, 0.0], &[0, 1], 0.5).unwrap(), 1.0);
        assert!((zero_one_loss(&[0.4, 0.6, 0.6], &[0, 1, 0], 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // score equal to theta predicts 1
        assert_eq!(zero_one_loss(&[0.5], &[1], 0.5).unwrap(), 0.0);
        assert!(matches!(zero_one_loss::<f64>(&[], &[], 0.5), Err(Error::EmptyInput)));
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[0.0, 1.0], &[0, 1]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.5; 4], &[0, 1, 1, 0]).unwrap(), 0.5);
        assert!((rmse(&[0.2, 0.8], &[0, 1]).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(rmse(&[0.2], &[0, 1]), Err(Error::LengthMismatch(1, 2))));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_roc(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(auc_roc(&[0.3; 5], &[0, 1, 0, 1, 1]).unwrap(), 0.5);
        assert_eq!(auc_roc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert!(matches!(auc_roc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn ece_and_pde_on_mixed_bin() {
        // 0.35 / 0.65 scores with labels averaging 0.5
        let scores = [0.35, 0.65, 0.35, 0.65];
        let labels = [0, 1, 1, 0];
        let p = one_bin(4);
        assert!(ece(&scores, &labels, &p, 1).unwrap().abs() < 1e-15);
        assert!((pde(&scores, &labels, &p, 1).unwrap() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn mixed_bin_is_exact_in_rationals() {
        use crate::Rational;
        let q = |n: i64| Rational::new(n.into(), 100.into());
        let scores = [q(35), q(65), q(35), q(65)];
        let part = Partition::<Rational>::from_bins(vec![vec![0, 1, 2, 3]], 4).unwrap();
        let labels = [0, 1, 1, 0];
        assert_eq!(ece_pow(&scores, &labels, &part, 1).unwrap(), q(0));
        assert_eq!(pde_pow(&scores, &labels, &part, 1).unwrap(), q(15));
    }

    #[test]
    fn ece_and_pde_single_bin_examples() {
        let p = one_bin(2);
        assert!((ece(&[0.2, 0.4], &[1, 1], &p, 1).unwrap() - 0.7).abs() < 1e-15);
        assert!((pde(&[0.2, 0.4], &[1, 1], &p, 1).unwrap() - 0.7).abs() < 1e-15);
        let exact = [0.0, 1.0, 1.0];
        let singles = Partition::from_bins(vec![vec![0], vec![1, 2]], 3).unwrap();
        assert_eq!(ece(&exact, &[0, 1, 1], &singles, 2).unwrap(), 0.0);
        let constant = [0.5; 4];
        assert_eq!(pde(&constant, &[0, 1, 1, 0], &one_bin(4), 1).unwrap(), 0.0);
    }

    #[test]
    fn ece_rejects_mismatched_partitions() {
        assert!(matches!(ece(&[0.1, 0.2, 0.3], &[0, 1, 0], &one_bin(2), 1), Err(Error::Partition(_))));
        assert!(ece(&[0.1, 0.2], &[0, 1], &one_bin(2), 0).is_err());
    }

    #[test]
    fn knn_validity_examples() {
        let r = auc_v_knn(&[0.2, 0.8], &[0, 1], 1).unwrap();
        assert!((r.errors[0] - 0.2).abs() < 1e-15 && (r.errors[1] - 0.2).abs() < 1e-15);
        assert!((r.auc - 0.8).abs() < 1e-15);

        let scores = [0.1, 0.7, 0.4, 0.9, 0.3];
        let labels = [0, 1, 0, 1, 1];
        let r = auc_v_knn(&scores, &labels, 5).unwrap();
        let mean_err: f64 = scores.iter().map(|s| (s - 0.6f64).abs()).sum::<f64>() / 5.0;
        assert!((r.auc - (1.0 - mean_err)).abs() < 1e-15);

        // two groups scored at their own label means
        let scores = [0.25, 0.25, 0.25, 0.25, 0.75, 0.75, 0.75, 0.75];
        let labels = [1, 0, 0, 0, 1, 1, 0, 1];
        assert_eq!(auc_v_knn(&scores, &labels, 4).unwrap().auc, 1.0);

        assert!(auc_v_knn(&scores, &labels, 0).is_err());
        assert!(auc_v_knn(&scores, &labels, 9).is_err());
    }

    #[test]
    fn knn_ties_prefer_smaller_indices() {
        // neighbours of index 0 at equal distance: index 1 (left) and 2 (right)
        let scores = [0.5, 0.4, 0.6, 0.6];
        let labels = [0, 1, 0, 1];
        let r = auc_v_knn(&scores, &labels, 2).unwrap();
        // self (0) + index 1 -> mean label 0.5
        assert!(r.errors[0].abs() < 1e-15);
        // index 2: self + index 3 (distance 0) -> mean 0.5
        assert!((r.errors[2] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn metric_report_rejects_non_finite_values() {
        assert!(MetricReport::new("ece", f64::NAN, MetricParams::default(), None).is_err());
        let r = MetricReport::new("ece", 0.1, MetricParams { bins: Some(32), p: Some(1), ..Default::default() }, Some("uniform_mass")).unwrap();
        assert_eq!(r.params.label(), "B=32;p=1");
    }
}
