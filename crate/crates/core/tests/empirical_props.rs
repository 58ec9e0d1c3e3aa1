mod common;

use calibkit::binning::{bfsl, leaf_partition, uniform_mass};
use calibkit::calibrators::{fit_tree, CalibratorModel, TreeParams};
use calibkit::dataset::LabeledDataset;
use calibkit::empirical::*;
use common::config;
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    prop::collection::vec((0u32..=100, 0u8..=1), 2..80)
        .prop_map(|v| v.into_iter().map(|(s, y)| (s as f64 / 100.0, y)).unzip())
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn pde_dominates_ece((scores, labels) in sample(), b in 1usize..10) {
        let b = b.min(scores.len());
        let part = uniform_mass(&scores, b).unwrap();
        let stats = bin_stats(&scores, &labels, &part).unwrap();
        prop_assert!(stats.iter().all(|s| s.ppd + 1e-15 >= s.pce));
        prop_assert!(pde(&scores, &labels, &part, 1).unwrap() + 1e-15 >= ece(&scores, &labels, &part, 1).unwrap());
    }

    #[test]
    fn uniform_mass_bins_are_ordered_and_balanced((scores, _) in sample(), b in 1usize..10) {
        let b = b.min(scores.len());
        let part = uniform_mass(&scores, b).unwrap();
        let sizes: Vec<usize> = part.bins().iter().map(Vec::len).collect();
        prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1] && w[0] - w[1] <= 1));
        for w in part.bins().windows(2) {
            let hi = w[0].iter().map(|&i| scores[i]).fold(f64::MIN, f64::max);
            let lo = w[1].iter().map(|&i| scores[i]).fold(f64::MAX, f64::min);
            prop_assert!(hi <= lo);
        }
    }

    #[test]
    fn binned_errors_ignore_order_within_bins((scores, labels) in sample(), b in 1usize..6, rot in 0usize..80) {
        let b = b.min(scores.len());
        let part = uniform_mass(&scores, b).unwrap();
        // rotate the members of every bin
        let mut perm: Vec<usize> = (0..scores.len()).collect();
        for bin in part.bins() {
            for (k, &i) in bin.iter().enumerate() {
                perm[i] = bin[(k + rot) % bin.len()];
            }
        }
        let s2: Vec<f64> = perm.iter().map(|&j| scores[j]).collect();
        let y2: Vec<u8> = perm.iter().map(|&j| labels[j]).collect();
        for p in [1, 2] {
            prop_assert!((ece(&scores, &labels, &part, p).unwrap() - ece(&s2, &y2, &part, p).unwrap()).abs() < 1e-12);
            prop_assert!((pde(&scores, &labels, &part, p).unwrap() - pde(&s2, &y2, &part, p).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_is_a_rank_statistic((scores, labels) in sample()) {
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let mapped: Vec<f64> = scores.iter().map(|s| s.powi(3) * 5.0 - 2.0).collect();
        prop_assert_eq!(auc_roc(&scores, &labels).unwrap(), auc_roc(&mapped, &labels).unwrap());
    }

    #[test]
    fn knn_with_whole_sample_uses_global_mean((scores, labels) in sample()) {
        let n = scores.len();
        let r = auc_v_knn(&scores, &labels, n).unwrap();
        let mean = labels.iter().map(|&y| y as f64).sum::<f64>() / n as f64;
        let err = scores.iter().map(|s| (s - mean).abs()).sum::<f64>() / n as f64;
        prop_assert!((r.auc - (1.0 - err)).abs() < 1e-12);
    }

    #[test]
    fn bfsl_coarsens_the_leaf_partition(
        rows in prop::collection::vec((0u8..20, 0u8..20, 0u8..=1), 10..100),
        b in 1usize..12,
    ) {
        let data = LabeledDataset::new(
            rows.iter().map(|r| vec![r.0 as f64, r.1 as f64]).collect(),
            rows.iter().map(|r| r.2).collect(),
        ).unwrap();
        let model = CalibratorModel::Tree(fit_tree(&data, &TreeParams::with_leaf_budget(16)).unwrap());
        let leaves = leaf_partition(&model, &data).unwrap();
        let coarse = bfsl(&model, &data, b).unwrap();
        prop_assert!(coarse.fell_back == (b > model.as_tree().unwrap().n_leaves()));
        let region = coarse.partition.assignment();
        for bin in leaves.bins() {
            prop_assert!(bin.iter().all(|&i| region[i] == region[bin[0]]));
        }
    }
}
