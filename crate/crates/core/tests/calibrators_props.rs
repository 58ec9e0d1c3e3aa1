mod common;

use calibkit::binning::leaf_partition;
use calibkit::calibrators::*;
use calibkit::dataset::LabeledDataset;
use calibkit::empirical::ece;
use common::config;
use proptest::prelude::*;

/// Best nondecreasing block-mean fit by exhaustive search over every way of
/// cutting the tie-grouped sorted sample into contiguous blocks.
fn isotonic_oracle(scores: &[f64], labels: &[u8]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let m = groups.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for cuts in 0u32..(1 << (m - 1)) {
        let mut fit = vec![0.0; scores.len()];
        let mut means = Vec::new();
        let mut start = 0;
        for g in 0..m {
            if g == m - 1 || cuts >> g & 1 == 1 {
                let members: Vec<usize> = groups[start..=g].iter().flatten().copied().collect();
                let mean = members.iter().map(|&i| labels[i] as f64).sum::<f64>() / members.len() as f64;
                members.iter().for_each(|&i| fit[i] = mean);
                means.push(mean);
                start = g + 1;
            }
        }
        if means.windows(2).any(|w| w[0] > w[1]) {
            continue;
        }
        let sse: f64 = fit.iter().zip(labels).map(|(f, &y)| (f - y as f64).powi(2)).sum();
        if best.as_ref().is_none_or(|(b, _)| sse < *b - 1e-12) {
            best = Some((sse, fit));
        }
    }
    best.unwrap().1
}

fn dataset(rows: &[(f64, f64, u8)]) -> LabeledDataset {
    LabeledDataset::new(rows.iter().map(|r| vec![r.0, r.1]).collect(), rows.iter().map(|r| r.2).collect()).unwrap()
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn isotonic_matches_oracle(pts in prop::collection::vec((0u8..6, 0u8..=1), 1..=10)) {
        let scores: Vec<f64> = pts.iter().map(|p| p.0 as f64 / 5.0).collect();
        let labels: Vec<u8> = pts.iter().map(|p| p.1).collect();
        let (model, fit) = fit_isotonic_with_fit(&scores, &labels).unwrap();
        let oracle = isotonic_oracle(&scores, &labels);
        for (a, b) in fit.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        prop_assert!(model.values.windows(2).all(|w| w[0] <= w[1]));
        for (s, f) in scores.iter().zip(&fit) {
            prop_assert_eq!(model.predict(*s), *f);
        }
    }

    #[test]
    fn platt_gradient_vanishes(pts in prop::collection::vec((-30i32..30, 0u8..=1), 4..200)) {
        let scores: Vec<f64> = pts.iter().map(|p| p.0 as f64 / 10.0).collect();
        let labels: Vec<u8> = pts.iter().map(|p| p.1).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let params = PlattParams::default();
        let fit = fit_platt_traced(&scores, &labels, &params).unwrap();
        let obj = PlattObjective::new(&scores, &labels, params.smooth_targets).unwrap();
        let (a, b, h) = (fit.model.a, fit.model.b, 1e-5);
        let fd = [
            (obj.value(a + h, b) - obj.value(a - h, b)) / (2.0 * h),
            (obj.value(a, b + h) - obj.value(a, b - h)) / (2.0 * h),
        ];
        prop_assert!(fd[0].hypot(fd[1]) <= 1e-6, "{:?}", fd);
        // nonincreasing up to rounding in the final full Newton steps
        prop_assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()));
    }

    #[test]
    fn tree_leaves_are_training_means(
        rows in prop::collection::vec((0u8..10, 0u8..10, 0u8..=1), 2..120),
        max_depth in prop::option::of(1usize..6),
        min_leaf in 1usize..4,
        seed in 0u64..4,
    ) {
        let rows: Vec<(f64, f64, u8)> = rows.iter().map(|r| (r.0 as f64, r.1 as f64 / 3.0, r.2)).collect();
        prop_assume!(rows.len() >= 2 * min_leaf);
        let data = dataset(&rows);
        let params = TreeParams { max_depth, min_leaf, seed, ..TreeParams::default() };
        let model = CalibratorModel::Tree(fit_tree(&data, &params).unwrap());
        let tree = model.as_tree().unwrap();
        let scores = tree.predict_all(&data).unwrap();
        let part = leaf_partition(&model, &data).unwrap();
        prop_assert!(ece(&scores, data.labels(), &part, 1).unwrap() <= 1e-12);
        let leaves: Vec<&TreeNode> = tree.nodes.iter().filter(|n| n.split.is_none()).collect();
        prop_assert_eq!(leaves.iter().map(|n| n.count).sum::<usize>(), data.len());
        prop_assert!(leaves.iter().all(|n| (0.0..=1.0).contains(&n.value) && n.count >= min_leaf));
    }
}

#[test]
fn isotonic_oracle_on_all_twelve_point_patterns() {
    let scores: Vec<f64> = (0..12).map(|i| (i / 2) as f64).collect();
    for pattern in 0u32..1 << 12 {
        let labels: Vec<u8> = (0..12).map(|i| (pattern >> i & 1) as u8).collect();
        let (_, fit) = fit_isotonic_with_fit(&scores, &labels).unwrap();
        let oracle = isotonic_oracle(&scores, &labels);
        assert!(fit.iter().zip(&oracle).all(|(a, b)| (a - b).abs() <= 1e-9), "pattern {pattern:012b}");
    }
}

#[test]
fn models_round_trip_through_json() {
    let data = dataset(&[(0.0, 0.0, 0), (1.0, 0.0, 0), (2.0, 1.0, 1), (3.0, 1.0, 1)]);
    let models = [
        CalibratorModel::Tree(fit_tree(&data, &TreeParams::default()).unwrap()),
        CalibratorModel::Isotonic(fit_isotonic(&[0.1, 0.2, 0.3], &[0, 1, 1]).unwrap()),
        CalibratorModel::Platt(fit_platt(&[0.1, 0.2, 0.3, 0.4], &[0, 1, 0, 1], &PlattParams::default()).unwrap()),
    ];
    for m in models {
        assert_eq!(CalibratorModel::from_json(&m.to_json().unwrap()).unwrap(), m);
    }
}
