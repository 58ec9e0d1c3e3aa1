//! Calibration methods: regression tree, isotonic regression, Platt scaling,
//! and the base scorers the last two post-process.

pub mod base;
pub mod isotonic;
pub mod platt;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use base::{fit_base_scorer, BaseScorer, LogisticParams};
pub use isotonic::{fit_isotonic, fit_isotonic_with_fit, IsotonicModel};
pub use platt::{fit_platt, fit_platt_traced, PlattFit, PlattModel, PlattObjective, PlattParams};
pub use tree::{alpha_path, cross_validate_alpha, fit_tree, Split, TreeModel, TreeNode, TreeParams};

/// A fitted calibrator, serializable as tagged JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CalibratorModel {
    Tree(TreeModel),
    Isotonic(IsotonicModel),
    Platt(PlattModel),
}

/// What a calibrator consumes: raw features for trees, a base score otherwise.
#[derive(Clone, Copy, Debug)]
pub enum Input<'a> {
    Features(&'a [f64]),
    Score(f64),
}

impl CalibratorModel {
    pub fn predict(&self, input: Input<'_>) -> Result<f64> {
        match (self, input) {
            (CalibratorModel::Tree(t), Input::Features(x)) => t.predict(x),
            (CalibratorModel::Isotonic(m), Input::Score(s)) => Ok(m.predict(s)),
            (CalibratorModel::Platt(m), Input::Score(s)) => Ok(m.predict(s)),
            (CalibratorModel::Tree(_), Input::Score(_)) => {
                Err(Error::ModelVariant("tree models take feature vectors".into()))
            }
            (_, Input::Features(_)) => Err(Error::ModelVariant("score calibrators take a base score".into())),
        }
    }

    pub fn as_tree(&self) -> Result<&TreeModel> {
        match self {
            CalibratorModel::Tree(t) => Ok(t),
            _ => Err(Error::ModelVariant("expected a tree model".into())),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledDataset;

    #[test]
    fn predict_dispatches_on_variant() {
        let platt = CalibratorModel::Platt(PlattModel { a: -1.0, b: 0.0, degenerate: false });
        assert_eq!(platt.predict(Input::Score(0.0)).unwrap(), 0.5);
        assert!(platt.predict(Input::Features(&[0.0])).is_err());

        let data = LabeledDataset::new(vec![vec![0.0], vec![1.0]], vec![1, 1]).unwrap();
        let tree = CalibratorModel::Tree(fit_tree(&data, &TreeParams::default()).unwrap());
        assert_eq!(tree.predict(Input::Features(&[5.0])).unwrap(), 1.0);
        assert!(tree.predict(Input::Score(0.1)).is_err());
        assert!(tree.predict(Input::Features(&[1.0, 2.0])).is_err());
        assert!(platt.as_tree().is_err());
    }

    #[test]
    fn models_round_trip_through_json() {
        let iso = CalibratorModel::Isotonic(fit_isotonic(&[0.1, 0.5, 0.9], &[0, 1, 1]).unwrap());
        let text = iso.to_json().unwrap();
        assert!(text.contains("\"variant\": \"isotonic\""));
        assert_eq!(CalibratorModel::from_json(&text).unwrap(), iso);

        let data = LabeledDataset::new((0..10).map(|i| vec![i as f64]).collect(), (0..10).map(|i| (i > 4) as u8).collect()).unwrap();
        let tree = CalibratorModel::Tree(fit_tree(&data, &TreeParams::default()).unwrap());
        let back = CalibratorModel::from_json(&tree.to_json().unwrap()).unwrap();
        assert_eq!(back, tree);
        for x in [-1.0, 4.4, 4.6, 20.0] {
            assert_eq!(back.predict(Input::Features(&[x])).unwrap(), tree.predict(Input::Features(&[x])).unwrap());
        }
    }
}
