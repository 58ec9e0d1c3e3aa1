//! Dataset lookup: `<data_dir>/<name>.csv` first, then the bundled
//! synthetic datasets.
//!
//! Bundled datasets are drawn from fixed generator presets with a fixed seed,
//! so they are byte-identical on every machine and need no files on disk.

use std::fs::File;
use std::path::Path;

use calibkit::dataset::LabeledDataset;
use calibkit::seed::hash_str;
use calibkit::synthgen::{GeneratorSpec, SmoothSpec};

use crate::error::{CliError, Result};

pub const DEFAULT_BUNDLED_SIZE: usize = 3000;

pub struct Bundled {
    pub name: &'static str,
    pub description: &'static str,
    pub generator: fn() -> GeneratorSpec,
}

pub const BUNDLED: &[Bundled] = &[
    Bundled {
        name: "cells-20",
        description: "5x4 grid of constant-eta cells on the unit square",
        generator: || GeneratorSpec::Grid { cols: 5, rows: 4, eta_seed: 20 },
    },
    Bundled {
        name: "cells-9",
        description: "3x3 grid of constant-eta cells on the unit square",
        generator: || GeneratorSpec::Grid { cols: 3, rows: 3, eta_seed: 9 },
    },
    Bundled {
        name: "smooth-2d",
        description: "logistic of a random quadratic on [-1, 1]^2",
        generator: || GeneratorSpec::Smooth(SmoothSpec::new(2, 2)),
    },
    Bundled {
        name: "synthetic-5",
        description: "logistic of a random quadratic on [-1, 1]^5",
        generator: || GeneratorSpec::Synthetic5,
    },
];

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|b| b.name).collect()
}

/// Materializes a bundled dataset with `n` rows (the eta column is dropped).
pub fn bundled(name: &str, n: usize) -> Option<Result<LabeledDataset>> {
    let entry = BUNDLED.iter().find(|b| b.name == name)?;
    Some((|| {
        let generator = (entry.generator)().build(hash_str(name))?;
        Ok(generator.sample(n, 0)?.data)
    })())
}

/// Resolves a dataset by name.
pub fn load(
    name: &str,
    data_dir: Option<&Path>,
    label_column: &str,
    score_column: Option<&str>,
    bundled_size: Option<usize>,
) -> Result<LabeledDataset> {
    if let Some(dir) = data_dir {
        let path = dir.join(format!("{name}.csv"));
        if path.is_file() {
            log::info!("reading {}", path.display());
            let file = File::open(&path)?;
            return LabeledDataset::read_csv(file, label_column, score_column)
                .map_err(|source| CliError::Dataset { name: name.to_string(), source });
        }
    }
    bundled(name, bundled_size.unwrap_or(DEFAULT_BUNDLED_SIZE)).unwrap_or_else(|| Err(CliError::UnknownDataset(name.to_string())))
}

/// Config dataset list, with "empty" meaning every bundled dataset.
pub fn selection(configured: &[String]) -> Vec<String> {
    if configured.is_empty() {
        bundled_names().into_iter().map(String::from).collect()
    } else {
        configured.to_vec()
    }
}
