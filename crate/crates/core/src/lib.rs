//! Calibration toolkit: exact population measures on finite distributions,
//! predictor transforms, empirical calibration metrics, and the calibration
//! methods they are used to compare.
//!
//! The population engine and the sample metrics are generic over the scalar
//! type; the aliases below fix the common choices.

pub mod bias;
pub mod binning;
pub mod calibrators;
pub mod dataset;
pub mod distribution;
pub mod empirical;
pub mod error;
pub mod partition;
pub mod population;
pub mod scalar;
pub mod seed;
pub mod synthgen;
pub mod transforms;

pub use distribution::{cells, effective_range, Cells, DiscreteDistribution, Point, ScoreTable};
pub use error::{Error, Result};
pub use partition::Partition;
pub use scalar::{Real, Scalar};

/// Exact rational scalar for cross-checking floating-point results.
pub type Rational = num_rational::BigRational;

pub type Distribution = DiscreteDistribution<f64>;
pub type Scores = ScoreTable<f64>;
pub type ExactDistribution = DiscreteDistribution<Rational>;
pub type ExactScores = ScoreTable<Rational>;
