//! Synthetic labelled data with a known regression function.
//!
//! Every draw is a pure function of `(generator seed, stream, index)`, so
//! batches can be generated in parallel and re-generated exactly.

use std::io::Write;

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::distribution::{DiscreteDistribution, Point};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// A labelled sample together with the true eta of every row.
#[derive(Clone, Debug)]
pub struct Sample {
    pub data: LabeledDataset,
    pub eta: Vec<f64>,
}

impl Sample {
    /// Writes the standard dataset CSV with an extra `eta` column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.data.write_csv(out, Some(("eta", &self.eta)))
    }
}

pub trait Generator: Send + Sync {
    fn dim(&self) -> usize;

    /// Draws row `index` of stream `stream`: features and a 0/1 label.
    fn draw(&self, stream: u64, index: u64) -> (Vec<f64>, u8);

    /// True `P[y = 1 | x]`, when the generator knows it.
    fn eta(&self, _x: &[f64]) -> Result<f64> {
        Err(Error::NoEtaOracle)
    }

    fn sample(&self, n: usize, stream: u64) -> Result<Sample> {
        let (features, labels): (Vec<_>, Vec<_>) = (0..n as u64).map(|i| self.draw(stream, i)).unzip();
        let eta = features.iter().map(|x| self.eta(x)).collect::<Result<_>>()?;
        Ok(Sample { data: LabeledDataset::new(features, labels)?, eta })
    }
}

fn draw_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[stream, index]))
}

/// An axis-aligned box `[lower, upper)` with constant eta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub eta: f64,
    pub weight: f64,
}

impl CellBox {
    fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lower).zip(&self.upper).all(|((v, lo), hi)| lo <= v && v < hi)
    }

    fn overlaps(&self, other: &CellBox) -> bool {
        (0..self.lower.len()).all(|k| self.lower[k].max(other.lower[k]) < self.upper[k].min(other.upper[k]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub dim: usize,
    pub cells: Vec<CellBox>,
}

impl CellSpec {
    /// `cols x rows` equal cells tiling the unit square, each with weight
    /// `1 / (cols * rows)` and an eta drawn uniformly from `[0, 1)` with
    /// `eta_seed`.
    pub fn grid(cols: usize, rows: usize, eta_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(eta_seed);
        let w = 1.0 / (cols * rows) as f64;
        let mut cells = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            for c in 0..cols {
                cells.push(CellBox {
                    lower: vec![c as f64 / cols as f64, r as f64 / rows as f64],
                    upper: vec![(c + 1) as f64 / cols as f64, (r + 1) as f64 / rows as f64],
                    eta: rng.gen(),
                    weight: w,
                });
            }
        }
        Self { dim: 2, cells }
    }
}

/// Piecewise-constant eta over disjoint boxes, uniform within each box.
#[derive(Clone, Debug)]
pub struct CellGenerator {
    spec: CellSpec,
    pick: WeightedIndex<f64>,
    seed: u64,
}

pub fn make_cell_generator(spec: CellSpec, seed: u64) -> Result<CellGenerator> {
    if spec.cells.is_empty() {
        return Err(Error::Generator("no cells".into()));
    }
    for (k, c) in spec.cells.iter().enumerate() {
        if c.lower.len() != spec.dim || c.upper.len() != spec.dim {
            return Err(Error::Generator(format!("cell {k} does not have dimension {}", spec.dim)));
        }
        if c.lower.iter().zip(&c.upper).any(|(lo, hi)| lo >= hi || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::Generator(format!("cell {k} has an empty or unbounded box")));
        }
        if !(0.0..=1.0).contains(&c.eta) {
            return Err(Error::Generator(format!("cell {k} eta {} outside [0, 1]", c.eta)));
        }
        if c.weight.is_nan() || c.weight < 0.0 {
            return Err(Error::Generator(format!("cell {k} weight {} is negative", c.weight)));
        }
    }
    let total: f64 = spec.cells.iter().map(|c| c.weight).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Generator(format!("weights sum to {total}, not 1")));
    }
    for i in 0..spec.cells.len() {
        for j in i + 1..spec.cells.len() {
            if spec.cells[i].overlaps(&spec.cells[j]) {
                return Err(Error::Generator(format!("cells {i} and {j} overlap")));
            }
        }
    }
    let pick = WeightedIndex::new(spec.cells.iter().map(|c| c.weight))
        .map_err(|e| Error::Generator(e.to_string()))?;
    Ok(CellGenerator { spec, pick, seed })
}

impl CellGenerator {
    pub fn spec(&self) -> &CellSpec {
        &self.spec
    }

    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        self.spec.cells.iter().position(|c| c.contains(x))
    }

    /// The generator viewed as a discrete distribution over its cells
    /// (zero-weight cells dropped).
    pub fn cell_distribution(&self) -> Result<DiscreteDistribution<f64>> {
        DiscreteDistribution::new(
            self.spec
                .cells
                .iter()
                .enumerate()
                .filter(|(_, c)| c.weight > 0.0)
                .map(|(k, c)| Point { id: format!("cell{k}"), weight: c.weight, eta: c.eta })
                .collect(),
        )
    }
}

impl Generator for CellGenerator {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn draw(&self, stream: u64, index: u64) -> (Vec<f64>, u8) {
        let mut rng = draw_rng(self.seed, stream, index);
        let cell = &self.spec.cells[self.pick.sample(&mut rng)];
        let x = cell.lower.iter().zip(&cell.upper).map(|(&lo, &hi)| rng.gen_range(lo..hi)).collect();
        let y = rng.gen_bool(cell.eta) as u8;
        (x, y)
    }

    fn eta(&self, x: &[f64]) -> Result<f64> {
        self.cell_of(x)
            .map(|k| self.spec.cells[k].eta)
            .ok_or_else(|| Error::Domain(format!("{x:?} lies in no cell")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothSpec {
    pub dim: usize,
    #[serde(default = "SmoothSpec::default_degree")]
    pub degree: u32,
    #[serde(default)]
    pub coefficient_seed: u64,
    /// Coefficients are drawn uniformly from `[-scale, scale]`.
    #[serde(default = "SmoothSpec::default_scale")]
    pub scale: f64,
    /// Explicit coefficients in monomial order; overrides the seeded draw.
    #[serde(default)]
    pub coefficients: Option<Vec<f64>>,
}

impl SmoothSpec {
    fn default_degree() -> u32 {
        2
    }

    fn default_scale() -> f64 {
        2.0
    }

    pub fn new(dim: usize, coefficient_seed: u64) -> Self {
        Self {
            dim,
            degree: Self::default_degree(),
            coefficient_seed,
            scale: Self::default_scale(),
            coefficients: None,
        }
    }

    /// Five-dimensional quadratic preset.
    pub fn synthetic5() -> Self {
        Self::new(5, 5)
    }
}

/// Exponent vectors of total degree `<= degree`, graded then lexicographic
/// (descending in the first coordinate).
pub fn monomials(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, dim: usize, left: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(prefix, dim, left - e, out);
            prefix.pop();
        }
    }
    let mut all = Vec::new();
    for total in 0..=degree {
        rec(&mut Vec::new(), dim, total, &mut all);
    }
    all
}

/// `eta(x) = logistic(poly(x))` with `x` uniform on `[-1, 1]^d`.
#[derive(Clone, Debug)]
pub struct SmoothGenerator {
    dim: usize,
    terms: Vec<(Vec<u32>, f64)>,
    seed: u64,
}

pub fn make_smooth_generator(spec: SmoothSpec, seed: u64) -> Result<SmoothGenerator> {
    if spec.dim == 0 {
        return Err(Error::Generator("dimension must be positive".into()));
    }
    let monos = monomials(spec.dim, spec.degree);
    let coefs = match spec.coefficients {
        Some(c) if c.len() != monos.len() => {
            return Err(Error::Generator(format!("expected {} coefficients, got {}", monos.len(), c.len())))
        }
        Some(c) => c,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.coefficient_seed);
            monos.iter().map(|_| rng.gen_range(-spec.scale..=spec.scale)).collect()
        }
    };
    Ok(SmoothGenerator { dim: spec.dim, terms: monos.into_iter().zip(coefs).collect(), seed })
}

impl SmoothGenerator {
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| c * m.iter().zip(x).map(|(&e, v)| v.powi(e as i32)).product::<f64>())
            .sum()
    }
}

impl Generator for SmoothGenerator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn draw(&self, stream: u64, index: u64) -> (Vec<f64>, u8) {
        let mut rng = draw_rng(self.seed, stream, index);
        let x: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eta = 1.0 / (1.0 + (-self.logit(&x)).exp());
        let y = rng.gen_bool(eta) as u8;
        (x, y)
    }

    fn eta(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(1.0 / (1.0 + (-self.logit(x)).exp()))
    }
}

/// Generator families as they appear in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Cells(CellSpec),
    Grid { cols: usize, rows: usize, eta_seed: u64 },
    Smooth(SmoothSpec),
    Synthetic5,
}

impl GeneratorSpec {
    pub fn build(&self, seed: u64) -> Result<Box<dyn Generator>> {
        Ok(match self {
            Self::Cells(spec) => Box::new(make_cell_generator(spec.clone(), seed)?),
            Self::Grid { cols, rows, eta_seed } => {
                if cols * rows == 0 {
                    return Err(Error::Generator("grid needs at least one cell".into()));
                }
                Box::new(make_cell_generator(CellSpec::grid(*cols, *rows, *eta_seed), seed)?)
            }
            Self::Smooth(spec) => Box::new(make_smooth_generator(spec.clone(), seed)?),
            Self::Synthetic5 => Box::new(make_smooth_generator(SmoothSpec::synthetic5(), seed)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::bayes_loss;

    fn two_cells(etas: (f64, f64)) -> CellSpec {
        CellSpec {
            dim: 1,
            cells: vec![
                CellBox { lower: vec![0.0], upper: vec![0.5], eta: etas.0, weight: 0.5 },
                CellBox { lower: vec![0.5], upper: vec![1.0], eta: etas.1, weight: 0.5 },
            ],
        }
    }

    #[test]
    fn bayes_loss_of_cell_distribution() {
        let g = make_cell_generator(two_cells((0.0, 1.0)), 1).unwrap();
        assert_eq!(bayes_loss(&g.cell_distribution().unwrap()), 0.0);
        let g = make_cell_generator(two_cells((0.5, 0.5)), 1).unwrap();
        assert_eq!(bayes_loss(&g.cell_distribution().unwrap()), 0.5);
    }

    #[test]
    fn invalid_cell_specs() {
        let mut s = two_cells((0.2, 0.8));
        s.cells[1].lower = vec![0.4];
        assert!(matches!(make_cell_generator(s, 0), Err(Error::Generator(_))));
        let mut s = two_cells((0.2, 1.2));
        assert!(make_cell_generator(s.clone(), 0).is_err());
        s.cells[1].eta = 0.8;
        s.cells[1].weight = 0.6;
        assert!(make_cell_generator(s, 0).is_err());
    }

    #[test]
    fn cell_label_frequencies_match_eta() {
        let g = make_cell_generator(CellSpec::grid(5, 4, 3), 11).unwrap();
        let s = g.sample(10_000, 0).unwrap();
        let mut pos = [0.0; 20];
        let mut cnt = [0.0; 20];
        for (x, &y) in s.data.features().iter().zip(s.data.labels()) {
            let k = g.cell_of(x).unwrap();
            pos[k] += y as f64;
            cnt[k] += 1.0;
        }
        for k in 0..20 {
            let eta = g.spec().cells[k].eta;
            let sd = (eta * (1.0 - eta) / cnt[k]).sqrt();
            assert!((pos[k] / cnt[k] - eta).abs() <= 3.0 * sd + 1e-12, "cell {k}");
        }
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let g = make_smooth_generator(SmoothSpec::new(3, 4), 9).unwrap();
        let a = g.sample(50, 1).unwrap();
        assert_eq!(a.data, g.sample(50, 1).unwrap().data);
        assert_ne!(a.data, g.sample(50, 2).unwrap().data);
        // prefix property: row i does not depend on n
        assert_eq!(a.data.row(7), g.sample(8, 1).unwrap().data.row(7));
    }

    #[test]
    fn zero_polynomial_is_a_fair_coin() {
        let n = monomials(2, 2).len();
        assert_eq!(n, 6);
        let spec = SmoothSpec { coefficients: Some(vec![0.0; n]), ..SmoothSpec::new(2, 0) };
        let g = make_smooth_generator(spec, 0).unwrap();
        assert_eq!(g.eta(&[0.3, -0.9]).unwrap(), 0.5);
    }

    #[test]
    fn smooth_label_mean_matches_mean_eta() {
        let g = GeneratorSpec::Synthetic5.build(2).unwrap();
        let s = g.sample(10_000, 0).unwrap();
        assert!(s.eta.iter().all(|&e| 0.0 < e && e < 1.0));
        let n = s.eta.len() as f64;
        let var: f64 = s.eta.iter().map(|e| e * (1.0 - e)).sum::<f64>() / n;
        let diff = s.data.positive_rate() - s.eta.iter().sum::<f64>() / n;
        assert!(diff.abs() <= 3.0 * (var / n).sqrt());
    }

    #[test]
    fn csv_export_has_eta_column() {
        let g = make_cell_generator(two_cells((0.1, 0.9)), 0).unwrap();
        let mut buf = Vec::new();
        g.sample(3, 0).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().next().unwrap().ends_with(",eta"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = GeneratorSpec::Grid { cols: 5, rows: 4, eta_seed: 1 };
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<GeneratorSpec>(&text).unwrap(), spec);
    }
}
