use std::io::Write;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Disjoint bins covering `0..n`, each with its share of the total mass.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition<T = f64> {
    bins: Vec<Vec<usize>>,
    weights: Vec<T>,
}

impl<T: Scalar> Partition<T> {
    /// Count-weighted partition of `0..n`; every bin must be nonempty.
    pub fn from_bins(bins: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for (b, bin) in bins.iter().enumerate() {
            if bin.is_empty() {
                return Err(Error::Partition(format!("bin {b} is empty")));
            }
            for &i in bin {
                match seen.get_mut(i) {
                    None => return Err(Error::Partition(format!("index {i} out of range 0..{n}"))),
                    Some(true) => return Err(Error::Partition(format!("index {i} in two bins"))),
                    Some(s) => *s = true,
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Partition(format!("index {i} not covered")));
        }
        let total = T::from_usize(n).ok_or(Error::EmptyInput)?;
        let weights = bins
            .iter()
            .map(|b| T::from_usize(b.len()).unwrap() / total.clone())
            .collect();
        Ok(Self { bins, weights })
    }

    /// Builds a partition from a bin id per index. Bin ids are compacted in
    /// order of first appearance.
    pub fn from_assignment(assignment: &[usize]) -> Result<Self> {
        let mut remap = std::collections::HashMap::new();
        let mut bins: Vec<Vec<usize>> = Vec::new();
        for (i, &b) in assignment.iter().enumerate() {
            let slot = *remap.entry(b).or_insert_with(|| {
                bins.push(Vec::new());
                bins.len() - 1
            });
            bins[slot].push(i);
        }
        Self::from_bins(bins, assignment.len())
    }

    pub(crate) fn from_parts_unchecked(bins: Vec<Vec<usize>>, weights: Vec<T>) -> Self {
        debug_assert_eq!(bins.len(), weights.len());
        Self { bins, weights }
    }

    pub fn bins(&self) -> &[Vec<usize>] {
        &self.bins
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn n_indices(&self) -> usize {
        self.bins.iter().map(Vec::len).sum()
    }

    /// Bin id for every index.
    pub fn assignment(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_indices()];
        for (b, bin) in self.bins.iter().enumerate() {
            for &i in bin {
                out[i] = b;
            }
        }
        out
    }

    /// `index,bin_id` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "bin_id"])?;
        for (i, b) in self.assignment().into_iter().enumerate() {
            w.write_record([i.to_string(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut rows: Vec<(usize, usize)> = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<usize> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Partition(format!("bad row {:?}", rec)))
            };
            rows.push((parse(0)?, parse(1)?));
        }
        rows.sort_unstable();
        let mut assignment = Vec::with_capacity(rows.len());
        for (expected, (i, b)) in rows.into_iter().enumerate() {
            if i != expected {
                return Err(Error::Partition(format!("index {expected} missing")));
            }
            assignment.push(b);
        }
        Self::from_assignment(&assignment)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_fractions() {
        let p = Partition::<f64>::from_bins(vec![vec![0, 2], vec![1]], 3).unwrap();
        assert_eq!(p.weights(), &[2.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(p.assignment(), vec![0, 1, 0]);
    }

    #[test]
    fn rejects_overlap_gaps_and_empty_bins() {
        assert!(Partition::<f64>::from_bins(vec![vec![0, 1], vec![1]], 2).is_err());
        assert!(Partition::<f64>::from_bins(vec![vec![0]], 2).is_err());
        assert!(Partition::<f64>::from_bins(vec![vec![0, 1], vec![]], 2).is_err());
        assert!(Partition::<f64>::from_bins(vec![vec![0, 5]], 2).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = Partition::<f64>::from_bins(vec![vec![0, 3], vec![1, 2]], 4).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("index,bin_id\n0,0\n1,1"));
        assert_eq!(Partition::read_csv(buf.as_slice()).unwrap(), p);
    }
}
