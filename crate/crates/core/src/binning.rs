//! Partition builders for ECE/PDE: uniform-mass bins over sorted scores,
//! the leaves of a tree, and breadth-first sub-trees of a tree (BFSL).

use std::cmp::Ordering;

use crate::calibrators::{CalibratorModel, TreeModel};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::partition::Partition;
use crate::scalar::Scalar;

/// `b` bins of (almost) equal count over indices sorted by `(score, index)`.
/// The first `n mod b` bins hold one extra index.
pub fn uniform_mass<T: Scalar>(scores: &[T], b: usize) -> Result<Partition<T>> {
    let n = scores.len();
    if b == 0 || b > n {
        return Err(Error::Domain(format!("bin count must be in 1..={n}, got {b}")));
    }
    if scores.iter().any(|s| !s.is_finite_value()) {
        return Err(Error::Domain("scores must be finite".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        scores[i]
            .partial_cmp(&scores[j])
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    let (base, extra) = (n / b, n % b);
    let mut bins = Vec::with_capacity(b);
    let mut start = 0;
    for k in 0..b {
        let size = base + usize::from(k < extra);
        bins.push(order[start..start + size].to_vec());
        start += size;
    }
    Partition::from_bins(bins, n)
}

fn check_dim(tree: &TreeModel, data: &LabeledDataset) -> Result<()> {
    if !data.is_empty() && data.dim() != tree.dim {
        return Err(Error::DimensionMismatch { expected: tree.dim, got: data.dim() });
    }
    Ok(())
}

/// Groups rows by the first node in `regions` they reach; bins follow the
/// node order of `regions` and empty regions are dropped.
fn route(tree: &TreeModel, data: &LabeledDataset, regions: &[usize]) -> Result<Partition<f64>> {
    check_dim(tree, data)?;
    let mut member = vec![None; tree.nodes.len()];
    for (slot, &node) in regions.iter().enumerate() {
        member[node] = Some(slot);
    }
    let mut bins = vec![Vec::new(); regions.len()];
    for (i, x) in data.features().iter().enumerate() {
        let node = tree.descend(x, |id| member[id].is_some());
        let slot = member[node].ok_or_else(|| Error::Partition(format!("row {i} reached node {node} outside the regions")))?;
        bins[slot].push(i);
    }
    bins.retain(|b| !b.is_empty());
    Partition::from_bins(bins, data.len())
}

fn leaves(tree: &TreeModel) -> Vec<usize> {
    (0..tree.nodes.len()).filter(|&i| tree.nodes[i].split.is_none()).collect()
}

/// One bin per tree leaf reached by at least one row, in leaf-id order.
pub fn leaf_partition(model: &CalibratorModel, data: &LabeledDataset) -> Result<Partition<f64>> {
    let tree = model.as_tree()?;
    route(tree, data, &leaves(tree))
}

/// Regions of a BFSL partition.
#[derive(Clone, Debug, PartialEq)]
pub struct BfslPartition {
    pub partition: Partition<f64>,
    /// Tree nodes acting as regions (before empty ones are dropped).
    pub regions: Vec<usize>,
    /// Set when the tree has fewer than `b` leaves and the full leaf
    /// partition was used instead.
    pub fell_back: bool,
}

/// Expands the tree breadth-first, one whole layer at a time, until the
/// frontier holds at least `b` nodes; the frontier nodes are the regions.
pub fn bfsl(model: &CalibratorModel, data: &LabeledDataset, b: usize) -> Result<BfslPartition> {
    if b == 0 {
        return Err(Error::Domain("bin count must be at least 1".into()));
    }
    let tree = model.as_tree()?;
    if b > tree.n_leaves() {
        log::warn!("bfsl: {b} bins requested but the tree has {} leaves; using the leaves", tree.n_leaves());
        let regions = leaves(tree);
        return Ok(BfslPartition { partition: route(tree, data, &regions)?, regions, fell_back: true });
    }
    let mut frontier = vec![0];
    while frontier.len() < b {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for &id in &frontier {
            match &tree.nodes[id].split {
                Some(s) => next.extend([s.left, s.right]),
                None => next.push(id),
            }
        }
        // b <= n_leaves guarantees progress
        debug_assert!(next.len() > frontier.len());
        next.sort_unstable();
        frontier = next;
    }
    Ok(BfslPartition { partition: route(tree, data, &frontier)?, regions: frontier, fell_back: false })
}
