//! Regression tree on binary labels with weakest-link cost-complexity pruning.
//!
//! Splits minimize the summed squared error of the children around their
//! means; a leaf scores the mean training label routed to it. The pruning
//! parameter is picked by k-fold cross-validation on squared error.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Grow best-first until this many leaves.
    pub max_leaves: Option<usize>,
    pub cv_folds: usize,
    /// Candidate pruning strengths; defaults to the geometric midpoints of the
    /// weakest-link sequence.
    pub alpha_grid: Option<Vec<f64>>,
    /// Skip cross-validation and prune at this strength.
    #[serde(default, with = "extended_float::option")]
    pub fixed_alpha: Option<f64>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 1,
            max_leaves: None,
            cv_folds: 5,
            alpha_grid: None,
            fixed_alpha: None,
            seed: 0,
        }
    }
}

impl TreeParams {
    /// Fully grown tree, no pruning.
    pub fn unpruned() -> Self {
        Self { fixed_alpha: Some(0.0), ..Self::default() }
    }

    /// Unpruned growth with a leaf budget.
    pub fn with_leaf_budget(leaves: usize) -> Self {
        Self {
            max_leaves: Some(leaves),
            fixed_alpha: Some(0.0),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub depth: usize,
    /// Mean training label at the node.
    pub value: f64,
    pub count: usize,
    /// Squared error of the node's training labels around `value`.
    pub sse: f64,
    pub split: Option<Split>,
}

/// Rows with `x[feature] < threshold` go to `left`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub dim: usize,
    /// Node 0 is the root; nodes are numbered breadth-first.
    pub nodes: Vec<TreeNode>,
    /// Pruning strength the tree was cut at.
    #[serde(with = "extended_float")]
    pub alpha: f64,
    pub params: TreeParams,
}

impl TreeModel {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Follows the split rules from `from` until a node satisfying `stop`.
    pub(crate) fn descend(&self, x: &[f64], mut stop: impl FnMut(usize) -> bool) -> usize {
        let mut id = 0;
        while !stop(id) {
            match &self.nodes[id].split {
                Some(s) => id = if x[s.feature] < s.threshold { s.left } else { s.right },
                None => break,
            }
        }
        id
    }

    /// Id of the leaf `x` lands in.
    pub fn leaf_of(&self, x: &[f64]) -> Result<usize> {
        self.check_dim(x)?;
        Ok(self.descend(x, |_| false))
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.nodes[self.leaf_of(x)?].value)
    }

    pub fn predict_all(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        data.features().iter().map(|x| self.predict(x)).collect()
    }
}

struct Sample<'a> {
    x: &'a [Vec<f64>],
    y: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Pending {
    gain: f64,
    node: usize,
    rows: Vec<usize>,
    split: SplitCandidate,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    // Max-heap on gain; earlier nodes first on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

fn node_stats(y: &[f64], rows: &[usize]) -> (f64, f64) {
    let n = rows.len() as f64;
    let sum: f64 = rows.iter().map(|&i| y[i]).sum();
    let sum_sq: f64 = rows.iter().map(|&i| y[i] * y[i]).sum();
    let mean = sum / n;
    ((sum_sq - sum * sum / n).max(0.0), mean)
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a / 2.0 + b / 2.0;
    if m > a && m <= b {
        m
    } else {
        b
    }
}

/// Best split of `rows`; ties go to the lower feature index, then the lower threshold.
fn best_split(s: &Sample, rows: &[usize], sse: f64, min_leaf: usize) -> Option<SplitCandidate> {
    let n = rows.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let eps = 1e-12 * sse.max(1.0);
    let total: f64 = rows.iter().map(|&i| s.y[i]).sum();
    let total_sq: f64 = rows.iter().map(|&i| s.y[i] * s.y[i]).sum();
    let dim = s.x.first().map_or(0, Vec::len);
    let mut best: Option<(f64, SplitCandidate)> = None;
    let mut sorted = rows.to_vec();
    for feature in 0..dim {
        sorted.sort_by(|&a, &b| s.x[a][feature].total_cmp(&s.x[b][feature]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for k in 1..n {
            let prev = sorted[k - 1];
            left_sum += s.y[prev];
            left_sq += s.y[prev] * s.y[prev];
            let (lo, hi) = (s.x[prev][feature], s.x[sorted[k]][feature]);
            if k < min_leaf || n - k < min_leaf || lo >= hi {
                continue;
            }
            let (nl, nr) = (k as f64, (n - k) as f64);
            let right_sum = total - left_sum;
            let right_sq = total_sq - left_sq;
            let impurity = (left_sq - left_sum * left_sum / nl).max(0.0)
                + (right_sq - right_sum * right_sum / nr).max(0.0);
            if best.as_ref().is_none_or(|(b, _)| impurity < *b - eps) {
                best = Some((
                    impurity,
                    SplitCandidate { gain: sse - impurity, feature, threshold: midpoint(lo, hi) },
                ));
            }
        }
    }
    best.map(|(_, c)| c).filter(|c| c.gain > eps)
}

/// Grows a tree on `rows` of the sample, best-first under the leaf budget.
fn grow(s: &Sample, rows: Vec<usize>, params: &TreeParams) -> Vec<TreeNode> {
    let (sse, value) = node_stats(&s.y, &rows);
    let mut nodes = vec![TreeNode { depth: 0, value, count: rows.len(), sse, split: None }];
    let mut heap = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<Pending>, nodes: &[TreeNode], node: usize, rows: Vec<usize>| {
        let n = &nodes[node];
        if params.max_depth.is_some_and(|d| n.depth >= d) {
            return;
        }
        if let Some(split) = best_split(s, &rows, n.sse, params.min_leaf) {
            heap.push(Pending { gain: split.gain, node, rows, split });
        }
    };
    push(&mut heap, &nodes, 0, rows);
    let mut leaves = 1;
    while let Some(p) = heap.pop() {
        if params.max_leaves.is_some_and(|m| leaves >= m) {
            break;
        }
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = p
            .rows
            .iter()
            .partition(|&&i| s.x[i][p.split.feature] < p.split.threshold);
        let depth = nodes[p.node].depth + 1;
        let mut child = |rows: &Vec<usize>| {
            let (sse, value) = node_stats(&s.y, rows);
            nodes.push(TreeNode { depth, value, count: rows.len(), sse, split: None });
            nodes.len() - 1
        };
        let left = child(&left_rows);
        let right = child(&right_rows);
        nodes[p.node].split = Some(Split {
            feature: p.split.feature,
            threshold: p.split.threshold,
            left,
            right,
        });
        leaves += 1;
        push(&mut heap, &nodes, left, left_rows);
        push(&mut heap, &nodes, right, right_rows);
    }
    nodes
}

/// Keeps only nodes reachable from the root and renumbers them breadth-first.
fn compact(nodes: &[TreeNode], keep_split: impl Fn(usize) -> bool) -> Vec<TreeNode> {
    let mut out: Vec<TreeNode> = Vec::new();
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(old) = queue.pop_front() {
        let mut node = nodes[old].clone();
        if !keep_split(old) {
            node.split = None;
        }
        if let Some(s) = &node.split {
            queue.push_back(s.left);
            queue.push_back(s.right);
        }
        out.push(node);
    }
    // Breadth-first order places each split's children next to each other.
    let mut next = 1;
    for node in out.iter_mut() {
        if let Some(s) = node.split.as_mut() {
            s.left = next;
            s.right = next + 1;
            next += 2;
        }
    }
    out
}

/// Post-order traversal of the subtree under `root` that respects `collapsed`.
fn post_order(nodes: &[TreeNode], collapsed: &[bool]) -> Vec<usize> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut stack = vec![(0usize, false)];
    while let Some((id, expanded)) = stack.pop() {
        match (&nodes[id].split, collapsed[id], expanded) {
            (Some(s), false, false) => {
                stack.push((id, true));
                stack.push((s.right, false));
                stack.push((s.left, false));
            }
            _ => out.push(id),
        }
    }
    out
}

/// Marks internal nodes to collapse for the smallest subtree minimizing
/// `risk + alpha * leaves`, where risk is squared error over `total`.
fn prune_mask(nodes: &[TreeNode], alpha: f64, total: f64) -> Vec<bool> {
    let mut collapsed = vec![false; nodes.len()];
    let mut cost = vec![0.0; nodes.len()];
    for id in post_order(nodes, &collapsed) {
        let as_leaf = nodes[id].sse / total + alpha;
        cost[id] = match &nodes[id].split {
            None => as_leaf,
            Some(s) => {
                let subtree = cost[s.left] + cost[s.right];
                if as_leaf <= subtree + 1e-12 * subtree.abs().max(1e-300) {
                    collapsed[id] = true;
                    as_leaf
                } else {
                    subtree
                }
            }
        };
    }
    collapsed
}

fn prune(nodes: &[TreeNode], alpha: f64) -> Vec<TreeNode> {
    let total = nodes[0].count as f64;
    let collapsed = prune_mask(nodes, alpha, total);
    compact(nodes, |id| !collapsed[id])
}

/// Weakest-link pruning sequence: the strengths at which successive subtrees
/// become optimal, starting at 0 and ending when only the root remains.
pub fn alpha_path(nodes: &[TreeNode]) -> Vec<f64> {
    let total = nodes[0].count as f64;
    let mut collapsed = vec![false; nodes.len()];
    let mut path = vec![0.0];
    loop {
        let order = post_order(nodes, &collapsed);
        let mut risk = vec![0.0; nodes.len()];
        let mut leaves = vec![0usize; nodes.len()];
        let mut links: Vec<(usize, f64)> = Vec::new();
        for &id in &order {
            match (&nodes[id].split, collapsed[id]) {
                (Some(s), false) => {
                    risk[id] = risk[s.left] + risk[s.right];
                    leaves[id] = leaves[s.left] + leaves[s.right];
                    let g = (nodes[id].sse / total - risk[id]) / (leaves[id] - 1) as f64;
                    links.push((id, g.max(0.0)));
                }
                _ => {
                    risk[id] = nodes[id].sse / total;
                    leaves[id] = 1;
                }
            }
        }
        let Some(weakest) = links.iter().map(|l| l.1).min_by(f64::total_cmp) else {
            break;
        };
        let tol = 1e-12 * weakest.max(1e-300);
        for &(id, g) in &links {
            if g <= weakest + tol {
                collapsed[id] = true;
            }
        }
        if weakest > *path.last().unwrap() {
            path.push(weakest);
        }
    }
    path
}

fn cv_candidates(path: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = path
        .windows(2)
        .map(|w| (w[0] * w[1]).sqrt())
        .collect();
    out.push(*path.last().unwrap());
    out
}

fn fit_nodes(data: &LabeledDataset, rows: Vec<usize>, params: &TreeParams) -> Vec<TreeNode> {
    let s = Sample {
        x: data.features(),
        y: data.labels().iter().map(|&v| v as f64).collect(),
    };
    grow(&s, rows, params)
}

fn sse_on(nodes: &[TreeNode], data: &LabeledDataset, rows: &[usize]) -> f64 {
    let model = TreeModel { dim: data.dim(), nodes: nodes.to_vec(), alpha: 0.0, params: TreeParams::default() };
    rows.iter()
        .map(|&i| {
            let p = model.nodes[model.descend(data.row(i), |_| false)].value;
            (p - data.labels()[i] as f64).powi(2)
        })
        .sum()
}

/// Selects the pruning strength by k-fold cross-validation. Ties in CV
/// error go to the stronger pruning.
pub fn cross_validate_alpha(data: &LabeledDataset, full: &[TreeNode], params: &TreeParams) -> f64 {
    let candidates = params
        .alpha_grid
        .clone()
        .unwrap_or_else(|| cv_candidates(&alpha_path(full)));
    let k = params.cv_folds.max(2).min(data.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let mut errors = vec![0.0; candidates.len()];
    for fold in 0..k {
        let held: Vec<usize> = order.iter().enumerate().filter(|(p, _)| p % k == fold).map(|(_, &i)| i).collect();
        let train: Vec<usize> = order.iter().enumerate().filter(|(p, _)| p % k != fold).map(|(_, &i)| i).collect();
        if train.is_empty() {
            continue;
        }
        let nodes = fit_nodes(data, train, params);
        for (c, &alpha) in candidates.iter().enumerate() {
            errors[c] += sse_on(&prune(&nodes, alpha), data, &held);
        }
    }
    let mut best = 0;
    for c in 1..candidates.len() {
        let tol = 1e-12 * errors[best].abs().max(1.0);
        if errors[c] < errors[best] - tol
            || (errors[c] <= errors[best] + tol && candidates[c] > candidates[best])
        {
            best = c;
        }
    }
    candidates[best]
}

/// Grows a tree on all rows, chooses the pruning strength (fixed or by
/// cross-validation) and prunes the full tree at it.
pub fn fit_tree(data: &LabeledDataset, params: &TreeParams) -> Result<TreeModel> {
    if params.min_leaf == 0 {
        return Err(Error::Domain("min_leaf must be at least 1".into()));
    }
    if data.len() < 2 * params.min_leaf {
        return Err(Error::Domain(format!(
            "{} rows cannot fill two leaves of {} rows",
            data.len(),
            params.min_leaf
        )));
    }
    let full = fit_nodes(data, (0..data.len()).collect(), params);
    let alpha = match params.fixed_alpha {
        Some(a) => a,
        None => cross_validate_alpha(data, &full, params),
    };
    Ok(TreeModel {
        dim: data.dim(),
        nodes: prune(&full, alpha),
        alpha,
        params: params.clone(),
    })
}

/// JSON has no infinities; write them as strings.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v).serialize(s)
        } else {
            Repr::Text(v.to_string()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Option::<Repr>::deserialize(d)?
                .map(|r| match r {
                    Repr::Num(v) => Ok(v),
                    Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
                })
                .transpose()
        }
    }
}
