//! Random-forest regression surrogate and tree-guided subregion extraction.
//!
//! Trees are CART-style regressors grown on bootstrap resamples; each split
//! maximizes the reduction of the sum of squared errors over a random subset
//! of dimensions, with thresholds at midpoints between sorted distinct values.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::space::AxisBox;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Dimensions considered per split; `None` means `⌈5d/6⌉`.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    /// Resample with replacement; otherwise every tree sees all observations.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 10, max_features: None, min_samples_leaf: 3, bootstrap: true }
    }
}

impl ForestConfig {
    pub fn features_for(&self, dim: usize) -> usize {
        self.max_features.unwrap_or((5 * dim).div_ceil(6)).clamp(1, dim)
    }
}

/// Node of a regression tree. Splits send `x_j < threshold` left and `x_j ≥ threshold` right.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf { samples: Vec<usize>, value: f64 },
    Split { dim: usize, threshold: f64, left: usize, right: usize, samples: Vec<usize> },
}

impl TreeNode {
    pub fn leaf(value: f64) -> Self {
        TreeNode::Leaf { samples: Vec::new(), value }
    }

    pub fn split(dim: usize, threshold: f64, left: usize, right: usize) -> Self {
        TreeNode::Split { dim, threshold, left, right, samples: Vec::new() }
    }

    pub fn samples(&self) -> &[usize] {
        match self {
            TreeNode::Leaf { samples, .. } | TreeNode::Split { samples, .. } => samples,
        }
    }
}

/// Arena-allocated binary tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
}

impl RegressionTree {
    /// Builds a tree from explicit nodes, checking child links.
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Config("tree needs at least one node"));
        }
        for (i, n) in nodes.iter().enumerate() {
            if let TreeNode::Split { left, right, .. } = n {
                if *left <= i || *right <= i || *left >= nodes.len() || *right >= nodes.len() {
                    return Err(Error::Config("split children must point forward inside the arena"));
                }
            }
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { .. } => return i,
                TreeNode::Split { dim, threshold, left, right, .. } => {
                    i = if x[*dim] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::Split { .. } => unreachable!(),
        }
    }

    fn grow(
        points: &[Vec<f64>],
        costs: &[f64],
        samples: Vec<usize>,
        config: &ForestConfig,
        rng: &mut RngState,
    ) -> Self {
        let dim = points[0].len();
        let n_features = config.features_for(dim);
        let min_leaf = config.min_samples_leaf.max(1);
        let mut nodes: Vec<TreeNode> = Vec::new();
        nodes.push(TreeNode::Leaf { samples, value: 0.0 });
        let mut stack = alloc::vec![0usize];
        let mut order: Vec<usize> = (0..dim).collect();
        let mut column: Vec<(f64, f64)> = Vec::new();

        while let Some(id) = stack.pop() {
            let samples = match &mut nodes[id] {
                TreeNode::Leaf { samples, .. } => core::mem::take(samples),
                TreeNode::Split { .. } => unreachable!(),
            };
            let n = samples.len() as f64;
            let sum: f64 = samples.iter().map(|&i| costs[i]).sum();
            let sumsq: f64 = samples.iter().map(|&i| costs[i] * costs[i]).sum();
            let mean = sum / n;
            let sse = sumsq - sum * sum / n;
            let tol = 1e-12 * (1.0 + sumsq);

            let mut best: Option<(f64, usize, f64)> = None;
            if samples.len() >= 2 * min_leaf && sse > tol {
                // partial Fisher-Yates: first n_features entries are the candidates
                for k in 0..n_features {
                    let r = k + rng.below(dim - k);
                    order.swap(k, r);
                }
                for &j in &order[..n_features] {
                    column.clear();
                    column.extend(samples.iter().map(|&i| (points[i][j], costs[i])));
                    column.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let (mut ls, mut lsq) = (0.0, 0.0);
                    for k in 0..column.len() - 1 {
                        ls += column[k].1;
                        lsq += column[k].1 * column[k].1;
                        let nl = (k + 1) as f64;
                        if k + 1 < min_leaf || column.len() - k - 1 < min_leaf {
                            continue;
                        }
                        if column[k].0 == column[k + 1].0 {
                            continue;
                        }
                        let nr = n - nl;
                        let (rs, rsq) = (sum - ls, sumsq - lsq);
                        let child_sse = (lsq - ls * ls / nl) + (rsq - rs * rs / nr);
                        let gain = sse - child_sse;
                        if gain > tol && best.is_none_or(|b| gain > b.0) {
                            let mut t = 0.5 * (column[k].0 + column[k + 1].0);
                            if t <= column[k].0 {
                                t = column[k + 1].0;
                            }
                            best = Some((gain, j, t));
                        }
                    }
                }
            }

            match best {
                None => nodes[id] = TreeNode::Leaf { samples, value: mean },
                Some((_, dim_j, threshold)) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| points[i][dim_j] < threshold);
                    let left = nodes.len();
                    nodes.push(TreeNode::Leaf { samples: l, value: 0.0 });
                    let right = nodes.len();
                    nodes.push(TreeNode::Leaf { samples: r, value: 0.0 });
                    nodes[id] = TreeNode::Split { dim: dim_j, threshold, left, right, samples };
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        Self { nodes }
    }
}

/// Ensemble of regression trees.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<RegressionTree>,
    bootstraps: Vec<Vec<usize>>,
    config: ForestConfig,
}

impl RandomForest {
    pub fn from_trees(trees: Vec<RegressionTree>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Config("forest needs at least one tree"));
        }
        let n = trees.len();
        Ok(Self {
            trees,
            bootstraps: alloc::vec![Vec::new(); n],
            config: ForestConfig { n_trees: n, ..ForestConfig::default() },
        })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn bootstraps(&self) -> &[Vec<usize>] {
        &self.bootstraps
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    /// Mean and population variance of the per-tree predictions.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let n = self.trees.len() as f64;
        let (mut s, mut sq) = (0.0, 0.0);
        let preds: Vec<f64> = self.trees.iter().map(|t| t.predict(x)).collect();
        for &p in &preds {
            s += p;
        }
        let mean = s / n;
        for &p in &preds {
            sq += (p - mean) * (p - mean);
        }
        (mean, sq / n)
    }
}

/// Grows `config.n_trees` trees on bootstrap resamples of `(points, costs)`.
pub fn rf_fit(points: &[Vec<f64>], costs: &[f64], config: &ForestConfig, rng: &mut RngState) -> Result<RandomForest> {
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if points.len() != costs.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), got: costs.len() });
    }
    if config.n_trees == 0 {
        return Err(Error::Config("n_trees must be positive"));
    }
    let n = points.len();
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut bootstraps = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        let mut tree_rng = rng.fork();
        let sample: Vec<usize> =
            if config.bootstrap { (0..n).map(|_| tree_rng.below(n)).collect() } else { (0..n).collect() };
        trees.push(RegressionTree::grow(points, costs, sample.clone(), config, &mut tree_rng));
        bootstraps.push(sample);
    }
    Ok(RandomForest { trees, bootstraps, config: config.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The next step would have left fewer than `n_min` points.
    Rejected,
    /// The tree's frontier reached a leaf.
    Leaf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubregionResult {
    pub region: AxisBox,
    /// Indices of points inside `region` (closed).
    pub inside: Vec<usize>,
    /// Depth of each tree's final frontier node (root is 0).
    pub stop_depths: Vec<usize>,
    pub stop_reasons: Vec<StopReason>,
}

/// Shrinks `domain` around `anchor` by descending all trees in round-robin
/// order, accepting a split only if at least `n_min` points remain inside.
pub fn extract_subregion(
    forest: &RandomForest,
    anchor: &[f64],
    points: &[Vec<f64>],
    n_min: usize,
    domain: &AxisBox,
) -> Result<SubregionResult> {
    if anchor.len() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: anchor.len() });
    }
    if let Some(dim) = (0..domain.dim()).find(|&j| !(anchor[j] >= domain.lo()[j] && anchor[j] <= domain.hi()[j])) {
        return Err(Error::OutOfBounds { dim });
    }
    let n_trees = forest.trees.len();
    let mut region = domain.clone();
    let mut inside: Vec<usize> = (0..points.len()).filter(|&i| region.contains(&points[i])).collect();
    let mut frontier = alloc::vec![0usize; n_trees];
    let mut depths = alloc::vec![0usize; n_trees];
    let mut reasons: Vec<Option<StopReason>> = alloc::vec![None; n_trees];

    while reasons.iter().any(Option::is_none) {
        for t in 0..n_trees {
            if reasons[t].is_some() {
                continue;
            }
            match forest.trees[t].node(frontier[t]) {
                TreeNode::Leaf { .. } => reasons[t] = Some(StopReason::Leaf),
                TreeNode::Split { dim, threshold, left, right, .. } => {
                    let mut candidate = region.clone();
                    let child = if anchor[*dim] < *threshold {
                        candidate.cap_upper(*dim, *threshold);
                        *left
                    } else {
                        candidate.cap_lower(*dim, *threshold);
                        *right
                    };
                    let kept: Vec<usize> = inside.iter().copied().filter(|&i| candidate.contains(&points[i])).collect();
                    if kept.len() >= n_min {
                        region = candidate;
                        inside = kept;
                        frontier[t] = child;
                        depths[t] += 1;
                    } else {
                        reasons[t] = Some(StopReason::Rejected);
                    }
                }
            }
        }
    }
    Ok(SubregionResult {
        region,
        inside,
        stop_depths: depths,
        stop_reasons: reasons.into_iter().map(|r| r.unwrap_or(StopReason::Leaf)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn random_data(n: usize, d: usize, rng: &mut RngState) -> (Vec<Vec<f64>>, Vec<f64>) {
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.uniform()).collect()).collect();
        let costs = pts.iter().map(|p| p.iter().map(|v| (v - 0.3) * (v - 0.3)).sum()).collect();
        (pts, costs)
    }

    #[test]
    fn single_observation_gives_single_leaves() {
        let f = rf_fit(&[vec![0.2, 0.4]], &[1.5], &ForestConfig::default(), &mut RngState::new(0)).unwrap();
        assert_eq!(f.trees().len(), 10);
        for t in f.trees() {
            assert_eq!(t.nodes().len(), 1);
            assert_eq!(t.predict(&[0.9, 0.9]), 1.5);
        }
        assert_eq!(f.predict(&[0.0, 0.0]), (1.5, 0.0));
    }

    #[test]
    fn fit_is_deterministic() {
        let (p, c) = random_data(40, 3, &mut RngState::new(1));
        let a = rf_fit(&p, &c, &ForestConfig::default(), &mut RngState::new(9)).unwrap();
        let b = rf_fit(&p, &c, &ForestConfig::default(), &mut RngState::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_cluster_root_split_in_gap() {
        let mut rng = RngState::new(3);
        let mut xs: Vec<f64> = (0..10).map(|_| rng.uniform_in(0.0, 0.4)).collect();
        xs.extend((0..10).map(|_| rng.uniform_in(0.6, 1.0)));
        let pts: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let costs: Vec<f64> = xs.iter().map(|&x| if x < 0.5 { 0.0 } else { 1.0 }).collect();
        let gap_lo = xs[..10].iter().cloned().fold(f64::MIN, f64::max);
        let gap_hi = xs[10..].iter().cloned().fold(f64::MAX, f64::min);

        // oracle: enumerate all midpoints, the best SSE reduction sits in the gap
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let sse = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
        };
        let mut best = (f64::MIN, 0.0);
        for w in sorted.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let l: Vec<f64> = xs.iter().zip(&costs).filter(|(x, _)| **x < t).map(|(_, c)| *c).collect();
            let r: Vec<f64> = xs.iter().zip(&costs).filter(|(x, _)| **x >= t).map(|(_, c)| *c).collect();
            let gain = sse(&costs) - sse(&l) - sse(&r);
            if gain > best.0 {
                best = (gain, t);
            }
        }
        assert!(best.1 > gap_lo && best.1 < gap_hi);

        let f = rf_fit(&pts, &costs, &ForestConfig::default(), &mut RngState::new(4)).unwrap();
        for t in f.trees() {
            match t.root() {
                TreeNode::Split { threshold, .. } => assert!(*threshold > gap_lo && *threshold < gap_hi),
                TreeNode::Leaf { .. } => panic!("root should split"),
            }
        }
    }

    #[test]
    fn two_tree_prediction_moments() {
        let f = RandomForest::from_trees(vec![
            RegressionTree::from_nodes(vec![TreeNode::leaf(1.0)]).unwrap(),
            RegressionTree::from_nodes(vec![TreeNode::leaf(3.0)]).unwrap(),
        ])
        .unwrap();
        assert_eq!(f.predict(&[0.5]), (2.0, 1.0));
    }

    #[test]
    fn child_sets_partition_parent_and_thresholds_inside_range() {
        let (p, c) = random_data(60, 2, &mut RngState::new(5));
        let f = rf_fit(&p, &c, &ForestConfig::default(), &mut RngState::new(6)).unwrap();
        for t in f.trees() {
            for node in t.nodes() {
                if let TreeNode::Split { dim, threshold, left, right, samples } = node {
                    let mut joined: Vec<usize> =
                        t.node(*left).samples().iter().chain(t.node(*right).samples()).copied().collect();
                    joined.sort();
                    let mut parent = samples.clone();
                    parent.sort();
                    assert_eq!(joined, parent);
                    let lo = samples.iter().map(|&i| p[i][*dim]).fold(f64::MAX, f64::min);
                    let hi = samples.iter().map(|&i| p[i][*dim]).fold(f64::MIN, f64::max);
                    assert!(*threshold > lo && *threshold <= hi);
                }
            }
        }
    }

    fn figure_fixture() -> (RandomForest, Vec<Vec<f64>>) {
        // tree A: x1<0.3 | x1<0.6 | x2<0.2 ; tree B: x2<0.4 | x1<0.2 | x1<0.7
        let tree_a = RegressionTree::from_nodes(vec![
            TreeNode::split(0, 0.3, 1, 2), // a0
            TreeNode::leaf(0.0),           // a1
            TreeNode::split(0, 0.6, 3, 4), // a2
            TreeNode::split(1, 0.2, 5, 6), // a3
            TreeNode::leaf(0.0),           // a4
            TreeNode::leaf(0.0),           // a5
            TreeNode::leaf(0.0),           // a6
        ])
        .unwrap();
        let tree_b = RegressionTree::from_nodes(vec![
            TreeNode::split(1, 0.4, 1, 2), // b0
            TreeNode::split(0, 0.2, 3, 4), // b1
            TreeNode::leaf(0.0),           // b2
            TreeNode::leaf(0.0),           // b3
            TreeNode::split(0, 0.7, 5, 6), // b4
            TreeNode::leaf(0.0),           // b5
            TreeNode::leaf(0.0),           // b6
        ])
        .unwrap();
        let pts = vec![
            vec![0.45, 0.27],
            vec![0.36, 0.1],
            vec![0.57, 0.12],
            vec![0.13, 0.72],
            vec![0.05, 0.25],
            vec![0.83, 0.17],
        ];
        (RandomForest::from_trees(vec![tree_a, tree_b]).unwrap(), pts)
    }

    #[test]
    fn figure_subregion() {
        let (f, pts) = figure_fixture();
        let r = extract_subregion(&f, &[0.35, 0.3], &pts, 3, &AxisBox::unit(2)).unwrap();
        assert_eq!(r.region, AxisBox::new(vec![0.3, 0.0], vec![0.6, 0.4]).unwrap());
        assert_eq!(r.inside, vec![0, 1, 2]);
        assert_eq!(r.stop_depths, vec![2, 3]);
        assert_eq!(r.stop_reasons, vec![StopReason::Rejected, StopReason::Leaf]);
    }

    #[test]
    fn large_n_min_returns_domain() {
        let (p, c) = random_data(30, 2, &mut RngState::new(7));
        let f = rf_fit(&p, &c, &ForestConfig::default(), &mut RngState::new(8)).unwrap();
        for n_min in [30, 31, 100] {
            let r = extract_subregion(&f, &[0.5, 0.5], &p, n_min, &AxisBox::unit(2)).unwrap();
            assert_eq!(r.region, AxisBox::unit(2));
            assert_eq!(r.inside.len(), 30);
        }
    }

    #[test]
    fn single_split_shrinks_along_that_split() {
        let tree =
            RegressionTree::from_nodes(vec![TreeNode::split(1, 0.5, 1, 2), TreeNode::leaf(0.0), TreeNode::leaf(1.0)])
                .unwrap();
        let f = RandomForest::from_trees(vec![tree]).unwrap();
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![0.5, i as f64 / 10.0 + 0.05]).collect();
        let r = extract_subregion(&f, &[0.2, 0.1], &pts, 3, &AxisBox::unit(2)).unwrap();
        assert_eq!(r.region, AxisBox::new(vec![0.0, 0.0], vec![1.0, 0.5]).unwrap());
        assert_eq!(r.inside.len(), 5);
    }

    #[test]
    fn anchor_outside_domain_errors() {
        let (f, pts) = figure_fixture();
        assert!(extract_subregion(&f, &[1.2, 0.3], &pts, 3, &AxisBox::unit(2)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn extraction_invariants(seed in 0u64..10_000, n in 1usize..60, n_min in 1usize..30, d in 1usize..4) {
            let mut rng = RngState::new(seed);
            let (p, c) = random_data(n, d, &mut rng);
            let f = rf_fit(&p, &c, &ForestConfig::default(), &mut rng).unwrap();
            let anchor: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
            let r = extract_subregion(&f, &anchor, &p, n_min, &AxisBox::unit(d)).unwrap();
            prop_assert!(r.region.contains(&anchor));
            prop_assert!(r.region.is_subset_of(&AxisBox::unit(d)));
            if n >= n_min {
                prop_assert!(r.inside.len() >= n_min);
            }
            let (closed_inside, _) = crate::space::partition_points(p.iter().map(|v| v.as_slice()), &r.region);
            prop_assert_eq!(&closed_inside, &r.inside);
        }

        #[test]
        fn forest_variance_nonnegative(seed in 0u64..10_000) {
            let mut rng = RngState::new(seed);
            let (p, c) = random_data(25, 2, &mut rng);
            let f = rf_fit(&p, &c, &ForestConfig::default(), &mut rng).unwrap();
            let q = [rng.uniform(), rng.uniform()];
            let (m, v) = f.predict(&q);
            let preds: Vec<f64> = f.trees().iter().map(|t| t.predict(&q)).collect();
            prop_assert!(v >= 0.0);
            prop_assert_eq!(v == 0.0, preds.iter().all(|&x| x == preds[0]));
            let lo = preds.iter().cloned().fold(f64::MAX, f64::min);
            let hi = preds.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
        }
    }
}
