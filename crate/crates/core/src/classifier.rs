//! Binary CART decision trees with weighted Gini impurity.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::timeseries::kfold_split;

/// Gini impurity `1 − Σ p_c²` of weighted class counts.
pub fn gini(counts: &[f64]) -> Result<f64> {
    let total: f64 = counts.iter().sum();
    if total.is_nan() || total <= 0.0 || counts.iter().any(|c| *c < 0.0 || !c.is_finite()) {
        return Err(Error::Degenerate(format!("Gini impurity needs positive total weight, got counts {counts:?}")));
    }
    Ok(1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>())
}

fn gini2(c: [f64; 2]) -> f64 {
    let total = c[0] + c[1];
    if total <= 0.0 {
        return 0.0;
    }
    let p = c[0] / total;
    let q = c[1] / total;
    1.0 - p * p - q * q
}

/// Weighted impurity mass `W · gini`.
fn impurity_mass(c: [f64; 2]) -> f64 {
    (c[0] + c[1]) * gini2(c)
}

fn majority(c: [f64; 2]) -> u8 {
    u8::from(c[1] > c[0])
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        class: u8,
        /// Weighted class counts `[w₀, w₁]` of the training samples reaching this node.
        counts: [f64; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        counts: [f64; 2],
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn counts(&self) -> [f64; 2] {
        match self {
            TreeNode::Leaf { counts, .. } | TreeNode::Split { counts, .. } => *counts,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn splits(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.splits() + right.splits(),
        }
    }

    fn predict_limited(&self, sample: &[f64], depth_limit: usize) -> u8 {
        let mut node = self;
        let mut depth = 0;
        loop {
            match node {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Split { counts, .. } if depth == depth_limit => return majority(*counts),
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    node = if sample[*feature] <= *threshold { left } else { right };
                    depth += 1;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedTree {
    pub root: TreeNode,
    pub feature_names: Vec<String>,
    pub importances: Vec<f64>,
    pub max_depth: usize,
}

impl TrainedTree {
    /// Assembles a tree from parts, recomputing importances from node counts.
    pub fn from_parts(root: TreeNode, feature_names: Vec<String>, max_depth: usize) -> Result<Self> {
        let n = feature_names.len();
        check_node(&root, n)?;
        if root.depth() > max_depth {
            return Err(Error::Shape(format!("tree depth {} exceeds its max_depth {max_depth}", root.depth())));
        }
        let importances = importances_of(&root, n);
        Ok(Self { root, feature_names, importances, max_depth })
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }
}

fn check_node(node: &TreeNode, n_features: usize) -> Result<()> {
    let counts = node.counts();
    if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::Shape(format!("invalid node counts {counts:?}")));
    }
    match node {
        TreeNode::Leaf { class, .. } if *class > 1 => Err(Error::Shape(format!("leaf class {class} is not binary"))),
        TreeNode::Leaf { .. } => Ok(()),
        TreeNode::Split { feature, threshold, left, right, .. } => {
            if *feature >= n_features {
                return Err(Error::Shape(format!("split on feature {feature} of {n_features}")));
            }
            if !threshold.is_finite() {
                return Err(Error::Shape(format!("non-finite split threshold {threshold}")));
            }
            check_node(left, n_features)?;
            check_node(right, n_features)
        }
    }
}

fn collect_gains(node: &TreeNode, gains: &mut [f64]) {
    if let TreeNode::Split { feature, counts, left, right, .. } = node {
        let gain = impurity_mass(*counts) - impurity_mass(left.counts()) - impurity_mass(right.counts());
        gains[*feature] += gain.max(0.0);
        collect_gains(left, gains);
        collect_gains(right, gains);
    }
}

fn importances_of(root: &TreeNode, n_features: usize) -> Vec<f64> {
    let mut gains = vec![0.0; n_features];
    collect_gains(root, &mut gains);
    let total: f64 = gains.iter().sum();
    if total > 0.0 {
        gains.iter_mut().for_each(|g| *g /= total);
    }
    gains
}

/// Gini importances, normalized to sum to one; all zero for a single leaf.
pub fn feature_importances(tree: &TrainedTree) -> Vec<f64> {
    importances_of(&tree.root, tree.n_features())
}

fn validate_training(features: &DMatrix<f64>, labels: &[u8], weights: &[f64]) -> Result<()> {
    let n = features.nrows();
    if n == 0 || features.ncols() == 0 {
        return Err(Error::InsufficientData(format!("empty training set ({}x{})", n, features.ncols())));
    }
    if labels.len() != n || weights.len() != n {
        return Err(Error::Shape(format!(
            "{n} feature rows, {} labels, {} weights",
            labels.len(),
            weights.len()
        )));
    }
    if let Some(i) = labels.iter().position(|&l| l > 1) {
        return Err(Error::Parameter(format!("label {} at row {i} is not binary", labels[i])));
    }
    if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Parameter(format!("weight {} at row {i} must be finite and nonnegative", weights[i])));
    }
    if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite { value: *bad, context: "training features".into() });
    }
    Ok(())
}

/// Best split of one node, by weighted impurity decrease.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

struct Grower<'a> {
    features: &'a DMatrix<f64>,
    labels: &'a [u8],
    weights: &'a [f64],
    max_depth: usize,
}

impl Grower<'_> {
    fn counts(&self, rows: &[usize]) -> [f64; 2] {
        let mut c = [0.0; 2];
        for &i in rows {
            c[self.labels[i] as usize] += self.weights[i];
        }
        c
    }

    fn best_split(&self, rows: &[usize], counts: [f64; 2]) -> Option<SplitChoice> {
        let parent = impurity_mass(counts);
        let mut best: Option<SplitChoice> = None;
        let mut order = rows.to_vec();
        for f in 0..self.features.ncols() {
            let col = self.features.column(f);
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            let mut left = [0.0; 2];
            for w in 0..order.len() - 1 {
                let i = order[w];
                left[self.labels[i] as usize] += self.weights[i];
                let (lo, hi) = (col[i], col[order[w + 1]]);
                if lo == hi {
                    continue;
                }
                let right = [counts[0] - left[0], counts[1] - left[1]];
                let gain = parent - impurity_mass(left) - impurity_mass(right);
                if best.is_none_or(|b| gain > b.gain) {
                    let mid = lo + 0.5 * (hi - lo);
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(SplitChoice { feature: f, threshold, gain });
                }
            }
        }
        best
    }

    fn grow(&self, rows: Vec<usize>, depth: usize) -> TreeNode {
        let counts = self.counts(&rows);
        let leaf = TreeNode::Leaf { class: majority(counts), counts };
        if depth >= self.max_depth || counts[0] == 0.0 || counts[1] == 0.0 {
            return leaf;
        }
        let tolerance = 1e-12 * (counts[0] + counts[1]);
        match self.best_split(&rows, counts) {
            Some(s) if s.gain > tolerance => {
                let col = self.features.column(s.feature);
                let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| col[i] <= s.threshold);
                TreeNode::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    counts,
                    left: Box::new(self.grow(l, depth + 1)),
                    right: Box::new(self.grow(r, depth + 1)),
                }
            }
            _ => leaf,
        }
    }
}

/// Best root split over all features and midpoints, or `None` when every
/// feature is constant.
pub fn best_stump(features: &DMatrix<f64>, labels: &[u8], weights: &[f64]) -> Result<Option<SplitChoice>> {
    validate_training(features, labels, weights)?;
    let g = Grower { features, labels, weights, max_depth: 1 };
    let rows: Vec<usize> = (0..features.nrows()).collect();
    Ok(g.best_split(&rows, g.counts(&rows)))
}

/// Fits a depth-limited CART tree. Rows of `features` are samples.
///
/// Ties between equal-gain splits go to the lowest feature index, then the
/// smallest threshold; leaves with equal class weight predict 0.
pub fn tree_fit(
    features: &DMatrix<f64>,
    labels: &[u8],
    weights: &[f64],
    max_depth: usize,
    feature_names: Vec<String>,
) -> Result<TrainedTree> {
    validate_training(features, labels, weights)?;
    if max_depth == 0 {
        return Err(Error::Parameter("max_depth must be at least 1".into()));
    }
    if feature_names.len() != features.ncols() {
        return Err(Error::Shape(format!(
            "{} feature names for {} feature columns",
            feature_names.len(),
            features.ncols()
        )));
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Degenerate("total sample weight is zero".into()));
    }
    let grower = Grower { features, labels, weights, max_depth };
    let root = grower.grow((0..features.nrows()).collect(), 0);
    let importances = importances_of(&root, features.ncols());
    Ok(TrainedTree { root, feature_names, importances, max_depth })
}

/// Default names `f0, f1, …` for anonymous feature columns.
pub fn anonymous_features(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("f{i}")).collect()
}

fn check_sample(tree: &TrainedTree, sample: &[f64]) -> Result<()> {
    if sample.len() != tree.n_features() {
        return Err(Error::Shape(format!(
            "sample has {} features, tree expects {}",
            sample.len(),
            tree.n_features()
        )));
    }
    Ok(())
}

pub fn tree_predict(tree: &TrainedTree, sample: &[f64]) -> Result<u8> {
    check_sample(tree, sample)?;
    Ok(tree.root.predict_limited(sample, usize::MAX))
}

/// Prediction of the same tree cut off at `depth`; nodes at the cut
/// predict their weighted majority.
pub fn tree_predict_truncated(tree: &TrainedTree, sample: &[f64], depth: usize) -> Result<u8> {
    check_sample(tree, sample)?;
    Ok(tree.root.predict_limited(sample, depth))
}

/// Inverse-frequency weights `n / (2 n_c)`.
pub fn class_reweight(labels: &[u8]) -> Result<Vec<f64>> {
    if let Some(i) = labels.iter().position(|&l| l > 1) {
        return Err(Error::Parameter(format!("label {} at row {i} is not binary", labels[i])));
    }
    let n = labels.len();
    let ones = labels.iter().filter(|&&l| l == 1).count();
    if n == 0 {
        return Err(Error::InsufficientData("no labels to reweight".into()));
    }
    if ones == 0 {
        return Err(Error::SingleClass(0));
    }
    if ones == n {
        return Err(Error::SingleClass(1));
    }
    let w = [n as f64 / (2 * (n - ones)) as f64, n as f64 / (2 * ones) as f64];
    Ok(labels.iter().map(|&l| w[l as usize]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub best_depth: usize,
    /// Mean holdout accuracy of `best_depth`.
    pub accuracy: f64,
    /// `(depth, mean holdout accuracy)` for every grid point, in grid order.
    pub per_depth: Vec<(usize, f64)>,
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// k-fold depth selection on unweighted holdout accuracy.
///
/// Each fold fits once at the deepest grid depth and evaluates shallower
/// depths by truncation, which equals refitting because growth is greedy
/// and depth-first.
pub fn cross_validate(
    features: &DMatrix<f64>,
    labels: &[u8],
    weights: &[f64],
    depth_grid: &[usize],
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    validate_training(features, labels, weights)?;
    if depth_grid.is_empty() {
        return Err(Error::Parameter("depth grid is empty".into()));
    }
    if depth_grid.contains(&0) {
        return Err(Error::Parameter("depth grid entries must be at least 1".into()));
    }
    let deepest = *depth_grid.iter().max().expect("nonempty grid");
    let folds = kfold_split(features.nrows(), k, seed)?;
    let mut sums = vec![0.0; depth_grid.len()];
    for fold in &folds {
        let x = select_rows(features, &fold.train);
        let y: Vec<u8> = fold.train.iter().map(|&i| labels[i]).collect();
        let w: Vec<f64> = fold.train.iter().map(|&i| weights[i]).collect();
        let tree = tree_fit(&x, &y, &w, deepest, anonymous_features(features.ncols()))?;
        let mut sample = vec![0.0; features.ncols()];
        for (slot, &depth) in sums.iter_mut().zip(depth_grid) {
            let mut correct = 0usize;
            for &i in &fold.test {
                sample.iter_mut().enumerate().for_each(|(j, s)| *s = features[(i, j)]);
                if tree.root.predict_limited(&sample, depth) == labels[i] {
                    correct += 1;
                }
            }
            *slot += correct as f64 / fold.test.len() as f64;
        }
    }
    let per_depth: Vec<(usize, f64)> =
        depth_grid.iter().zip(&sums).map(|(&d, s)| (d, s / folds.len() as f64)).collect();
    let best = per_depth.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (best_depth, accuracy) = per_depth
        .iter()
        .filter(|p| p.1 >= best - 1e-9)
        .min_by_key(|p| p.0)
        .copied()
        .expect("at least one depth attains the maximum");
    Ok(CvResult { best_depth, accuracy, per_depth })
}

/// Fraction of rows where the tree agrees with `labels`.
pub fn accuracy(tree: &TrainedTree, features: &DMatrix<f64>, labels: &[u8]) -> Result<f64> {
    if features.nrows() != labels.len() || features.nrows() == 0 {
        return Err(Error::Shape(format!("{} rows, {} labels", features.nrows(), labels.len())));
    }
    let mut sample = vec![0.0; features.ncols()];
    let mut correct = 0usize;
    for (i, &l) in labels.iter().enumerate() {
        sample.iter_mut().enumerate().for_each(|(j, s)| *s = features[(i, j)]);
        correct += usize::from(tree_predict(tree, &sample)? == l);
    }
    Ok(correct as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn column(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(values.len(), 1, values)
    }

    fn unit(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[4.0, 0.0]).unwrap(), 0.0);
        assert_eq!(gini(&[2.0, 2.0]).unwrap(), 0.5);
        assert!((gini(&[1.0, 3.0]).unwrap() - 0.375).abs() < 1e-15);
        assert!(gini(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn all_zero_labels_give_single_leaf() {
        let x = column(&[1.0, 2.0, 3.0]);
        let t = tree_fit(&x, &[0, 0, 0], &unit(3), 4, anonymous_features(1)).unwrap();
        assert!(matches!(t.root, TreeNode::Leaf { class: 0, .. }));
        assert_eq!(t.importances, vec![0.0]);
    }

    #[test]
    fn separable_threshold() {
        let vals = [1.0, 3.0, 5.0, 7.0, 9.0, 2.0, 8.0];
        let labels: Vec<u8> = vals.iter().map(|&v| u8::from(v > 5.0)).collect();
        let t = tree_fit(&column(&vals), &labels, &unit(7), 5, anonymous_features(1)).unwrap();
        assert_eq!(t.root.depth(), 1);
        let TreeNode::Split { threshold, .. } = t.root else { panic!() };
        assert!(threshold > 5.0 && threshold < 7.0);
        assert_eq!(accuracy(&t, &column(&vals), &labels).unwrap(), 1.0);
        assert_eq!(tree_predict(&t, &[4.0]).unwrap(), 0);
        assert_eq!(tree_predict(&t, &[8.0]).unwrap(), 1);
        assert_eq!(t.importances, vec![1.0]);
    }

    fn xor() -> (DMatrix<f64>, Vec<u8>) {
        let x = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0]);
        (x, vec![0, 1, 1, 0])
    }

    /// Exhaustive search over every (feature, midpoint, left class, right class) stump.
    fn best_stump_accuracy(x: &DMatrix<f64>, y: &[u8]) -> f64 {
        let mut best: f64 = 0.0;
        for f in 0..x.ncols() {
            let mut vals: Vec<f64> = x.column(f).iter().copied().collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            let mut cuts: Vec<f64> = vals.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            cuts.push(f64::INFINITY);
            for c in cuts {
                for (lc, rc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let correct = (0..x.nrows())
                        .filter(|&i| (if x[(i, f)] <= c { lc } else { rc }) == y[i])
                        .count();
                    best = best.max(correct as f64 / x.nrows() as f64);
                }
            }
        }
        best
    }

    #[test]
    fn xor_needs_depth_two() {
        let (x, y) = xor();
        assert_eq!(best_stump_accuracy(&x, &y), 0.5);
        // no positive-gain stump exists; a depth-1 tree is one leaf
        let t1 = tree_fit(&x, &y, &unit(4), 1, anonymous_features(2)).unwrap();
        assert!(accuracy(&t1, &x, &y).unwrap() <= 0.5);
        // greedy CART cannot start XOR without a positive first gain, so make
        // the first split informative with a slight weight imbalance
        let w = [1.0, 1.0, 1.0, 1.2];
        let t2 = tree_fit(&x, &y, &w, 2, anonymous_features(2)).unwrap();
        assert_eq!(accuracy(&t2, &x, &y).unwrap(), 1.0);
    }

    #[test]
    fn single_leaf_predicts_its_class() {
        let x = column(&[1.0, 1.0]);
        let t = tree_fit(&x, &[1, 1], &unit(2), 3, anonymous_features(1)).unwrap();
        for v in [-1e9, 0.0, 42.0] {
            assert_eq!(tree_predict(&t, &[v]).unwrap(), 1);
        }
    }

    #[test]
    fn leaf_tie_predicts_zero() {
        let x = column(&[1.0, 1.0]);
        let t = tree_fit(&x, &[0, 1], &unit(2), 3, anonymous_features(1)).unwrap();
        assert_eq!(tree_predict(&t, &[1.0]).unwrap(), 0);
    }

    #[test]
    fn memorizes_conflict_free_data() {
        let x = DMatrix::from_fn(40, 3, |i, j| ((i * 7 + j * 13) % 11) as f64 + 0.1 * i as f64);
        let y: Vec<u8> = (0..40).map(|i| ((i * 31 + 5) % 7 < 3) as u8).collect();
        let t = tree_fit(&x, &y, &unit(40), 64, anonymous_features(3)).unwrap();
        assert_eq!(accuracy(&t, &x, &y).unwrap(), 1.0);
    }

    #[test]
    fn fit_errors() {
        let x = column(&[1.0, 2.0]);
        assert!(matches!(tree_fit(&x, &[0], &unit(2), 2, anonymous_features(1)), Err(Error::Shape(_))));
        assert!(matches!(tree_fit(&x, &[0, 1], &unit(1), 2, anonymous_features(1)), Err(Error::Shape(_))));
        assert!(tree_fit(&DMatrix::zeros(0, 1), &[], &[], 2, anonymous_features(1)).is_err());
        assert!(tree_fit(&x, &[0, 1], &unit(2), 0, anonymous_features(1)).is_err());
        assert!(tree_fit(&x, &[0, 2], &unit(2), 1, anonymous_features(1)).is_err());
        let t = tree_fit(&x, &[0, 1], &unit(2), 1, anonymous_features(1)).unwrap();
        assert!(matches!(tree_predict(&t, &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn reweight_examples() {
        assert_eq!(class_reweight(&[0, 1, 0, 1]).unwrap(), vec![1.0; 4]);
        let mut labels = vec![0u8; 90];
        labels.extend([1u8; 10]);
        let w = class_reweight(&labels).unwrap();
        assert!((w[0] - 100.0 / 180.0).abs() < 1e-15);
        assert_eq!(w[99], 5.0);
        let mass0: f64 = w[..90].iter().sum();
        let mass1: f64 = w[90..].iter().sum();
        assert!((mass0 - mass1).abs() < 1e-12);
        assert!(matches!(class_reweight(&[1, 1, 1]), Err(Error::SingleClass(1))));
        assert!(matches!(class_reweight(&[0, 0]), Err(Error::SingleClass(0))));
    }

    #[test]
    fn cv_prefers_shallowest_on_separable_data() {
        // a wide gap keeps every fold's midpoint between the classes
        let vals: Vec<f64> = (0..50).map(|i| if i < 20 { i as f64 } else { i as f64 + 30.0 }).collect();
        let labels: Vec<u8> = vals.iter().map(|&v| u8::from(v > 20.0)).collect();
        let x = column(&vals);
        let grid: Vec<usize> = (1..=5).collect();
        let r = cross_validate(&x, &labels, &unit(50), &grid, 5, 9).unwrap();
        assert_eq!(r.best_depth, 1);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r, cross_validate(&x, &labels, &unit(50), &grid, 5, 9).unwrap());
        assert!(cross_validate(&x, &labels, &unit(50), &[], 5, 9).is_err());
        assert!(cross_validate(&x, &labels, &unit(50), &grid, 1, 9).is_err());
    }

    #[test]
    fn truncation_matches_refit() {
        let x = DMatrix::from_fn(120, 2, |i, j| ((i * (j + 3) * 17) % 29) as f64);
        let y: Vec<u8> = (0..120).map(|i| u8::from((i * 13) % 5 < 2)).collect();
        let w = unit(120);
        let deep = tree_fit(&x, &y, &w, 6, anonymous_features(2)).unwrap();
        for depth in 1..6 {
            let shallow = tree_fit(&x, &y, &w, depth, anonymous_features(2)).unwrap();
            for i in 0..120 {
                let s = [x[(i, 0)], x[(i, 1)]];
                assert_eq!(tree_predict_truncated(&deep, &s, depth).unwrap(), tree_predict(&shallow, &s).unwrap());
            }
        }
    }

    fn dataset() -> impl Strategy<Value = (DMatrix<f64>, Vec<u8>, Vec<f64>)> {
        (2usize..40, 1usize..4).prop_flat_map(|(n, f)| {
            (
                proptest::collection::vec(-5i32..5, n * f),
                proptest::collection::vec(0u8..2, n),
                proptest::collection::vec(0.1f64..3.0, n),
            )
                .prop_map(move |(v, y, w)| {
                    let x = DMatrix::from_fn(n, f, |i, j| v[i * f + j] as f64 * 0.5);
                    (x, y, w)
                })
        })
    }

    /// Oracle: weighted Gini decrease of every (feature, midpoint) pair.
    fn exhaustive_best_gain(x: &DMatrix<f64>, y: &[u8], w: &[f64]) -> Option<f64> {
        let mass = |rows: &[usize]| {
            let mut c = [0.0, 0.0];
            rows.iter().for_each(|&i| c[y[i] as usize] += w[i]);
            let t = c[0] + c[1];
            if t == 0.0 { 0.0 } else { t * (1.0 - (c[0] / t).powi(2) - (c[1] / t).powi(2)) }
        };
        let all: Vec<usize> = (0..x.nrows()).collect();
        let parent = mass(&all);
        let mut best: Option<f64> = None;
        for f in 0..x.ncols() {
            let mut vals: Vec<f64> = x.column(f).iter().copied().collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for pair in vals.windows(2) {
                let c = 0.5 * (pair[0] + pair[1]);
                let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x[(i, f)] <= c);
                let g = parent - mass(&l) - mass(&r);
                best = Some(best.map_or(g, |b: f64| b.max(g)));
            }
        }
        best
    }

    proptest! {
        #[test]
        fn stump_matches_exhaustive_search((x, y, w) in dataset()) {
            let found = best_stump(&x, &y, &w).unwrap();
            let oracle = exhaustive_best_gain(&x, &y, &w);
            match (found, oracle) {
                (None, None) => {}
                (Some(s), Some(g)) => prop_assert!((s.gain - g).abs() <= 1e-9 * (1.0 + g.abs())),
                other => prop_assert!(false, "mismatch {:?}", other),
            }
        }

        #[test]
        fn monotone_transform_invariance((x, y, w) in dataset(), col in 0usize..4, depth in 1usize..5) {
            let col = col % x.ncols();
            let mut xt = x.clone();
            xt.column_mut(col).iter_mut().for_each(|v| *v = v.exp() * 3.0 + 1.0);
            let names = anonymous_features(x.ncols());
            let a = tree_fit(&x, &y, &w, depth, names.clone()).unwrap();
            let b = tree_fit(&xt, &y, &w, depth, names).unwrap();
            for i in 0..x.nrows() {
                let s: Vec<f64> = x.row(i).iter().copied().collect();
                let st: Vec<f64> = xt.row(i).iter().copied().collect();
                prop_assert_eq!(tree_predict(&a, &s).unwrap(), tree_predict(&b, &st).unwrap());
            }
        }

        #[test]
        fn training_accuracy_monotone_in_depth((x, y, _w) in dataset()) {
            let w = unit(x.nrows());
            let mut last = 0.0;
            for depth in 1..7 {
                let t = tree_fit(&x, &y, &w, depth, anonymous_features(x.ncols())).unwrap();
                prop_assert!(t.root.depth() <= depth);
                let acc = accuracy(&t, &x, &y).unwrap();
                prop_assert!(acc >= last - 1e-12);
                last = acc;
            }
        }

        #[test]
        fn importances_normalized((x, y, w) in dataset(), depth in 1usize..6) {
            let t = tree_fit(&x, &y, &w, depth, anonymous_features(x.ncols())).unwrap();
            prop_assert!(t.importances.iter().all(|&v| v >= 0.0));
            let s: f64 = t.importances.iter().sum();
            if t.root.splits() > 0 {
                prop_assert!((s - 1.0).abs() < 1e-12);
            } else {
                prop_assert_eq!(s, 0.0);
            }
            prop_assert_eq!(feature_importances(&t), t.importances.clone());
        }
    }
}
