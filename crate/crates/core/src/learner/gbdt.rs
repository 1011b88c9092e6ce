use alloc::vec::Vec;

use super::column::{ColumnIndex, Grower, LeafSegment};
use super::matrix::FeatureMatrix;
use super::tree::{DecisionTree, TreeNode};
use super::{LearnError, TrainConfig};

/// Margins and logits are clamped to `±MARGIN_CLAMP` before any sigmoid,
/// softmax or loss evaluation.
pub const MARGIN_CLAMP: f64 = 30.0;

/// Maximum number of step halvings tried before a round's tree is zeroed.
const MAX_HALVINGS: usize = 30;

fn clamp(m: f64) -> f64 {
    m.clamp(-MARGIN_CLAMP, MARGIN_CLAMP)
}

pub fn sigmoid(margin: f64) -> f64 {
    let m = clamp(margin);
    if m >= 0.0 {
        1.0 / (1.0 + libm::exp(-m))
    } else {
        let e = libm::exp(m);
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of clamped logits.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = logits.iter().map(|&l| clamp(l)).collect();
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in out.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

/// Logistic loss `log(1 + e^m) - y·m` of a clamped margin.
pub fn logistic_loss(margin: f64, y: f64) -> f64 {
    let m = clamp(margin);
    m.max(0.0) + libm::log1p(libm::exp(-m.abs())) - y * m
}

/// Cross-entropy of clamped logits against class `y`.
fn softmax_loss(logits: &[f64], y: usize) -> f64 {
    let max = logits.iter().map(|&l| clamp(l)).fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for &l in logits {
        sum += libm::exp(clamp(l) - max);
    }
    max + libm::log(sum) - clamp(logits[y])
}

fn scale_tree(tree: &DecisionTree, scale: f64) -> DecisionTree {
    let nodes = tree
        .nodes()
        .iter()
        .map(|n| match *n {
            TreeNode::Leaf { weight } => TreeNode::Leaf {
                weight: weight * scale,
            },
            split => split,
        })
        .collect();
    DecisionTree::from_nodes(nodes)
}

fn check_dim(expected: usize, found: usize) -> Result<(), LearnError> {
    if expected != found {
        return Err(LearnError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Binary logistic boosted-tree ensemble. Stored leaf weights already
/// include the learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtBinaryModel {
    trees: Vec<DecisionTree>,
    base_score: f64,
    config: TrainConfig,
    n_features: usize,
}

impl GbdtBinaryModel {
    /// Assembles a model from stored parts, checking tree feature indices.
    pub fn from_parts(
        trees: Vec<DecisionTree>,
        base_score: f64,
        config: TrainConfig,
        n_features: usize,
    ) -> Result<Self, LearnError> {
        if !base_score.is_finite() {
            return Err(LearnError::NonFiniteScore { index: 0 });
        }
        for t in &trees {
            if let Some(f) = t.max_feature() {
                if f >= n_features {
                    return Err(LearnError::DimensionMismatch {
                        expected: n_features,
                        found: f + 1,
                    });
                }
            }
        }
        Ok(Self {
            trees,
            base_score,
            config,
            n_features,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    fn margin_unchecked(&self, x: &[f64]) -> f64 {
        let mut m = self.base_score;
        for t in &self.trees {
            m += t.predict(x);
        }
        m
    }

    /// Unclamped margin `base_score + Σ tree outputs`.
    pub fn predict_margin(&self, x: &[f64]) -> Result<f64, LearnError> {
        check_dim(self.n_features, x.len())?;
        Ok(self.margin_unchecked(x))
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, LearnError> {
        Ok(sigmoid(self.predict_margin(x)?))
    }

    pub fn predict_proba_batch(&self, x: &FeatureMatrix) -> Result<Vec<f64>, LearnError> {
        check_dim(self.n_features, x.n_cols())?;
        Ok(x.rows().map(|r| sigmoid(self.margin_unchecked(r))).collect())
    }
}

fn binary_labels(y: &[u8]) -> Result<Vec<f64>, LearnError> {
    y.iter()
        .enumerate()
        .map(|(row, &v)| match v {
            0 => Ok(0.0),
            1 => Ok(1.0),
            _ => Err(LearnError::InvalidLabel {
                row,
                value: v as f64,
            }),
        })
        .collect()
}

pub(crate) fn check_binary_input(x: &FeatureMatrix, y: &[u8], cfg: &TrainConfig) -> Result<Vec<f64>, LearnError> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(LearnError::EmptyInput);
    }
    if y.len() != x.n_rows() {
        return Err(LearnError::LengthMismatch {
            what: "labels",
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    binary_labels(y)
}

/// Boosts on `rows` (ascending) of an indexed matrix. Returns the model and
/// the mean training loss before the first round and after every round.
pub(crate) fn boost_binary(
    index: &ColumnIndex,
    y: &[f64],
    rows: Option<&[u32]>,
    cfg: &TrainConfig,
) -> Result<(GbdtBinaryModel, Vec<f64>), LearnError> {
    let mut grower = Grower::new(index, cfg.tree_params(), rows);
    let active: Vec<u32> = grower.root_rows().to_vec();
    if active.is_empty() {
        return Err(LearnError::EmptyInput);
    }
    let positives: f64 = active.iter().map(|&r| y[r as usize]).sum();
    let n = active.len() as f64;
    if positives == 0.0 || positives == n {
        return Err(LearnError::DegenerateLabels);
    }
    let prior = positives / n;
    let base_score = libm::log(prior / (1.0 - prior));

    let n_all = index.n_rows();
    let mut margin = alloc::vec![base_score; n_all];
    let mut gh = alloc::vec![[0.0f64; 2]; n_all];
    let mut loss: f64 = active.iter().map(|&r| logistic_loss(base_score, y[r as usize])).sum();
    let mut trace = Vec::with_capacity(cfg.n_trees + 1);
    trace.push(loss / n);
    let mut trees = Vec::with_capacity(cfg.n_trees);

    for _ in 0..cfg.n_trees {
        for &r in &active {
            let r = r as usize;
            let p = sigmoid(margin[r]);
            gh[r] = [p - y[r], p * (1.0 - p)];
        }
        let (tree, leaves) = grower.grow(&gh);
        let order = grower.rows();
        let mut scale = cfg.learning_rate;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let new_loss = staged_loss(order, &leaves, scale, |r, d| logistic_loss(margin[r] + d, y[r]));
            if new_loss <= loss {
                accepted = Some(new_loss);
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some(new_loss) => {
                for leaf in &leaves {
                    let d = leaf.weight * scale;
                    for &r in &order[leaf.start..leaf.end] {
                        margin[r as usize] += d;
                    }
                }
                loss = new_loss;
                trees.push(scale_tree(&tree, scale));
            }
            None => trees.push(scale_tree(&tree, 0.0)),
        }
        trace.push(loss / n);
    }
    let model = GbdtBinaryModel {
        trees,
        base_score,
        config: *cfg,
        n_features: index.n_cols(),
    };
    Ok((model, trace))
}

fn staged_loss(order: &[u32], leaves: &[LeafSegment], scale: f64, f: impl Fn(usize, f64) -> f64) -> f64 {
    let mut total = 0.0;
    for leaf in leaves {
        let d = leaf.weight * scale;
        for &r in &order[leaf.start..leaf.end] {
            total += f(r as usize, d);
        }
    }
    total
}

/// Fits a logistic boosted-tree ensemble on labels in `{0, 1}`.
pub fn fit_binary(x: &FeatureMatrix, y: &[u8], cfg: &TrainConfig) -> Result<GbdtBinaryModel, LearnError> {
    fit_binary_traced(x, y, cfg).map(|(m, _)| m)
}

/// Like [`fit_binary`], also returning the mean training loss before the
/// first round and after each round.
pub fn fit_binary_traced(
    x: &FeatureMatrix,
    y: &[u8],
    cfg: &TrainConfig,
) -> Result<(GbdtBinaryModel, Vec<f64>), LearnError> {
    let yf = check_binary_input(x, y, cfg)?;
    let index = ColumnIndex::new(x);
    boost_binary(&index, &yf, None, cfg)
}

/// Softmax boosted-tree ensemble; round `r` adds tree `r` of every class.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtMulticlassModel {
    trees: Vec<Vec<DecisionTree>>,
    base_scores: Vec<f64>,
    config: TrainConfig,
    n_features: usize,
}

impl GbdtMulticlassModel {
    pub fn from_parts(
        trees: Vec<Vec<DecisionTree>>,
        base_scores: Vec<f64>,
        config: TrainConfig,
        n_features: usize,
    ) -> Result<Self, LearnError> {
        if trees.len() != base_scores.len() || trees.is_empty() {
            return Err(LearnError::LengthMismatch {
                what: "class tree lists",
                expected: base_scores.len(),
                found: trees.len(),
            });
        }
        let rounds = trees[0].len();
        for list in &trees {
            if list.len() != rounds {
                return Err(LearnError::LengthMismatch {
                    what: "trees per class",
                    expected: rounds,
                    found: list.len(),
                });
            }
            for t in list {
                if let Some(f) = t.max_feature() {
                    if f >= n_features {
                        return Err(LearnError::DimensionMismatch {
                            expected: n_features,
                            found: f + 1,
                        });
                    }
                }
            }
        }
        if let Some(i) = base_scores.iter().position(|b| !b.is_finite()) {
            return Err(LearnError::NonFiniteScore { index: i });
        }
        Ok(Self {
            trees,
            base_scores,
            config,
            n_features,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.base_scores.len()
    }

    pub fn n_rounds(&self) -> usize {
        self.trees.first().map_or(0, Vec::len)
    }

    /// Trees of class `k`, one per round.
    pub fn class_trees(&self, k: usize) -> &[DecisionTree] {
        &self.trees[k]
    }

    pub fn base_scores(&self) -> &[f64] {
        &self.base_scores
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_logits(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        check_dim(self.n_features, x.len())?;
        Ok(self
            .trees
            .iter()
            .zip(&self.base_scores)
            .map(|(list, &b)| {
                let mut m = b;
                for t in list {
                    m += t.predict(x);
                }
                m
            })
            .collect())
    }

    /// Argmax class (lowest index on ties) and the raw logits.
    pub fn predict_class(&self, x: &[f64]) -> Result<(usize, Vec<f64>), LearnError> {
        let logits = self.predict_logits(x)?;
        Ok((argmax(&logits), logits))
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        Ok(softmax(&self.predict_logits(x)?))
    }
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Fits a softmax boosted-tree ensemble on labels in `[0, n_classes)`.
pub fn fit_multiclass(
    x: &FeatureMatrix,
    y: &[u32],
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<GbdtMulticlassModel, LearnError> {
    fit_multiclass_traced(x, y, n_classes, cfg).map(|(m, _)| m)
}

/// Like [`fit_multiclass`], also returning the mean training loss before the
/// first round and after each round.
pub fn fit_multiclass_traced(
    x: &FeatureMatrix,
    y: &[u32],
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<(GbdtMulticlassModel, Vec<f64>), LearnError> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(LearnError::EmptyInput);
    }
    if n_classes == 0 {
        return Err(LearnError::InvalidConfig("n_classes must be at least 1"));
    }
    if y.len() != x.n_rows() {
        return Err(LearnError::LengthMismatch {
            what: "labels",
            expected: x.n_rows(),
            found: y.len(),
        });
    }
    if let Some(row) = y.iter().position(|&c| c as usize >= n_classes) {
        return Err(LearnError::InvalidLabel {
            row,
            value: y[row] as f64,
        });
    }
    let index = ColumnIndex::new(x);
    let k_all = n_classes;
    let n = x.n_rows();
    let labels: Vec<usize> = y.iter().map(|&c| c as usize).collect();
    let mut grower = Grower::new(&index, cfg.tree_params(), None);
    let base_scores = alloc::vec![0.0; k_all];
    let mut margin = alloc::vec![0.0f64; n * k_all];
    let mut delta = alloc::vec![0.0f64; n * k_all];
    let mut prob = alloc::vec![0.0f64; n * k_all];
    let mut gh = alloc::vec![[0.0f64; 2]; n];
    let mut trial = alloc::vec![0.0f64; k_all];
    let mut loss: f64 = (0..n)
        .map(|r| softmax_loss(&margin[r * k_all..(r + 1) * k_all], labels[r]))
        .sum();
    let mut trace = Vec::with_capacity(cfg.n_trees + 1);
    trace.push(loss / n as f64);
    let mut trees: Vec<Vec<DecisionTree>> = (0..k_all).map(|_| Vec::with_capacity(cfg.n_trees)).collect();
    let mut round: Vec<DecisionTree> = Vec::with_capacity(k_all);

    for _ in 0..cfg.n_trees {
        for r in 0..n {
            let p = softmax(&margin[r * k_all..(r + 1) * k_all]);
            prob[r * k_all..(r + 1) * k_all].copy_from_slice(&p);
        }
        round.clear();
        for k in 0..k_all {
            for r in 0..n {
                let p = prob[r * k_all + k];
                let target = if labels[r] == k { 1.0 } else { 0.0 };
                gh[r] = [p - target, p * (1.0 - p)];
            }
            let (tree, leaves) = grower.grow(&gh);
            let order = grower.rows();
            for leaf in &leaves {
                for &r in &order[leaf.start..leaf.end] {
                    delta[r as usize * k_all + k] = leaf.weight;
                }
            }
            round.push(tree);
        }
        let mut scale = cfg.learning_rate;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut new_loss = 0.0;
            for r in 0..n {
                for k in 0..k_all {
                    trial[k] = margin[r * k_all + k] + delta[r * k_all + k] * scale;
                }
                new_loss += softmax_loss(&trial, labels[r]);
            }
            if new_loss <= loss {
                accepted = Some(new_loss);
                break;
            }
            scale *= 0.5;
        }
        let scale = match accepted {
            Some(new_loss) => {
                for (m, d) in margin.iter_mut().zip(&delta) {
                    *m += d * scale;
                }
                loss = new_loss;
                scale
            }
            None => 0.0,
        };
        for (k, tree) in round.drain(..).enumerate() {
            trees[k].push(scale_tree(&tree, scale));
        }
        trace.push(loss / n as f64);
    }
    let model = GbdtMulticlassModel {
        trees,
        base_scores,
        config: *cfg,
        n_features: x.n_cols(),
    };
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small(n_trees: usize, depth: usize) -> TrainConfig {
        TrainConfig {
            n_trees,
            max_depth: depth,
            ..TrainConfig::binary()
        }
    }

    #[test]
    fn separable_four_points() {
        let x = FeatureMatrix::from_vec(1, vec![-1.0, -0.5, 0.5, 1.0]).unwrap();
        let y = [0, 0, 1, 1];
        let cfg = TrainConfig {
            min_child_hessian: 0.0,
            ..small(10, 1)
        };
        let m = fit_binary(&x, &y, &cfg).unwrap();
        assert_eq!(m.trees().len(), 10);
        for (row, &label) in x.rows().zip(&y) {
            let p = m.predict_proba(row).unwrap();
            assert_eq!(p > 0.5, label == 1, "p = {p}");
        }
    }

    #[test]
    fn conflicting_duplicates_stay_at_half() {
        let x = FeatureMatrix::from_vec(1, vec![3.0; 10]).unwrap();
        let y = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let m = fit_binary(&x, &y, &small(20, 6)).unwrap();
        assert_eq!(m.base_score(), 0.0);
        assert!((m.predict_proba(&[3.0]).unwrap() - 0.5).abs() <= 1e-6);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = FeatureMatrix::from_vec(1, vec![0.0, 1.0]).unwrap();
        assert_eq!(fit_binary(&x, &[1, 1], &small(5, 2)), Err(LearnError::DegenerateLabels));
        assert!(matches!(
            fit_binary(&x, &[0, 2], &small(5, 2)),
            Err(LearnError::InvalidLabel { row: 1, .. })
        ));
    }

    #[test]
    fn empty_ensemble_balanced_prior_is_half() {
        let x = FeatureMatrix::from_vec(1, vec![0.0, 1.0]).unwrap();
        let m = fit_binary(&x, &[0, 1], &small(0, 2)).unwrap();
        assert_eq!(m.predict_proba(&[0.3]).unwrap(), 0.5);
        assert!(matches!(m.predict_proba(&[0.3, 1.0]), Err(LearnError::DimensionMismatch { .. })));
    }

    #[test]
    fn clamped_sigmoid_bounds() {
        assert_eq!(sigmoid(f64::INFINITY), sigmoid(30.0));
        assert_eq!(sigmoid(-1e300), sigmoid(-30.0));
        assert!(sigmoid(30.0) < 1.0);
        assert!(sigmoid(-30.0) > 0.0);
        assert!(sigmoid(-30.0) >= 9e-14);
    }

    #[test]
    fn single_leaf_model_is_sigmoid_of_weight() {
        let m = GbdtBinaryModel::from_parts(vec![DecisionTree::leaf(0.7)], 0.0, small(1, 1), 2).unwrap();
        assert_eq!(m.predict_proba(&[1.0, 2.0]).unwrap(), sigmoid(0.7));
    }

    #[test]
    fn logistic_loss_matches_direct_formula() {
        for &(m, y) in &[(0.0, 0.0), (2.0, 1.0), (-3.0, 1.0), (5.0, 0.0)] {
            let p: f64 = 1.0 / (1.0 + libm::exp(-m));
            let direct = -(y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p));
            assert!((logistic_loss(m, y) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn training_loss_never_increases() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..200u32 {
            let a = ((i * 37) % 101) as f64 / 101.0;
            let b = ((i * 11) % 13) as f64;
            rows.push([a, b]);
            y.push(u8::from(a + 0.05 * b > 0.7 || i % 17 == 0));
        }
        let x = FeatureMatrix::from_rows(2, &rows).unwrap();
        let (_, trace) = fit_binary_traced(&x, &y, &small(50, 3)).unwrap();
        assert_eq!(trace.len(), 51);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(trace[50] < trace[0]);
    }

    #[test]
    fn multiclass_single_class_predicts_it() {
        let x = FeatureMatrix::from_vec(1, vec![0.0, 1.0, 2.0]).unwrap();
        let m = fit_multiclass(&x, &[2, 2, 2], 4, &small(5, 2)).unwrap();
        for v in [-5.0, 0.5, 9.0] {
            assert_eq!(m.predict_class(&[v]).unwrap().0, 2);
        }
    }

    #[test]
    fn zero_round_multiclass_ties_to_class_zero() {
        let x = FeatureMatrix::from_vec(1, vec![0.0, 1.0]).unwrap();
        let m = fit_multiclass(&x, &[1, 2], 3, &small(0, 2)).unwrap();
        let (c, logits) = m.predict_class(&[0.0]).unwrap();
        assert_eq!(c, 0);
        assert_eq!(logits, vec![0.0; 3]);
    }

    #[test]
    fn two_class_softmax_agrees_with_logistic() {
        let x = FeatureMatrix::from_vec(1, vec![-1.0, -0.5, 0.5, 1.0]).unwrap();
        let cfg = TrainConfig {
            min_child_hessian: 0.0,
            ..small(10, 1)
        };
        let bin = fit_binary(&x, &[0, 0, 1, 1], &cfg).unwrap();
        let multi = fit_multiclass(&x, &[0, 0, 1, 1], 2, &cfg).unwrap();
        for v in [-2.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0, 2.0] {
            let b = bin.predict_proba(&[v]).unwrap() >= 0.5;
            let m = multi.predict_class(&[v]).unwrap().0 == 1;
            assert_eq!(b, m, "at {v}");
        }
    }

    #[test]
    fn multiclass_loss_never_increases() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..150u32 {
            let a = ((i * 29) % 97) as f64;
            rows.push([a, (i % 5) as f64]);
            y.push(((a as u32) / 33 + (i % 7 == 0) as u32) % 3);
        }
        let x = FeatureMatrix::from_rows(2, &rows).unwrap();
        let (m, trace) = fit_multiclass_traced(&x, &y, 3, &small(30, 3)).unwrap();
        assert_eq!(m.n_rounds(), 30);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
