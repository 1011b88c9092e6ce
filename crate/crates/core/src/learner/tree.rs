use alloc::vec::Vec;

use super::column::{ColumnIndex, Grower};
use super::matrix::FeatureMatrix;
use super::LearnError;

/// Per-tree growth parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub lambda_l2: f64,
    pub min_child_hessian: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 6,
            lambda_l2: 1.0,
            min_child_hessian: 1.0,
        }
    }
}

/// A node of a flat tree. Children are indices into the node array.
///
/// A row goes left iff `x[feature] < threshold`; `NaN` goes left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        weight: f64,
    },
}

/// Regression tree stored breadth-first with the root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// Single-leaf tree.
    pub fn leaf(weight: f64) -> Self {
        Self {
            nodes: alloc::vec![TreeNode::Leaf { weight }],
        }
    }

    /// Builds a tree from raw nodes, checking that every child index points
    /// forward and inside the array so evaluation always terminates.
    pub fn try_from_nodes(nodes: Vec<TreeNode>) -> Option<Self> {
        if nodes.is_empty() {
            return None;
        }
        for (i, node) in nodes.iter().enumerate() {
            if let TreeNode::Split { left, right, .. } = *node {
                let (l, r) = (left as usize, right as usize);
                if l <= i || r <= i || l >= nodes.len() || r >= nodes.len() {
                    return None;
                }
            }
        }
        Some(Self { nodes })
    }

    pub(crate) fn from_nodes(nodes: Vec<TreeNode>) -> Self {
        debug_assert!(Self::try_from_nodes(nodes.clone()).is_some());
        Self { nodes }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, left as usize).max(walk(nodes, right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    /// Largest feature index referenced by a split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature as usize),
                TreeNode::Leaf { .. } => None,
            })
            .max()
    }

    /// Raw leaf weight reached by `x`. The caller guarantees `x` is wide
    /// enough for every referenced feature.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { weight } => return weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = x[feature as usize];
                    i = if v.is_nan() || v < threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }
}

pub(crate) fn check_grad_hess(n_rows: usize, grad: &[f64], hess: &[f64]) -> Result<(), LearnError> {
    if n_rows == 0 {
        return Err(LearnError::EmptyInput);
    }
    if grad.len() != n_rows {
        return Err(LearnError::LengthMismatch {
            what: "gradient",
            expected: n_rows,
            found: grad.len(),
        });
    }
    if hess.len() != n_rows {
        return Err(LearnError::LengthMismatch {
            what: "hessian",
            expected: n_rows,
            found: hess.len(),
        });
    }
    for (row, (&g, &h)) in grad.iter().zip(hess).enumerate() {
        if !g.is_finite() {
            return Err(LearnError::NonFiniteScore { index: row });
        }
        if !(h >= 0.0) || !h.is_finite() {
            return Err(LearnError::NegativeHessian { row });
        }
    }
    Ok(())
}

/// Fits one regression tree by exact greedy second-order split search.
///
/// Leaf weights are the unscaled `-G / (H + λ)`.
pub fn fit_tree(
    x: &FeatureMatrix,
    grad: &[f64],
    hess: &[f64],
    params: &TreeParams,
) -> Result<DecisionTree, LearnError> {
    check_grad_hess(x.n_rows(), grad, hess)?;
    let index = ColumnIndex::new(x);
    let mut grower = Grower::new(&index, *params, None);
    let gh: Vec<[f64; 2]> = grad.iter().zip(hess).map(|(&g, &h)| [g, h]).collect();
    Ok(grower.grow(&gh).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn col(values: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_vec(1, values.to_vec()).unwrap()
    }

    fn unregularized(depth: usize) -> TreeParams {
        TreeParams {
            max_depth: depth,
            lambda_l2: 0.0,
            min_child_hessian: 0.0,
        }
    }

    #[test]
    fn zero_gradient_gives_single_zero_leaf() {
        let x = col(&[0.0, 1.0, 2.0, 3.0]);
        let t = fit_tree(&x, &[0.0; 4], &[1.0; 4], &TreeParams::default()).unwrap();
        assert_eq!(t.nodes(), &[TreeNode::Leaf { weight: 0.0 }]);
    }

    #[test]
    fn two_point_split_at_midpoint() {
        let x = col(&[0.0, 1.0]);
        let t = fit_tree(&x, &[-1.0, 1.0], &[1.0, 1.0], &unregularized(1)).unwrap();
        assert_eq!(
            t.nodes(),
            &[
                TreeNode::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2
                },
                TreeNode::Leaf { weight: 1.0 },
                TreeNode::Leaf { weight: -1.0 },
            ]
        );
    }

    #[test]
    fn constant_column_is_never_split() {
        let x = FeatureMatrix::from_rows(2, &[[5.0, 0.0], [5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]).unwrap();
        let t = fit_tree(&x, &[-1.0, -1.0, 1.0, 1.0], &[1.0; 4], &unregularized(3)).unwrap();
        for n in t.nodes() {
            if let TreeNode::Split { feature, .. } = n {
                assert_eq!(*feature, 1);
            }
        }
        assert_eq!(t.predict(&[5.0, 0.0]), 1.0);
        assert_eq!(t.predict(&[5.0, 3.0]), -1.0);
    }

    #[test]
    fn nan_goes_left() {
        let x = col(&[f64::NAN, f64::NAN, 1.0, 2.0]);
        let t = fit_tree(&x, &[-1.0, -1.0, 1.0, 1.0], &[1.0; 4], &unregularized(1)).unwrap();
        assert_eq!(t.predict(&[f64::NAN]), 1.0);
        assert_eq!(t.predict(&[1.5]), -1.0);
        assert_eq!(t.predict(&[-100.0]), 1.0);
    }

    #[test]
    fn min_child_hessian_blocks_small_children() {
        let x = col(&[0.0, 1.0, 2.0]);
        let p = TreeParams {
            max_depth: 2,
            lambda_l2: 0.0,
            min_child_hessian: 2.0,
        };
        let t = fit_tree(&x, &[-1.0, 1.0, 1.0], &[1.0; 3], &p).unwrap();
        assert_eq!(t.n_leaves(), 1);
    }

    #[test]
    fn depth_is_bounded() {
        let xs: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let g: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let t = fit_tree(&col(&xs), &g, &[1.0; 64], &unregularized(3)).unwrap();
        assert!(t.depth() <= 3);
    }

    #[test]
    fn threshold_between_extreme_values() {
        let x = col(&[f64::MIN, f64::MAX]);
        let t = fit_tree(&x, &[-1.0, 1.0], &[1.0, 1.0], &unregularized(1)).unwrap();
        assert_eq!(t.predict(&[f64::MIN]), 1.0);
        assert_eq!(t.predict(&[f64::MAX]), -1.0);
        let x = col(&[1.0, f64::from_bits(1.0f64.to_bits() + 1)]);
        let t = fit_tree(&x, &[-1.0, 1.0], &[1.0, 1.0], &unregularized(1)).unwrap();
        assert_eq!(t.predict(&[1.0]), 1.0);
        assert_eq!(t.predict(&[f64::from_bits(1.0f64.to_bits() + 1)]), -1.0);
    }

    #[test]
    fn negative_zero_shares_rank_with_zero() {
        let x = col(&[-0.0, 0.0, 1.0]);
        let t = fit_tree(&x, &[-1.0, -1.0, 1.0], &[1.0; 3], &unregularized(2)).unwrap();
        assert_eq!(t.predict(&[-0.0]), t.predict(&[0.0]));
    }

    #[test]
    fn rejects_bad_input() {
        let x = col(&[0.0, 1.0]);
        assert!(matches!(
            fit_tree(&x, &[0.0], &[1.0, 1.0], &TreeParams::default()),
            Err(LearnError::LengthMismatch { .. })
        ));
        assert!(matches!(
            fit_tree(&x, &[0.0, 0.0], &[1.0, -1.0], &TreeParams::default()),
            Err(LearnError::NegativeHessian { row: 1 })
        ));
        assert_eq!(
            fit_tree(&FeatureMatrix::new(1), &[], &[], &TreeParams::default()),
            Err(LearnError::EmptyInput)
        );
    }

    #[test]
    fn many_distinct_values_use_same_split_as_few() {
        // 5000 distinct values exceed the histogram limit; a subset that
        // fits below it must split at the matching place.
        let n = 5000;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.5).collect();
        let g: Vec<f64> = (0..n).map(|i| if i < 1700 { -1.0 } else { 1.0 }).collect();
        let t = fit_tree(&col(&xs), &g, &vec![1.0; n], &unregularized(1)).unwrap();
        match t.nodes()[0] {
            TreeNode::Split { threshold, .. } => assert_eq!(threshold, 849.75),
            _ => panic!("expected a split"),
        }
        let xs_small: Vec<f64> = xs.iter().step_by(4).copied().collect();
        let g_small: Vec<f64> = g.iter().step_by(4).copied().collect();
        let t = fit_tree(&col(&xs_small), &g_small, &vec![1.0; n / 4], &unregularized(1)).unwrap();
        match t.nodes()[0] {
            TreeNode::Split { threshold, .. } => assert_eq!(threshold, 849.0),
            _ => panic!("expected a split"),
        }
    }
}
