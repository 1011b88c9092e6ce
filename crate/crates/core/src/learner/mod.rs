//! Second-order gradient-boosted decision trees and isotonic calibration.
//!
//! Split search is exact greedy: every candidate threshold is the midpoint
//! between two adjacent distinct values present at the node. All
//! accumulations run in a fixed sequential order, so identical inputs and
//! configuration give bitwise-identical models.

mod calibrated;
mod column;
mod gbdt;
mod isotonic;
mod matrix;
mod tree;

pub use calibrated::{assign_folds, fit_calibrated, fit_calibrated_with_oof, CalibratedBinaryClassifier, OutOfFold};
pub use gbdt::{
    fit_binary, fit_binary_traced, fit_multiclass, fit_multiclass_traced, logistic_loss, sigmoid, softmax,
    GbdtBinaryModel, GbdtMulticlassModel, MARGIN_CLAMP,
};
pub use isotonic::{fit_isotonic, pava, IsotonicModel};
pub use matrix::FeatureMatrix;
pub use tree::{fit_tree, DecisionTree, TreeNode, TreeParams};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("empty training input")]
    EmptyInput,
    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("feature vector has {found} values, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("labels contain a single class; both classes are required")]
    DegenerateLabels,
    #[error("row {row}: label {value} is outside the allowed range")]
    InvalidLabel { row: usize, value: f64 },
    #[error("score {index} is not finite")]
    NonFiniteScore { index: usize },
    #[error("negative hessian at row {row}")]
    NegativeHessian { row: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("{groups} distinct groups cannot fill {folds} folds")]
    TooFewGroups { groups: usize, folds: usize },
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub lambda_l2: f64,
    pub min_child_hessian: f64,
    pub n_folds: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Boundary classifier defaults: 200 trees, depth 6, learning rate 0.1.
    pub fn binary() -> Self {
        Self {
            n_trees: 200,
            max_depth: 6,
            learning_rate: 0.1,
            lambda_l2: 1.0,
            min_child_hessian: 1.0,
            n_folds: 3,
            seed: 0,
        }
    }

    /// Semantic classifier defaults: 400 rounds, depth 6, learning rate 0.1.
    pub fn multiclass() -> Self {
        Self {
            n_trees: 400,
            ..Self::binary()
        }
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            lambda_l2: self.lambda_l2,
            min_child_hessian: self.min_child_hessian,
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        if self.max_depth == 0 {
            return Err(LearnError::InvalidConfig("max_depth must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(LearnError::InvalidConfig("learning_rate must be positive"));
        }
        if !(self.lambda_l2 >= 0.0) || !self.lambda_l2.is_finite() {
            return Err(LearnError::InvalidConfig("lambda_l2 must be non-negative"));
        }
        if !(self.min_child_hessian >= 0.0) || !self.min_child_hessian.is_finite() {
            return Err(LearnError::InvalidConfig("min_child_hessian must be non-negative"));
        }
        if self.n_folds < 2 {
            return Err(LearnError::InvalidConfig("n_folds must be at least 2"));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::binary()
    }
}
