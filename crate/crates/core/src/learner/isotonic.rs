use alloc::vec::Vec;

use super::LearnError;

/// Monotone piecewise-linear map from scores to probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicModel {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

/// Weighted pool-adjacent-violators: the least-squares non-decreasing fit of
/// `values` in the given order. Returns one fitted value per input.
pub fn pava(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len(), "pava: length mismatch");
    // (weighted sum, weight, member count)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v * w, w, 1));
        while blocks.len() >= 2 {
            let (s1, w1, c1) = blocks[blocks.len() - 1];
            let (s0, w0, c0) = blocks[blocks.len() - 2];
            if s0 / w0 > s1 / w1 {
                blocks.pop();
                *blocks.last_mut().unwrap() = (s0 + s1, w0 + w1, c0 + c1);
            } else {
                break;
            }
        }
    }
    let mut fitted = Vec::with_capacity(values.len());
    for (s, w, c) in blocks {
        fitted.extend(core::iter::repeat_n(s / w, c));
    }
    fitted
}

/// Fits an isotonic calibrator with unit weights. Scores that tie are first
/// merged into one point carrying their mean label.
pub fn fit_isotonic(scores: &[f64], labels: &[f64]) -> Result<IsotonicModel, LearnError> {
    if scores.is_empty() {
        return Err(LearnError::EmptyInput);
    }
    if labels.len() != scores.len() {
        return Err(LearnError::LengthMismatch {
            what: "labels",
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(LearnError::NonFiniteScore { index });
    }
    if let Some(row) = labels.iter().position(|l| !(0.0..=1.0).contains(l)) {
        return Err(LearnError::InvalidLabel {
            row,
            value: labels[row],
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));

    let mut xs: Vec<f64> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for &i in &order {
        let s = scores[i];
        if xs.last() == Some(&s) {
            *sums.last_mut().unwrap() += labels[i];
            *weights.last_mut().unwrap() += 1.0;
        } else {
            xs.push(s);
            sums.push(labels[i]);
            weights.push(1.0);
        }
    }
    let means: Vec<f64> = sums.iter().zip(&weights).map(|(s, w)| s / w).collect();
    let fitted = pava(&means, &weights);

    // keep only the ends of each run of equal fitted values
    let mut breakpoints = Vec::new();
    let mut values = Vec::new();
    let n = xs.len();
    for i in 0..n {
        let first = i == 0 || fitted[i - 1] != fitted[i];
        let last = i + 1 == n || fitted[i + 1] != fitted[i];
        if first || last {
            breakpoints.push(xs[i]);
            values.push(fitted[i].clamp(0.0, 1.0));
        }
    }
    Ok(IsotonicModel { breakpoints, values })
}

impl IsotonicModel {
    /// Builds a model from stored arrays. Breakpoints must be finite and
    /// strictly increasing; values non-decreasing within `[0, 1]`.
    pub fn from_parts(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self, LearnError> {
        if breakpoints.is_empty() {
            return Err(LearnError::EmptyInput);
        }
        if breakpoints.len() != values.len() {
            return Err(LearnError::LengthMismatch {
                what: "isotonic values",
                expected: breakpoints.len(),
                found: values.len(),
            });
        }
        if let Some(index) = breakpoints.iter().position(|b| !b.is_finite()) {
            return Err(LearnError::NonFiniteScore { index });
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(LearnError::InvalidConfig("isotonic breakpoints must be strictly increasing"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) || values.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(LearnError::InvalidConfig("isotonic values must be non-decreasing in [0, 1]"));
        }
        Ok(Self { breakpoints, values })
    }

    /// Constant map, used when every calibration label agrees.
    pub fn constant(value: f64) -> Self {
        Self {
            breakpoints: alloc::vec![0.0],
            values: alloc::vec![value.clamp(0.0, 1.0)],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation between breakpoints, clamped to the end values
    /// outside their range. `NaN` maps to the first value.
    pub fn apply(&self, s: f64) -> f64 {
        let bp = &self.breakpoints;
        let vals = &self.values;
        if s.is_nan() {
            return vals[0];
        }
        let i = bp.partition_point(|&b| b <= s);
        if i == 0 {
            return vals[0];
        }
        if i == bp.len() {
            return vals[bp.len() - 1];
        }
        let (lo, hi) = (i - 1, i);
        if bp[lo] == s {
            return vals[lo];
        }
        let t = (s - bp[lo]) / (bp[hi] - bp[lo]);
        (vals[lo] + t * (vals[hi] - vals[lo])).clamp(vals[lo], vals[hi])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn fit_sorted(labels: &[f64]) -> Vec<f64> {
        let scores: Vec<f64> = (0..labels.len()).map(|i| i as f64).collect();
        let m = fit_isotonic(&scores, labels).unwrap();
        scores.iter().map(|&s| m.apply(s)).collect()
    }

    #[test]
    fn monotone_input_is_unchanged() {
        assert_eq!(fit_sorted(&[0.0, 1.0, 1.0]), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn single_violation_is_pooled() {
        assert_eq!(fit_sorted(&[1.0, 0.0, 1.0]), vec![0.5, 0.5, 1.0]);
    }

    #[test]
    fn constant_labels_give_constant_fit() {
        let m = fit_isotonic(&[0.3, 0.1, 0.9, 0.5], &[0.25; 4]).unwrap();
        assert_eq!(m.values(), &[0.25, 0.25]);
        for s in [-1.0, 0.2, 0.7, 3.0] {
            assert_eq!(m.apply(s), 0.25);
        }
    }

    #[test]
    fn tied_scores_are_merged_first() {
        let m = fit_isotonic(&[0.5, 0.5, 0.5, 0.9], &[0.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.apply(0.5), 2.0 / 3.0);
        assert_eq!(m.apply(0.9), 1.0);
    }

    #[test]
    fn apply_clamps_and_interpolates() {
        let m = IsotonicModel::from_parts(vec![1.0, 2.0, 4.0], vec![0.2, 0.4, 0.9]).unwrap();
        assert_eq!(m.apply(0.0), 0.2);
        assert_eq!(m.apply(2.0), 0.4);
        assert!((m.apply(1.5) - 0.3).abs() < 1e-15);
        assert_eq!(m.apply(10.0), 0.9);
        assert_eq!(m.apply(f64::NAN), 0.2);
    }

    #[test]
    fn from_parts_validates() {
        assert!(IsotonicModel::from_parts(vec![1.0, 1.0], vec![0.1, 0.2]).is_err());
        assert!(IsotonicModel::from_parts(vec![1.0, 2.0], vec![0.3, 0.2]).is_err());
        assert!(IsotonicModel::from_parts(vec![], vec![]).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(fit_isotonic(&[], &[]), Err(LearnError::EmptyInput));
        assert!(matches!(
            fit_isotonic(&[0.0, f64::NAN], &[0.0, 1.0]),
            Err(LearnError::NonFiniteScore { index: 1 })
        ));
        assert!(matches!(
            fit_isotonic(&[0.0, 1.0], &[0.0, 1.5]),
            Err(LearnError::InvalidLabel { row: 1, .. })
        ));
    }

    #[test]
    fn breakpoints_are_compressed() {
        let m = fit_isotonic(&[0.0, 1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(m.breakpoints(), &[0.0, 3.0, 4.0]);
        assert_eq!(m.values(), &[0.0, 0.0, 1.0]);
    }
}
