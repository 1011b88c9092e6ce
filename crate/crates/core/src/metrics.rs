//! Evaluation: panoptic quality, recognition & localization accuracy, edge
//! grouping metrics and reliability of probabilities.
//!
//! Predictions and ground truth are lists of [`LabeledInstance`] with
//! pairwise disjoint face sets. Class exclusion drops whole instances from both
//! sides before anything is counted. Dataset-level scores sum the raw counts
//! over parts and divide once at the end; see [`PanopticAccumulator`].

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("IoU of an empty face set")]
    EmptySet,
    #[error("{side} instances do not partition the faces: face {face} appears twice")]
    OverlappingInstances { side: &'static str, face: u32 },
    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("empty input")]
    EmptyInput,
    #[error("n_bins must be positive")]
    NoBins,
    #[error("probability {value} at index {index} is outside [0, 1]")]
    InvalidProbability { index: usize, value: f64 },
}

/// A face set with a class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledInstance {
    pub faces: Vec<u32>,
    pub class: u32,
}

impl LabeledInstance {
    pub fn new(mut faces: Vec<u32>, class: u32) -> Self {
        faces.sort_unstable();
        faces.dedup();
        Self { faces, class }
    }
}

fn sorted_unique(s: &[u32]) -> Vec<u32> {
    let mut v = s.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// `|A ∩ B| / |A ∪ B|`. Duplicates are ignored.
pub fn iou(a: &[u32], b: &[u32]) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let (a, b) = (sorted_unique(a), sorted_unique(b));
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(inter as f64 / (a.len() + b.len() - inter) as f64)
}

/// One-to-one matching between predictions and ground truth. Indices refer
/// to the input lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchResult {
    /// (prediction, ground truth, IoU), ordered by prediction index.
    pub tp: Vec<(usize, usize, f64)>,
    pub fp: Vec<usize>,
    pub fn_: Vec<usize>,
}

fn face_owner(side: &'static str, instances: &[LabeledInstance]) -> Result<BTreeMap<u32, usize>, MetricsError> {
    let mut owner = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        for &f in &inst.faces {
            if owner.insert(f, i).is_some() {
                return Err(MetricsError::OverlappingInstances { side, face: f });
            }
        }
    }
    Ok(owner)
}

/// Matches predictions to ground truth: a pair is a true positive when the
/// classes agree and IoU > 0.5. Instances whose class is in `exclude` are
/// dropped from both sides.
///
/// Instances within each list must be disjoint. Because of that, IoU > 0.5
/// admits at most one partner per instance and the matching is unique.
pub fn match_instances(
    preds: &[LabeledInstance],
    gts: &[LabeledInstance],
    exclude: &[u32],
) -> Result<MatchResult, MetricsError> {
    face_owner("predicted", preds)?;
    let owner_g = face_owner("ground-truth", gts)?;
    let kept_p: Vec<usize> = (0..preds.len()).filter(|&i| !exclude.contains(&preds[i].class)).collect();
    let kept_g: Vec<usize> = (0..gts.len()).filter(|&i| !exclude.contains(&gts[i].class)).collect();
    let mut g_matched = alloc::vec![false; gts.len()];
    let mut result = MatchResult::default();
    for &p in &kept_p {
        let pred = &preds[p];
        // intersections with every ground-truth instance the prediction touches
        let mut overlap: BTreeMap<usize, usize> = BTreeMap::new();
        for f in &pred.faces {
            if let Some(&g) = owner_g.get(f) {
                *overlap.entry(g).or_insert(0) += 1;
            }
        }
        let mut partner = None;
        for (&g, &inter) in &overlap {
            let gt = &gts[g];
            if exclude.contains(&gt.class) || gt.class != pred.class {
                continue;
            }
            let value = inter as f64 / (pred.faces.len() + gt.faces.len() - inter) as f64;
            if value > 0.5 {
                partner = Some((g, value));
                break;
            }
        }
        match partner {
            Some((g, value)) => {
                g_matched[g] = true;
                result.tp.push((p, g, value));
            }
            None => result.fp.push(p),
        }
    }
    result.fn_ = kept_g.into_iter().filter(|&g| !g_matched[g]).collect();
    Ok(result)
}

/// Raw panoptic counts; additive across parts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PqCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub iou_sum: f64,
}

impl PqCounts {
    pub fn add(&mut self, other: &PqCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.iou_sum += other.iou_sum;
    }

    /// `(pq, sq, rq)`. With no instances at all every score is 1; with
    /// errors but no true positive every score is 0.
    pub fn scores(&self) -> (f64, f64, f64) {
        if self.tp == 0 {
            return if self.fp + self.fn_ == 0 {
                (1.0, 1.0, 1.0)
            } else {
                (0.0, 0.0, 0.0)
            };
        }
        let tp = self.tp as f64;
        let denom = tp + 0.5 * self.fp as f64 + 0.5 * self.fn_ as f64;
        let sq = self.iou_sum / tp;
        let rq = tp / denom;
        (self.iou_sum / denom, sq, rq)
    }
}

/// Scores for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPq {
    pub class: u32,
    pub counts: PqCounts,
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
}

/// Panoptic quality with its decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct PqReport {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub counts: PqCounts,
    /// Classes that occur on either side, ascending.
    pub per_class: Vec<ClassPq>,
    pub excluded: Vec<u32>,
}

fn report(counts: PqCounts, per_class: &BTreeMap<u32, PqCounts>, exclude: &[u32]) -> PqReport {
    let (pq, sq, rq) = counts.scores();
    let mut excluded = exclude.to_vec();
    excluded.sort_unstable();
    excluded.dedup();
    PqReport {
        pq,
        sq,
        rq,
        counts,
        per_class: per_class
            .iter()
            .map(|(&class, c)| {
                let (pq, sq, rq) = c.scores();
                ClassPq {
                    class,
                    counts: *c,
                    pq,
                    sq,
                    rq,
                }
            })
            .collect(),
        excluded,
    }
}

/// PQ of a single part.
pub fn panoptic_quality(
    preds: &[LabeledInstance],
    gts: &[LabeledInstance],
    exclude: &[u32],
) -> Result<PqReport, MetricsError> {
    let mut acc = PanopticAccumulator::new(exclude);
    acc.add_part(preds, gts)?;
    Ok(acc.pq())
}

/// Fraction of non-excluded ground-truth instances that some prediction
/// reproduces exactly, faces and class. 1 when there are none.
pub fn recognition_localization_accuracy(
    preds: &[LabeledInstance],
    gts: &[LabeledInstance],
    exclude: &[u32],
) -> Result<f64, MetricsError> {
    let mut acc = PanopticAccumulator::new(exclude);
    acc.add_part(preds, gts)?;
    Ok(acc.rl_accuracy())
}

/// Per-part scores kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PartScore {
    pub counts: PqCounts,
    pub pq: f64,
    pub rl_recovered: usize,
    pub rl_total: usize,
}

/// Dataset-level PQ and RL accuracy from counts summed over parts in
/// insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct PanopticAccumulator {
    exclude: Vec<u32>,
    counts: PqCounts,
    per_class: BTreeMap<u32, PqCounts>,
    rl_recovered: usize,
    rl_total: usize,
}

impl PanopticAccumulator {
    pub fn new(exclude: &[u32]) -> Self {
        Self {
            exclude: exclude.to_vec(),
            counts: PqCounts::default(),
            per_class: BTreeMap::new(),
            rl_recovered: 0,
            rl_total: 0,
        }
    }

    pub fn add_part(&mut self, preds: &[LabeledInstance], gts: &[LabeledInstance]) -> Result<PartScore, MetricsError> {
        let m = match_instances(preds, gts, &self.exclude)?;
        let mut part = PqCounts::default();
        for &(p, _, value) in &m.tp {
            part.tp += 1;
            part.iou_sum += value;
            let c = self.per_class.entry(preds[p].class).or_default();
            c.tp += 1;
            c.iou_sum += value;
        }
        for &p in &m.fp {
            part.fp += 1;
            self.per_class.entry(preds[p].class).or_default().fp += 1;
        }
        for &g in &m.fn_ {
            part.fn_ += 1;
            self.per_class.entry(gts[g].class).or_default().fn_ += 1;
        }
        self.counts.add(&part);

        let rl_total = gts.iter().filter(|g| !self.exclude.contains(&g.class)).count();
        // an exact reproduction has IoU 1 and equal class, so it is a TP
        let rl_recovered = m
            .tp
            .iter()
            .filter(|&&(p, g, _)| preds[p].faces == gts[g].faces)
            .count();
        self.rl_total += rl_total;
        self.rl_recovered += rl_recovered;
        Ok(PartScore {
            counts: part,
            pq: part.scores().0,
            rl_recovered,
            rl_total,
        })
    }

    pub fn counts(&self) -> PqCounts {
        self.counts
    }

    pub fn pq(&self) -> PqReport {
        report(self.counts, &self.per_class, &self.exclude)
    }

    pub fn rl_accuracy(&self) -> f64 {
        if self.rl_total == 0 {
            1.0
        } else {
            self.rl_recovered as f64 / self.rl_total as f64
        }
    }

    pub fn rl_counts(&self) -> (usize, usize) {
        (self.rl_recovered, self.rl_total)
    }
}

/// Binary confusion counts with positive class 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// Accuracy, precision, recall and F1 for the positive class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
}

impl ConfusionCounts {
    pub fn from_labels(pred: &[u8], truth: &[u8]) -> Result<Self, MetricsError> {
        if pred.len() != truth.len() {
            return Err(MetricsError::LengthMismatch {
                what: "edge predictions",
                expected: truth.len(),
                found: pred.len(),
            });
        }
        let mut c = Self::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (p != 0, t != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Metrics from the counts. Precision or recall with a zero denominator
    /// is 0, and F1 is 0 when both are.
    pub fn metrics(&self) -> Result<EdgeMetrics, MetricsError> {
        if self.total() == 0 {
            return Err(MetricsError::EmptyInput);
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Ok(EdgeMetrics {
            accuracy: ratio(self.tp + self.tn, self.total()),
            precision,
            recall,
            f1,
            counts: *self,
        })
    }
}

pub fn edge_binary_metrics(pred: &[u8], truth: &[u8]) -> Result<EdgeMetrics, MetricsError> {
    ConfusionCounts::from_labels(pred, truth)?.metrics()
}

/// One equal-width probability bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// 0 for empty bins.
    pub mean_prob: f64,
    pub mean_label: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub ece: f64,
    pub bins: Vec<ReliabilityBin>,
}

/// Expected calibration error over `n_bins` equal-width bins of `[0, 1]`.
/// Bin `b` holds `[b/n, (b+1)/n)`, and the last bin also holds 1.
pub fn calibration_report(probs: &[f64], labels: &[u8], n_bins: usize) -> Result<CalibrationReport, MetricsError> {
    if probs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if labels.len() != probs.len() {
        return Err(MetricsError::LengthMismatch {
            what: "labels",
            expected: probs.len(),
            found: labels.len(),
        });
    }
    if n_bins == 0 {
        return Err(MetricsError::NoBins);
    }
    if let Some(index) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(MetricsError::InvalidProbability {
            index,
            value: probs[index],
        });
    }
    let mut sums = alloc::vec![(0usize, 0.0f64, 0.0f64); n_bins];
    for (&p, &y) in probs.iter().zip(labels) {
        let b = ((p * n_bins as f64) as usize).min(n_bins - 1);
        sums[b].0 += 1;
        sums[b].1 += p;
        sums[b].2 += if y != 0 { 1.0 } else { 0.0 };
    }
    let n = probs.len() as f64;
    let mut ece = 0.0;
    let bins = sums
        .iter()
        .enumerate()
        .map(|(b, &(count, ps, ys))| {
            let (mean_prob, mean_label) = if count == 0 {
                (0.0, 0.0)
            } else {
                (ps / count as f64, ys / count as f64)
            };
            ece += count as f64 / n * libm::fabs(mean_prob - mean_label);
            ReliabilityBin {
                lower: b as f64 / n_bins as f64,
                upper: (b + 1) as f64 / n_bins as f64,
                count,
                mean_prob,
                mean_label,
            }
        })
        .collect();
    Ok(CalibrationReport { ece, bins })
}
