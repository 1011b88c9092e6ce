//! Training, inference and evaluation over many parts.
//!
//! Per-part work (feature enrichment, inference, matching) runs on the
//! current rayon pool; results are gathered in part order so every output is
//! independent of the thread count.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};
use std::time::Instant;

use pafr_core::graph::{binary_edge_labels, truth_instances, LabelError};
use pafr_core::learner::CalibratedBinaryClassifier;
use pafr_core::metrics::{
    calibration_report, ConfusionCounts, LabeledInstance, MetricsError, PanopticAccumulator,
};
use pafr_core::pipeline::{
    infer, predict_boundaries, train_instance_stage_from_rows, train_semantic_stage_from_rows,
    training_summary, EdgeDataset, PipelineConfig, PipelineError, SemanticDataset,
};
use pafr_core::{PanopticPrediction, PartGraph, PipelineModel, PredictedInstance};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{
    class_rows, Calibration, ClassCount, Counts, EdgeSummary, EvalReport, PartRow, StageTimings,
    TrainReport, TrainSettings,
};

/// Bins used for every reported expected calibration error.
pub const ECE_BINS: usize = 10;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("part `{part}`: {source}")]
    Label { part: String, source: LabelError },
    #[error("no prediction for part `{0}`")]
    MissingPrediction(String),
    #[error("{0} predictions for {1} parts")]
    PredictionCount(usize, usize),
    #[error("prediction for part `{part}` does not partition its {n_faces} faces")]
    NotPartition { part: String, n_faces: usize },
    #[error("predictions line {line}: {message}")]
    PredictionParse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A trained model with its diagnostics.
pub struct Trained {
    pub model: PipelineModel,
    pub report: TrainReport,
}

fn collect_ordered<T: Send, E: Send>(items: Vec<Result<T, E>>) -> Result<Vec<T>, E> {
    items.into_iter().collect()
}

/// Trains both stages, enriching parts in parallel.
pub fn train(parts: &[PartGraph], class_names: &[String], cfg: &PipelineConfig) -> Result<Trained, RunError> {
    let t0 = Instant::now();
    let per_part = collect_ordered(parts.par_iter().map(EdgeDataset::from_part).collect())?;
    let mut edges = EdgeDataset::new(parts.first().map_or(0, |g| g.schema().d_edge));
    for ds in per_part {
        edges.append(ds)?;
    }
    let features_s = t0.elapsed().as_secs_f64();
    log::info!("enriched {} edges from {} parts in {features_s:.2} s", edges.y.len(), parts.len());

    let t1 = Instant::now();
    let (boundary, oof) = train_instance_stage_from_rows(&edges, &cfg.boundary)?;
    let boundary_s = t1.elapsed().as_secs_f64();
    log::info!("boundary stage trained in {boundary_s:.2} s");

    let t2 = Instant::now();
    let rows = semantic_rows(parts, &boundary, cfg)?;
    let semantic = train_semantic_stage_from_rows(&rows, class_names.len(), &cfg.semantic)?;
    let semantic_s = t2.elapsed().as_secs_f64();
    log::info!("semantic stage trained on {} instances in {semantic_s:.2} s", rows.y.len());

    let summary = training_summary(&boundary, parts.len(), &edges, oof, &rows);
    let model = PipelineModel::new(
        boundary,
        semantic,
        cfg.threshold,
        edges.d_edge(),
        class_names.to_vec(),
    )?;
    let ece = |probs: &[f64]| {
        if probs.is_empty() {
            Ok(0.0)
        } else {
            calibration_report(probs, &summary.oof.labels, ECE_BINS).map(|r| r.ece)
        }
    };
    let mut per_class = vec![0usize; class_names.len()];
    for &c in &rows.y {
        per_class[c as usize] += 1;
    }
    let report = TrainReport {
        n_parts: summary.n_parts,
        n_edges: summary.n_edges,
        n_boundary_edges: summary.n_boundary_edges,
        boundary_fraction: if summary.n_edges == 0 {
            0.0
        } else {
            summary.n_boundary_edges as f64 / summary.n_edges as f64
        },
        n_instances: summary.n_instances,
        instances_per_class: class_names
            .iter()
            .zip(per_class)
            .map(|(n, count)| ClassCount {
                class: n.clone(),
                count,
            })
            .collect(),
        split_instances: summary.split_instances.len(),
        oof_ece_raw: ece(&summary.oof.probabilities)?,
        oof_ece_calibrated: ece(&summary.oof_calibrated)?,
        settings: TrainSettings {
            trees_binary: cfg.boundary.n_trees,
            trees_semantic: cfg.semantic.n_trees,
            max_depth: cfg.boundary.max_depth,
            learning_rate: cfg.boundary.learning_rate,
            folds: cfg.boundary.n_folds,
            seed: cfg.boundary.seed,
            threshold: cfg.threshold,
            train_on_predicted: cfg.train_on_predicted,
        },
        timings: StageTimings {
            features_s,
            boundary_s,
            semantic_s,
            total_s: t0.elapsed().as_secs_f64(),
        },
    };
    Ok(Trained { model, report })
}

fn semantic_rows(
    parts: &[PartGraph],
    boundary: &CalibratedBinaryClassifier,
    cfg: &PipelineConfig,
) -> Result<SemanticDataset, PipelineError> {
    let per_part: Vec<Result<SemanticDataset, PipelineError>> = parts
        .par_iter()
        .map(|g| {
            if cfg.train_on_predicted {
                let (keep, _) = predict_boundaries(boundary, g, cfg.threshold)?;
                SemanticDataset::from_predicted(g, &keep)
            } else {
                SemanticDataset::from_truth(g)
            }
        })
        .collect();
    let mut rows = SemanticDataset::new();
    for ds in collect_ordered(per_part)? {
        rows.append(ds)?;
    }
    Ok(rows)
}

/// Runs the pipeline on every part, preserving order.
pub fn infer_parts(model: &PipelineModel, parts: &[PartGraph]) -> Result<Vec<PanopticPrediction>, PipelineError> {
    collect_ordered(parts.par_iter().map(|g| infer(model, g)).collect())
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub part_id: String,
    pub instances: Vec<InstanceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRecord {
    pub faces: Vec<u32>,
    pub class: u32,
    pub class_name: String,
    pub confidence: f64,
}

impl PredictionRecord {
    pub fn new(p: &PanopticPrediction, class_names: &[String]) -> Self {
        Self {
            part_id: p.part_id.clone(),
            instances: p
                .instances
                .iter()
                .map(|i| InstanceRecord {
                    faces: i.faces.clone(),
                    class: i.class,
                    class_name: class_names.get(i.class as usize).cloned().unwrap_or_default(),
                    confidence: i.confidence,
                })
                .collect(),
        }
    }

    /// A prediction carrying instances only; edge vectors are empty.
    pub fn into_prediction(self) -> PanopticPrediction {
        PanopticPrediction {
            part_id: self.part_id,
            instances: self
                .instances
                .into_iter()
                .map(|i| PredictedInstance {
                    faces: i.faces,
                    class: i.class,
                    confidence: i.confidence,
                })
                .collect(),
            edge_probs: Vec::new(),
            edge_keep: Vec::new(),
        }
    }
}

pub fn write_predictions<W: Write>(w: &mut W, preds: &[PanopticPrediction], class_names: &[String]) -> io::Result<()> {
    for p in preds {
        serde_json::to_writer(&mut *w, &PredictionRecord::new(p, class_names))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_predictions<R: BufRead>(input: R) -> Result<Vec<PanopticPrediction>, RunError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(&line).map_err(|e| RunError::PredictionParse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec.into_prediction());
    }
    Ok(out)
}

/// Pairs predictions with parts by id, in part order.
pub fn align_predictions(
    parts: &[PartGraph],
    preds: Vec<PanopticPrediction>,
) -> Result<Vec<PanopticPrediction>, RunError> {
    if preds.len() != parts.len() {
        return Err(RunError::PredictionCount(preds.len(), parts.len()));
    }
    let mut by_id: HashMap<String, PanopticPrediction> = preds.into_iter().map(|p| (p.part_id.clone(), p)).collect();
    parts
        .iter()
        .map(|g| {
            by_id
                .remove(g.part_id())
                .ok_or_else(|| RunError::MissingPrediction(g.part_id().to_string()))
        })
        .collect()
}

struct PartEval {
    truth: Vec<LabeledInstance>,
    preds: Vec<LabeledInstance>,
    edge_truth: Vec<u8>,
}

fn part_eval(g: &PartGraph, p: &PanopticPrediction) -> Result<PartEval, RunError> {
    let label_err = |source| RunError::Label {
        part: g.part_id().to_string(),
        source,
    };
    let truth = truth_instances(g)
        .map_err(label_err)?
        .instances
        .into_iter()
        .map(|t| LabeledInstance::new(t.faces, t.class))
        .collect();
    let mut cover = vec![0u32; g.n_faces()];
    for inst in &p.instances {
        for &f in &inst.faces {
            match cover.get_mut(f as usize) {
                Some(c) => *c += 1,
                None => {
                    return Err(RunError::NotPartition {
                        part: g.part_id().to_string(),
                        n_faces: g.n_faces(),
                    })
                }
            }
        }
    }
    if cover.iter().any(|&c| c != 1) {
        return Err(RunError::NotPartition {
            part: g.part_id().to_string(),
            n_faces: g.n_faces(),
        });
    }
    Ok(PartEval {
        truth,
        preds: p
            .instances
            .iter()
            .map(|i| LabeledInstance::new(i.faces.clone(), i.class))
            .collect(),
        edge_truth: binary_edge_labels(g).map_err(label_err)?,
    })
}

/// Class indices whose name is `stock`.
pub fn stock_classes(class_names: &[String]) -> Vec<u32> {
    class_names
        .iter()
        .enumerate()
        .filter(|(_, n)| n.as_str() == "stock")
        .map(|(i, _)| i as u32)
        .collect()
}

/// Scores predictions against the parts' ground truth. Edge metrics and
/// ECE are computed only when every prediction carries edge vectors.
pub fn evaluate(
    parts: &[PartGraph],
    preds: &[PanopticPrediction],
    class_names: &[String],
    exclude: &[u32],
) -> Result<EvalReport, RunError> {
    if preds.len() != parts.len() {
        return Err(RunError::PredictionCount(preds.len(), parts.len()));
    }
    let evals = collect_ordered(
        parts
            .par_iter()
            .zip(preds.par_iter())
            .map(|(g, p)| part_eval(g, p))
            .collect(),
    )?;
    let stock = stock_classes(class_names);
    let mut acc = PanopticAccumulator::new(exclude);
    let mut acc_stock = PanopticAccumulator::new(&stock);
    let mut per_part = Vec::with_capacity(parts.len());
    for (g, e) in parts.iter().zip(&evals) {
        let score = acc.add_part(&e.preds, &e.truth)?;
        acc_stock.add_part(&e.preds, &e.truth)?;
        per_part.push(PartRow {
            part_id: g.part_id().to_string(),
            pq: score.pq,
            counts: Counts::from(&score.counts),
            rl_recovered: score.rl_recovered,
            rl_total: score.rl_total,
        });
    }
    let with_edges = preds
        .iter()
        .zip(parts)
        .all(|(p, g)| p.edge_keep.len() == g.n_edges() && p.edge_probs.len() == g.n_edges());
    let (edge, calibration) = if with_edges && !parts.is_empty() {
        let mut conf = ConfusionCounts::default();
        let mut probs = Vec::new();
        let mut labels = Vec::new();
        for (p, e) in preds.iter().zip(&evals) {
            conf.add(&ConfusionCounts::from_labels(&p.edge_keep, &e.edge_truth)?);
            probs.extend_from_slice(&p.edge_probs);
            labels.extend_from_slice(&e.edge_truth);
        }
        if probs.is_empty() {
            (None, None)
        } else {
            let cal = calibration_report(&probs, &labels, ECE_BINS)?;
            (Some(EdgeSummary::from(&conf.metrics()?)), Some(Calibration::from(&cal)))
        }
    } else {
        (None, None)
    };
    let pq = acc.pq();
    let (rl_recovered, rl_total) = acc.rl_counts();
    Ok(EvalReport {
        n_parts: parts.len(),
        excluded_classes: exclude
            .iter()
            .map(|&c| class_names.get(c as usize).cloned().unwrap_or_else(|| c.to_string()))
            .collect(),
        pq: pq.pq,
        sq: pq.sq,
        rq: pq.rq,
        counts: Counts::from(&pq.counts),
        pq_excl_stock: acc_stock.pq().pq,
        rl_acc: acc.rl_accuracy(),
        rl_recovered,
        rl_total,
        per_class: class_rows(&pq, class_names),
        edge,
        calibration,
        per_part,
    })
}
