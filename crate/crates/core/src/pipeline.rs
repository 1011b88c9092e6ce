//! Boundary prediction, pruning, connected components and per-instance
//! classification, plus the training orchestration for both stages.
//!
//! The boundary stage scores every edge with a calibrated probability that
//! its two faces belong to the same instance. Edges scoring below the
//! threshold are dropped and the connected components of what remains are the
//! predicted instances. Each instance is then described by its
//! [`InstanceFeatureVector`](crate::attributes::InstanceFeatureVector) and
//! classified by the semantic model.

use alloc::string::String;
use alloc::vec::Vec;

use crate::attributes::{
    edge_feature_len, PartContext, EDGE_FEATURE_SCHEMA_VERSION, INSTANCE_FEATURE_LEN,
    INSTANCE_FEATURE_SCHEMA_VERSION,
};
use crate::dsu::DisjointSets;
use crate::graph::{binary_edge_labels, truth_instances, LabelError, PartGraph};
use crate::learner::{
    fit_calibrated_with_oof, fit_multiclass, softmax, CalibratedBinaryClassifier, FeatureMatrix,
    GbdtMulticlassModel, LearnError, OutOfFold, TrainConfig,
};

/// Default keep threshold on the calibrated same-instance probability.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("part `{part}`: {source}")]
    Label { part: String, source: LabelError },
    #[error("threshold {0} is outside (0, 1)")]
    InvalidThreshold(f64),
    #[error(
        "{stage} feature schema mismatch: model uses version {model_version} ({model_width} values), \
         data gives version {data_version} ({data_width} values)"
    )]
    SchemaMismatch {
        stage: &'static str,
        model_version: u32,
        model_width: usize,
        data_version: u32,
        data_width: usize,
    },
    #[error("part `{part}` has d_E = {found}, expected {expected}")]
    EdgeWidthMismatch { part: String, expected: usize, found: usize },
    #[error("class `{class}` is outside the {n_classes} configured classes")]
    ClassOutOfRange { class: u32, n_classes: usize },
    #[error("model has {model} classes but {names} class names")]
    ClassNameCount { model: usize, names: usize },
    #[error("no training parts")]
    EmptyDataset,
    #[error("face set is empty")]
    EmptyFaceSet,
    #[error("face {face} is outside the {n_faces} faces of the logit matrix")]
    FaceOutOfRange { face: u32, n_faces: usize },
}

fn check_threshold(tau: f64) -> Result<(), PipelineError> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(PipelineError::InvalidThreshold(tau))
    }
}

/// Both fitted stages plus the operating threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel {
    boundary: CalibratedBinaryClassifier,
    semantic: GbdtMulticlassModel,
    threshold: f64,
    d_edge: usize,
    edge_schema_version: u32,
    instance_schema_version: u32,
    class_names: Vec<String>,
}

impl PipelineModel {
    /// Assembles a model for the current feature layouts.
    pub fn new(
        boundary: CalibratedBinaryClassifier,
        semantic: GbdtMulticlassModel,
        threshold: f64,
        d_edge: usize,
        class_names: Vec<String>,
    ) -> Result<Self, PipelineError> {
        Self::from_parts(
            boundary,
            semantic,
            threshold,
            d_edge,
            EDGE_FEATURE_SCHEMA_VERSION,
            INSTANCE_FEATURE_SCHEMA_VERSION,
            class_names,
        )
    }

    /// Assembles a model with explicit schema versions, as read from storage.
    /// Versions other than the current ones are rejected.
    pub fn from_parts(
        boundary: CalibratedBinaryClassifier,
        semantic: GbdtMulticlassModel,
        threshold: f64,
        d_edge: usize,
        edge_schema_version: u32,
        instance_schema_version: u32,
        class_names: Vec<String>,
    ) -> Result<Self, PipelineError> {
        check_threshold(threshold)?;
        let width = edge_feature_len(d_edge);
        if edge_schema_version != EDGE_FEATURE_SCHEMA_VERSION || boundary.n_features() != width {
            return Err(PipelineError::SchemaMismatch {
                stage: "edge",
                model_version: edge_schema_version,
                model_width: boundary.n_features(),
                data_version: EDGE_FEATURE_SCHEMA_VERSION,
                data_width: width,
            });
        }
        if instance_schema_version != INSTANCE_FEATURE_SCHEMA_VERSION
            || semantic.n_features() != INSTANCE_FEATURE_LEN
        {
            return Err(PipelineError::SchemaMismatch {
                stage: "instance",
                model_version: instance_schema_version,
                model_width: semantic.n_features(),
                data_version: INSTANCE_FEATURE_SCHEMA_VERSION,
                data_width: INSTANCE_FEATURE_LEN,
            });
        }
        if class_names.len() != semantic.n_classes() {
            return Err(PipelineError::ClassNameCount {
                model: semantic.n_classes(),
                names: class_names.len(),
            });
        }
        Ok(Self {
            boundary,
            semantic,
            threshold,
            d_edge,
            edge_schema_version,
            instance_schema_version,
            class_names,
        })
    }

    pub fn boundary(&self) -> &CalibratedBinaryClassifier {
        &self.boundary
    }

    pub fn semantic(&self) -> &GbdtMulticlassModel {
        &self.semantic
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn d_edge(&self) -> usize {
        self.d_edge
    }

    pub fn edge_schema_version(&self) -> u32 {
        self.edge_schema_version
    }

    pub fn instance_schema_version(&self) -> u32 {
        self.instance_schema_version
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Same model with a different keep threshold.
    pub fn with_threshold(mut self, tau: f64) -> Result<Self, PipelineError> {
        check_threshold(tau)?;
        self.threshold = tau;
        Ok(self)
    }

    /// Checks that `g` has the edge attribute width the boundary model was
    /// trained on.
    pub fn check_part(&self, g: &PartGraph) -> Result<(), PipelineError> {
        check_edge_schema(&self.boundary, g)
    }
}

fn check_edge_schema(model: &CalibratedBinaryClassifier, g: &PartGraph) -> Result<(), PipelineError> {
    let width = edge_feature_len(g.schema().d_edge);
    if model.n_features() != width {
        return Err(PipelineError::SchemaMismatch {
            stage: "edge",
            model_version: EDGE_FEATURE_SCHEMA_VERSION,
            model_width: model.n_features(),
            data_version: EDGE_FEATURE_SCHEMA_VERSION,
            data_width: width,
        });
    }
    Ok(())
}

/// One predicted instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedInstance {
    /// Sorted ascending.
    pub faces: Vec<u32>,
    pub class: u32,
    /// Softmax probability of `class`.
    pub confidence: f64,
}

/// Panoptic output for one part: a partition of its faces, one class each,
/// ordered by smallest face index.
#[derive(Debug, Clone, PartialEq)]
pub struct PanopticPrediction {
    pub part_id: String,
    pub instances: Vec<PredictedInstance>,
    /// Calibrated same-instance probability per edge.
    pub edge_probs: Vec<f64>,
    /// Keep decision per edge (1 = same instance).
    pub edge_keep: Vec<u8>,
}

impl PanopticPrediction {
    /// Per-face instance index.
    pub fn face_labels(&self, n_faces: usize) -> Vec<u32> {
        let mut labels = alloc::vec![u32::MAX; n_faces];
        for (i, inst) in self.instances.iter().enumerate() {
            for &f in &inst.faces {
                labels[f as usize] = i as u32;
            }
        }
        labels
    }
}

fn edge_probabilities(
    model: &CalibratedBinaryClassifier,
    ctx: &PartContext<'_>,
) -> Result<Vec<f64>, PipelineError> {
    let mut row = Vec::with_capacity(model.n_features());
    (0..ctx.graph().n_edges())
        .map(|k| {
            row.clear();
            ctx.edge_row(k, &mut row);
            Ok(model.predict_proba(&row)?)
        })
        .collect()
}

fn threshold_probs(probs: &[f64], tau: f64) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p >= tau)).collect()
}

/// Calibrated probability per edge and the keep decision `p ≥ τ`.
pub fn predict_boundaries(
    model: &CalibratedBinaryClassifier,
    g: &PartGraph,
    tau: f64,
) -> Result<(Vec<u8>, Vec<f64>), PipelineError> {
    check_threshold(tau)?;
    check_edge_schema(model, g)?;
    let ctx = PartContext::new(g);
    let probs = edge_probabilities(model, &ctx)?;
    Ok((threshold_probs(&probs, tau), probs))
}

/// Connected components of the graph restricted to kept edges, each sorted
/// ascending and ordered by smallest face.
///
/// # Panics
/// If `keep` does not have one entry per edge.
pub fn components(g: &PartGraph, keep: &[u8]) -> Vec<Vec<u32>> {
    kept_sets(g, keep).groups()
}

fn kept_sets(g: &PartGraph, keep: &[u8]) -> DisjointSets {
    assert_eq!(keep.len(), g.n_edges(), "one keep flag per edge");
    let mut dsu = DisjointSets::new(g.n_faces());
    for (e, &k) in g.edges().iter().zip(keep) {
        if k != 0 {
            dsu.union(e.face_s as usize, e.face_t as usize);
        }
    }
    dsu
}

/// Classifies the components induced by `keep` and assembles the prediction.
fn classify_partition(
    semantic: &GbdtMulticlassModel,
    ctx: &PartContext<'_>,
    keep: Vec<u8>,
    edge_probs: Vec<f64>,
) -> Result<PanopticPrediction, PipelineError> {
    let g = ctx.graph();
    let mut dsu = kept_sets(g, &keep);
    let (labels, count) = dsu.labels();
    let mut groups: Vec<Vec<u32>> = alloc::vec![Vec::new(); count];
    for (f, &l) in labels.iter().enumerate() {
        groups[l as usize].push(f as u32);
    }
    let mut instances = Vec::with_capacity(count);
    for (c, faces) in groups.into_iter().enumerate() {
        let z = ctx.instance_features_with(&faces, |f| labels[f as usize] == c as u32);
        let (class, logits) = semantic.predict_class(z.as_slice())?;
        let confidence = softmax(&logits)[class];
        instances.push(PredictedInstance {
            faces,
            class: class as u32,
            confidence,
        });
    }
    Ok(PanopticPrediction {
        part_id: String::from(g.part_id()),
        instances,
        edge_probs,
        edge_keep: keep,
    })
}

/// Full inference on one part.
pub fn infer(model: &PipelineModel, g: &PartGraph) -> Result<PanopticPrediction, PipelineError> {
    model.check_part(g)?;
    let ctx = PartContext::new(g);
    let probs = edge_probabilities(&model.boundary, &ctx)?;
    let keep = threshold_probs(&probs, model.threshold);
    classify_partition(&model.semantic, &ctx, keep, probs)
}

/// Inference with externally supplied keep decisions in place of the
/// boundary model. Edge probabilities are reported as the decisions.
///
/// # Panics
/// If `keep` does not have one entry per edge.
pub fn infer_with_keep(
    semantic: &GbdtMulticlassModel,
    g: &PartGraph,
    keep: &[u8],
) -> Result<PanopticPrediction, PipelineError> {
    assert_eq!(keep.len(), g.n_edges(), "one keep flag per edge");
    let ctx = PartContext::new(g);
    let keep: Vec<u8> = keep.iter().map(|&k| u8::from(k != 0)).collect();
    let probs = keep.iter().map(|&k| k as f64).collect();
    classify_partition(semantic, &ctx, keep, probs)
}

/// Per-instance class from per-face logits: the argmax of the logit sums
/// over the face set, ties to the lowest class.
pub fn logit_sum_vote(per_face_logits: &FeatureMatrix, faces: &[u32]) -> Result<u32, PipelineError> {
    if faces.is_empty() {
        return Err(PipelineError::EmptyFaceSet);
    }
    let n = per_face_logits.n_rows();
    let mut sums = alloc::vec![0.0; per_face_logits.n_cols()];
    for &f in faces {
        if f as usize >= n {
            return Err(PipelineError::FaceOutOfRange { face: f, n_faces: n });
        }
        for (s, &l) in sums.iter_mut().zip(per_face_logits.row(f as usize)) {
            *s += l;
        }
    }
    let mut best = 0;
    for (k, &s) in sums.iter().enumerate() {
        if s > sums[best] {
            best = k;
        }
    }
    Ok(best as u32)
}

/// Enriched edge rows pooled over parts, with their labels and part groups.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDataset {
    pub x: FeatureMatrix,
    pub y: Vec<u8>,
    /// Index into `part_ids` per row.
    pub part_of_row: Vec<u32>,
    pub part_ids: Vec<String>,
    d_edge: usize,
}

impl EdgeDataset {
    pub fn new(d_edge: usize) -> Self {
        Self {
            x: FeatureMatrix::new(edge_feature_len(d_edge)),
            y: Vec::new(),
            part_of_row: Vec::new(),
            part_ids: Vec::new(),
            d_edge,
        }
    }

    /// Rows and labels of a single part.
    pub fn from_part(g: &PartGraph) -> Result<Self, PipelineError> {
        let mut ds = Self::new(g.schema().d_edge);
        let y = binary_edge_labels(g).map_err(|source| PipelineError::Label {
            part: String::from(g.part_id()),
            source,
        })?;
        ds.x = PartContext::new(g).enriched_edges();
        ds.part_of_row = alloc::vec![0; y.len()];
        ds.y = y;
        ds.part_ids.push(String::from(g.part_id()));
        Ok(ds)
    }

    pub fn d_edge(&self) -> usize {
        self.d_edge
    }

    /// Appends another dataset, re-indexing its parts.
    pub fn append(&mut self, other: EdgeDataset) -> Result<(), PipelineError> {
        if other.d_edge != self.d_edge {
            return Err(PipelineError::EdgeWidthMismatch {
                part: other.part_ids.first().cloned().unwrap_or_default(),
                expected: self.d_edge,
                found: other.d_edge,
            });
        }
        let offset = self.part_ids.len() as u32;
        self.x.append(&other.x)?;
        self.y.extend_from_slice(&other.y);
        self.part_of_row.extend(other.part_of_row.iter().map(|p| p + offset));
        self.part_ids.extend(other.part_ids);
        Ok(())
    }

    /// Fraction of rows labeled 0 (boundary).
    pub fn boundary_fraction(&self) -> f64 {
        if self.y.is_empty() {
            return 0.0;
        }
        self.y.iter().filter(|&&v| v == 0).count() as f64 / self.y.len() as f64
    }
}

/// Pools the enriched edge rows of every part.
pub fn edge_dataset(parts: &[PartGraph]) -> Result<EdgeDataset, PipelineError> {
    let first = parts.first().ok_or(PipelineError::EmptyDataset)?;
    let mut ds = EdgeDataset::new(first.schema().d_edge);
    for g in parts {
        ds.append(EdgeDataset::from_part(g)?)?;
    }
    Ok(ds)
}

/// Fits the calibrated boundary classifier on pooled edge rows, grouping
/// folds by part.
pub fn train_instance_stage_from_rows(
    ds: &EdgeDataset,
    cfg: &TrainConfig,
) -> Result<(CalibratedBinaryClassifier, OutOfFold), PipelineError> {
    let groups: Vec<&str> = ds
        .part_of_row
        .iter()
        .map(|&p| ds.part_ids[p as usize].as_str())
        .collect();
    Ok(fit_calibrated_with_oof(&ds.x, &ds.y, &groups, cfg)?)
}

/// Fits the calibrated boundary classifier on every edge of `parts`.
pub fn train_instance_stage(
    parts: &[PartGraph],
    cfg: &TrainConfig,
) -> Result<(CalibratedBinaryClassifier, OutOfFold), PipelineError> {
    train_instance_stage_from_rows(&edge_dataset(parts)?, cfg)
}

/// Instance descriptors with their classes, one row per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticDataset {
    pub x: FeatureMatrix,
    pub y: Vec<u32>,
    /// Rows contributed by each part, in part order.
    pub rows_per_part: Vec<usize>,
    /// Ground-truth instances split into several rows because their faces
    /// are disconnected, as (part id, instance id).
    pub split_instances: Vec<(String, u32)>,
}

impl SemanticDataset {
    pub fn new() -> Self {
        Self {
            x: FeatureMatrix::new(INSTANCE_FEATURE_LEN),
            y: Vec::new(),
            rows_per_part: Vec::new(),
            split_instances: Vec::new(),
        }
    }

    pub fn append(&mut self, other: SemanticDataset) -> Result<(), PipelineError> {
        self.x.append(&other.x)?;
        self.y.extend_from_slice(&other.y);
        self.rows_per_part.extend(other.rows_per_part);
        self.split_instances.extend(other.split_instances);
        Ok(())
    }

    /// One row per connected ground-truth instance of `g`.
    pub fn from_truth(g: &PartGraph) -> Result<Self, PipelineError> {
        let report = truth_instances(g).map_err(|source| PipelineError::Label {
            part: String::from(g.part_id()),
            source,
        })?;
        let ctx = PartContext::new(g);
        let mut ds = Self::new();
        for inst in &report.instances {
            ds.x.push_row(ctx.instance_features(&inst.faces).as_slice())?;
            ds.y.push(inst.class);
        }
        ds.rows_per_part.push(report.instances.len());
        ds.split_instances = report
            .disconnected
            .iter()
            .map(|&id| (String::from(g.part_id()), id))
            .collect();
        Ok(ds)
    }

    /// One row per component induced by `keep`, labeled with the majority
    /// ground-truth class of its faces (ties to the lowest class).
    pub fn from_predicted(g: &PartGraph, keep: &[u8]) -> Result<Self, PipelineError> {
        let n_classes = g.schema().n_classes;
        let ctx = PartContext::new(g);
        let mut ds = Self::new();
        let comps = components(g, keep);
        for faces in &comps {
            let mut votes = alloc::vec![0usize; n_classes];
            for &f in faces {
                let truth = g.faces()[f as usize].truth.ok_or_else(|| PipelineError::Label {
                    part: String::from(g.part_id()),
                    source: LabelError::MissingTruth { face: f as usize },
                })?;
                votes[truth.class as usize] += 1;
            }
            let mut class = 0;
            for (k, &v) in votes.iter().enumerate() {
                if v > votes[class] {
                    class = k;
                }
            }
            ds.x.push_row(ctx.instance_features(faces).as_slice())?;
            ds.y.push(class as u32);
        }
        ds.rows_per_part.push(comps.len());
        Ok(ds)
    }
}

impl Default for SemanticDataset {
    fn default() -> Self {
        Self::new()
    }
}

/// Fits the semantic classifier on instance rows.
pub fn train_semantic_stage_from_rows(
    ds: &SemanticDataset,
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<GbdtMulticlassModel, PipelineError> {
    if let Some(&class) = ds.y.iter().find(|&&c| c as usize >= n_classes) {
        return Err(PipelineError::ClassOutOfRange { class, n_classes });
    }
    Ok(fit_multiclass(&ds.x, &ds.y, n_classes, cfg)?)
}

/// Fits the semantic classifier on the ground-truth instances of `parts`.
pub fn train_semantic_stage(
    parts: &[PartGraph],
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<(GbdtMulticlassModel, SemanticDataset), PipelineError> {
    let mut ds = SemanticDataset::new();
    for g in parts {
        ds.append(SemanticDataset::from_truth(g)?)?;
    }
    let model = train_semantic_stage_from_rows(&ds, n_classes, cfg)?;
    Ok((model, ds))
}

/// Hyperparameters for both stages.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub boundary: TrainConfig,
    pub semantic: TrainConfig,
    pub threshold: f64,
    /// Train the semantic stage on components predicted by the fitted
    /// boundary model instead of on ground-truth instances.
    pub train_on_predicted: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            boundary: TrainConfig::binary(),
            semantic: TrainConfig::multiclass(),
            threshold: DEFAULT_THRESHOLD,
            train_on_predicted: false,
        }
    }
}

/// Diagnostics gathered while training both stages.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSummary {
    pub n_parts: usize,
    pub n_edges: usize,
    pub n_boundary_edges: usize,
    pub n_instances: usize,
    pub oof: OutOfFold,
    /// Out-of-fold probabilities passed through the fitted calibrator.
    pub oof_calibrated: Vec<f64>,
    pub split_instances: Vec<(String, u32)>,
}

/// Trains both stages sequentially on `parts`.
pub fn train_pipeline(
    parts: &[PartGraph],
    class_names: Vec<String>,
    cfg: &PipelineConfig,
) -> Result<(PipelineModel, TrainingSummary), PipelineError> {
    check_threshold(cfg.threshold)?;
    let edges = edge_dataset(parts)?;
    let (boundary, oof) = train_instance_stage_from_rows(&edges, &cfg.boundary)?;
    let mut semantic_rows = SemanticDataset::new();
    for g in parts {
        let part_rows = if cfg.train_on_predicted {
            let (keep, _) = predict_boundaries(&boundary, g, cfg.threshold)?;
            SemanticDataset::from_predicted(g, &keep)?
        } else {
            SemanticDataset::from_truth(g)?
        };
        semantic_rows.append(part_rows)?;
    }
    let semantic = train_semantic_stage_from_rows(&semantic_rows, class_names.len(), &cfg.semantic)?;
    let summary = training_summary(&boundary, parts.len(), &edges, oof, &semantic_rows);
    let model = PipelineModel::new(boundary, semantic, cfg.threshold, edges.d_edge(), class_names)?;
    Ok((model, summary))
}

/// Builds the training diagnostics from the fitted boundary model and the
/// pooled rows of both stages.
pub fn training_summary(
    boundary: &CalibratedBinaryClassifier,
    n_parts: usize,
    edges: &EdgeDataset,
    oof: OutOfFold,
    semantic_rows: &SemanticDataset,
) -> TrainingSummary {
    let oof_calibrated = oof
        .probabilities
        .iter()
        .map(|&p| boundary.calibrator().apply(p))
        .collect();
    TrainingSummary {
        n_parts,
        n_edges: edges.y.len(),
        n_boundary_edges: edges.y.iter().filter(|&&v| v == 0).count(),
        n_instances: semantic_rows.y.len(),
        oof,
        oof_calibrated,
        split_instances: semantic_rows.split_instances.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, EdgeRecord, EdgeType, FaceRecord, GroundTruth, Schema, SurfaceType};
    use crate::learner::{fit_isotonic, GbdtBinaryModel, IsotonicModel};
    use alloc::format;
    use alloc::vec;

    fn face(id: u32, class: u32) -> FaceRecord {
        FaceRecord {
            attrs: vec![],
            surface_type: SurfaceType::Plane,
            area: 1.0 + id as f64,
            truth: Some(GroundTruth { instance_id: id, class }),
            grid: None,
        }
    }

    fn edge(s: u32, t: u32, dihedral: f64) -> EdgeRecord {
        EdgeRecord {
            face_s: s,
            face_t: t,
            attrs: vec![dihedral],
            edge_type: EdgeType::Line,
            length: 1.0,
            samples: None,
        }
    }

    /// A chain of faces; consecutive faces with equal instance ids are joined
    /// by an edge with attribute 0, others by attribute 1.
    fn chain(name: &str, ids: &[(u32, u32)]) -> PartGraph {
        let faces = ids.iter().map(|&(i, c)| face(i, c)).collect();
        let edges = ids
            .windows(2)
            .enumerate()
            .map(|(k, w)| edge(k as u32, k as u32 + 1, if w[0].0 == w[1].0 { 0.0 } else { 1.0 }))
            .collect();
        build_graph(name, Schema::new(0, 1, 3), faces, edges).unwrap()
    }

    fn toy_parts() -> Vec<PartGraph> {
        (0..6)
            .map(|p| chain(&format!("p{p}"), &[(0, 0), (0, 0), (1, 1), (1, 1), (2, 2), (2, 2)]))
            .collect()
    }

    fn small(n_trees: usize) -> TrainConfig {
        TrainConfig {
            n_trees,
            max_depth: 2,
            min_child_hessian: 0.0,
            ..TrainConfig::binary()
        }
    }

    #[test]
    fn components_examples() {
        let g = chain("c", &[(0, 0), (0, 0), (1, 0)]);
        assert_eq!(components(&g, &[1, 0]), vec![vec![0, 1], vec![2]]);
        assert_eq!(components(&g, &[0, 0]), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(components(&g, &[1, 1]), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn threshold_must_be_open_interval() {
        let parts = toy_parts();
        let (m, _) = train_instance_stage(&parts, &small(5)).unwrap();
        for tau in [0.0, 1.0, 1.0 + f64::EPSILON, f64::NAN] {
            assert!(matches!(
                predict_boundaries(&m, &parts[0], tau),
                Err(PipelineError::InvalidThreshold(_))
            ));
        }
    }

    #[test]
    fn probability_equal_to_threshold_is_kept() {
        assert_eq!(threshold_probs(&[0.9, 0.2, 0.5], 0.5), vec![1, 0, 1]);
    }

    #[test]
    fn single_instance_parts_are_degenerate() {
        let parts: Vec<PartGraph> = (0..3).map(|p| chain(&format!("s{p}"), &[(0, 0), (0, 0)])).collect();
        assert_eq!(
            train_instance_stage(&parts, &small(5)).unwrap_err(),
            PipelineError::Learn(LearnError::DegenerateLabels)
        );
    }

    #[test]
    fn oof_covers_every_edge() {
        let parts = toy_parts();
        let (_, oof) = train_instance_stage(&parts, &small(5)).unwrap();
        assert_eq!(oof.probabilities.len(), parts.iter().map(|g| g.n_edges()).sum::<usize>());
        assert!(oof.probabilities.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn part_order_does_not_change_model() {
        let mut parts = toy_parts();
        parts[1] = chain("p1", &[(0, 0), (1, 1), (1, 1), (1, 1)]);
        let (a, _) = train_instance_stage(&parts, &small(8)).unwrap();
        parts.reverse();
        let (b, _) = train_instance_stage(&parts, &small(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn semantic_rows_one_per_instance() {
        let parts = toy_parts();
        let (_, ds) = train_semantic_stage(&parts, 3, &small(3)).unwrap();
        assert_eq!(ds.rows_per_part, vec![3; 6]);
        assert_eq!(ds.y.len(), 18);
        assert!(ds.split_instances.is_empty());
    }

    #[test]
    fn disconnected_instance_is_flagged() {
        let g = chain("d", &[(0, 0), (1, 1), (0, 0)]);
        let ds = SemanticDataset::from_truth(&g).unwrap();
        assert_eq!(ds.y.len(), 3);
        assert_eq!(ds.split_instances, vec![(String::from("d"), 0)]);
    }

    #[test]
    fn single_class_semantic_model_predicts_it() {
        let parts: Vec<PartGraph> = (0..2).map(|p| chain(&format!("u{p}"), &[(0, 1), (1, 1)])).collect();
        let (m, ds) = train_semantic_stage(&parts, 3, &small(3)).unwrap();
        for r in ds.x.rows() {
            assert_eq!(m.predict_class(r).unwrap().0, 1);
        }
    }

    #[test]
    fn end_to_end_recovers_toy_partition() {
        let parts = toy_parts();
        let cfg = PipelineConfig {
            boundary: small(10),
            semantic: small(10),
            ..PipelineConfig::default()
        };
        let names = vec![String::from("a"), String::from("b"), String::from("c")];
        let (model, summary) = train_pipeline(&parts, names, &cfg).unwrap();
        assert_eq!(summary.n_edges, 30);
        assert_eq!(summary.n_boundary_edges, 12);
        let pred = infer(&model, &parts[0]).unwrap();
        let faces: Vec<Vec<u32>> = pred.instances.iter().map(|i| i.faces.clone()).collect();
        assert_eq!(faces, vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
        let classes: Vec<u32> = pred.instances.iter().map(|i| i.class).collect();
        assert_eq!(classes, vec![0, 1, 2]);
    }

    fn constant_boundary(d_edge: usize, p_margin: f64) -> CalibratedBinaryClassifier {
        let base = GbdtBinaryModel::from_parts(vec![], p_margin, TrainConfig::binary(), edge_feature_len(d_edge))
            .unwrap();
        CalibratedBinaryClassifier::new(base, IsotonicModel::constant(0.5))
    }

    #[test]
    fn empty_and_single_face_parts() {
        let parts = toy_parts();
        let (semantic, _) = train_semantic_stage(&parts, 3, &small(3)).unwrap();
        let names = vec![String::from("a"), String::from("b"), String::from("c")];
        let model = PipelineModel::new(constant_boundary(1, 0.0), semantic, 0.5, 1, names).unwrap();
        let empty = build_graph("e", Schema::new(0, 1, 3), vec![], vec![]).unwrap();
        assert!(infer(&model, &empty).unwrap().instances.is_empty());
        let single = build_graph("s", Schema::new(0, 1, 3), vec![face(0, 0)], vec![]).unwrap();
        let pred = infer(&model, &single).unwrap();
        assert_eq!(pred.instances.len(), 1);
        assert_eq!(pred.instances[0].faces, vec![0]);
    }

    #[test]
    fn schema_mismatch_is_reported() {
        let parts = toy_parts();
        let (semantic, _) = train_semantic_stage(&parts, 3, &small(3)).unwrap();
        let names = vec![String::from("a"), String::from("b"), String::from("c")];
        let model = PipelineModel::new(constant_boundary(2, 0.0), semantic, 0.5, 2, names).unwrap();
        assert!(matches!(
            infer(&model, &parts[0]),
            Err(PipelineError::SchemaMismatch { stage: "edge", .. })
        ));
    }

    #[test]
    fn forced_drops_split_two_features() {
        let g = chain("two", &[(0, 0), (0, 0), (1, 1), (1, 1)]);
        let (semantic, _) = train_semantic_stage(&toy_parts(), 3, &small(3)).unwrap();
        let keep: Vec<u8> = binary_edge_labels(&g).unwrap();
        let pred = infer_with_keep(&semantic, &g, &keep).unwrap();
        let faces: Vec<Vec<u32>> = pred.instances.iter().map(|i| i.faces.clone()).collect();
        assert_eq!(faces, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn logit_vote_examples() {
        let m = FeatureMatrix::from_rows(2, &[[2.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(logit_sum_vote(&m, &[0, 1]).unwrap(), 0);
        assert_eq!(logit_sum_vote(&m, &[1]).unwrap(), 1);
        let tie = FeatureMatrix::from_rows(3, &[[1.0, 1.0, 0.0]]).unwrap();
        assert_eq!(logit_sum_vote(&tie, &[0]).unwrap(), 0);
        assert_eq!(logit_sum_vote(&m, &[]), Err(PipelineError::EmptyFaceSet));
        assert!(matches!(logit_sum_vote(&m, &[2]), Err(PipelineError::FaceOutOfRange { .. })));
    }

    #[test]
    fn calibrated_summary_probabilities_are_in_range() {
        let parts = toy_parts();
        let ds = edge_dataset(&parts).unwrap();
        assert!((ds.boundary_fraction() - 0.4).abs() < 1e-12);
        let (m, oof) = train_instance_stage_from_rows(&ds, &small(5)).unwrap();
        let labels: Vec<f64> = oof.labels.iter().map(|&v| v as f64).collect();
        let iso = fit_isotonic(&oof.probabilities, &labels).unwrap();
        assert_eq!(&iso, m.calibrator());
    }
}
