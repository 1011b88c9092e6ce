//! Machine-readable reports and their aligned text tables.

use std::fmt::Write as _;

use pafr_core::metrics::{CalibrationReport, EdgeMetrics, PqCounts, PqReport};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub features_s: f64,
    pub boundary_s: f64,
    pub semantic_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCount {
    pub class: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub trees_binary: usize,
    pub trees_semantic: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub folds: usize,
    pub seed: u64,
    pub threshold: f64,
    pub train_on_predicted: bool,
}

/// Summary of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub n_parts: usize,
    pub n_edges: usize,
    pub n_boundary_edges: usize,
    /// Fraction of edges labeled boundary (y = 0).
    pub boundary_fraction: f64,
    pub n_instances: usize,
    pub instances_per_class: Vec<ClassCount>,
    /// Ground-truth instances that were disconnected and split per component.
    pub split_instances: usize,
    pub oof_ece_raw: f64,
    pub oof_ece_calibrated: f64,
    pub settings: TrainSettings,
    pub timings: StageTimings,
}

impl TrainReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let rows: Vec<(&str, String)> = vec![
            ("parts", self.n_parts.to_string()),
            ("edges", self.n_edges.to_string()),
            (
                "boundary edges",
                format!("{} ({:.1}%)", self.n_boundary_edges, 100.0 * self.boundary_fraction),
            ),
            ("instances", self.n_instances.to_string()),
            ("split instances", self.split_instances.to_string()),
            ("OOF ECE raw", format!("{:.4}", self.oof_ece_raw)),
            ("OOF ECE calibrated", format!("{:.4}", self.oof_ece_calibrated)),
            ("features (s)", format!("{:.2}", self.timings.features_s)),
            ("boundary stage (s)", format!("{:.2}", self.timings.boundary_s)),
            ("semantic stage (s)", format!("{:.2}", self.timings.semantic_s)),
            ("total (s)", format!("{:.2}", self.timings.total_s)),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<20} {v:>16}");
        }
        for c in &self.instances_per_class {
            let _ = writeln!(s, "  {:<18} {:>16}", c.class, c.count);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl From<&PqCounts> for Counts {
    fn from(c: &PqCounts) -> Self {
        Self {
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: String,
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    #[serde(flatten)]
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartRow {
    pub part_id: String,
    pub pq: f64,
    #[serde(flatten)]
    pub counts: Counts,
    pub rl_recovered: usize,
    pub rl_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl From<&EdgeMetrics> for EdgeSummary {
    fn from(m: &EdgeMetrics) -> Self {
        Self {
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            tp: m.counts.tp,
            fp: m.counts.fp,
            tn: m.counts.tn,
            fn_: m.counts.fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean_prob: f64,
    pub mean_label: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub ece: f64,
    pub bins: Vec<BinRow>,
}

impl From<&CalibrationReport> for Calibration {
    fn from(r: &CalibrationReport) -> Self {
        Self {
            ece: r.ece,
            bins: r
                .bins
                .iter()
                .map(|b| BinRow {
                    lower: b.lower,
                    upper: b.upper,
                    count: b.count,
                    mean_prob: b.mean_prob,
                    mean_label: b.mean_label,
                })
                .collect(),
        }
    }
}

/// Dataset-level evaluation. Instance metrics honour `excluded_classes`;
/// `pq_excl_stock` always drops the stock class; edge metrics and ECE are
/// over every edge and are absent when only instance predictions were
/// available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub n_parts: usize,
    pub excluded_classes: Vec<String>,
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    #[serde(flatten)]
    pub counts: Counts,
    pub pq_excl_stock: f64,
    pub rl_acc: f64,
    pub rl_recovered: usize,
    pub rl_total: usize,
    pub per_class: Vec<ClassRow>,
    pub edge: Option<EdgeSummary>,
    pub calibration: Option<Calibration>,
    pub per_part: Vec<PartRow>,
}

impl EvalReport {
    pub fn ece(&self) -> Option<f64> {
        self.calibration.as_ref().map(|c| c.ece)
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let _ = writeln!(s, "{:<22} {:>10}", "metric", "value");
        let _ = writeln!(s, "{:<22} {:>10}", "parts", self.n_parts);
        let _ = writeln!(s, "{:<22} {:>10.4}", "PQ", self.pq);
        let _ = writeln!(s, "{:<22} {:>10.4}", "SQ", self.sq);
        let _ = writeln!(s, "{:<22} {:>10.4}", "RQ", self.rq);
        let _ = writeln!(s, "{:<22} {:>10.4}", "PQ excl. stock", self.pq_excl_stock);
        let _ = writeln!(s, "{:<22} {:>10.4}", "RL accuracy", self.rl_acc);
        let _ = writeln!(s, "{:<22} {:>10}", "edge accuracy", opt(self.edge.as_ref().map(|e| e.accuracy)));
        let _ = writeln!(s, "{:<22} {:>10}", "edge F1", opt(self.edge.as_ref().map(|e| e.f1)));
        let _ = writeln!(s, "{:<22} {:>10}", "ECE", opt(self.ece()));
        if !self.excluded_classes.is_empty() {
            let _ = writeln!(s, "{:<22} {:>10}", "excluded", self.excluded_classes.join(","));
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<16} {:>8} {:>8} {:>8} {:>7} {:>7} {:>7}",
            "class", "PQ", "SQ", "RQ", "TP", "FP", "FN"
        );
        for r in &self.per_class {
            let _ = writeln!(
                s,
                "{:<16} {:>8.4} {:>8.4} {:>8.4} {:>7} {:>7} {:>7}",
                r.class, r.pq, r.sq, r.rq, r.counts.tp, r.counts.fp, r.counts.fn_
            );
        }
        s
    }
}

pub fn class_rows(report: &PqReport, names: &[String]) -> Vec<ClassRow> {
    report
        .per_class
        .iter()
        .map(|c| ClassRow {
            class: names
                .get(c.class as usize)
                .cloned()
                .unwrap_or_else(|| c.class.to_string()),
            pq: c.pq,
            sq: c.sq,
            rq: c.rq,
            counts: Counts::from(&c.counts),
        })
        .collect()
}
