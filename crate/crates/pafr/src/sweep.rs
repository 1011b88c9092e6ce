//! Sample-efficiency sweeps: train on nested subsets of the training parts
//! and score each model on a fixed test set.

use std::io::Write;

use pafr_core::pipeline::PipelineConfig;
use pafr_core::PartGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::run::{self, RunError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("train size {size} exceeds the {available} available training parts")]
    SizeTooLarge { size: usize, available: usize },
    #[error("train size must be at least 1")]
    ZeroSize,
    #[error("no sizes or no seeds given")]
    EmptyGrid,
    #[error("the test set is empty")]
    EmptyTestSet,
    #[error("size {size}, seed {seed}: {source}")]
    Cell {
        size: usize,
        seed: u64,
        source: RunError,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SweepError {
    /// Problems with the requested grid rather than with the run itself.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            SweepError::SizeTooLarge { .. } | SweepError::ZeroSize | SweepError::EmptyGrid | SweepError::EmptyTestSet
        )
    }
}

/// One CSV row. Column order is part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub train_size: usize,
    pub seed: u64,
    pub pq: f64,
    pub pq_excl_stock: f64,
    pub rl_acc: f64,
    pub edge_acc: f64,
    pub edge_f1: f64,
    pub ece: f64,
}

pub const CSV_COLUMNS: [&str; 8] = [
    "train_size",
    "seed",
    "pq",
    "pq_excl_stock",
    "rl_acc",
    "edge_acc",
    "edge_f1",
    "ece",
];

fn mix(seed: u64, index: u64) -> u64 {
    let mut h = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Permutation of `0..n` keyed by `seed`. Taking its first `k` entries gives
/// subsets that are nested in `k`.
pub fn subset_order(seed: u64, n: usize) -> Vec<usize> {
    let mut keyed: Vec<(u64, usize)> = (0..n).map(|i| (mix(seed, i as u64), i)).collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

pub struct SweepPlan<'a> {
    pub train: &'a [PartGraph],
    pub test: &'a [PartGraph],
    pub class_names: &'a [String],
    pub sizes: &'a [usize],
    pub seeds: &'a [u64],
    /// Keys the subset permutation; shared by every cell.
    pub subset_seed: u64,
    pub config: PipelineConfig,
    pub exclude: &'a [u32],
}

impl SweepPlan<'_> {
    pub fn validate(&self) -> Result<(), SweepError> {
        if self.sizes.is_empty() || self.seeds.is_empty() {
            return Err(SweepError::EmptyGrid);
        }
        if self.test.is_empty() {
            return Err(SweepError::EmptyTestSet);
        }
        for &size in self.sizes {
            if size == 0 {
                return Err(SweepError::ZeroSize);
            }
            if size > self.train.len() {
                return Err(SweepError::SizeTooLarge {
                    size,
                    available: self.train.len(),
                });
            }
        }
        Ok(())
    }

    /// Runs every (size, seed) cell in order, handing each row to `on_row`
    /// as soon as it is ready.
    pub fn run(&self, mut on_row: impl FnMut(&SweepRow)) -> Result<Vec<SweepRow>, SweepError> {
        self.validate()?;
        let order = subset_order(self.subset_seed, self.train.len());
        let mut rows = Vec::with_capacity(self.sizes.len() * self.seeds.len());
        for &size in self.sizes {
            let mut idx = order[..size].to_vec();
            idx.sort_unstable();
            let subset: Vec<PartGraph> = idx.iter().map(|&i| self.train[i].clone()).collect();
            for &seed in self.seeds {
                let row = self
                    .cell(&subset, seed)
                    .map_err(|source| SweepError::Cell { size, seed, source })?;
                log::info!("size {size} seed {seed}: pq_excl_stock {:.4}", row.pq_excl_stock);
                on_row(&row);
                rows.push(row);
            }
        }
        Ok(rows)
    }

    fn cell(&self, subset: &[PartGraph], seed: u64) -> Result<SweepRow, RunError> {
        let mut cfg = self.config.clone();
        cfg.boundary.seed = seed;
        cfg.semantic.seed = seed;
        let trained = run::train(subset, self.class_names, &cfg)?;
        let preds = run::infer_parts(&trained.model, self.test)?;
        let r = run::evaluate(self.test, &preds, self.class_names, self.exclude)?;
        let edge = r.edge.as_ref();
        Ok(SweepRow {
            train_size: subset.len(),
            seed,
            pq: r.pq,
            pq_excl_stock: r.pq_excl_stock,
            rl_acc: r.rl_acc,
            edge_acc: edge.map_or(f64::NAN, |e| e.accuracy),
            edge_f1: edge.map_or(f64::NAN, |e| e.f1),
            ece: r.ece().unwrap_or(f64::NAN),
        })
    }
}

/// CSV writer that emits the header even when no rows follow.
pub struct CsvSink<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(w: W) -> Result<Self, csv::Error> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        inner.write_record(CSV_COLUMNS)?;
        Ok(Self { inner })
    }

    pub fn push(&mut self, row: &SweepRow) -> Result<(), csv::Error> {
        self.inner.serialize(row)?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W, csv::Error> {
        self.inner.into_inner().map_err(|e| csv::Error::from(e.into_error()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pafr_core::synthgen::{generate_parts, GenConfig};

    #[test]
    fn subsets_are_nested() {
        let order = subset_order(9, 100);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(order, subset_order(10, 100));
        assert_eq!(order, subset_order(9, 100));
    }

    #[test]
    fn oversized_grid_is_a_config_error() {
        let parts = generate_parts(&GenConfig {
            n_parts: 4,
            ..GenConfig::default()
        })
        .unwrap();
        let plan = SweepPlan {
            train: &parts[..3],
            test: &parts[3..],
            class_names: &[],
            sizes: &[2, 5],
            seeds: &[0],
            subset_seed: 0,
            config: PipelineConfig::default(),
            exclude: &[],
        };
        let err = plan.run(|_| {}).unwrap_err();
        assert!(err.is_config(), "{err}");
    }

    #[test]
    fn grid_produces_one_row_per_cell() {
        let cfg = GenConfig {
            n_parts: 30,
            ..GenConfig::default()
        };
        let parts = generate_parts(&cfg).unwrap();
        let mut pc = PipelineConfig::default();
        pc.boundary.n_trees = 5;
        pc.semantic.n_trees = 5;
        let plan = SweepPlan {
            train: &parts[..24],
            test: &parts[24..],
            class_names: &cfg.classes,
            sizes: &[6, 12, 24],
            seeds: &[0, 1, 2],
            subset_seed: 4,
            config: pc,
            exclude: &[],
        };
        let mut sink = CsvSink::new(Vec::new()).unwrap();
        let rows = plan.run(|r| sink.push(r).unwrap()).unwrap();
        assert_eq!(rows.len(), 9);
        let text = String::from_utf8(sink.into_inner().unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(lines.count(), 9);
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.pq)));
    }
}
